"""Transmission-matrix inference by pseudolikelihood maximisation and decimation."""
from .datagen import (
    DatasetConfig,
    gen_transmission,
    make_dataset,
    make_validation,
    sampling_ratio,
    shift_dataset,
    swap_io,
)
from .decimation import DecimationConfig, DecimationTrajectory, infer_inverse, run_decimation
from .metrics import extract_noise, extract_T, pseudo_unity, q_error, stochasticity, validate
from .model import CouplingMatrix, SampleSet, TransmissionSpec, assemble_M, split_blocks
from .optimizer import OptimizerConfig, init_M0, maximize
from .pseudolikelihood import FVariant, eval_total_L, grad_L, l_min_theory

__all__ = [
    "CouplingMatrix",
    "DatasetConfig",
    "DecimationConfig",
    "DecimationTrajectory",
    "FVariant",
    "OptimizerConfig",
    "SampleSet",
    "TransmissionSpec",
    "assemble_M",
    "eval_total_L",
    "extract_T",
    "extract_noise",
    "gen_transmission",
    "grad_L",
    "infer_inverse",
    "init_M0",
    "l_min_theory",
    "make_dataset",
    "make_validation",
    "maximize",
    "pseudo_unity",
    "q_error",
    "run_decimation",
    "sampling_ratio",
    "shift_dataset",
    "split_blocks",
    "stochasticity",
    "swap_io",
    "validate",
]
