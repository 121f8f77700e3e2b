"""Synthetic channels and intensity datasets.

Inputs are truncated Gaussian pixel patterns in [0, 1]; outputs are the
images under a sparse row-stochastic matrix plus Gaussian noise, optionally
clipped to the camera range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import SampleSet, TransmissionSpec, swap_halves

_MAX_PLACEMENT_TRIES = 1000


class InfeasibleSparsityError(ValueError):
    """Too few active entries to give every row of T a non-zero."""


class AlreadyShiftedError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetConfig:
    w: int = 4
    s: float = 0.2
    m_samples: int = 10000
    mu_in: float = 0.5
    sigma_in: float = 0.1
    sigma_noise: float = 0.0
    clip: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.w < 1:
            raise ValueError("w must be a positive integer")
        if not 0 < self.s <= 1:
            raise ValueError("s must lie in (0, 1]")
        if self.m_samples < 1:
            raise ValueError("m_samples must be positive")
        if not 0 < self.mu_in < 1:
            raise ValueError("mu_in must lie in (0, 1)")
        if self.sigma_in <= 0:
            raise ValueError("sigma_in must be positive")
        if self.sigma_noise < 0:
            raise ValueError("sigma_noise must be non-negative")


def n_active_entries(w: int, s: float) -> int:
    # round half up; Python's round() is banker's rounding
    return int(math.floor(s * w**4 + 0.5))


def gen_transmission(w: int, s: float, seed: int) -> TransmissionSpec:
    """Random sparse row-stochastic ``w^2 x w^2`` matrix.

    ``round(s * w^4)`` unit entries are placed uniformly without replacement
    (placements leaving a row empty are redrawn) and each row is divided by
    its sum.
    """
    h = w * w
    k = n_active_entries(w, s)
    if k < h:
        raise InfeasibleSparsityError(
            f"s={s} gives {k} active entries for w={w}; at least {h} are needed "
            "so that every row is non-empty"
        )
    rng = np.random.default_rng(seed)
    for _ in range(_MAX_PLACEMENT_TRIES):
        flat = rng.choice(h * h, size=k, replace=False)
        t_bin = np.zeros(h * h)
        t_bin[flat] = 1.0
        t_bin = t_bin.reshape(h, h)
        if np.all(t_bin.sum(axis=1) > 0):
            break
    else:
        # near the feasibility limit: one entry per row, the rest uniform
        t_bin = np.zeros((h, h))
        t_bin[np.arange(h), rng.integers(0, h, size=h)] = 1.0
        free = np.flatnonzero(t_bin.ravel() == 0)
        t_bin.ravel()[rng.choice(free, size=k - h, replace=False)] = 1.0
    t = t_bin / t_bin.sum(axis=1, keepdims=True)
    return TransmissionSpec(w=w, s=s, T=t, sigma=0.0, seed=seed)


def _stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, tag]))


def truncated_normal(rng: np.random.Generator, mu: float, sigma: float, size,
                     lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Normal(mu, sigma^2) restricted to [lo, hi] by rejection."""
    out = rng.normal(mu, sigma, size=size)
    bad = (out < lo) | (out > hi)
    while bad.any():
        out[bad] = rng.normal(mu, sigma, size=int(bad.sum()))
        bad = (out < lo) | (out > hi)
    return out


def sample_inputs(cfg: DatasetConfig, seed: int | None = None) -> np.ndarray:
    """``(M, w^2)`` array of input patterns."""
    seed = cfg.seed if seed is None else seed
    rng = _stream(seed, 1)
    return truncated_normal(rng, cfg.mu_in, cfg.sigma_in, (cfg.m_samples, cfg.w * cfg.w))


def propagate(t: TransmissionSpec, inputs, sigma_noise: float, clip: bool,
              seed: int) -> SampleSet:
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != t.T.shape[1]:
        raise ValueError("input patterns do not match the channel size")
    out = inputs @ t.T.T
    if sigma_noise > 0:
        out = out + _stream(seed, 2).normal(0.0, sigma_noise, size=out.shape)
    if clip:
        out = np.clip(out, 0.0, 1.0)
    return SampleSet.from_array(np.hstack([inputs, out]))


def make_dataset(cfg: DatasetConfig) -> tuple[TransmissionSpec, SampleSet]:
    """Channel plus ``cfg.m_samples`` raw (unshifted) measurements."""
    t = replace(gen_transmission(cfg.w, cfg.s, cfg.seed), sigma=cfg.sigma_noise)
    ds = propagate(t, sample_inputs(cfg), cfg.sigma_noise, cfg.clip, cfg.seed)
    return t, ds


def make_validation(t: TransmissionSpec, cfg: DatasetConfig, seed: int,
                    m_samples: int = 1000) -> SampleSet:
    """Fresh patterns through an existing channel."""
    vcfg = replace(cfg, m_samples=m_samples, seed=seed)
    return propagate(t, sample_inputs(vcfg), cfg.sigma_noise, cfg.clip, seed)


def shift_dataset(ds: SampleSet, mode="empirical") -> SampleSet:
    """Subtract per-channel means.

    ``mode="empirical"`` uses the sample mean of each channel; a number or a
    length-N vector is subtracted as given.
    """
    if ds.shifted:
        raise AlreadyShiftedError("dataset is already shifted")
    if isinstance(mode, str):
        if mode != "empirical":
            raise ValueError(f"unknown shift mode {mode!r}")
        mu = ds.values.mean(axis=0)
    else:
        mu = np.broadcast_to(np.asarray(mode, dtype=float), (ds.n,)).copy()
    return SampleSet(ds.values - mu, mu, shifted=True)


def unshift_dataset(ds: SampleSet) -> SampleSet:
    if not ds.shifted:
        raise ValueError("dataset is not shifted")
    values = ds.values + ds.channel_means
    return SampleSet(values, ds.channel_means, shifted=False)


def swap_io(ds: SampleSet) -> SampleSet:
    """Exchange the roles of inputs and outputs in every sample."""
    return SampleSet(swap_halves(ds.values), swap_halves(ds.channel_means), ds.shifted)


def n_params_sparse(w: int, s: float) -> float:
    return (s + 0.5) * w**4 + 1.5 * w**2


def n_params_complete(w: int) -> float:
    return 1.5 * (w**4 + w**2)


def sampling_ratio(w: int, m: int, s: float | None = None) -> float:
    """Measurements per free parameter; ``s=None`` means a dense matrix."""
    if m < 1:
        raise ValueError("m must be at least 1")
    k = n_params_complete(w) if s is None else n_params_sparse(w, s)
    return m / k
