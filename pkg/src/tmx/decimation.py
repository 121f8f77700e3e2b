"""Iterative decimation of the transmission block with information-criterion
model selection.

Each step masks the smallest active transmission couplings, recomputes the
induced input/input mask and re-maximises from the previous optimum.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .datagen import swap_io
from .model import CouplingMatrix, induced_mask, split_blocks
from .optimizer import OptimizerConfig, OptimResult, evaluate, init_M0, maximize
from .pseudolikelihood import INF_INF, FVariant, second_moments

log = logging.getLogger(__name__)

CRITERIA = ("TIC", "AIC", "AICc", "BIC")


class EmptyTransmissionError(ValueError):
    """No active transmission coupling is left to decimate."""


class OptimizationFailure(RuntimeError):
    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class DecimationConfig:
    variant: FVariant = INF_INF
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    fraction: float = 1.0 / 128.0
    sigma_guess: float = 0.1
    beta_rule: str = "inverse_variance"
    max_steps: int | None = None
    block_refit: bool = True
    refit_rounds: int = 20


@dataclass(frozen=True)
class StepRecord:
    step: int
    k_active: int
    k_frac: float
    l_value: float
    tic: float = math.nan
    aic: float = math.nan
    aicc: float = math.nan
    bic: float = math.nan
    n_t_active: int = 0
    iterations: int = 0
    converged: bool = False


@dataclass
class DecimationTrajectory:
    records: list[StepRecord]
    step_models: list[CouplingMatrix]
    l_max: float
    l_min: float
    m_samples: int
    models: dict[str, tuple[int, CouplingMatrix]] = field(default_factory=dict)

    def selected_step(self, criterion: str) -> int:
        return self.models[criterion][0]

    def selected_model(self, criterion: str) -> CouplingMatrix:
        return self.models[criterion][1]


def removal_count(w: int, fraction: float) -> int:
    return max(1, math.ceil(fraction * w**4 - 1e-9))


def t_magnitudes(m: CouplingMatrix) -> np.ndarray:
    """``|T_inf|`` read from the transmission block, row-scaled by ``2 beta``."""
    b = split_blocks(m)
    beta = np.where(b.beta > 0, b.beta, 1.0)
    return np.abs(b.t_block) / (2.0 * beta[:, None])


def decimate_step(m: CouplingMatrix, fraction: float = 1.0 / 128.0) -> CouplingMatrix:
    """Switch off the ``ceil(fraction * w^4)`` smallest active T couplings.

    Ties are broken by the lower flat index.  The input/input mask is rebuilt
    from the surviving transmission pattern; the diagonal is never touched.
    """
    h = m.n // 2
    w = math.isqrt(h)
    t_mask = m.t_mask.copy()
    active = np.flatnonzero(t_mask.ravel())
    if active.size == 0:
        raise EmptyTransmissionError("no active transmission couplings left")
    count = min(removal_count(w, fraction), active.size)
    mags = t_magnitudes(m).ravel()[active]
    order = np.lexsort((active, mags))
    t_mask.ravel()[active[order[:count]]] = False
    return m.with_mask(induced_mask(t_mask))


def affected_params(prev: CouplingMatrix, dec: CouplingMatrix) -> np.ndarray:
    """Parameters of ``dec`` coupled to the output rows that just lost entries.

    That is the noise term and the transmission row of each such output, and
    the input/input couplings inside its previous support.  Returned as a
    boolean vector aligned with ``dec.params()``.
    """
    h = dec.n // 2
    changed = np.flatnonzero((prev.t_mask != dec.t_mask).any(axis=1))
    sel = np.zeros((dec.n, dec.n), dtype=bool)
    for g in changed:
        support = np.flatnonzero(prev.t_mask[g])
        sel[h + g, h + g] = True
        sel[h + g, :h] = True
        sel[:h, h + g] = True
        sel[np.ix_(support, support)] = True
    rows, cols = dec.param_index
    return sel[rows, cols] & dec.mask[rows, cols]


def _refit(ds, prev: CouplingMatrix, m0: CouplingMatrix, cfg: DecimationConfig,
           moments) -> OptimResult:
    """Re-maximise after a decimation step by block coordinate ascent.

    The parameters next to the removed couplings are relaxed first; any
    parameter whose gradient still exceeds the tolerance joins the block and
    the block is re-optimised, until the full gradient passes the usual test.
    Couplings that were already converged therefore stay where they were.
    Falls back to a full search after ``refit_rounds`` rounds.
    """
    opt = cfg.optimizer
    free = affected_params(prev, m0)
    model, iters = m0, 0
    for _ in range(cfg.refit_rounds):
        if free.any():
            budget = replace(opt, max_iters=opt.max_iters - iters)
            res = maximize(ds, model, cfg.variant, budget, free=free, moments=moments)
            model, iters = res.model, iters + res.iterations
        value, grad = evaluate(ds, model, cfg.variant, moments)
        gnorm = float(np.max(np.abs(grad))) if grad.size else 0.0
        big = np.abs(grad) > opt.grad_tol
        if not big.any() or iters >= opt.max_iters:
            # the rounds share one iteration budget
            return OptimResult(model=model, l_value=value, grad_norm=gnorm, iterations=iters,
                               converged=not big.any(),
                               status="gradient" if not big.any() else "max_iters")
        free = free | big
    res = maximize(ds, model, cfg.variant, replace(opt, max_iters=opt.max_iters - iters),
                   moments=moments)
    res.iterations += iters
    return res


def criteria(l_value: float, k: int, m: int, k_frac: float, l_max: float,
             l_min: float) -> tuple[float, float, float, float]:
    """``(TIC, AIC, AICc, BIC)``; AICc is ``inf`` when ``m <= k + 1``."""
    tic = l_value - k_frac * l_max - (1.0 - k_frac) * l_min
    aic = 2.0 * k - 2.0 * m * l_value
    aicc = aic + 2.0 * k * (k + 1) / (m - k - 1) if m > k + 1 else math.inf
    bic = k * math.log(m) - 2.0 * m * l_value
    return tic, aic, aicc, bic


def select(records: list[StepRecord]) -> dict[str, int]:
    """Step chosen by each criterion; ties go to the sparser (later) step."""
    out = {}
    for name in CRITERIA:
        vals = np.array([getattr(r, name.lower()) for r in records])
        if name == "TIC":
            vals = -vals
        best = np.flatnonzero(vals == vals.min())
        out[name] = int(records[best[-1]].step)
    return out


def _coupling_fraction(n_t: int, n_t_full: int) -> float:
    # fraction of transmission couplings still active: 1 for the full model,
    # 0 once the T block is empty, and s at the true sparsity
    if n_t_full == 0:
        return 0.0
    return n_t / n_t_full


def _record(step: int, res: OptimResult) -> StepRecord:
    m = res.model
    return StepRecord(step=step, k_active=m.n_params, k_frac=math.nan, l_value=res.l_value,
                      n_t_active=int(m.t_mask.sum()), iterations=res.iterations,
                      converged=res.converged)


def _optimize(ds, m0, cfg: DecimationConfig, step: int, done: list, prev=None,
              moments=None) -> OptimResult:
    if prev is not None and cfg.block_refit:
        res = _refit(ds, prev, m0, cfg, moments)
    else:
        res = maximize(ds, m0, cfg.variant, cfg.optimizer, moments=moments)
    if not math.isfinite(res.l_value):
        raise OptimizationFailure(f"non-finite pseudolikelihood at step {step}", done)
    log.info("step %d: K=%d L=%.8g (%s, %d it)", step, res.model.n_params, res.l_value,
             res.status, res.iterations)
    return res


def finalize(records: list[StepRecord], models: list[CouplingMatrix], ds,
             cfg: DecimationConfig) -> DecimationTrajectory:
    """Fill in the criteria and the per-criterion selections."""
    l_max = records[0].l_value
    last = models[-1]
    if last.t_mask.any():
        # trajectory stopped early: optimise the disconnected model separately
        diag = last.with_mask(np.eye(last.n, dtype=bool))
        l_min = maximize(ds, diag, cfg.variant, cfg.optimizer).l_value
    else:
        l_min = records[-1].l_value
    n_t_full = records[0].n_t_active
    m = len(ds)
    filled = []
    for r in records:
        k_frac = _coupling_fraction(r.n_t_active, n_t_full)
        tic, aic, aicc, bic = criteria(r.l_value, r.k_active, m, k_frac, l_max, l_min)
        filled.append(replace(r, k_frac=k_frac, tic=tic, aic=aic, aicc=aicc, bic=bic))
    traj = DecimationTrajectory(records=filled, step_models=list(models), l_max=l_max,
                                l_min=l_min, m_samples=m)
    for name, step in select(filled).items():
        traj.models[name] = (step, models[step])
    return traj


def run_decimation(ds, cfg: DecimationConfig | None = None, *, start=None,
                   on_step=None) -> DecimationTrajectory:
    """Full-model fit followed by decimation until the T block is empty.

    ``start`` is an optional ``(records, models)`` pair from an interrupted
    run; the schedule continues from its last model.  ``on_step(records,
    models)`` is called after every completed step (checkpointing).
    """
    cfg = cfg or DecimationConfig()
    h = ds.n // 2
    w = math.isqrt(h)
    if w * w != h:
        raise ValueError(f"N/2={h} is not a square pixel count")
    moments = second_moments(ds) if cfg.variant.tag == "InfInf" else None
    if start:
        records, models = list(start[0]), list(start[1])
    else:
        records, models = [], []
        m0 = init_M0(w, cfg.sigma_guess, cfg.beta_rule)
        res = _optimize(ds, m0, cfg, 0, records, moments=moments)
        records.append(_record(0, res))
        models.append(res.model)
        if on_step:
            on_step(records, models)
    while models[-1].t_mask.any():
        step = len(records)
        if cfg.max_steps is not None and step > cfg.max_steps:
            break
        m0 = decimate_step(models[-1], cfg.fraction)
        res = _optimize(ds, m0, cfg, step, records, prev=models[-1], moments=moments)
        records.append(_record(step, res))
        models.append(res.model)
        if on_step:
            on_step(records, models)
    return finalize(records, models, ds, cfg)


def infer_inverse(ds, cfg: DecimationConfig | None = None, **kwargs) -> DecimationTrajectory:
    """Same pipeline with inputs and outputs exchanged: estimates ``T^-1``."""
    return run_decimation(swap_io(ds), cfg, **kwargs)
