"""Limited-memory quasi-Newton ascent on the total pseudolikelihood.

The search is unconstrained; trial points with some ``A_i <= 0`` are treated
as having objective ``-inf`` and the line search backs off from them.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .model import CouplingMatrix, assemble_M, structural_mask
from .pseudolikelihood import (
    INF_INF,
    FVariant,
    ModelDomainError,
    NotShiftedError,
    second_moments,
    value_and_grad,
    value_and_grad_moments,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    memory: int = 10
    grad_tol: float = 1e-6
    max_iters: int = 2000
    c1: float = 1e-4
    c2: float = 0.9
    max_line_evals: int = 40
    rel_tol: float = 1e-10
    rel_window: int = 3

    def __post_init__(self):
        if self.memory < 1:
            raise ValueError("memory must be at least 1")
        if self.grad_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("line search needs 0 < c1 < c2 < 1")


@dataclass
class OptimResult:
    model: CouplingMatrix
    l_value: float
    grad_norm: float
    iterations: int
    converged: bool
    status: str = "gradient"
    history: list = field(default_factory=list, repr=False)


def initial_beta(sigma_guess: float, rule: str = "inverse_variance") -> float:
    """``1/(2 sigma^2)``, or ``1/(2 sigma)`` with ``rule="half_over_sigma"``."""
    if sigma_guess <= 0:
        raise ValueError("sigma_guess must be positive")
    if rule == "inverse_variance":
        return 1.0 / (2.0 * sigma_guess**2)
    if rule == "half_over_sigma":
        return 1.0 / (2.0 * sigma_guess)
    raise ValueError(f"unknown beta rule {rule!r}")


def init_M0(w: int, sigma_guess: float, rule: str = "inverse_variance") -> CouplingMatrix:
    """Weak-prior starting point: uniform ``T = 1/w^2``, equal ``beta`` and the
    induced input block; cross-output couplings are switched off."""
    h = w * w
    beta = initial_beta(sigma_guess, rule)
    m = assemble_M(np.full((h, h), 1.0 / h), np.full(h, beta))
    return m.with_mask(structural_mask(2 * h))


class _Objective:
    """Negated pseudolikelihood for minimisation.

    With ``free`` set, only that subset of the active parameters varies and
    the rest stay at their values in ``template``.
    """

    def __init__(self, template: CouplingMatrix, ds, variant: FVariant, free=None,
                 moments=None):
        self.template = template
        self.ds = ds
        self.variant = variant
        self.free = free
        self.base = template.params()
        self.n_evals = 0
        # the unbounded variant depends on the data only through X^T X / M
        if variant.tag == "InfInf":
            self.moments = second_moments(ds) if moments is None else moments
        else:
            self.moments = None

    def full(self, x):
        if self.free is None:
            return x
        out = self.base.copy()
        out[self.free] = x
        return out

    def start(self):
        return self.base.copy() if self.free is None else self.base[self.free]

    def __call__(self, x):
        self.n_evals += 1
        try:
            m = self.template.with_params(self.full(x))
            if self.moments is not None:
                value, grad = value_and_grad_moments(m, self.moments)
            else:
                value, grad = value_and_grad(m, self.ds, self.variant)
        except ModelDomainError:
            return math.inf, None
        if not math.isfinite(value):
            return math.inf, None
        if self.free is not None:
            grad = grad[self.free]
        return -value, -grad


def evaluate(ds, m: CouplingMatrix, variant: FVariant = INF_INF, moments=None):
    """``(L, gradient)`` over all active parameters of ``m``."""
    if variant.tag == "InfInf":
        return value_and_grad_moments(m, second_moments(ds) if moments is None else moments)
    return value_and_grad(m, ds, variant)


def _cubic_min(a, fa, ga, b, fb, gb):
    """Minimiser of the cubic interpolant on [a, b], or None."""
    d1 = ga + gb - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0:
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = gb - ga + 2.0 * d2
    if denom == 0:
        return None
    return b - (b - a) * (gb + d2 - d1) / denom


def _line_search(fun, x, f0, g0, d, alpha, cfg: OptimizerConfig):
    """Strong-Wolfe bracketing/zoom search along ``d``.

    Returns ``(alpha, f, g)`` of the accepted point or ``None``.  If the
    curvature condition cannot be met within the evaluation budget, the best
    point satisfying sufficient decrease is returned.
    """
    dg0 = float(g0 @ d)
    best = None

    def evaluate(t):
        nonlocal best
        f, g = fun(x + t * d)
        dg = float(g @ d) if g is not None else math.nan
        if math.isfinite(f) and f <= f0 + cfg.c1 * t * dg0 and (best is None or f < best[1]):
            best = (t, f, g)
        return f, g, dg

    def zoom(lo, f_lo, dg_lo, hi, f_hi, dg_hi, budget):
        for _ in range(budget):
            if abs(hi - lo) <= 1e-15 * max(abs(lo), abs(hi)):
                break
            t = None
            if math.isfinite(f_hi) and math.isfinite(dg_hi):
                t = _cubic_min(lo, f_lo, dg_lo, hi, f_hi, dg_hi)
            span = hi - lo
            if t is None or not (min(lo, hi) + 0.1 * abs(span) <= t <= max(lo, hi) - 0.1 * abs(span)):
                t = lo + 0.5 * span
            f, g, dg = evaluate(t)
            if not math.isfinite(f) or f > f0 + cfg.c1 * t * dg0 or f >= f_lo:
                hi, f_hi, dg_hi = t, f, dg
            else:
                if abs(dg) <= -cfg.c2 * dg0:
                    return t, f, g
                if dg * (hi - lo) >= 0:
                    hi, f_hi, dg_hi = lo, f_lo, dg_lo
                lo, f_lo, dg_lo = t, f, dg
        return None

    t_prev, f_prev, dg_prev = 0.0, f0, dg0
    t = alpha
    for i in range(cfg.max_line_evals):
        f, g, dg = evaluate(t)
        if not math.isfinite(f) or f > f0 + cfg.c1 * t * dg0 or (i > 0 and f >= f_prev):
            found = zoom(t_prev, f_prev, dg_prev, t, f, dg, cfg.max_line_evals - i - 1)
            return found if found is not None else best
        if abs(dg) <= -cfg.c2 * dg0:
            return t, f, g
        if dg >= 0:
            found = zoom(t, f, dg, t_prev, f_prev, dg_prev, cfg.max_line_evals - i - 1)
            return found if found is not None else best
        t_prev, f_prev, dg_prev = t, f, dg
        t *= 2.0
    return best


def _two_loop(g, pairs):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def maximize(ds, m0: CouplingMatrix, variant: FVariant = INF_INF,
             cfg: OptimizerConfig | None = None, *, free=None,
             moments=None) -> OptimResult:
    """Maximise the pseudolikelihood over the active parameters of ``m0``.

    The mask of ``m0`` is kept fixed.  Stops when the gradient max-norm drops
    below ``grad_tol``, when the objective stalls (relative change below
    ``rel_tol`` over ``rel_window`` iterations), on a line-search failure, or
    after ``max_iters`` iterations.  ``converged`` reports the gradient test.

    ``free`` is an optional boolean vector over ``m0.params()`` restricting
    the search to a block of parameters; the gradient test then only looks at
    that block.  ``moments`` may pass precomputed ``X^T X / M``.
    """
    cfg = cfg or OptimizerConfig()
    if variant.symmetric and not ds.shifted:
        raise NotShiftedError(f"variant {variant.tag} needs mean-shifted data")
    if free is not None:
        free = np.asarray(free, dtype=bool)
        if free.shape != (m0.n_params,):
            raise ValueError("free must flag every active parameter")
    fun = _Objective(m0, ds, variant, free, moments)
    x = fun.start()
    f, g = fun(x)
    if g is None:
        raise ModelDomainError("starting point has a non-positive A_i")
    pairs: deque = deque(maxlen=cfg.memory)
    history = [-f]
    status = "max_iters"
    it = 0
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    while True:
        if gnorm <= cfg.grad_tol:
            status = "gradient"
            break
        if it >= cfg.max_iters:
            break
        if len(history) > cfg.rel_window:
            old = history[-1 - cfg.rel_window]
            if abs(history[-1] - old) <= cfg.rel_tol * max(abs(history[-1]), 1.0):
                status = "stalled"
                break
        d = _two_loop(g, pairs)
        if g @ d >= 0:
            pairs.clear()
            d = -g
        alpha = 1.0 if pairs else min(1.0, 1.0 / float(np.linalg.norm(g)))
        found = _line_search(fun, x, f, g, d, alpha, cfg)
        if found is None and pairs:
            pairs.clear()
            d = -g
            found = _line_search(fun, x, f, g, d, min(1.0, 1.0 / float(np.linalg.norm(g))), cfg)
        if found is None:
            status = "line_search"
            break
        t, f_new, g_new = found
        s = t * d
        y = g_new - g
        sy = float(s @ y)
        if sy <= 1e-12 * float(s @ s):
            pairs.clear()
        else:
            pairs.append((s, y, 1.0 / sy))
        x = x + s
        f, g = f_new, g_new
        gnorm = float(np.max(np.abs(g)))
        history.append(-f)
        it += 1
    model = m0.with_params(fun.full(x))
    log.debug("maximize: %s after %d iterations, L=%.10g, |g|=%.3g", status, it, -f, gnorm)
    return OptimResult(model=model, l_value=-f, grad_norm=gnorm, iterations=it,
                       converged=gnorm <= cfg.grad_tol, status=status, history=history)
