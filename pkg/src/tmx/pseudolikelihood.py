"""Sample-averaged log-pseudolikelihood of the I/O model and its gradient.

Each site ``i`` contributes the log-density of ``exp(-A x^2 + B x)`` on the
integration interval of the chosen variant, evaluated at the observed
intensity, with ``A = -M_ii`` and ``B = sum_{j != i} M_ij I_j``.  Derivatives
with respect to ``A`` and ``B`` are the (truncated) Gaussian moments
``E[x^2]`` and ``E[x]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, log_ndtr

from .model import CouplingMatrix, DimensionError, SampleSet

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_LN2 = math.log(2.0)


class ModelDomainError(ValueError):
    """Some ``A_i = -M_ii`` is not strictly positive."""


class NotShiftedError(ValueError):
    pass


_TAGS = ("InfInf", "ZeroInf", "ZeroOne", "SymUnit")


@dataclass(frozen=True)
class FVariant:
    """Integration interval of the single-site partition function.

    ``SymUnit`` integrates over ``(-half_width, half_width)``; the default
    half-width 1 gives (-1, 1), 0.5 gives (-1/2, 1/2).
    """

    tag: str = "InfInf"
    half_width: float = 1.0

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise ValueError(f"unknown variant {self.tag!r}; choose from {_TAGS}")
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")

    @classmethod
    def parse(cls, name: str) -> "FVariant":
        key = name.replace("_", "").replace("-", "").lower()
        for tag in _TAGS:
            if tag.lower() == key:
                return cls(tag)
        if key in ("symhalf", "symunithalf"):
            return cls("SymUnit", 0.5)
        raise ValueError(f"unknown variant {name!r}")

    @property
    def bounds(self) -> tuple[float, float]:
        return {
            "InfInf": (-math.inf, math.inf),
            "ZeroInf": (0.0, math.inf),
            "ZeroOne": (0.0, 1.0),
            "SymUnit": (-self.half_width, self.half_width),
        }[self.tag]

    @property
    def symmetric(self) -> bool:
        return self.tag in ("InfInf", "SymUnit")


INF_INF = FVariant("InfInf")


@dataclass(frozen=True)
class SiteParams:
    a: float
    b: float


def site_params(m: CouplingMatrix, sample, i: int) -> SiteParams:
    values = np.asarray(getattr(sample, "values", sample), dtype=float)
    if values.shape != (m.n,):
        raise DimensionError("sample length differs from the model size")
    row = m.entries[i]
    b = float(np.dot(np.delete(row, i), np.delete(values, i)))
    return SiteParams(a=-float(row[i]), b=b)


def _log_ndtr_diff(lo, hi):
    """log(Phi(hi) - Phi(lo)) for lo < hi, elementwise and tail-safe."""
    lo, hi = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
    upper = lo > 0
    # in the upper tail use the reflected difference Phi(-lo) - Phi(-hi)
    big = np.where(upper, log_ndtr(-lo), log_ndtr(hi))
    small = np.where(upper, log_ndtr(-hi), log_ndtr(lo))
    with np.errstate(divide="ignore"):
        return big + np.log1p(-np.exp(small - big))


def _standardized_bounds(v: FVariant, a, b):
    lo, hi = v.bounds
    root = np.sqrt(2.0 * a)
    return (2.0 * a * lo - b) / root, (2.0 * a * hi - b) / root


def log_F(v: FVariant, a, b):
    """Natural log of the erf combination F for the variant (vectorised)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if v.tag == "InfInf":
        return np.full(np.broadcast(a, b).shape, _LN2)
    z_lo, z_hi = _standardized_bounds(v, a, b)
    return _LN2 + _log_ndtr_diff(z_lo, z_hi)


def eval_F(v: FVariant, p: SiteParams) -> float:
    if not p.a > 0:
        raise ModelDomainError(f"A must be positive, got {p.a}")
    if v.tag == "InfInf":
        return 2.0
    root = math.sqrt(4.0 * p.a)
    if v.tag == "ZeroInf":
        return 1.0 + math.erf(p.b / root)
    if v.tag == "ZeroOne":
        return math.erf((2 * p.a - p.b) / root) + math.erf(p.b / root)
    h = v.half_width
    return math.erf((2 * p.a * h - p.b) / root) + math.erf((2 * p.a * h + p.b) / root)


def site_L(v: FVariant, a, b, x):
    """Per-site log-pseudolikelihood, broadcasting over arrays."""
    return x * b - x * x * a - 0.5 * np.log(np.pi / (4.0 * a)) - b * b / (4.0 * a) - log_F(v, a, b)


def eval_Li(v: FVariant, p: SiteParams, intensity: float) -> float:
    if not p.a > 0:
        raise ModelDomainError(f"A must be positive, got {p.a}")
    return float(site_L(v, p.a, p.b, intensity))


def site_moments(v: FVariant, a, b):
    """``(E[x], E[x^2])`` under the density proportional to exp(-a x^2 + b x)
    restricted to the variant's interval."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mean = b / (2.0 * a)
    var = 1.0 / (2.0 * a)
    if v.tag == "InfInf":
        mean, var = np.broadcast_arrays(mean, var)
        return mean, var + mean * mean
    z_lo, z_hi = _standardized_bounds(v, a, b)
    log_z = _log_ndtr_diff(z_lo, z_hi)
    with np.errstate(over="ignore", invalid="ignore"):
        r_lo = np.exp(-0.5 * z_lo * z_lo - _LOG_SQRT_2PI - log_z)
        r_hi = np.exp(-0.5 * z_hi * z_hi - _LOG_SQRT_2PI - log_z)
        r_lo = np.where(np.isfinite(z_lo), r_lo, 0.0)
        r_hi = np.where(np.isfinite(z_hi), r_hi, 0.0)
        zr_lo = np.where(np.isfinite(z_lo), z_lo * r_lo, 0.0)
        zr_hi = np.where(np.isfinite(z_hi), z_hi * r_hi, 0.0)
    sd = np.sqrt(var)
    d = r_lo - r_hi
    ex = mean + sd * d
    vx = var * (1.0 + zr_lo - zr_hi - d * d)
    return ex, vx + ex * ex


def _check(m: CouplingMatrix, ds: SampleSet):
    if len(ds) == 0:
        raise ValueError("empty dataset")
    if ds.n != m.n:
        raise DimensionError(f"dataset has N={ds.n}, model has N={m.n}")
    a = -np.diag(m.entries)
    if not np.all(a > 0):
        raise ModelDomainError("every A_i = -M_ii must be strictly positive")
    return a


def _fields(m: CouplingMatrix, x: np.ndarray) -> np.ndarray:
    off = m.entries.copy()
    np.fill_diagonal(off, 0.0)
    return x @ off


def _reduce(site_major: np.ndarray, m_samples: int) -> float:
    # pairwise sums over contiguous samples per site, then an exactly rounded
    # sum over sites: fixed tree, bit-reproducible
    per_site = site_major.sum(axis=1)
    return math.fsum(per_site.tolist()) / m_samples


def eval_total_L(m: CouplingMatrix, ds: SampleSet, v: FVariant = INF_INF) -> float:
    """``(1/M) sum_mu sum_i L_{i,mu}``."""
    a = _check(m, ds)
    x = ds.values
    b = _fields(m, x)
    li = site_L(v, a[None, :], b, x)
    return _reduce(np.ascontiguousarray(li.T), len(ds))


def value_and_grad(m: CouplingMatrix, ds: SampleSet, v: FVariant = INF_INF):
    """Total pseudolikelihood and its gradient over the active parameters."""
    a = _check(m, ds)
    x = ds.values
    mcount = len(ds)
    b = _fields(m, x)
    li = site_L(v, a[None, :], b, x)
    value = _reduce(np.ascontiguousarray(li.T), mcount)
    ex, ex2 = site_moments(v, a[None, :], b)
    g_b = x - ex
    g_a = ex2 - x * x
    cross = g_b.T @ x
    full = (cross + cross.T) / mcount
    full[np.diag_indices(m.n)] = -g_a.sum(axis=0) / mcount
    rows, cols = m.param_index
    return value, full[rows, cols]


def grad_L(m: CouplingMatrix, ds: SampleSet, v: FVariant = INF_INF) -> np.ndarray:
    return value_and_grad(m, ds, v)[1]


def l_min_theory(ds: SampleSet, sigma, v: FVariant = INF_INF) -> float:
    """Pseudolikelihood of the disconnected model with per-channel widths.

    Every site is an independent zero-mean Gaussian with ``B_i = 0`` and
    ``A_i = 1/(2 sigma_i^2)``, normalised on the variant's interval.
    """
    if not ds.shifted:
        raise NotShiftedError("the disconnected-model bound requires shifted data")
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (ds.n,))
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    mean_sq = (ds.values**2).mean(axis=0)
    if v.tag == "InfInf":
        per_site = -0.5 * mean_sq / sigma**2 - _LOG_SQRT_2PI - np.log(sigma)
        return math.fsum(per_site.tolist())
    lo, hi = v.bounds
    s2 = sigma * math.sqrt(2.0)
    f = erf(hi / s2) - erf(lo / s2)
    per_site = -0.5 * mean_sq / sigma**2 - 0.5 * np.log(np.pi * sigma**2 / 2.0) - np.log(f)
    return math.fsum(per_site.tolist())


def l_min_two_widths(ds: SampleSet, sigma_in: float, sigma_out: float) -> float:
    """Disconnected-model value when all inputs share one width and all
    outputs another (unbounded integration)."""
    if not ds.shifted:
        raise NotShiftedError("the disconnected-model bound requires shifted data")
    h = ds.n // 2
    sq = ds.values**2
    quad = sq[:, :h].sum(axis=1).mean() / sigma_in**2 + sq[:, h:].sum(axis=1).mean() / sigma_out**2
    return -0.5 * quad - 0.5 * ds.n * math.log(2.0 * math.pi * sigma_in * sigma_out)


def second_moments(ds: SampleSet) -> np.ndarray:
    """``X^T X / M``: all the unbounded-variant objective needs from the data."""
    x = ds.values
    return (x.T @ x) / len(ds)


def value_and_grad_moments(m: CouplingMatrix, s: np.ndarray):
    """Unbounded-variant pseudolikelihood and gradient from second moments.

    Equal to :func:`value_and_grad` with ``INF_INF`` up to rounding, at a cost
    independent of the number of samples.
    """
    n = m.n
    if s.shape != (n, n):
        raise DimensionError(f"moment matrix has shape {s.shape}, model has N={n}")
    a = -np.diag(m.entries)
    if not np.all(a > 0):
        raise ModelDomainError("every A_i = -M_ii must be strictly positive")
    off = m.entries.copy()
    np.fill_diagonal(off, 0.0)
    off_s = off @ s
    xb = np.einsum("ij,ji->i", s, off)
    b2 = np.einsum("ij,ji->i", off_s, off)
    s_ii = np.diag(s)
    per_site = xb - a * s_ii - b2 / (4.0 * a) - 0.5 * np.log(np.pi / (4.0 * a)) - _LN2
    value = math.fsum(per_site.tolist())
    d_off_s = off_s / (2.0 * a)[:, None]
    full = 2.0 * s - d_off_s - d_off_s.T
    full[np.diag_indices(n)] = s_ii - b2 / (4.0 * a * a) - 1.0 / (2.0 * a)
    rows, cols = m.param_index
    return value, full[rows, cols]
