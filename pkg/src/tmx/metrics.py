"""Physical read-out of inferred coupling matrices and validation statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import CouplingMatrix, DegenerateModelError, DimensionError, SampleSet, split_blocks


class SingularMatrixError(ValueError):
    pass


class UndefinedCorrelationError(ValueError):
    pass


@dataclass
class MetricsReport:
    theta: float
    sigma_est: np.ndarray
    q_error: float
    t_correlation: float
    row_sums: np.ndarray
    pseudo_unity_sorted: np.ndarray | None = None

    def to_dict(self) -> dict:
        def plain(v):
            return v.tolist() if isinstance(v, np.ndarray) else v
        return {k: plain(v) for k, v in self.__dict__.items()}


def extract_T(m: CouplingMatrix) -> np.ndarray:
    """Transmission estimate: the output/input block divided row-wise by ``2 beta``."""
    b = split_blocks(m)
    if np.any(b.beta <= 0):
        raise DegenerateModelError("output diagonal must be strictly negative to read beta")
    return b.t_block / (2.0 * b.beta[:, None])


def extract_noise(m: CouplingMatrix):
    """``(beta, sigma_est, theta)`` from the output diagonal."""
    b = split_blocks(m)
    if np.any(b.beta <= 0):
        raise DegenerateModelError("output diagonal must be strictly negative to read beta")
    beta = b.beta
    sigma = 1.0 / np.sqrt(2.0 * beta)
    theta = 2.0 / m.n * float(np.sum(1.0 / beta))
    return beta, sigma, theta


def q_error(t_true, t_inf) -> float:
    """sqrt(||T - T_inf|| / ||T||) with Frobenius norms; not symmetric."""
    t_true = np.asarray(t_true, dtype=float)
    t_inf = np.asarray(t_inf, dtype=float)
    if t_true.shape != t_inf.shape:
        raise DimensionError(f"shape mismatch {t_true.shape} vs {t_inf.shape}")
    return math.sqrt(np.linalg.norm(t_true - t_inf) / np.linalg.norm(t_true))


def correlation(x, y) -> float:
    """Connected (Pearson) correlation of two flattened arrays."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise DimensionError("correlation needs equal-length vectors")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelationError("correlation is undefined for a constant vector")
    return float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))


def row_correlations(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-row connected correlation of two ``(M, n)`` arrays."""
    dx = x - x.mean(axis=1, keepdims=True)
    dy = y - y.mean(axis=1, keepdims=True)
    num = np.einsum("ij,ij->i", dx, dy)
    den = np.sqrt(np.einsum("ij,ij->i", dx, dx) * np.einsum("ij,ij->i", dy, dy))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.clip(num / den, -1.0, 1.0)


@dataclass
class PseudoUnity:
    sorted_ab: np.ndarray
    sorted_ba: np.ndarray
    n_diagonal: int
    n_offdiagonal: int
    dominance_ab: float
    dominance_ba: float


def diagonal_dominance(p: np.ndarray) -> float:
    """Mean diagonal over mean absolute off-diagonal entry."""
    n = p.shape[0]
    off = np.abs(p[~np.eye(n, dtype=bool)])
    return float(np.mean(np.diag(p)) / np.mean(off)) if off.size else math.inf


def pseudo_unity(a, b) -> PseudoUnity:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape != b.shape:
        raise DimensionError("pseudo-unity needs two square matrices of equal shape")
    ab = a @ b
    ba = b @ a
    n = a.shape[0]
    return PseudoUnity(sorted_ab=np.sort(ab.ravel())[::-1], sorted_ba=np.sort(ba.ravel())[::-1],
                       n_diagonal=n, n_offdiagonal=n * n - n,
                       dominance_ab=diagonal_dominance(ab), dominance_ba=diagonal_dominance(ba))


def stochasticity(t) -> tuple[float, float]:
    """Mean and standard deviation of the row sums."""
    sums = np.asarray(t, dtype=float).sum(axis=1)
    return float(sums.mean()), float(sums.std())


def matrix_inverse(t) -> tuple[np.ndarray, float]:
    """Gauss-Jordan inverse with partial pivoting.

    Returns the inverse and the residual ``||t @ inv - I||_inf``.  Raises
    SingularMatrixError when a pivot falls below ``1e-12`` times the largest
    absolute entry.
    """
    a = np.array(t, dtype=float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise DimensionError("matrix_inverse needs a square matrix")
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if scale == 0:
        raise SingularMatrixError("zero matrix")
    aug = np.hstack([a, np.eye(n)])
    for col in range(n):
        piv = col + int(np.argmax(np.abs(aug[col:, col])))
        if abs(aug[piv, col]) < 1e-12 * scale:
            raise SingularMatrixError(f"pivot {aug[piv, col]:.3g} below tolerance at column {col}")
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        aug[col] /= aug[col, col]
        factors = aug[:, col].copy()
        factors[col] = 0.0
        aug -= np.outer(factors, aug[col])
    inv = aug[:, n:]
    residual = float(np.max(np.sum(np.abs(a @ inv - np.eye(n)), axis=1)))
    return inv, residual


@dataclass
class CurveStat:
    mean: float | None
    std: float | None

    def to_dict(self):
        return {"mean": self.mean, "std": self.std}


@dataclass
class ValidationCurves:
    focus_direct: CurveStat
    focus_inverted_inverse: CurveStat
    image_inverted_direct: CurveStat
    image_inverse: CurveStat
    focus_true: CurveStat | None = None
    image_true: CurveStat | None = None

    def to_dict(self):
        return {k: v.to_dict() for k, v in self.__dict__.items() if v is not None}


def _stat(c: np.ndarray) -> CurveStat:
    c = c[np.isfinite(c)]
    if c.size == 0:
        return CurveStat(None, None)
    return CurveStat(float(c.mean()), float(c.std()))


def validate(t_inf, t_inv_inf, t_true, val_set: SampleSet, channel_means=None) -> ValidationCurves:
    """Correlations between measured and reconstructed validation patterns.

    Focusing predicts outputs from inputs with ``t_inf`` and with
    ``inv(t_inv_inf)``; imaging predicts inputs from outputs with
    ``inv(t_inf)`` and with ``t_inv_inf``.  Intensities are shifted by the
    training ``channel_means`` before the matrices are applied.  A curve whose
    matrix cannot be inverted is reported with ``mean=None``.  When ``t_true``
    is given, the same two tasks with the true channel are added as references.
    """
    values = val_set.values
    if not val_set.shifted:
        means = val_set.channel_means if channel_means is None else np.asarray(channel_means)
        values = values - means
    h = values.shape[1] // 2
    x_in, x_out = values[:, :h], values[:, h:]

    def corr(mat, src, target):
        if mat is None:
            return CurveStat(None, None)
        return _stat(row_correlations(target, src @ np.asarray(mat).T))

    def inverse_or_none(mat):
        if mat is None:
            return None
        try:
            return matrix_inverse(mat)[0]
        except SingularMatrixError:
            return None

    return ValidationCurves(
        focus_direct=corr(t_inf, x_in, x_out),
        focus_inverted_inverse=corr(inverse_or_none(t_inv_inf), x_in, x_out),
        image_inverted_direct=corr(inverse_or_none(t_inf), x_out, x_in),
        image_inverse=corr(t_inv_inf, x_out, x_in),
        focus_true=None if t_true is None else corr(t_true, x_in, x_out),
        image_true=None if t_true is None else corr(inverse_or_none(t_true), x_out, x_in),
    )


def metrics_report(m_direct: CouplingMatrix, t_true, t_inv_inf=None) -> MetricsReport:
    t_inf = extract_T(m_direct)
    _, sigma, theta = extract_noise(m_direct)
    pu = None
    if t_inv_inf is not None:
        pu = pseudo_unity(t_inv_inf, t_inf).sorted_ab
    return MetricsReport(theta=theta, sigma_est=sigma, q_error=q_error(t_true, t_inf),
                         t_correlation=correlation(t_true, t_inf), row_sums=t_inf.sum(axis=1),
                         pseudo_unity_sorted=pu)
