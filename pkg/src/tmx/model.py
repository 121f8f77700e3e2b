"""Shared domain types: intensity samples, ground-truth channels and the
block-structured coupling matrix.

Index convention: a concatenated intensity vector of length ``N`` holds the
``N/2`` input pixels first and the ``N/2`` output pixels last.  The coupling
matrix has the block layout::

    [ -V (diag) / -2V (off-diag)   |  (2 beta T)^T ]
    [ 2 beta T                     |  -beta (diag) ]

with ``V = T^T diag(beta) T``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class DimensionError(ValueError):
    """Array shapes do not match the model dimensions."""


class InvalidNoiseError(ValueError):
    """A noise parameter (beta) is not strictly positive."""


class DegenerateModelError(ValueError):
    """The coupling matrix has a non-negative diagonal where beta is read."""


@dataclass(frozen=True)
class IntensitySample:
    """One concatenated input/output intensity vector."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size % 2:
            raise DimensionError("intensity sample must be a 1-d vector of even length")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def inputs(self) -> np.ndarray:
        return self.values[: self.n // 2]

    @property
    def outputs(self) -> np.ndarray:
        return self.values[self.n // 2:]


@dataclass(frozen=True)
class SampleSet:
    """``M`` intensity samples stored as an ``(M, N)`` array.

    ``channel_means`` is the per-channel vector that was subtracted when
    ``shifted`` is true; for raw data it holds the empirical means.
    """

    values: np.ndarray
    channel_means: np.ndarray
    shifted: bool = False

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] % 2:
            raise DimensionError("sample array must have shape (M, N) with N even")
        means = np.asarray(self.channel_means, dtype=float)
        if means.shape != (values.shape[1],):
            raise DimensionError("channel_means must have length N")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channel_means", means)

    @classmethod
    def from_array(cls, values) -> "SampleSet":
        values = np.asarray(values, dtype=float)
        return cls(values, values.mean(axis=0), shifted=False)

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, idx: int) -> IntensitySample:
        return IntensitySample(self.values[idx])

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def inputs(self) -> np.ndarray:
        return self.values[:, : self.n // 2]

    @property
    def outputs(self) -> np.ndarray:
        return self.values[:, self.n // 2:]


@dataclass(frozen=True)
class TransmissionSpec:
    """Ground-truth channel: row-stochastic ``T`` on ``w x w`` pixels with sparsity ``s``."""

    w: int
    s: float
    T: np.ndarray
    sigma: float = 0.0
    seed: int = 0

    @property
    def n_half(self) -> int:
        return self.w * self.w

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.T))


@dataclass(frozen=True)
class Blocks:
    beta: np.ndarray
    t_block: np.ndarray
    v_block: np.ndarray


def structural_mask(n: int) -> np.ndarray:
    """Mask of every position allowed by the block form: all entries except
    the off-diagonal part of the output/output block."""
    if n % 2:
        raise DimensionError(f"coupling matrix size must be even, got {n}")
    h = n // 2
    mask = np.ones((n, n), dtype=bool)
    mask[h:, h:] = False
    mask[np.arange(h, n), np.arange(h, n)] = True
    return mask


def induced_mask(t_bin: np.ndarray) -> np.ndarray:
    """Full mask implied by a binary T-block pattern.

    An input/input coupling (eta, xi) stays active iff some output row has both
    columns active; the diagonal is always active.
    """
    t_bin = np.asarray(t_bin, dtype=bool)
    h = t_bin.shape[0]
    n = 2 * h
    ti = t_bin.astype(np.int64)
    v_bin = (ti.T @ ti) > 0
    mask = np.zeros((n, n), dtype=bool)
    mask[:h, :h] = v_bin
    mask[h:, :h] = t_bin
    mask[:h, h:] = t_bin.T
    mask[np.arange(n), np.arange(n)] = True
    return mask


@dataclass(frozen=True)
class CouplingMatrix:
    """Symmetric ``N x N`` interaction matrix with a fixed activity mask.

    The independent parameters are the active entries ``(i, j)`` with
    ``i <= j``, ordered row-major.  Inactive entries are held at exactly zero.
    """

    entries: np.ndarray
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionError("coupling matrix must be square")
        n = entries.shape[0]
        if self.mask is None:
            mask = structural_mask(n)
        else:
            mask = np.array(self.mask, dtype=bool)
            if mask.shape != entries.shape:
                raise DimensionError("mask shape differs from entries")
        upper = np.triu(entries)
        entries = upper + np.triu(entries, 1).T
        mask = np.triu(mask) | np.triu(mask, 1).T
        entries[~mask] = 0.0
        entries.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "mask", mask)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def param_index(self) -> tuple[np.ndarray, np.ndarray]:
        rows, cols = np.triu_indices(self.n)
        keep = self.mask[rows, cols]
        return rows[keep], cols[keep]

    @property
    def n_params(self) -> int:
        return self.param_index[0].size

    def params(self) -> np.ndarray:
        rows, cols = self.param_index
        return self.entries[rows, cols].copy()

    def with_params(self, x) -> "CouplingMatrix":
        x = np.asarray(x, dtype=float)
        rows, cols = self.param_index
        if x.shape != rows.shape:
            raise DimensionError(f"expected {rows.size} parameters, got {x.shape}")
        entries = np.zeros((self.n, self.n))
        entries[rows, cols] = x
        entries[cols, rows] = x
        out = CouplingMatrix.__new__(CouplingMatrix)
        entries.setflags(write=False)
        object.__setattr__(out, "entries", entries)
        object.__setattr__(out, "mask", self.mask)
        # same mask, so the parameter index can be shared
        out.__dict__["param_index"] = self.param_index
        return out

    def with_mask(self, mask) -> "CouplingMatrix":
        return CouplingMatrix(self.entries, mask)

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.entries).copy()

    @property
    def t_mask(self) -> np.ndarray:
        h = self.n // 2
        return self.mask[h:, :h]

    def __getitem__(self, ij):
        return self.entries[ij]


def split_blocks(m: CouplingMatrix) -> Blocks:
    if m.n % 2:
        raise DimensionError(f"coupling matrix size must be even, got {m.n}")
    h = m.n // 2
    e = m.entries
    return Blocks(
        beta=-np.diag(e)[h:].copy(),
        t_block=e[h:, :h].copy(),
        v_block=e[:h, :h].copy(),
    )


def assemble_M(t, beta, *, sparse: bool = False) -> CouplingMatrix:
    """Build the coupling matrix of a channel ``T`` with inverse noises ``beta``.

    With ``sparse=True`` the mask follows the non-zero pattern of ``t``;
    otherwise every structurally allowed entry is active.
    """
    t = np.asarray(t, dtype=float)
    h = t.shape[0]
    if t.ndim != 2 or t.shape != (h, h):
        raise DimensionError("T must be square")
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (h,)).copy()
    if np.any(beta <= 0) or not np.all(np.isfinite(beta)):
        raise InvalidNoiseError("every beta must be finite and strictly positive")
    bt = beta[:, None] * t
    v = t.T @ bt
    upper = -2.0 * v
    upper[np.arange(h), np.arange(h)] = -np.diag(v)
    n = 2 * h
    e = np.zeros((n, n))
    e[:h, :h] = upper
    e[h:, :h] = 2.0 * bt
    e[:h, h:] = 2.0 * bt.T
    e[np.arange(h, n), np.arange(h, n)] = -beta
    mask = induced_mask(t != 0) if sparse else structural_mask(n)
    return CouplingMatrix(e, mask)


def extract_beta(m: CouplingMatrix) -> np.ndarray:
    beta = split_blocks(m).beta
    if np.any(beta <= 0):
        raise DegenerateModelError("output diagonal must be strictly negative")
    return beta


def swap_halves(values: np.ndarray) -> np.ndarray:
    """Exchange the input and output halves along the last axis."""
    h = values.shape[-1] // 2
    return np.concatenate([values[..., h:], values[..., :h]], axis=-1)
