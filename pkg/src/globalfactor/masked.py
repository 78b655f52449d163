"""Masked-matrix data model, masked Frobenius error, exact rank truncation.

The observation matrix convention throughout the package: rows come in
(x, y) pairs, two per frame, columns are feature tracking periods.  A
binary mask marks which entries were actually observed; the value stored
at a masked-out position carries no information (it is zeroed on
construction and ignored by every operation).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeMismatchError


@dataclass(frozen=True)
class MaskedMatrix:
    """A real matrix paired with a same-shape binary known-entry mask."""

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        mask = np.asarray(self.mask, dtype=float)
        if values.ndim != 2 or mask.shape != values.shape:
            raise ShapeMismatchError(
                f"values {values.shape} and mask {mask.shape} must be equal 2-D shapes"
            )
        if not np.all((mask == 0.0) | (mask == 1.0)):
            raise ParameterError("mask entries must be exactly 0 or 1")
        if not np.all(np.isfinite(values[mask == 1.0])):
            raise ParameterError("observed entries must be finite")
        # Placeholders at masked-out positions are normalized to 0.
        object.__setattr__(self, "values", np.where(mask == 1.0, values, 0.0))
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_dense(cls, values) -> "MaskedMatrix":
        """Fully observed matrix."""
        values = np.asarray(values, dtype=float)
        return cls(values, np.ones_like(values))

    @classmethod
    def from_nan(cls, values) -> "MaskedMatrix":
        """Derive the mask from NaN entries (NaN = missing)."""
        values = np.asarray(values, dtype=float)
        mask = np.isfinite(values).astype(float)
        return cls(np.where(mask == 1.0, values, 0.0), mask)

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def n_observed(self) -> int:
        return int(self.mask.sum())

    @property
    def known_fraction(self) -> float:
        return float(self.mask.mean())

    def with_nan(self) -> np.ndarray:
        """Dense copy with NaN at missing positions (CSV convention)."""
        return np.where(self.mask == 1.0, self.values, np.nan)

    def column(self, j) -> tuple[np.ndarray, np.ndarray]:
        return self.values[:, j], self.mask[:, j]


@dataclass(frozen=True)
class LowRankFactor:
    """Column-space / row-space factor pair representing a rank-r matrix."""

    col_space: np.ndarray  # 2F x r
    row_space: np.ndarray  # r x P
    rank: int

    def __post_init__(self):
        col = np.asarray(self.col_space, dtype=float)
        row = np.asarray(self.row_space, dtype=float)
        if col.ndim != 2 or row.ndim != 2 or col.shape[1] != row.shape[0]:
            raise ShapeMismatchError(
                f"factor shapes {col.shape} x {row.shape} do not chain"
            )
        if self.rank != col.shape[1]:
            raise ParameterError(f"rank {self.rank} != factor inner dimension {col.shape[1]}")
        if self.rank > min(col.shape[0], row.shape[1]):
            raise ParameterError("rank exceeds matrix dimensions")
        object.__setattr__(self, "col_space", col)
        object.__setattr__(self, "row_space", row)

    @property
    def shape(self):
        return (self.col_space.shape[0], self.row_space.shape[1])

    def product(self) -> np.ndarray:
        return self.col_space @ self.row_space


def masked_frobenius(obs: MaskedMatrix, candidate) -> float:
    """Frobenius norm of (obs - candidate) restricted to observed entries."""
    candidate = np.asarray(candidate, dtype=float)
    if candidate.shape != obs.shape:
        raise ShapeMismatchError(
            f"candidate shape {candidate.shape} != observation shape {obs.shape}"
        )
    return float(np.linalg.norm((obs.values - candidate) * obs.mask))


def rank_project(full, r: int) -> np.ndarray:
    """Best rank-r Frobenius approximation of a complete matrix."""
    full = np.asarray(full, dtype=float)
    if full.ndim != 2:
        raise ShapeMismatchError("expected a 2-D matrix")
    if not (1 <= r <= min(full.shape)):
        raise ParameterError(f"rank {r} out of range for shape {full.shape}")
    u, s, vt = np.linalg.svd(full, full_matrices=False)
    return (u[:, :r] * s[:r]) @ vt[:r]


def truncated_factor(full, r: int) -> LowRankFactor:
    """Rank-r truncation returned in factored form (U*S, Vt)."""
    full = np.asarray(full, dtype=float)
    if not (1 <= r <= min(full.shape)):
        raise ParameterError(f"rank {r} out of range for shape {full.shape}")
    u, s, vt = np.linalg.svd(full, full_matrices=False)
    return LowRankFactor(u[:, :r] * s[:r], vt[:r], r)


def singular_values(full) -> np.ndarray:
    """Singular values, sorted descending."""
    full = np.asarray(full, dtype=float)
    return np.linalg.svd(full, compute_uv=False)
