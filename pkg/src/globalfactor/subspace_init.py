"""Heuristic rank-r initialization from incomplete observations.

Fully observed sub-blocks of the observation matrix are factored
individually; their column bases are stitched together through shared rows
into one global column basis, the row space is then fit column-by-column
against that basis, and rows outside the block coverage are filled in by the
mirrored least-squares step.  When no usable block chain exists the guess
falls back to column-mean filling (flagged in the result).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CombinationError, InitializationError, ParameterError
from .masked import MaskedMatrix, rank_project

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class CompleteBlock:
    """A fully observed submatrix, identified by its row and column indices."""

    row_indices: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.row_indices, dtype=int)
        cols = np.asarray(self.col_indices, dtype=int)
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (rows.size, cols.size):
            raise ParameterError("block values shape does not match its index sets")
        object.__setattr__(self, "row_indices", rows)
        object.__setattr__(self, "col_indices", cols)
        object.__setattr__(self, "values", vals)

    @property
    def shape(self):
        return self.values.shape


def extract_block(obs: MaskedMatrix, rows, cols) -> CompleteBlock:
    """Extract a block, verifying every entry is observed."""
    rows = np.asarray(rows, dtype=int)
    cols = np.asarray(cols, dtype=int)
    sub_mask = obs.mask[np.ix_(rows, cols)]
    if not np.all(sub_mask == 1.0):
        raise ParameterError("block contains unobserved entries")
    return CompleteBlock(rows, cols, obs.values[np.ix_(rows, cols)])


@dataclass(frozen=True)
class PartialBasis:
    """A column-space basis defined on a subset of global rows."""

    rows: np.ndarray
    matrix: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=int)
        mat = np.asarray(self.matrix, dtype=float)
        if mat.shape[0] != rows.size:
            raise ParameterError("basis rows and matrix height differ")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "matrix", mat)

    @property
    def rank(self) -> int:
        return self.matrix.shape[1]

    def restrict(self, rows) -> np.ndarray:
        pos = {r: i for i, r in enumerate(self.rows)}
        try:
            idx = [pos[r] for r in np.asarray(rows, dtype=int)]
        except KeyError as exc:
            raise ParameterError(f"row {exc.args[0]} not covered by this basis") from None
        return self.matrix[idx]


def block_basis(block: CompleteBlock, r: int) -> PartialBasis:
    """Rank-r column basis of a complete block (left factor of its truncation)."""
    if min(block.shape) < r:
        raise InitializationError(
            f"block {block.shape} too small for rank {r}"
        )
    u, s, _ = np.linalg.svd(block.values, full_matrices=False)
    if s[r - 1] <= max(block.shape) * _EPS * s[0]:
        raise InitializationError(
            f"block of shape {block.shape} is rank-deficient for rank {r}"
        )
    return PartialBasis(block.row_indices, u[:, :r] * s[:r])


def subspace_approx(col_block: CompleteBlock, row_block: CompleteBlock, r: int):
    """Column basis from a tall block, row space fit on a wide block.

    ``row_block``'s rows must be covered by ``col_block``'s rows so the
    restricted basis is available for the least-squares row-space fit.
    Returns ``(basis, row_space)`` where ``basis`` is a :class:`PartialBasis`
    over ``col_block.row_indices`` and ``row_space`` is r x len(row_block.col_indices).
    """
    basis = block_basis(col_block, r)
    a_b = basis.restrict(row_block.row_indices)
    if np.linalg.matrix_rank(a_b) < r:
        raise InitializationError("restricted basis is rank-deficient")
    try:
        row_space = np.linalg.solve(a_b.T @ a_b, a_b.T @ row_block.values)
    except np.linalg.LinAlgError:
        raise InitializationError("restricted basis gram matrix is singular") from None
    return basis, row_space


def subspace_combine(a1: PartialBasis, a2: PartialBasis, overlap=None) -> PartialBasis:
    """Stitch two partial column bases through their shared rows.

    The linear map N aligning ``a2`` to ``a1`` on the overlap is the
    least-squares solution of a2|overlap @ N = a1|overlap; rows unique to
    ``a2`` are appended as a2|new @ N.
    """
    r = a1.rank
    if a2.rank != r:
        raise ParameterError("bases have different ranks")
    if overlap is None:
        overlap = np.intersect1d(a1.rows, a2.rows)
    overlap = np.asarray(overlap, dtype=int)
    if overlap.size < r:
        raise CombinationError(
            f"overlap of {overlap.size} rows is smaller than rank {r}"
        )
    a12 = a1.restrict(overlap)
    a21 = a2.restrict(overlap)
    n_map, _, rank, _ = np.linalg.lstsq(a21, a12, rcond=None)
    if rank < r:
        raise CombinationError("overlap block is rank-deficient")
    new_rows = np.setdiff1d(a2.rows, a1.rows)
    if new_rows.size == 0:
        return a1
    extension = a2.restrict(new_rows) @ n_map
    return PartialBasis(np.concatenate([a1.rows, new_rows]),
                        np.vstack([a1.matrix, extension]))


def _grow_block(order, col_rows, a, r):
    """Maximal block from start position a: columns added in scan order while
    the common fully observed row window keeps at least r rows.  Returns the
    column list and the running window per width."""
    cols = [order[a]]
    windows = [col_rows[order[a]].copy()]
    k = a + 1
    while k < len(order):
        cand = windows[-1] & col_rows[order[k]]
        if int(cand.sum()) < r:
            break
        windows.append(cand)
        cols.append(order[k])
        k += 1
    return cols, windows


def find_block_chain(obs: MaskedMatrix, r: int) -> list:
    """Greedy chain of overlapping complete blocks.

    Columns are scanned in order of first observed row.  A block grows from
    a start column while its columns share a fully observed row window of at
    least r rows.  The chain is seeded with the largest such block (area,
    ties by scan position); further blocks are accepted, widest first at
    each start position, when they share at least r rows with the
    accumulated coverage and add new rows or columns.  The scan repeats
    until no block extends the coverage.
    """
    mask = obs.mask > 0
    n_rows, n_cols = mask.shape
    col_rows = [mask[:, j] for j in range(n_cols)]
    nonempty = [j for j in range(n_cols) if col_rows[j].any()]
    if not nonempty:
        return []
    order = sorted(nonempty, key=lambda j: (int(np.argmax(col_rows[j])), j))

    def make_block(cols, window):
        row_idx = np.flatnonzero(window)
        return CompleteBlock(row_idx, np.asarray(cols),
                             obs.values[np.ix_(row_idx, cols)])

    best = None
    for a in range(len(order)):
        cols, windows = _grow_block(order, col_rows, a, r)
        if int(windows[-1].sum()) < r or len(cols) < r:
            continue
        area = int(windows[-1].sum()) * len(cols)
        if best is None or area > best[0]:
            best = (area, cols, windows[-1])
    if best is None:
        return []
    _, seed_cols, seed_window = best
    blocks = [make_block(seed_cols, seed_window)]
    accum_rows = seed_window.copy()
    accum_cols = set(seed_cols)

    progress = True
    while progress:
        progress = False
        for a in range(len(order)):
            cols, windows = _grow_block(order, col_rows, a, r)
            for width in range(len(cols), r - 1, -1):
                rows_w = windows[width - 1]
                if int(rows_w.sum()) < r:
                    continue
                if int((rows_w & accum_rows).sum()) < r:
                    continue
                sub_cols = cols[:width]
                adds_new = bool((rows_w & ~accum_rows).any()) or any(
                    c not in accum_cols for c in sub_cols
                )
                if not adds_new:
                    continue
                blocks.append(make_block(sub_cols, rows_w))
                accum_rows |= rows_w
                accum_cols.update(sub_cols)
                progress = True
                break
            if progress:
                break
    return blocks


def column_mean_fill(obs: MaskedMatrix) -> np.ndarray:
    """Missing entries replaced by the column mean of observed entries
    (global mean when a column has none)."""
    counts = obs.mask.sum(axis=0)
    sums = (obs.values * obs.mask).sum(axis=0)
    total = obs.mask.sum()
    global_mean = float((obs.values * obs.mask).sum() / total) if total else 0.0
    col_means = np.where(counts > 0, sums / np.maximum(counts, 1.0), global_mean)
    return obs.values * obs.mask + (1.0 - obs.mask) * col_means[None, :]


@dataclass
class InitGuess:
    """Full-shape initial estimate plus provenance of how it was built."""

    guess: np.ndarray
    fallback: bool
    blocks: list = field(default_factory=list)
    notes: list = field(default_factory=list)


def heuristic_init(obs: MaskedMatrix, r: int) -> InitGuess:
    """Rank-r initial guess built from fully observed blocks.

    Falls back to column-mean filling (``fallback=True``) when no block
    chain can be built.
    """
    if r < 1 or r > min(obs.shape):
        raise ParameterError(f"rank {r} out of range for shape {obs.shape}")
    if obs.n_observed == obs.values.size:
        block = CompleteBlock(np.arange(obs.n_rows), np.arange(obs.n_cols), obs.values)
        return InitGuess(rank_project(obs.values, r), False, [block])

    blocks = find_block_chain(obs, r)
    if not blocks:
        return InitGuess(column_mean_fill(obs), True, [],
                         ["no complete block chain; column-mean fill"])
    notes = []
    try:
        basis = block_basis(blocks[0], r)
        for blk in blocks[1:]:
            basis = subspace_combine(basis, block_basis(blk, r))
    except (InitializationError, CombinationError) as exc:
        return InitGuess(column_mean_fill(obs), True, blocks,
                         [f"block stitching failed ({exc}); column-mean fill"])

    n_rows, n_cols = obs.shape
    col_basis = np.zeros((n_rows, r))
    col_basis[basis.rows] = basis.matrix
    covered = np.zeros(n_rows, dtype=bool)
    covered[basis.rows] = True

    mask = obs.mask > 0
    row_space = np.zeros((r, n_cols))
    deferred = []
    for p in range(n_cols):
        idx = mask[:, p] & covered
        if not idx.any():
            deferred.append(p)
            continue
        row_space[:, p] = np.linalg.lstsq(col_basis[idx], obs.values[idx, p], rcond=None)[0]
    for f in np.flatnonzero(~covered):
        idx = mask[f]
        if idx.any():
            col_basis[f] = np.linalg.lstsq(row_space[:, idx].T, obs.values[f, idx],
                                           rcond=None)[0]
        else:
            notes.append(f"row {f} has no observations; left at zero")
    for p in deferred:
        idx = mask[:, p]
        if idx.any():
            row_space[:, p] = np.linalg.lstsq(col_basis[idx], obs.values[idx, p],
                                              rcond=None)[0]
        else:
            notes.append(f"column {p} has no observations; left at zero")
    return InitGuess(col_basis @ row_space, False, blocks, notes)


def random_init(obs: MaskedMatrix, mean: float, rng) -> np.ndarray:
    """Observed entries kept, missing entries drawn uniform on [0, 2*mean]."""
    guess = rng.uniform(0.0, 2.0 * mean, size=obs.shape)
    return obs.values * obs.mask + (1.0 - obs.mask) * guess


def constant_init(obs: MaskedMatrix, value: float) -> np.ndarray:
    """Observed entries kept, missing entries set to a constant."""
    return obs.values * obs.mask + (1.0 - obs.mask) * value
