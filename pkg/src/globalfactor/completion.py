"""Iterative rank-r fits to incomplete observations: EM and Row-Column.

Both solvers take an initial full-shape guess and iterate until the masked
Frobenius error stabilizes (relative decrease below ``tol``) or ``max_iter``
is reached.  ``converged`` in the result means the error stabilized, which
for a stalled run can happen far from the optimum.

The masked least-squares subproblems are solved with an economic QR per
distinct mask pattern when ``ridge == 0`` (numerically stable, exact
minimizer) and with ridged normal equations otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeMismatchError, SingularSystemError
from .masked import LowRankFactor, MaskedMatrix, masked_frobenius

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SolverConfig:
    """Iteration controls shared by both solvers.

    ``tol`` is the relative masked-error decrease below which the run stops.
    ``ridge`` regularizes near-singular normal systems; with the default 0
    an exactly singular column/row system raises ``SingularSystemError``
    unless ``min_norm_fallback`` asks for the minimum-norm solution instead
    (recorded as a warning in the result).
    """

    rank: int = 4
    max_iter: int = 100
    tol: float = 1e-9
    ridge: float = 0.0
    min_norm_fallback: bool = False

    def __post_init__(self):
        if self.rank < 1:
            raise ParameterError("rank must be positive")
        if self.max_iter < 1:
            raise ParameterError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ParameterError("tol must be positive")
        if self.ridge < 0:
            raise ParameterError("ridge must be nonnegative")


@dataclass
class CompletionResult:
    estimate: LowRankFactor
    error_trace: np.ndarray  # masked Frobenius error, one entry per iteration
    sigma1_trace: np.ndarray  # largest singular value of the iterate
    iterations: int
    converged: bool
    warnings: list = field(default_factory=list)

    def completed(self) -> np.ndarray:
        """Dense completed matrix (the factor product)."""
        return self.estimate.product()

    @property
    def final_error(self) -> float:
        return float(self.error_trace[-1])


def _check_inputs(obs: MaskedMatrix, init, cfg: SolverConfig) -> np.ndarray:
    init = np.asarray(init, dtype=float)
    if init.shape != obs.shape:
        raise ShapeMismatchError(f"init shape {init.shape} != observation shape {obs.shape}")
    if cfg.rank > min(obs.shape):
        raise ParameterError(f"rank {cfg.rank} out of range for shape {obs.shape}")
    return init


def _stabilized(prev: float, cur: float, tol: float) -> bool:
    # Relative decrease below tol; a non-decrease (floor fluctuation) counts.
    return (prev - cur) < tol * prev


def _sigma1_product(col_space: np.ndarray, row_space: np.ndarray) -> float:
    # sigma1(A B) through the small r x P core, avoiding the 2F x P SVD.
    q, r = np.linalg.qr(col_space)
    return float(np.linalg.svd(r @ row_space, compute_uv=False)[0])


def _masked_lstsq_batch(design, rhs, mask, r, ridge, axis, min_norm_fallback, warnings_out):
    """Solve min ||design[i] @ x - rhs[i]|| for every i of a batch.

    design: (n, m, r) with masked-out rows already zeroed; rhs: (n, m) with
    masked-out entries zeroed; mask: (n, m).  Returns (n, r).
    """
    n = design.shape[0]
    obs_counts = mask.sum(axis=1)
    if ridge > 0.0:
        gram = np.matmul(design.transpose(0, 2, 1), design)
        gram += ridge * np.eye(r)
        proj = np.matmul(design.transpose(0, 2, 1), rhs[:, :, None])
        try:
            return np.linalg.solve(gram, proj)[..., 0]
        except np.linalg.LinAlgError:
            for i in range(n):
                try:
                    np.linalg.solve(gram[i], proj[i])
                except np.linalg.LinAlgError:
                    raise SingularSystemError(axis, i, "singular despite ridge") from None
            raise
    q, rr = np.linalg.qr(design)
    diag = np.abs(np.diagonal(rr, axis1=1, axis2=2))
    scale = diag.max(axis=1)
    cutoff = design.shape[1] * _EPS * scale
    bad = (obs_counts < r) | (diag.min(axis=1) <= cutoff) | (scale == 0.0)
    solution = np.zeros((n, r))
    if bad.any():
        first = int(np.flatnonzero(bad)[0])
        if not min_norm_fallback:
            k = int(obs_counts[first])
            detail = (
                f"{k} observed entries < rank {r}" if k < r else "rank-deficient system"
            )
            raise SingularSystemError(axis, first, detail)
        for i in np.flatnonzero(bad):
            obs = mask[i] > 0
            if obs.any():
                solution[i] = np.linalg.lstsq(design[i][obs], rhs[i][obs], rcond=None)[0]
            if warnings_out is not None:
                warnings_out.append(
                    f"{axis} {i}: under-determined system, minimum-norm solution"
                )
    good = ~bad
    if good.any():
        qt_rhs = np.matmul(q[good].transpose(0, 2, 1), rhs[good][:, :, None])
        solution[good] = np.linalg.solve(rr[good], qt_rhs)[..., 0]
    return solution


def rc_row_step(obs: MaskedMatrix, col_space, ridge: float = 0.0, *,
                min_norm_fallback: bool = False, warnings_out=None) -> np.ndarray:
    """Masked least-squares fit of the row space, one column at a time.

    For each column p the observed rows select the active part of the
    system; the solution uses only those rows.  Returns the r x P row-space
    matrix.
    """
    col_space = np.asarray(col_space, dtype=float)
    if col_space.shape[0] != obs.n_rows:
        raise ShapeMismatchError("col_space rows must match observation rows")
    if not np.all(np.isfinite(col_space)):
        raise ParameterError("col_space must be finite")
    r = col_space.shape[1]
    mask_t = obs.mask.T  # (P, 2F)
    design = col_space[None, :, :] * mask_t[:, :, None]
    rhs = (obs.values * obs.mask).T
    sol = _masked_lstsq_batch(design, rhs, mask_t, r, ridge, "column",
                              min_norm_fallback, warnings_out)
    return sol.T


def rc_col_step(obs: MaskedMatrix, row_space, ridge: float = 0.0, *,
                min_norm_fallback: bool = False, warnings_out=None) -> np.ndarray:
    """Mirror of :func:`rc_row_step` applied to each of the 2F rows."""
    row_space = np.asarray(row_space, dtype=float)
    if row_space.shape[1] != obs.n_cols:
        raise ShapeMismatchError("row_space columns must match observation columns")
    if not np.all(np.isfinite(row_space)):
        raise ParameterError("row_space must be finite")
    r = row_space.shape[0]
    design = row_space.T[None, :, :] * obs.mask[:, :, None]  # (2F, P, r)
    rhs = obs.values * obs.mask
    sol = _masked_lstsq_batch(design, rhs, obs.mask, r, ridge, "row",
                              min_norm_fallback, warnings_out)
    return sol


def em_complete(obs: MaskedMatrix, init, cfg: SolverConfig,
                track_sigma1: bool = True) -> CompletionResult:
    """Expectation-Maximization completion.

    E-step fills missing entries from the previous rank-r estimate, M-step
    re-projects the completed matrix onto rank r.
    """
    init = _check_inputs(obs, init, cfg)
    r = cfg.rank
    known = obs.values * obs.mask
    unknown = 1.0 - obs.mask
    estimate = init
    errors, sigma1s = [], []
    converged = False
    u = s = vt = None
    for _ in range(cfg.max_iter):
        completed = known + estimate * unknown
        u, s, vt = np.linalg.svd(completed, full_matrices=False)
        estimate = (u[:, :r] * s[:r]) @ vt[:r]
        err = masked_frobenius(obs, estimate)
        errors.append(err)
        if track_sigma1:
            sigma1s.append(float(s[0]))
        if err == 0.0 or (len(errors) > 1 and _stabilized(errors[-2], err, cfg.tol)):
            converged = True
            break
    factor = LowRankFactor(u[:, :r] * s[:r], vt[:r], r)
    return CompletionResult(factor, np.asarray(errors), np.asarray(sigma1s),
                            len(errors), converged, [])


def rc_complete(obs: MaskedMatrix, init, cfg: SolverConfig,
                track_sigma1: bool = True) -> CompletionResult:
    """Row-Column completion (alternating masked least squares).

    The column space is seeded with the first r left singular vectors of
    ``init`` scaled by the singular values; each iteration runs one row-space
    and one column-space step.  ``track_sigma1=False`` skips the per-iterate
    largest-singular-value diagnostic (the trace is then empty).
    """
    init = _check_inputs(obs, init, cfg)
    r = cfg.rank
    u, s, _ = np.linalg.svd(init, full_matrices=False)
    col_space = u[:, :r] * s[:r]
    if cfg.ridge > 0.0 and not track_sigma1:
        result = _rc_complete_kernel(obs, col_space, cfg)
        if result is not None:
            return result
    row_space = None
    errors, sigma1s = [], []
    warnings_out: list = []
    converged = False
    for _ in range(cfg.max_iter):
        row_space = rc_row_step(obs, col_space, cfg.ridge,
                                min_norm_fallback=cfg.min_norm_fallback,
                                warnings_out=warnings_out)
        col_space = rc_col_step(obs, row_space, cfg.ridge,
                                min_norm_fallback=cfg.min_norm_fallback,
                                warnings_out=warnings_out)
        err = masked_frobenius(obs, col_space @ row_space)
        errors.append(err)
        if track_sigma1:
            sigma1s.append(_sigma1_product(col_space, row_space))
        if err == 0.0 or (len(errors) > 1 and _stabilized(errors[-2], err, cfg.tol)):
            converged = True
            break
    factor = LowRankFactor(col_space, row_space, r)
    unique_warnings = sorted(set(warnings_out))
    return CompletionResult(factor, np.asarray(errors), np.asarray(sigma1s),
                            len(errors), converged, unique_warnings)


def _rc_complete_kernel(obs: MaskedMatrix, col_space, cfg: SolverConfig):
    """Ridged RC via the numba kernel; None when unavailable or unstable."""
    from . import _kernels

    if not _kernels.have_kernel():
        return None
    a_mat, b_mat, trace, n_done, ok = _kernels.rc_ridge_iterations(
        obs.values, obs.mask, np.ascontiguousarray(col_space),
        cfg.max_iter, cfg.tol, cfg.ridge)
    if not ok or n_done == 0:
        return None
    converged = trace[-1] == 0.0 or (
        n_done > 1 and _stabilized(trace[-2], trace[-1], cfg.tol))
    if not converged and n_done < cfg.max_iter:
        return None
    factor = LowRankFactor(a_mat, b_mat, cfg.rank)
    return CompletionResult(factor, trace, np.asarray([]), n_done, converged, [])


def complete(obs: MaskedMatrix, init, cfg: SolverConfig, algo: str = "rc",
             track_sigma1: bool = True) -> CompletionResult:
    """Dispatch helper: ``algo`` is "rc" or "em"."""
    if algo == "rc":
        return rc_complete(obs, init, cfg, track_sigma1)
    if algo == "em":
        return em_complete(obs, init, cfg, track_sigma1)
    raise ParameterError(f"unknown algorithm {algo!r}")
