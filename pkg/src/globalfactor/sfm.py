"""Rigid structure from motion from a completed rank-4 observation matrix.

Orthographic factorization: translations are the row means, the centered
matrix is rank-3 factored, and a metric upgrade solves the linear system in
the 6 unknowns of Q Q^T imposed by the orthonormality of paired rotation
rows.  Error metrics compare reconstructions to ground truth after an
optimal similarity alignment (scale, orthogonal transform incl. reflection,
translation) of the shapes; the mirror ambiguity of orthographic data makes
reflection-inclusive alignment necessary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfigurationError, ParameterError, ShapeMismatchError

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class RigidModel:
    """3-D motion (paired rotation rows, translations) and 3-D shape."""

    rotations: np.ndarray  # 2F x 3, rows (x_f, y_f) per frame
    translations: np.ndarray  # 2F
    shape: np.ndarray  # P x 3

    def __post_init__(self):
        rot = np.asarray(self.rotations, dtype=float)
        tr = np.asarray(self.translations, dtype=float)
        shp = np.asarray(self.shape, dtype=float)
        if rot.ndim != 2 or rot.shape[1] != 3 or rot.shape[0] % 2:
            raise ParameterError("rotations must be 2F x 3")
        if tr.shape != (rot.shape[0],):
            raise ShapeMismatchError("translations must have one entry per measurement row")
        if shp.ndim != 2 or shp.shape[1] != 3:
            raise ParameterError("shape must be P x 3")
        object.__setattr__(self, "rotations", rot)
        object.__setattr__(self, "translations", tr)
        object.__setattr__(self, "shape", shp)

    @property
    def n_frames(self) -> int:
        return self.rotations.shape[0] // 2

    @property
    def n_points(self) -> int:
        return self.shape.shape[0]

    def reproject(self) -> np.ndarray:
        return self.rotations @ self.shape.T + self.translations[:, None]

    def to_json_dict(self) -> dict:
        return {
            "rotations": self.rotations.tolist(),
            "translations": self.translations.tolist(),
            "shape": self.shape.tolist(),
        }

    @classmethod
    def from_json_dict(cls, payload) -> "RigidModel":
        return cls(np.asarray(payload["rotations"]),
                   np.asarray(payload["translations"]),
                   np.asarray(payload["shape"]))

    def to_ply(self) -> str:
        """ASCII PLY point cloud of the shape."""
        lines = [
            "ply",
            "format ascii 1.0",
            f"element vertex {self.n_points}",
            "property float x",
            "property float y",
            "property float z",
            "end_header",
        ]
        for p in self.shape:
            lines.append(f"{p[0]:.8g} {p[1]:.8g} {p[2]:.8g}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ErrorReport:
    shape_rmse: float
    motion_rmse: float
    per_point: np.ndarray

    def to_json_dict(self) -> dict:
        return {
            "shape_rmse": self.shape_rmse,
            "motion_rmse": self.motion_rmse,
            "per_point": np.asarray(self.per_point).tolist(),
        }


def _symmetric_from_vech(l6) -> np.ndarray:
    return np.array([
        [l6[0], l6[1], l6[2]],
        [l6[1], l6[3], l6[4]],
        [l6[2], l6[4], l6[5]],
    ])


def _vech_row(a, b) -> np.ndarray:
    # coefficients of a^T L b in the 6 free entries of symmetric L
    return np.array([
        a[0] * b[0],
        a[0] * b[1] + a[1] * b[0],
        a[0] * b[2] + a[2] * b[0],
        a[1] * b[1],
        a[1] * b[2] + a[2] * b[1],
        a[2] * b[2],
    ])


def factorize_sfm(completed) -> RigidModel:
    """Recover rotations, translations, and shape from a completed matrix.

    The input should be (numerically) rank 4; coplanar scenes and other
    configurations without a positive-definite metric raise
    ``DegenerateConfigurationError``.
    """
    w = np.asarray(completed, dtype=float)
    if w.ndim != 2 or w.shape[0] % 2:
        raise ParameterError("completed matrix must be 2F x P")
    n_frames = w.shape[0] // 2
    if n_frames < 2:
        raise ParameterError("at least two frames are required")
    if w.shape[1] < 3:
        raise ParameterError("at least three points are required")

    translations = w.mean(axis=1)
    centered = w - translations[:, None]
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[2] <= 1e-9 * s[0]:
        raise DegenerateConfigurationError(
            "centered matrix is numerically rank <= 2 (coplanar scene?)"
        )
    rot_affine = u[:, :3] * np.sqrt(s[:3])
    shape_affine = (np.sqrt(s[:3])[:, None] * vt[:3]).T

    rows = np.zeros((3 * n_frames, 6))
    rhs = np.zeros(3 * n_frames)
    for f in range(n_frames):
        x, y = rot_affine[2 * f], rot_affine[2 * f + 1]
        rows[3 * f] = _vech_row(x, x)
        rhs[3 * f] = 1.0
        rows[3 * f + 1] = _vech_row(y, y)
        rhs[3 * f + 1] = 1.0
        rows[3 * f + 2] = _vech_row(x, y)
    l6, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
    metric = _symmetric_from_vech(l6)
    eigvals, eigvecs = np.linalg.eigh(metric)
    if np.any(eigvals <= 1e-10 * max(eigvals.max(), _EPS)):
        raise DegenerateConfigurationError(
            "metric upgrade is not positive definite"
        )
    mix = eigvecs @ np.diag(np.sqrt(eigvals))
    rotations = rot_affine @ mix
    shape = shape_affine @ np.linalg.inv(mix).T

    # gauge: rotate so the first frame's rows become ([1,0,0], [0,1,0])
    x0 = rotations[0] / np.linalg.norm(rotations[0])
    y0 = rotations[1] - (rotations[1] @ x0) * x0
    y0 = y0 / np.linalg.norm(y0)
    gauge = np.vstack([x0, y0, np.cross(x0, y0)])
    return RigidModel(rotations @ gauge.T, translations, shape @ gauge.T)


def similarity_align(source, target, allow_reflection: bool = True):
    """Least-squares similarity (c, O, t) mapping source onto target.

    Returns (scale, orthogonal matrix, translation) minimizing
    ||c * source @ O.T + t - target||.  With ``allow_reflection`` the
    orthogonal factor may have determinant -1, resolving the mirror
    ambiguity of orthographic reconstructions.
    """
    src = np.asarray(source, dtype=float)
    dst = np.asarray(target, dtype=float)
    if src.shape != dst.shape:
        raise ShapeMismatchError("point sets must have equal shapes")
    if src.shape[0] < 3:
        raise ParameterError("at least three points are required for alignment")
    mu_s, mu_d = src.mean(axis=0), dst.mean(axis=0)
    cov = (dst - mu_d).T @ (src - mu_s) / src.shape[0]
    u, d, vt = np.linalg.svd(cov)
    sign = np.eye(3)
    if not allow_reflection and np.linalg.det(u @ vt) < 0:
        sign[2, 2] = -1.0
    orth = u @ sign @ vt
    var = ((src - mu_s) ** 2).sum() / src.shape[0]
    if var <= 0:
        raise ParameterError("degenerate (coincident) source points")
    scale = float((d * np.diag(sign)).sum() / var)
    offset = mu_d - scale * orth @ mu_s
    return scale, orth, offset


def shape_error(estimated, truth) -> float:
    """RMSE between point sets after optimal similarity alignment."""
    report = evaluate_shape(estimated, truth)
    return report[0]


def evaluate_shape(estimated, truth):
    """(RMSE, per-point residuals, alignment) after similarity alignment."""
    est = np.asarray(estimated, dtype=float)
    tru = np.asarray(truth, dtype=float)
    scale, orth, offset = similarity_align(est, tru)
    aligned = scale * est @ orth.T + offset
    residuals = np.linalg.norm(aligned - tru, axis=1)
    return float(np.sqrt((residuals ** 2).mean())), residuals, (scale, orth, offset)


def motion_error(estimated: RigidModel, truth: RigidModel) -> float:
    """RMSE over frames of rotation-row deviation, gauge-aligned via shape."""
    if estimated.n_frames != truth.n_frames:
        raise ShapeMismatchError("frame counts differ")
    if estimated.n_points != truth.n_points:
        raise ShapeMismatchError("point counts differ (align correspondences first)")
    _, _, (scale, orth, offset) = evaluate_shape(estimated.shape, truth.shape)
    rot_aligned = estimated.rotations @ orth.T
    diffs = rot_aligned - truth.rotations
    per_frame = np.sqrt((diffs ** 2).reshape(estimated.n_frames, -1).sum(axis=1))
    return float(np.sqrt((per_frame ** 2).mean()))


def evaluate_model(estimated: RigidModel, truth: RigidModel) -> ErrorReport:
    shape_rmse, per_point, _ = evaluate_shape(estimated.shape, truth.shape)
    return ErrorReport(shape_rmse, motion_error(estimated, truth), per_point)


def model_to_json(model: RigidModel) -> str:
    return json.dumps(model.to_json_dict(), indent=2)
