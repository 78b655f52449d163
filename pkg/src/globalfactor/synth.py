"""Synthetic ground-truth generators reproducing the experimental setups.

Scenes are rigid point sets (cylinder surface or random box) observed under
orthographic projection while the camera sweeps around the object.  Feature
visibility follows the video-like pattern: each feature is tracked over a
contiguous frame window, and interrupted features re-appear after a gap,
producing one observation column per tracking period plus the ground-truth
merge plan that re-joins them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeMismatchError
from .masked import MaskedMatrix, masked_frobenius
from .rearrange import MergePlan
from .sfm import RigidModel


def _rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of one synthetic scene.

    ``window`` is the nominal (width, height) of the image coordinate range;
    scene size and translations are derived from it.  Frame-count-dependent
    track lengths default to fractions that reproduce the benchmark regimes
    (cylinder: ~26% missing; random-box: ~54% known with 15 interruptions).
    """

    num_points: int = 40
    num_frames: int = 30
    shape_kind: str = "random-box"  # "cylinder" | "random-box"
    rotation_sweep: float | None = None  # radians; default per kind
    rotation_tilt: float | None = None
    noise_std: float = 1.0
    window: tuple = (120.0, 160.0)
    n_interrupted: int = 0
    visible_frames: int | None = None  # cylinder arc length (frames)
    interrupted_run: int | None = None  # cylinder: frames per run of a split arc
    full_len: int | None = None  # box: uninterrupted window length
    full_margin: int | None = None  # box: frames kept clear at the sweep edges
    half_len: int | None = None  # box: frames per tracking period of a split track
    min_separation: float | None = None  # box: minimum pairwise 3-D distance
    elevation: float | None = None  # constant camera elevation (radians)
    seed: int = 0

    def __post_init__(self):
        if self.num_points < 4:
            raise ParameterError("num_points must be >= 4")
        if self.num_frames < 3:
            raise ParameterError("num_frames must be >= 3")
        if self.noise_std < 0:
            raise ParameterError("noise_std must be nonnegative")
        if self.shape_kind not in ("cylinder", "random-box"):
            raise ParameterError(f"unknown shape_kind {self.shape_kind!r}")
        if self.n_interrupted < 0 or self.n_interrupted > self.num_points:
            raise ParameterError("n_interrupted out of range")

    @property
    def sweep(self) -> float:
        if self.rotation_sweep is not None:
            return self.rotation_sweep
        return 2.0 * np.pi if self.shape_kind == "cylinder" else 2.9

    @property
    def tilt(self) -> float:
        if self.rotation_tilt is not None:
            return self.rotation_tilt
        return 0.0 if self.shape_kind == "cylinder" else 0.3

    @property
    def camera_elevation(self) -> float:
        if self.elevation is not None:
            return self.elevation
        return 0.0 if self.shape_kind == "cylinder" else 0.25


def _motion(spec: SceneSpec):
    f = spec.num_frames
    if spec.shape_kind == "cylinder":
        angles = np.linspace(0.0, spec.sweep, f, endpoint=False)
    else:
        # asymmetric sweep: a time-symmetric pan would make depth-mirrored
        # points trace each other's time-reversed tracks, creating spurious
        # merge ambiguities between interrupted features
        angles = np.linspace(-0.4 * spec.sweep, 0.6 * spec.sweep, f)
    rot = np.zeros((2 * f, 3))
    for i, th in enumerate(angles):
        pitch = spec.camera_elevation + spec.tilt * np.sin(2.5 * th + 0.8)
        frame_rot = _rot_x(pitch) @ _rot_y(th)
        rot[2 * i] = frame_rot[0]
        rot[2 * i + 1] = frame_rot[1]
    tx, ty = spec.window[0] / 2.0, spec.window[1] / 2.0
    trans = np.tile([tx, ty], f)
    return rot, trans


def _cylinder_points(spec: SceneSpec) -> np.ndarray:
    p = spec.num_points
    radius = spec.window[0] * 5.0 / 12.0
    height = spec.window[1] * 5.0 / 8.0
    n_rings = max(3, int(round(np.sqrt(p / 10.0))) + 3)
    base = p // n_rings
    counts = [base + (1 if k < p % n_rings else 0) for k in range(n_rings)]
    pts = []
    for k, n_k in enumerate(counts):
        h = -height / 2.0 + height * (k + 0.5) / n_rings
        for i in range(n_k):
            phi = 2.0 * np.pi * (i + 0.5 * (k % 2)) / n_k
            pts.append([radius * np.cos(phi), h, radius * np.sin(phi)])
    return np.asarray(pts)


def _box_points(spec: SceneSpec, rng) -> np.ndarray:
    hx = spec.window[0] * 0.4
    hy = spec.window[1] * 15.0 / 32.0
    lo = np.array([-hx, -hy, -hx])
    hi = np.array([hx, hy, hx])
    sep = spec.min_separation
    if sep is None:
        sep = 0.13 * spec.window[0]
    if sep <= 0:
        return rng.uniform(lo, hi, size=(spec.num_points, 3))
    # dart throwing: uniform draws rejected against already placed points
    pts = []
    attempts = 0
    while len(pts) < spec.num_points:
        cand = rng.uniform(lo, hi)
        attempts += 1
        if attempts > 200 * spec.num_points:
            raise ParameterError(
                "min_separation too large for the point count and scene volume")
        if all(np.linalg.norm(cand - q) >= sep for q in pts):
            pts.append(cand)
    return np.asarray(pts)


def _cylinder_tracks(spec: SceneSpec, points, rng):
    f = spec.num_frames
    arc = spec.visible_frames if spec.visible_frames is not None else int(round(0.74 * f))
    if not (1 <= arc <= f):
        raise ParameterError("visible_frames out of range")
    run = spec.interrupted_run if spec.interrupted_run is not None else int(round(0.28 * f))
    if spec.n_interrupted and (run < 1 or 2 * run >= arc):
        raise ParameterError("interrupted_run must leave a positive gap inside the arc")
    phi = np.mod(np.arctan2(points[:, 2], points[:, 0]), 2.0 * np.pi)
    starts = np.floor(phi / (2.0 * np.pi) * (f - arc + 1)).astype(int)
    starts = np.clip(starts, 0, f - arc)
    interrupted = np.sort(rng.choice(spec.num_points, size=spec.n_interrupted,
                                     replace=False)) if spec.n_interrupted else []
    tracks = []
    for p in range(spec.num_points):
        s = int(starts[p])
        if p in interrupted:
            tracks.append((p, np.arange(s, s + run)))
            tracks.append((p, np.arange(s + arc - run, s + arc)))
        else:
            tracks.append((p, np.arange(s, s + arc)))
    return tracks


def _box_tracks(spec: SceneSpec, rng):
    f = spec.num_frames
    full_len = spec.full_len if spec.full_len is not None else int(round(f * 23.0 / 30.0))
    margin = spec.full_margin if spec.full_margin is not None else max(1, round(f * 0.1))
    half_len = spec.half_len if spec.half_len is not None else max(2, round(f / 3.0))
    interrupted = np.sort(rng.choice(spec.num_points, size=spec.n_interrupted,
                                     replace=False)) if spec.n_interrupted else []
    tracks = []
    for p in range(spec.num_points):
        if p in interrupted:
            l1 = half_len + int(rng.integers(0, 2))
            l2 = half_len + int(rng.integers(0, 2))
            if l1 + l2 >= f:
                raise ParameterError("half_len too long for the frame count")
            tracks.append((p, np.arange(0, l1)))
            tracks.append((p, np.arange(f - l2, f)))
        else:
            length = full_len + int(rng.integers(-1, 2))
            length = max(1, min(length, f - 2 * margin))
            lo = margin
            hi = max(f - length - margin, lo)
            s0 = int(rng.integers(lo, hi + 1))
            tracks.append((p, np.arange(s0, min(s0 + length, f - margin))))
    return tracks


def gen_scene(spec: SceneSpec):
    """Build (observation, ground-truth model, true merge plan) for a spec.

    The observation has one column per tracking period; the true plan's
    k-th group lists the columns of feature k, matching the k-th row of the
    ground-truth shape.
    """
    rng = np.random.default_rng(spec.seed)
    if spec.shape_kind == "cylinder":
        points = _cylinder_points(spec)
    else:
        points = _box_points(spec, rng)
    rot, trans = _motion(spec)
    clean = rot @ points.T + trans[:, None]
    noisy = clean + spec.noise_std * rng.standard_normal(clean.shape)

    if spec.shape_kind == "cylinder":
        tracks = _cylinder_tracks(spec, points, rng)
    else:
        tracks = _box_tracks(spec, rng)

    f = spec.num_frames
    n_cols = len(tracks)
    values = np.zeros((2 * f, n_cols))
    mask = np.zeros((2 * f, n_cols))
    groups = [[] for _ in range(spec.num_points)]
    for j, (p, frames) in enumerate(tracks):
        groups[p].append(j)
        values[2 * frames, j] = noisy[2 * frames, p]
        values[2 * frames + 1, j] = noisy[2 * frames + 1, p]
        mask[2 * frames, j] = 1.0
        mask[2 * frames + 1, j] = 1.0
        if frames.size == 0:
            warnings.warn(f"column {j} (feature {p}) has zero observations; retained")
    obs = MaskedMatrix(values, mask)
    truth = RigidModel(rot, trans, points)
    plan = MergePlan(tuple(tuple(g) for g in groups))
    return obs, truth, plan


def feature_of_column(plan: MergePlan) -> np.ndarray:
    """Inverse of the plan's groups: original column -> feature index."""
    out = np.zeros(plan.n_original, dtype=int)
    for k, g in enumerate(plan.groups):
        for c in g:
            out[c] = k
    return out


def gen_mask(pattern: str, shape, *, height: int | None = None,
             block_rows: int = 30, block_cols: int = 30,
             row0: int | None = None, col0: int | None = None,
             rate: float = 0.0, seed: int = 0) -> np.ndarray:
    """Binary masks with the three benchmark structures.

    banded: staircase, column j observed on ``height`` rows sliding from top
    to bottom.  block: one contiguous missing submatrix (bottom-right by
    default).  random: i.i.d. missing entries at ``rate``.
    """
    n_rows, n_cols = shape
    if pattern == "banded":
        if height is None or not (1 <= height <= n_rows):
            raise ParameterError("banded mask needs 1 <= height <= n_rows")
        mask = np.zeros((n_rows, n_cols))
        for j in range(n_cols):
            s = round(j * (n_rows - height) / max(n_cols - 1, 1))
            mask[s:s + height, j] = 1.0
        return mask
    if pattern == "block":
        r0 = n_rows - block_rows if row0 is None else row0
        c0 = n_cols - block_cols if col0 is None else col0
        if r0 < 0 or c0 < 0 or r0 + block_rows > n_rows or c0 + block_cols > n_cols:
            raise ParameterError("missing block does not fit inside the matrix")
        mask = np.ones((n_rows, n_cols))
        mask[r0:r0 + block_rows, c0:c0 + block_cols] = 0.0
        return mask
    if pattern == "random":
        if not (0.0 <= rate < 1.0):
            raise ParameterError("rate must be in [0, 1)")
        rng = np.random.default_rng(seed)
        return (rng.random((n_rows, n_cols)) >= rate).astype(float)
    raise ParameterError(f"unknown mask pattern {pattern!r}")


def gen_lowrank(n_rows: int, n_cols: int, rank: int, seed: int, *,
                mean: float = 0.0, spread: float = 1.0) -> np.ndarray:
    """Random exact rank-r matrix; with ``mean`` != 0 the entries are scaled
    and shifted so their mean value is ~``mean`` (rank budget includes the
    constant component)."""
    if rank < 1 or rank > min(n_rows, n_cols):
        raise ParameterError("rank out of range")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n_rows, rank))
    b = rng.standard_normal((rank, n_cols))
    if mean == 0.0:
        return a @ b * (spread / np.sqrt(rank))
    a[:, 0] = 1.0
    b[0, :] = mean * (1.0 + 0.25 * rng.standard_normal(n_cols))
    if rank == 1:
        return a[:, :1] @ b[:1]
    fluct = a[:, 1:] @ b[1:] * (abs(mean) * spread / np.sqrt(rank - 1))
    return a[:, :1] @ b[:1] + fluct


def error_curve_theta(obs: MaskedMatrix, samples: int) -> np.ndarray:
    """Rank-1 masked-fit error of a 2x2 observation as a function of the
    row-space angle theta, on a uniform grid over [0, pi)."""
    if obs.shape != (2, 2):
        raise ParameterError("theta curve is defined for 2x2 observations")
    if obs.n_observed != 3:
        raise ParameterError("exactly one entry must be missing")
    if samples < 1:
        raise ParameterError("samples must be positive")
    thetas = np.arange(samples) * np.pi / samples
    out = np.zeros((samples, 2))
    w, m = obs.values, obs.mask
    for k, theta in enumerate(thetas):
        b = np.array([np.cos(theta), np.sin(theta)])
        a = np.zeros(2)
        for f in range(2):
            denom = float((m[f] * b * b).sum())
            a[f] = float((m[f] * w[f] * b).sum()) / denom if denom > 1e-15 else 0.0
        out[k] = (theta, masked_frobenius(obs, np.outer(a, b)))
    return out


def theta_of_row_space(row_space) -> float:
    """Angle in [0, pi) of a 1 x 2 row-space vector."""
    b = np.asarray(row_space, dtype=float).ravel()
    if b.size != 2:
        raise ShapeMismatchError("expected a 1x2 row space")
    return float(np.mod(np.arctan2(b[1], b[0]), np.pi))
