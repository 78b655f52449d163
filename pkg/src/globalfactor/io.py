"""File formats: CSV matrices (NaN = missing), masks, traces, JSON sidecars.

All writers format floats with repr-roundtrip precision so reruns with the
same inputs produce byte-identical files.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .masked import MaskedMatrix
from .rearrange import MergePlan
from .sfm import RigidModel


def _fmt(x: float) -> str:
    if np.isnan(x):
        return "NaN"
    return f"{x:.17g}"


def write_matrix_csv(path, obs: MaskedMatrix) -> None:
    """One row per line, comma separated, missing entries as literal NaN."""
    dense = obs.with_nan()
    lines = [",".join(_fmt(v) for v in row) for row in dense]
    Path(path).write_text("\n".join(lines) + "\n")


def write_dense_csv(path, matrix) -> None:
    matrix = np.asarray(matrix, dtype=float)
    lines = [",".join(_fmt(v) for v in row) for row in matrix]
    Path(path).write_text("\n".join(lines) + "\n")


def write_mask_csv(path, mask) -> None:
    mask = np.asarray(mask)
    lines = [",".join(str(int(v)) for v in row) for row in mask]
    Path(path).write_text("\n".join(lines) + "\n")


def read_dense_csv(path) -> np.ndarray:
    rows = []
    for line in Path(path).read_text().strip().splitlines():
        rows.append([float(tok) for tok in line.split(",")])
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise ParameterError(f"{path}: ragged or empty CSV matrix")
    return np.asarray(rows, dtype=float)


def read_matrix_csv(path, mask_path=None) -> MaskedMatrix:
    """Load a matrix CSV; mask from NaN entries or an explicit 0/1 CSV."""
    values = read_dense_csv(path)
    if mask_path is None:
        return MaskedMatrix.from_nan(values)
    mask = read_dense_csv(mask_path)
    if mask.shape != values.shape:
        raise ParameterError("mask CSV shape differs from matrix CSV")
    if np.any((mask != 0) & (mask != 1)):
        raise ParameterError("mask CSV entries must be 0 or 1")
    if np.any(~np.isfinite(values) & (mask == 1)):
        raise ParameterError("mask marks a NaN entry as observed")
    return MaskedMatrix(np.where(mask == 1, values, 0.0), mask)


def write_trace_csv(path, error_trace, sigma1_trace) -> None:
    lines = ["iteration,masked_error,sigma1"]
    for k, (e, s1) in enumerate(zip(error_trace, sigma1_trace), start=1):
        lines.append(f"{k},{_fmt(e)},{_fmt(s1)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def write_truth_sidecar(path, model: RigidModel, plan: MergePlan, spec_dict) -> None:
    write_json(path, {
        "model": model.to_json_dict(),
        "true_plan": plan.to_json_dict(),
        "scene": spec_dict,
    })


def read_truth_sidecar(path):
    payload = read_json(path)
    model = RigidModel.from_json_dict(payload["model"])
    plan = MergePlan.from_json_dict(payload["true_plan"])
    return model, plan, payload.get("scene", {})


def write_manifest(path, subcommand: str, params: dict, outputs: list) -> None:
    """Reproducibility record: everything needed to re-run the command.

    ``created_at`` is the only field expected to differ between identical
    reruns; all output files themselves are byte-stable.
    """
    write_json(path, {
        "subcommand": subcommand,
        "params": params,
        "outputs": outputs,
        "created_at": datetime.now(timezone.utc).isoformat(),
    })
