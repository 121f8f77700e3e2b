"""Plain-text file formats for datasets, coupling matrices and trajectories.

Floats use a fixed format and JSON keys are sorted, so reruns produce
byte-identical files.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .decimation import CRITERIA, DecimationTrajectory, StepRecord
from .model import CouplingMatrix, SampleSet

FLOAT_FMT = "%.17g"
TRAJECTORY_COLUMNS = ("step", "K", "k", "L", "TIC", "AIC", "AICc", "BIC")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        # JSON has no inf/nan; keep them readable and round-trippable
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def write_array(path, a, fmt: str = FLOAT_FMT) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    a = np.atleast_2d(np.asarray(a))
    np.savetxt(path, a, fmt=fmt, delimiter=",")
    return path


def read_array(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float, ndmin=2))


def write_matrix(path, m: CouplingMatrix, meta: dict | None = None) -> Path:
    """``<stem>.csv`` with the entries, ``<stem>_mask.csv`` (0/1) and a
    ``<stem>.json`` sidecar."""
    path = Path(path)
    mask_path = path.with_name(path.stem + "_mask.csv")
    write_array(path, m.entries)
    write_array(mask_path, m.mask.astype(int), fmt="%d")
    sidecar = {"n": m.n, "mask_path": mask_path.name}
    sidecar.update(meta or {})
    write_json(path.with_suffix(".json"), sidecar)
    return path


def read_matrix(path) -> tuple[CouplingMatrix, dict]:
    path = Path(path)
    meta = read_json(path.with_suffix(".json"))
    entries = read_array(path)
    mask = read_array(path.with_name(meta["mask_path"])).astype(bool)
    return CouplingMatrix(entries, mask), meta


def write_dataset(directory, ds: SampleSet, meta: dict) -> Path:
    """``dataset.csv`` (M x N, inputs then outputs) plus ``dataset.json``."""
    directory = Path(directory)
    write_array(directory / "dataset.csv", ds.values)
    sidecar = dict(meta)
    sidecar.update(M=len(ds), shifted=ds.shifted, channel_means=ds.channel_means)
    write_json(directory / "dataset.json", sidecar)
    return directory


def read_dataset(directory) -> tuple[SampleSet, dict]:
    directory = Path(directory)
    meta = read_json(directory / "dataset.json")
    values = read_array(directory / "dataset.csv")
    if values.shape[0] != meta["M"]:
        raise ValueError(f"dataset.csv has {values.shape[0]} rows, metadata says {meta['M']}")
    return SampleSet(values, np.asarray(meta["channel_means"]), bool(meta["shifted"])), meta


def _fmt(x: float) -> str:
    return FLOAT_FMT % x


def trajectory_rows(traj: DecimationTrajectory):
    for r in traj.records:
        yield (r.step, r.k_active, _fmt(r.k_frac), _fmt(r.l_value), _fmt(r.tic), _fmt(r.aic),
               _fmt(r.aicc), _fmt(r.bic))


def write_trajectory(path, traj: DecimationTrajectory) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        w.writerows(trajectory_rows(traj))
    return path


def read_trajectory(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (int(v) if k in ("step", "K") else float(v)) for k, v in row.items()} for row in rows]


# checkpoints: raw step records plus every step model, enough to resume


def _record_dict(r: StepRecord) -> dict:
    return dict(r.__dict__)


def save_checkpoint(directory, records, models) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    step = len(records) - 1
    m = models[-1]
    np.save(directory / f"step_{step:04d}_entries.npy", m.entries)
    np.save(directory / f"step_{step:04d}_mask.npy", m.mask)
    # written last: a step counts as done only once the state file names it
    write_json(directory / "state.json", {"last_step": step,
                                          "records": [_record_dict(r) for r in records]})


def load_checkpoint(directory):
    """``(records, models)`` from a checkpoint directory, or ``None``."""
    directory = Path(directory)
    state_path = directory / "state.json"
    if not state_path.exists():
        return None
    state = read_json(state_path)
    records = []
    for raw in state["records"]:
        raw = {k: (float(v) if isinstance(v, str) else v) for k, v in raw.items()}
        records.append(StepRecord(**raw))
    models = []
    for step in range(state["last_step"] + 1):
        entries = np.load(directory / f"step_{step:04d}_entries.npy")
        mask = np.load(directory / f"step_{step:04d}_mask.npy")
        models.append(CouplingMatrix(entries, mask))
    return records, models


def selected_summary(traj: DecimationTrajectory) -> dict:
    out = {}
    for name in CRITERIA:
        step = traj.selected_step(name)
        r = traj.records[step]
        out[name] = {"step": step, "K": r.k_active, "n_T_active": r.n_t_active,
                     "L": r.l_value}
    return out
