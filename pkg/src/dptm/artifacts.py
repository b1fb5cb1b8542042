"""On-disk artifact formats for a run directory.

Binary blocks are raw little-endian arrays (float64 for checkpoints, float32
for datasets and traces), each paired with a YAML sidecar that records the
layout and the config hash.  ``metrics.csv`` carries the hash in a leading
``#`` comment line.

Layout::

    config.yaml                 config echo + hash
    metrics.csv                 one row per r, r = 0 is the source baseline
    checkpoints/model_rNN.bin   W (C x n*n, row-major) then b, <f8
    checkpoints/model_rNN.yaml
    data/{source,target}.f32    samples, <f4
    data/{source,target}.yaml   index: count, n, C, labels, domain, seed, spec
    traces/rNN.f32 + .yaml      optional manipulation trajectories, <f4
    selection.yaml              nuclear-norm selection outcome
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from .adapt import IterationMetrics
from .classifier import SoftmaxClassifier
from .errors import ValidationError

METRIC_COLUMNS = ("r", "trust_size", "trust_accuracy", "non_trust_size", "manipulated_size", "target_accuracy")
TRACE_FIELDS = ("z_t", "z_tilde", "z0_t", "z_tilde_prime")


class ArtifactError(ValidationError):
    """Missing, malformed or mismatched run artifacts."""


def _write_atomic(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _write_yaml(path: Path, obj: dict) -> None:
    _write_atomic(path, yaml.safe_dump(obj, sort_keys=False).encode("utf-8"))


def read_yaml(path: Path) -> dict:
    try:
        obj = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as e:
        raise ArtifactError(f"cannot read {path}: {e}") from None
    if not isinstance(obj, dict):
        raise ArtifactError(f"{path} is not a mapping")
    return obj


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


# -- metrics -----------------------------------------------------------------


def write_metrics(path, rows: Sequence[IterationMetrics], chash: str) -> None:
    buf = io.StringIO()
    buf.write(f"# config_hash: {chash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for m in rows:
        d = asdict(m)
        w.writerow([_fmt(d[c]) for c in METRIC_COLUMNS])
    _write_atomic(Path(path), buf.getvalue().encode("utf-8"))


def read_metrics(path) -> tuple[str, list[dict]]:
    """Return ``(config_hash, rows)``; numeric fields are parsed."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as e:
        raise ArtifactError(f"cannot read {path}: {e.strerror}") from None
    if not lines or not lines[0].startswith("# config_hash:"):
        raise ArtifactError(f"{path} has no config hash line")
    chash = lines[0].split(":", 1)[1].strip()
    reader = csv.DictReader(lines[1:])
    if tuple(reader.fieldnames or ()) != METRIC_COLUMNS:
        raise ArtifactError(f"{path} has columns {reader.fieldnames}")
    rows = []
    for rec in reader:
        rows.append({k: (float(v) if "accuracy" in k else int(v)) for k, v in rec.items()})
    return chash, rows


# -- checkpoints ---------------------------------------------------------------


def checkpoint_path(run_dir, r: int) -> Path:
    return Path(run_dir) / "checkpoints" / f"model_r{r:02d}.bin"


def save_checkpoint(run_dir, r: int, model: SoftmaxClassifier, chash: str) -> Path:
    path = checkpoint_path(run_dir, r)
    blob = np.concatenate([model.W.ravel(order="C"), model.b]).astype("<f8").tobytes()
    _write_atomic(path, blob)
    _write_yaml(
        path.with_suffix(".yaml"),
        {"r": int(r), "C": model.C, "n_features": model.n_features, "dtype": "<f8", "layout": "W row-major, then b", "config_hash": chash},
    )
    return path


def load_checkpoint(path) -> tuple[SoftmaxClassifier, dict]:
    path = Path(path)
    meta = read_yaml(path.with_suffix(".yaml"))
    C, F = int(meta["C"]), int(meta["n_features"])
    flat = np.fromfile(path, dtype="<f8").astype(np.float64)
    if flat.size != C * F + C:
        raise ArtifactError(f"{path}: expected {C * F + C} values, found {flat.size}")
    return SoftmaxClassifier(flat[: C * F].reshape(C, F), flat[C * F :]), meta


def list_checkpoints(run_dir) -> list[Path]:
    return sorted((Path(run_dir) / "checkpoints").glob("model_r*.bin"))


# -- datasets ------------------------------------------------------------------


def save_dataset(run_dir, name: str, X, y, domain: int, C: int, seed: int, spec: dict, chash: str) -> Path:
    path = Path(run_dir) / "data" / f"{name}.f32"
    X = np.asarray(X)
    _write_atomic(path, X.astype("<f4").tobytes())
    _write_yaml(
        path.with_suffix(".yaml"),
        {
            "count": int(X.shape[0]),
            "n": int(X.shape[-1]),
            "C": int(C),
            "dtype": "<f4",
            "domain": int(domain),
            "seed": int(seed),
            "labels": [int(v) for v in y],
            "spec": spec,
            "config_hash": chash,
        },
    )
    return path


def load_dataset(path) -> tuple[np.ndarray, np.ndarray, dict]:
    path = Path(path)
    meta = read_yaml(path.with_suffix(".yaml"))
    count, n = int(meta["count"]), int(meta["n"])
    X = np.fromfile(path, dtype="<f4")
    if X.size != count * n * n:
        raise ArtifactError(f"{path}: expected {count * n * n} values, found {X.size}")
    return X.reshape(count, n, n), np.asarray(meta["labels"], dtype=np.int64), meta


# -- traces --------------------------------------------------------------------


def save_traces(run_dir, r: int, manipulated, chash: str) -> Optional[Path]:
    """Dump the traced prefix of one iteration's manipulated samples.

    Block order per sample: source, z_T, then for each step the fields of
    ``TRACE_FIELDS``, then the output.
    """
    traced = [m for m in manipulated if m.trace is not None]
    if not traced:
        return None
    path = Path(run_dir) / "traces" / f"r{r:02d}.f32"
    blocks = []
    for m in traced:
        blocks.append(m.source_sample)
        blocks.append(m.z_T)
        for st in m.trace:
            blocks.extend(getattr(st, f) for f in TRACE_FIELDS)
        blocks.append(m.output)
    _write_atomic(path, np.stack(blocks).astype("<f4").tobytes())
    n = traced[0].output.shape[-1]
    _write_yaml(
        path.with_suffix(".yaml"),
        {
            "r": int(r),
            "count": len(traced),
            "n": int(n),
            "dtype": "<f4",
            "timesteps": [int(st.t) for st in traced[0].trace],
            "per_sample": ["source", "z_T"] + [f"step[k].{f}" for f in TRACE_FIELDS] + ["output"],
            "assigned_labels": [int(m.assigned_label) for m in traced],
            "config_hash": chash,
        },
    )
    return path


def load_traces(path) -> tuple[dict, dict]:
    """Return ``(arrays, meta)`` with arrays keyed source, z_T, steps (count, K, 4, n, n), output."""
    path = Path(path)
    meta = read_yaml(path.with_suffix(".yaml"))
    N, n, K = int(meta["count"]), int(meta["n"]), len(meta["timesteps"])
    per = 3 + 4 * K
    flat = np.fromfile(path, dtype="<f4")
    if flat.size != N * per * n * n:
        raise ArtifactError(f"{path}: size does not match its sidecar")
    a = flat.reshape(N, per, n, n)
    arrays = {"source": a[:, 0], "z_T": a[:, 1], "steps": a[:, 2 : 2 + 4 * K].reshape(N, K, 4, n, n), "output": a[:, -1]}
    return arrays, meta


def list_traces(run_dir) -> list[Path]:
    return sorted((Path(run_dir) / "traces").glob("r*.f32"))


# -- config and selection ------------------------------------------------------


def write_config_echo(run_dir, cfg_text: str, chash: str) -> Path:
    path = Path(run_dir) / "config.yaml"
    _write_atomic(path, (f"# config_hash: {chash}\n" + cfg_text).encode("utf-8"))
    return path


def write_selection(run_dir, selected: int, norms: Sequence[float], accuracies: Sequence[float], chash: str) -> Path:
    norms = [float(v) for v in norms]
    acc = [float(v) for v in accuracies]
    selected = int(selected)
    best = int(np.nanargmax(acc)) if not all(math.isnan(a) for a in acc) else None
    out = {
        "selected_r": selected,
        "criterion": "largest nuclear norm of target probability matrix",
        "nuclear_norms": norms,
        "target_accuracy": acc,  # eval-only
        "selected_accuracy": acc[selected],
        "best_r": best,
        "best_accuracy": None if best is None else acc[best],
        "config_hash": chash,
    }
    path = Path(run_dir) / "selection.yaml"
    _write_yaml(path, out)
    return path
