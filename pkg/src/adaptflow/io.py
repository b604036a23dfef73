"""On-disk formats: inference dumps (JSON) and checkpoints (flat text).

Inference dump::

    {"format": "adaptflow-inference-dump", "version": 1,
     "splits": {"target_train": {"logits": {"shape": [N, C], "data": [...]}}}}

``data`` is the row-major flattening of the array.

Checkpoint (one header line, then a header/values line pair per tensor)::

    adaptflow-checkpoint 1
    epoch 3
    score 0.91
    param G 0.weight 16 2
    <16*2 space-separated floats>
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import ValidationError

DUMP_FORMAT = "adaptflow-inference-dump"
CHECKPOINT_MAGIC = "adaptflow-checkpoint 1"


class FormatError(ValidationError):
    pass


def _encode(arr) -> dict:
    a = np.asarray(arr)
    if a.dtype.kind in "iub":
        data = [int(v) for v in a.reshape(-1)]
    else:
        data = [float(v) for v in a.reshape(-1)]
    return {"shape": list(a.shape), "data": data}


def _decode(obj, where) -> np.ndarray:
    if not isinstance(obj, dict) or set(obj) != {"shape", "data"}:
        raise FormatError(f"{where}: expected an object with 'shape' and 'data'")
    shape, data = obj["shape"], obj["data"]
    if not isinstance(shape, list) or not all(isinstance(s, int) and s >= 0 for s in shape):
        raise FormatError(f"{where}: bad shape {shape!r}")
    if not isinstance(data, list) or len(data) != math.prod(shape):
        raise FormatError(f"{where}: data length does not match shape {shape}")
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in data):
        raise FormatError(f"{where}: data must be numbers")
    kind = np.int64 if all(isinstance(v, int) for v in data) and data else np.float64
    return np.asarray(data, dtype=kind).reshape(shape)


def dump_to_dict(splits: dict) -> dict:
    return {
        "format": DUMP_FORMAT,
        "version": 1,
        "splits": {s: {k: _encode(v) for k, v in sorted(d.items())} for s, d in sorted(splits.items())},
    }


def write_dump(path, splits: dict):
    Path(path).write_text(json.dumps(dump_to_dict(splits)) + "\n")


def read_dump(path) -> dict:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(obj, dict) or obj.get("format") != DUMP_FORMAT or obj.get("version") != 1:
        raise FormatError(f"{path}: not an {DUMP_FORMAT} version 1 file")
    splits = obj.get("splits")
    if not isinstance(splits, dict):
        raise FormatError(f"{path}: 'splits' must be an object")
    out = {}
    for split, entries in splits.items():
        if not isinstance(entries, dict):
            raise FormatError(f"{path}: split {split!r} must be an object")
        out[split] = {k: _decode(v, f"{split}.{k}") for k, v in entries.items()}
    return out


def write_checkpoint(path, state: dict[str, dict[str, np.ndarray]], epoch: int, score: float):
    lines = [CHECKPOINT_MAGIC, f"epoch {epoch}", f"score {score!r}"]
    for model in sorted(state):
        for name, arr in state[model].items():
            lines.append(f"param {model} {name} {' '.join(map(str, arr.shape))}".rstrip())
            lines.append(" ".join(repr(float(v)) for v in arr.reshape(-1)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_checkpoint(path):
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: missing checkpoint header")
    try:
        epoch = int(lines[1].split()[1])
        score = float(lines[2].split()[1])
        state: dict[str, dict[str, np.ndarray]] = {}
        if len(lines[3:]) % 2:
            raise FormatError(f"{path}: parameter header without a values line")
        for header, values in zip(lines[3::2], lines[4::2]):
            tag, model, name, *dims = header.split()
            if tag != "param":
                raise FormatError(f"{path}: unexpected line {header!r}")
            shape = tuple(int(d) for d in dims)
            arr = np.array([float(v) for v in values.split()], dtype=np.float64).reshape(shape)
            state.setdefault(model, {})[name] = arr
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path}: malformed checkpoint ({exc})") from exc
    return state, epoch, score
