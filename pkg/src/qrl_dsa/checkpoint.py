"""Plain-text model checkpoints that round-trip bit-exactly.

Format (one item per line)::

    qrl-dsa-checkpoint 1
    kind VQC | MLP
    config <json>
    array <name> <comma-separated shape>
    <float.hex values separated by spaces>
    ...

Arrays appear in the model's flat parameter order, so concatenating them
gives ``model.params`` back.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import UsageError
from .mlp import MlpModel
from .vqc import VqcConfig, VqcModel

MAGIC = "qrl-dsa-checkpoint 1"


def dumps(model: VqcModel | MlpModel) -> str:
    if isinstance(model, VqcModel):
        kind, cfg = "VQC", model.config.model_dump(mode="json")
    elif isinstance(model, MlpModel):
        kind, cfg = "MLP", {"layer_sizes": list(model.layer_sizes)}
    else:
        raise UsageError(f"cannot checkpoint {type(model).__name__}")
    lines = [MAGIC, f"kind {kind}", "config " + json.dumps(cfg, sort_keys=True)]
    for name, arr in model.named_arrays().items():
        lines.append(f"array {name} {','.join(str(d) for d in arr.shape)}")
        lines.append(" ".join(float(v).hex() for v in arr.ravel()))
    return "\n".join(lines) + "\n"


def loads(text: str) -> VqcModel | MlpModel:
    lines = text.splitlines()
    if not lines or lines[0] != MAGIC:
        raise UsageError("not a qrl-dsa checkpoint")
    try:
        kind = lines[1].split(" ", 1)[1]
        cfg = json.loads(lines[2].split(" ", 1)[1])
        chunks = []
        for head, body in zip(lines[3::2], lines[4::2]):
            _, _, shape = head.split(" ")
            size = int(np.prod([int(d) for d in shape.split(",") if d]))
            values = [float.fromhex(v) for v in body.split()]
            if len(values) != size:
                raise UsageError(f"{head}: expected {size} values, got {len(values)}")
            chunks.append(np.array(values, dtype=float))
    except (IndexError, ValueError) as err:
        raise UsageError(f"malformed checkpoint: {err}") from None
    params = np.concatenate(chunks) if chunks else np.zeros(0)
    if kind == "VQC":
        return VqcModel(VqcConfig.model_validate(cfg), params)
    if kind == "MLP":
        return MlpModel(tuple(cfg["layer_sizes"]), params)
    raise UsageError(f"unknown model kind {kind!r}")


def save(model, path) -> None:
    Path(path).write_text(dumps(model))


def load(path):
    return loads(Path(path).read_text())
