"""Versioned JSON checkpoints. Arrays are base64-encoded little-endian
float64 with explicit shapes: portable, diff-stable, and exact."""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

from .allocator import AllocFlags, AllocParams
from .corpus import EntityType, TYPE_ORDER
from .pointer_net import LinearHead, MlpHead, PointerHeadParams, SIDES

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def _encode(arr: np.ndarray) -> dict:
    a = np.ascontiguousarray(arr, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode(obj: dict, what: str) -> np.ndarray:
    try:
        raw = base64.b64decode(obj["data"], validate=True)
        arr = np.frombuffer(raw, dtype="<f8").reshape(obj["shape"])
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"bad array field {what}: {e}") from None
    return arr.astype(np.float64)


def _dump(doc: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _load(path: str | Path, kind: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from None
    if not isinstance(doc, dict):
        raise CheckpointError(f"{path}: checkpoint must be a JSON object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint format version {doc.get('format_version')!r}"
        )
    if doc.get("kind") != kind:
        raise CheckpointError(f"{path}: expected a {kind} checkpoint, got {doc.get('kind')}")
    return doc


def save_pointer_checkpoint(
    params: PointerHeadParams, path: str | Path, config: dict | None = None
) -> None:
    heads = {}
    for (etype, side), head in params.heads.items():
        key = f"{etype.value}.{side}"
        if isinstance(head, LinearHead):
            heads[key] = {"w": _encode(head.w), "b": head.b}
        else:
            heads[key] = {
                "w1": _encode(head.w1),
                "b1": _encode(head.b1),
                "w2": _encode(head.w2),
                "b2": head.b2,
            }
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "pointer_heads",
        "dim": params.dim,
        "hidden_width": params.hidden_width,
        "thresholds": {
            f"{etype.value}.{side}": params.thresholds[(etype, side)]
            for etype in TYPE_ORDER
            for side in SIDES
        },
        "heads": heads,
        "config": config or {},
    }
    _dump(doc, path)


def load_pointer_checkpoint(path: str | Path) -> tuple[PointerHeadParams, dict]:
    doc = _load(path, "pointer_heads")
    try:
        dim = int(doc["dim"])
        hidden = int(doc["hidden_width"])
        heads = {}
        thresholds = {}
        for etype in TYPE_ORDER:
            for side in SIDES:
                key = f"{etype.value}.{side}"
                raw = doc["heads"][key]
                if hidden > 0:
                    heads[(etype, side)] = MlpHead(
                        _decode(raw["w1"], key),
                        _decode(raw["b1"], key),
                        _decode(raw["w2"], key),
                        float(raw["b2"]),
                    )
                else:
                    heads[(etype, side)] = LinearHead(_decode(raw["w"], key), float(raw["b"]))
                thresholds[(etype, side)] = float(doc["thresholds"][key])
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"{path}: malformed pointer checkpoint: {e}") from None
    return PointerHeadParams(dim, hidden, heads, thresholds), dict(doc.get("config", {}))


def save_matcher_checkpoint(
    params: AllocParams, path: str | Path, config: dict | None = None
) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "entity_matcher",
        "dim": params.dim,
        "u": _encode(params.u),
        "bias": params.bias,
        "lambda": params.lam,
        "flags": {
            "enable_inter": params.flags.enable_inter,
            "enable_intra": params.flags.enable_intra,
            "enable_allocation": params.flags.enable_allocation,
        },
        "config": config or {},
    }
    _dump(doc, path)


def load_matcher_checkpoint(path: str | Path) -> tuple[AllocParams, dict]:
    doc = _load(path, "entity_matcher")
    try:
        flags = AllocFlags(
            enable_inter=bool(doc["flags"]["enable_inter"]),
            enable_intra=bool(doc["flags"]["enable_intra"]),
            enable_allocation=bool(doc["flags"]["enable_allocation"]),
        )
        params = AllocParams(
            int(doc["dim"]), _decode(doc["u"], "u"), float(doc["bias"]), float(doc["lambda"]), flags
        )
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"{path}: malformed matcher checkpoint: {e}") from None
    return params, dict(doc.get("config", {}))
