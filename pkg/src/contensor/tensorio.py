"""JSON serialization of tensors.

The on-disk shape mirrors the in-memory levels one to one:

    {"name": ..., "fill": ..., "levels": [
        {"kind": "dense", "size": N},
        {"kind": "pinpoint", "ptr": [...], "crd": [...]},
        {"kind": "interval", "ptr": [...], "left": [...], "right": [...],
         "lclose": true | [...], "rclose": ...},
        {"kind": "regular", "stride": s, "len": l, "rclose": b, "xs": [...]}
     ], "values": [...]}

Regular levels additionally carry "ptr" only when they hold more than one
fiber. Saves are canonical (fixed key order, two-space indent, trailing
newline) so a load/save round trip is byte stable.
"""

from __future__ import annotations

import json
import math
from typing import Union

from .storage import (
    ContTensor,
    DenseLevel,
    IntervalLevel,
    PinpointLevel,
    RegularLevel,
    StorageError,
)


class SchemaError(ValueError):
    """Malformed tensor JSON; the message carries the offending path."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


def _num(x, path):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise SchemaError(path, f"expected a number, got {x!r}")
    return float(x)


def _num_list(x, path):
    if not isinstance(x, list):
        raise SchemaError(path, f"expected an array, got {x!r}")
    return tuple(_num(v, f"{path}[{i}]") for i, v in enumerate(x))


def _int_list(x, path):
    out = []
    if not isinstance(x, list):
        raise SchemaError(path, f"expected an array, got {x!r}")
    for i, v in enumerate(x):
        if isinstance(v, bool) or not isinstance(v, int):
            raise SchemaError(f"{path}[{i}]", f"expected an integer, got {v!r}")
        out.append(v)
    return tuple(out)


def _flags(x, path):
    if isinstance(x, bool):
        return x
    if isinstance(x, list):
        for i, v in enumerate(x):
            if not isinstance(v, bool):
                raise SchemaError(f"{path}[{i}]", f"expected a boolean, got {v!r}")
        return tuple(x)
    raise SchemaError(path, f"expected boolean or boolean array, got {x!r}")


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise SchemaError(path, f"missing key {key!r}")
    return obj[key]


def level_from_json(obj, path: str):
    if not isinstance(obj, dict):
        raise SchemaError(path, f"expected an object, got {obj!r}")
    kind = _require(obj, "kind", path)
    if kind == "dense":
        size = _require(obj, "size", path)
        if isinstance(size, bool) or not isinstance(size, int):
            raise SchemaError(f"{path}.size", f"expected an integer, got {size!r}")
        return DenseLevel(size=size)
    if kind == "pinpoint":
        return PinpointLevel(
            ptr=_int_list(_require(obj, "ptr", path), f"{path}.ptr"),
            crd=_num_list(_require(obj, "crd", path), f"{path}.crd"),
        )
    if kind == "interval":
        return IntervalLevel(
            ptr=_int_list(_require(obj, "ptr", path), f"{path}.ptr"),
            left=_num_list(_require(obj, "left", path), f"{path}.left"),
            right=_num_list(_require(obj, "right", path), f"{path}.right"),
            lclose=_flags(obj.get("lclose", True), f"{path}.lclose"),
            rclose=_flags(obj.get("rclose", True), f"{path}.rclose"),
        )
    if kind == "regular":
        ptr = obj.get("ptr")
        return RegularLevel(
            stride=_num(_require(obj, "stride", path), f"{path}.stride"),
            length=_num(_require(obj, "len", path), f"{path}.len"),
            rclose=bool(_require(obj, "rclose", path)),
            xs=_int_list(_require(obj, "xs", path), f"{path}.xs"),
            ptr=_int_list(ptr, f"{path}.ptr") if ptr is not None else None,
        )
    raise SchemaError(f"{path}.kind", f"unknown level kind {kind!r}")


def level_to_json(lv) -> dict:
    if isinstance(lv, DenseLevel):
        return {"kind": "dense", "size": lv.size}
    if isinstance(lv, PinpointLevel):
        return {"kind": "pinpoint", "ptr": list(lv.ptr), "crd": list(lv.crd)}
    if isinstance(lv, IntervalLevel):
        return {
            "kind": "interval",
            "ptr": list(lv.ptr),
            "left": list(lv.left),
            "right": list(lv.right),
            "lclose": lv.lclose if isinstance(lv.lclose, bool) else list(lv.lclose),
            "rclose": lv.rclose if isinstance(lv.rclose, bool) else list(lv.rclose),
        }
    if isinstance(lv, RegularLevel):
        out = {"kind": "regular", "stride": lv.stride, "len": lv.length,
               "rclose": lv.rclose, "xs": list(lv.xs)}
        if lv.ptr is not None:
            out["ptr"] = list(lv.ptr)
        return out
    raise TypeError(f"not a level: {lv!r}")


def tensor_from_json(obj, path: str = "$") -> ContTensor:
    if not isinstance(obj, dict):
        raise SchemaError(path, f"expected an object, got {obj!r}")
    name = _require(obj, "name", path)
    if not isinstance(name, str):
        raise SchemaError(f"{path}.name", "expected a string")
    fill = _require(obj, "fill", path)
    if not isinstance(fill, (bool, int, float)):
        raise SchemaError(f"{path}.fill", f"expected a number or boolean, got {fill!r}")
    levels_json = _require(obj, "levels", path)
    if not isinstance(levels_json, list):
        raise SchemaError(f"{path}.levels", "expected an array")
    levels = tuple(
        level_from_json(lv, f"{path}.levels[{i}]") for i, lv in enumerate(levels_json)
    )
    values_json = _require(obj, "values", path)
    if not isinstance(values_json, list):
        raise SchemaError(f"{path}.values", "expected an array")
    values = []
    for i, v in enumerate(values_json):
        if isinstance(v, bool):
            values.append(v)
        elif isinstance(v, (int, float)):
            values.append(float(v))
        else:
            raise SchemaError(f"{path}.values[{i}]", f"expected a number or boolean, got {v!r}")
    try:
        return ContTensor(
            name=name,
            levels=levels,
            values=tuple(values),
            fill=fill if isinstance(fill, bool) else float(fill),
        )
    except StorageError as e:
        raise SchemaError(path, str(e)) from e


def tensor_to_json(t: ContTensor) -> dict:
    for v in t.values:
        if isinstance(v, float) and (math.isinf(v) or math.isnan(v)):
            raise ValueError(f"tensor {t.name}: value {v!r} is not JSON-representable")
    return {
        "name": t.name,
        "fill": t.fill,
        "levels": [level_to_json(lv) for lv in t.levels],
        "values": list(t.values),
    }


def dumps_tensor(t: ContTensor) -> str:
    return json.dumps(tensor_to_json(t), indent=2) + "\n"


def save_tensor(t: ContTensor, path) -> None:
    with open(path, "w") as f:
        f.write(dumps_tensor(t))


def load_tensor(path) -> ContTensor:
    with open(path) as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as e:
            raise SchemaError("$", f"not valid JSON: {e}") from e
    return tensor_from_json(obj, "$")
