"""Plain-text architecture files.

The file is a YAML tree that mirrors :class:`~cheapconv.ir.NetworkSpec` field
for field.  Layers inside a block are tagged with ``type: conv`` or
``type: bn``.  ``loads(dumps(net)) == net`` and ``dumps(loads(text)) == text``
for any text produced by :func:`dumps`.
"""

from __future__ import annotations

import dataclasses
from typing import Any

import yaml

from .errors import SpecError
from .ir import (ActivationOrder, BatchNormLayer, BlockInstance, BlockKind,
                 ConvLayer, Head, NetworkSpec, PoolLayer, Role, StageSpec)


def _conv_to_dict(c: ConvLayer) -> dict:
    d = dataclasses.asdict(c)
    d["role"] = c.role.value
    return d


def _layer_to_dict(layer) -> dict:
    if isinstance(layer, ConvLayer):
        return {"type": "conv", **_conv_to_dict(layer)}
    return {"type": "bn", "channels": layer.channels, "internal": layer.internal}


def to_dict(net: NetworkSpec) -> dict:
    stages = []
    for stage in net.stages:
        blocks = []
        for b in stage.blocks:
            blocks.append({
                "kind": b.kind.value,
                "activation_order": b.activation_order.value,
                "in_channels": b.in_channels,
                "out_channels": b.out_channels,
                "stride": b.stride,
                "has_projection_shortcut": b.has_projection_shortcut,
                "layers": [_layer_to_dict(l) for l in b.layers],
                "shortcut": [_layer_to_dict(l) for l in b.shortcut],
            })
        stages.append({"in_channels": stage.in_channels,
                       "out_channels": stage.out_channels,
                       "stride": stage.stride,
                       "blocks": blocks})
    return {
        "name": net.name,
        "stem": _conv_to_dict(net.stem),
        "stem_bn": None if net.stem_bn is None else {"channels": net.stem_bn.channels,
                                                      "internal": net.stem_bn.internal},
        "pool": None if net.pool is None else dataclasses.asdict(net.pool),
        "stages": stages,
        "final_bn": None if net.final_bn is None else {"channels": net.final_bn.channels,
                                                        "internal": net.final_bn.internal},
        "head": dataclasses.asdict(net.head),
    }


def _require(d: Any, key: str, path: str):
    if not isinstance(d, dict):
        raise SpecError(f"{path}: expected a mapping, got {type(d).__name__}")
    if key not in d:
        raise SpecError(f"{path}: missing field {key!r}")
    return d[key]


def _int(d, key, path, default=None):
    v = d.get(key, default) if default is not None else _require(d, key, path)
    if isinstance(v, bool) or not isinstance(v, int):
        raise SpecError(f"{path}.{key}: expected an integer, got {v!r}")
    return v


def _enum(cls, value, path):
    try:
        return cls(value)
    except ValueError:
        choices = ", ".join(m.value for m in cls)
        raise SpecError(f"{path}: {value!r} is not one of {choices}") from None


def _conv_from_dict(d: dict, path: str) -> ConvLayer:
    return ConvLayer(
        in_channels=_int(d, "in_channels", path),
        out_channels=_int(d, "out_channels", path),
        kernel_h=_int(d, "kernel_h", path),
        kernel_w=_int(d, "kernel_w", path),
        stride=_int(d, "stride", path, 1),
        dilation=_int(d, "dilation", path, 1),
        groups=_int(d, "groups", path, 1),
        role=_enum(Role, d.get("role", "block_spatial"), f"{path}.role"),
    )


def _bn_from_dict(d, path) -> BatchNormLayer:
    return BatchNormLayer(_int(d, "channels", path), bool(d.get("internal", False)))


def _layer_from_dict(d: dict, path: str):
    kind = _require(d, "type", path)
    if kind == "conv":
        return _conv_from_dict(d, path)
    if kind == "bn":
        return _bn_from_dict(d, path)
    raise SpecError(f"{path}.type: unknown layer type {kind!r} (expected conv or bn)")


def from_dict(d: dict) -> NetworkSpec:
    stages = []
    for si, sd in enumerate(_require(d, "stages", "network") or [], start=1):
        spath = f"stage{si}"
        blocks = []
        for bi, bd in enumerate(_require(sd, "blocks", spath) or [], start=1):
            bpath = f"{spath}.block{bi}"
            blocks.append(BlockInstance(
                kind=_enum(BlockKind, _require(bd, "kind", bpath), f"{bpath}.kind"),
                layers=tuple(_layer_from_dict(l, f"{bpath}.layers[{i}]")
                             for i, l in enumerate(_require(bd, "layers", bpath))),
                activation_order=_enum(ActivationOrder,
                                       _require(bd, "activation_order", bpath),
                                       f"{bpath}.activation_order"),
                in_channels=_int(bd, "in_channels", bpath),
                out_channels=_int(bd, "out_channels", bpath),
                stride=_int(bd, "stride", bpath),
                has_projection_shortcut=bool(_require(bd, "has_projection_shortcut", bpath)),
                shortcut=tuple(_layer_from_dict(l, f"{bpath}.shortcut[{i}]")
                               for i, l in enumerate(bd.get("shortcut") or [])),
            ))
        stages.append(StageSpec(tuple(blocks), _int(sd, "in_channels", spath),
                                _int(sd, "out_channels", spath), _int(sd, "stride", spath)))
    head = _require(d, "head", "network")
    pool = d.get("pool")
    return NetworkSpec(
        name=str(_require(d, "name", "network")),
        stem=_conv_from_dict(_require(d, "stem", "network"), "stem"),
        stem_bn=None if d.get("stem_bn") is None else _bn_from_dict(d["stem_bn"], "stem_bn"),
        pool=None if pool is None else PoolLayer(_int(pool, "kernel", "pool"),
                                                 _int(pool, "stride", "pool"),
                                                 _int(pool, "padding", "pool", 0)),
        stages=tuple(stages),
        final_bn=None if d.get("final_bn") is None else _bn_from_dict(d["final_bn"], "final_bn"),
        head=Head(_int(head, "in_features", "head"), _int(head, "num_classes", "head"),
                  bool(head.get("bias", True))),
    )


def dumps(net: NetworkSpec) -> str:
    return yaml.safe_dump(to_dict(net), sort_keys=False, default_flow_style=False)


def loads(text: str) -> NetworkSpec:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SpecError(f"architecture file is not valid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise SpecError("architecture file must contain a mapping at the top level")
    return from_dict(data)


def load(path) -> NetworkSpec:
    with open(path, encoding="utf-8") as f:
        return loads(f.read())


def save(net: NetworkSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps(net))
