"""Exact parameter and mult-add accounting.

Conventions: convolutions carry no bias, the classifier does, a batch norm
holds two parameters per channel, pooling is free.  Mult-adds are counted for
convolutions (one per weight per output position) and the linear layer
(in_features * num_classes).

Batch norm arithmetic is controlled by ``bn_mult_adds``:

``"boundary"`` (default)
    one mult-add per activation element for every BN that is not internal to
    a cheap unit (see :class:`~cheapconv.ir.BatchNormLayer`).  This is the
    convention under which the published WRN and ResNet totals reproduce.
``"none"``
    BN is free; convs and the linear layer only.
``"all"``
    every BN costs one mult-add per activation element.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import List, Tuple

import numpy as np

from .errors import CostError
from .ir import BatchNormLayer, ConvLayer, NetworkSpec, PoolLayer

BN_CONVENTIONS = ("boundary", "none", "all")


@dataclass(frozen=True)
class BlockCost:
    path: str
    kind: str
    params: int
    mult_adds: int


@dataclass(frozen=True)
class CostReport:
    conv_params: int
    bn_params: int
    head_params: int
    mult_adds: int
    per_block: Tuple[BlockCost, ...]
    input_resolution: Tuple[int, int]

    @property
    def total_params(self) -> int:
        return self.conv_params + self.bn_params + self.head_params

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["path", "kind", "params", "mult_adds"])
        for b in self.per_block:
            w.writerow([b.path, b.kind, b.params, b.mult_adds])
        return buf.getvalue()


def conv_params(layer: ConvLayer) -> int:
    return layer.in_channels * layer.out_channels * layer.kernel_h * layer.kernel_w // layer.groups


def conv_output_size(size: int, kernel: int, stride: int = 1, dilation: int = 1) -> int:
    """Output length along one axis with "same"-style zero padding."""
    pad = dilation * (kernel - 1) // 2
    return (size + 2 * pad - dilation * (kernel - 1) - 1) // stride + 1


def _check_input(h: int, w: int, stride: int, what: str) -> None:
    if h < 1 or w < 1:
        raise CostError(f"{what}: spatial size {h}x{w} has underflowed")
    if stride > 1 and (h < stride or w < stride):
        raise CostError(f"{what}: input {h}x{w} is too small for stride {stride}; "
                        "the resolution cannot support the stride chain")


def conv_mult_adds(layer: ConvLayer, in_h: int, in_w: int, what: str = "conv") -> Tuple[int, int, int]:
    _check_input(in_h, in_w, layer.stride, what)
    out_h = conv_output_size(in_h, layer.kernel_h, layer.stride, layer.dilation)
    out_w = conv_output_size(in_w, layer.kernel_w, layer.stride, layer.dilation)
    if out_h < 1 or out_w < 1:
        raise CostError(f"{what}: output size {out_h}x{out_w} has underflowed")
    return conv_params(layer) * out_h * out_w, out_h, out_w


def pool_output(pool: PoolLayer, h: int, w: int) -> Tuple[int, int]:
    _check_input(h, w, pool.stride, "pool")
    oh = (h + 2 * pool.padding - pool.kernel) // pool.stride + 1
    ow = (w + 2 * pool.padding - pool.kernel) // pool.stride + 1
    if oh < 1 or ow < 1:
        raise CostError(f"pool: output size {oh}x{ow} has underflowed")
    return oh, ow


class _Tally:
    def __init__(self, bn_mult_adds: str):
        if bn_mult_adds not in BN_CONVENTIONS:
            raise CostError(f"bn_mult_adds must be one of {BN_CONVENTIONS}, got {bn_mult_adds!r}")
        self.bn_mode = bn_mult_adds
        self.conv_params = self.bn_params = 0
        self.params = self.mult_adds = 0

    def conv(self, layer, h, w, what):
        ma, oh, ow = conv_mult_adds(layer, h, w, what)
        p = conv_params(layer)
        self.conv_params += p
        self.params += p
        self.mult_adds += ma
        return oh, ow

    def bn(self, layer: BatchNormLayer, h, w):
        p = 2 * layer.channels
        self.bn_params += p
        self.params += p
        if self.bn_mode == "all" or (self.bn_mode == "boundary" and not layer.internal):
            self.mult_adds += layer.channels * h * w

    def take(self):
        out = (self.params, self.mult_adds)
        self.params = self.mult_adds = 0
        return out


def _run_layers(tally, layers, h, w, path):
    for i, layer in enumerate(layers):
        if isinstance(layer, ConvLayer):
            h, w = tally.conv(layer, h, w, f"{path}[{i}]")
        else:
            tally.bn(layer, h, w)
    return h, w


def network_cost(network: NetworkSpec, input=(3, 32, 32), bn_mult_adds: str = "boundary") -> CostReport:
    """Walk ``network`` on an input of shape (channels, height, width)."""
    c, h, w = input
    if c != network.stem.in_channels:
        raise CostError(f"input has {c} channels, stem expects {network.stem.in_channels}")
    t = _Tally(bn_mult_adds)
    rows: List[BlockCost] = []

    h, w = t.conv(network.stem, h, w, "stem")
    if network.stem_bn is not None:
        t.bn(network.stem_bn, h, w)
    if network.pool is not None:
        h, w = pool_output(network.pool, h, w)
    rows.append(BlockCost("stem", "stem", *t.take()))

    for path, block in network.iter_blocks():
        oh, ow = _run_layers(t, block.layers, h, w, f"{path}.layers")
        if block.shortcut:
            sh, sw = _run_layers(t, block.shortcut, h, w, f"{path}.shortcut")
            if (sh, sw) != (oh, ow):
                raise CostError(f"{path}: shortcut output {sh}x{sw} does not match "
                                f"residual branch {oh}x{ow}")
        h, w = oh, ow
        rows.append(BlockCost(path, block.kind.value, *t.take()))

    if network.final_bn is not None:
        t.bn(network.final_bn, h, w)
        rows.append(BlockCost("final_bn", "bn", *t.take()))

    head = network.head
    head_params = head.in_features * head.num_classes + (head.num_classes if head.bias else 0)
    head_ma = head.in_features * head.num_classes
    rows.append(BlockCost("head", "linear", head_params, head_ma))

    return CostReport(
        conv_params=t.conv_params,
        bn_params=t.bn_params,
        head_params=head_params,
        mult_adds=sum(r.mult_adds for r in rows),
        per_block=tuple(rows),
        input_resolution=(input[1], input[2]),
    )


def materialized_param_count(network: NetworkSpec) -> int:
    """Count parameters by allocating every weight tensor and summing sizes.

    Deliberately avoids the closed-form formulas above; it is the oracle the
    cost model is checked against.
    """
    def tensors():
        yield np.empty(network.stem.weight_shape, dtype=np.float32)
        layers = []
        if network.stem_bn is not None:
            layers.append(network.stem_bn)
        for _, block in network.iter_blocks():
            layers += list(block.layers) + list(block.shortcut)
        if network.final_bn is not None:
            layers.append(network.final_bn)
        for layer in layers:
            if isinstance(layer, ConvLayer):
                yield np.empty(layer.weight_shape, dtype=np.float32)
            else:
                yield np.empty((2, layer.channels), dtype=np.float32)
        yield np.empty((network.head.num_classes, network.head.in_features), dtype=np.float32)
        if network.head.bias:
            yield np.empty(network.head.num_classes, dtype=np.float32)

    return sum(int(t.size) for t in tensors())


def round_half_up(value: int, scale: int, digits: int) -> str:
    """``value / scale`` rounded to ``digits`` decimals, halves away from zero."""
    q = Decimal(1).scaleb(-digits)
    return str((Decimal(value) / Decimal(scale)).quantize(q, rounding=ROUND_HALF_UP))


def format_params_k(n: int) -> str:
    return round_half_up(n, 1000, 1)


def format_mult_adds_m(n: int) -> str:
    return round_half_up(n, 10 ** 6, 1)
