"""Typed intermediate representation of residual networks.

A network is a stem convolution (with optional BN and pooling), an ordered list
of stages made of two-branch residual blocks, an optional final BN and a
global-pool + linear classifier.  Everything is an immutable dataclass; the IR
carries shapes only, never weights.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple, Union

from .errors import SpecError


class Role(str, enum.Enum):
    STEM = "stem"
    BLOCK_SPATIAL = "block_spatial"
    BLOCK_POINTWISE = "block_pointwise"
    SHORTCUT_PROJECTION = "shortcut_projection"


class BlockKind(str, enum.Enum):
    S = "S"
    S_DILATED = "S_dilated"
    G = "G"
    B = "B"
    BG = "BG"


class ActivationOrder(str, enum.Enum):
    PRE_ACTIVATION = "pre_activation"
    POST_ACTIVATION = "post_activation"


@dataclass(frozen=True)
class ConvLayer:
    in_channels: int
    out_channels: int
    kernel_h: int
    kernel_w: int
    stride: int = 1
    dilation: int = 1
    groups: int = 1
    role: Role = Role.BLOCK_SPATIAL

    @property
    def receptive_field(self) -> Tuple[int, int]:
        return (self.dilation * (self.kernel_h - 1) + 1,
                self.dilation * (self.kernel_w - 1) + 1)

    @property
    def weight_shape(self) -> Tuple[int, int, int, int]:
        return (self.out_channels, self.in_channels // self.groups,
                self.kernel_h, self.kernel_w)


@dataclass(frozen=True)
class BatchNormLayer:
    """Batch norm over ``channels`` feature maps.

    ``internal`` marks a BN that sits between two convolutions of the same
    cheap unit (e.g. between a grouped conv and its pointwise partner).  Such
    layers hold parameters like any other BN but are not charged mult-adds by
    the default cost convention.
    """

    channels: int
    internal: bool = False


Layer = Union[ConvLayer, BatchNormLayer]


@dataclass(frozen=True)
class PoolLayer:
    kernel: int
    stride: int
    padding: int = 0


@dataclass(frozen=True)
class Head:
    in_features: int
    num_classes: int
    bias: bool = True


@dataclass(frozen=True)
class BlockInstance:
    kind: BlockKind
    layers: Tuple[Layer, ...]
    activation_order: ActivationOrder
    in_channels: int
    out_channels: int
    stride: int
    has_projection_shortcut: bool
    shortcut: Tuple[Layer, ...] = ()

    @property
    def convs(self) -> Tuple[ConvLayer, ...]:
        return tuple(l for l in self.layers if isinstance(l, ConvLayer))


@dataclass(frozen=True)
class StageSpec:
    blocks: Tuple[BlockInstance, ...]
    in_channels: int
    out_channels: int
    stride: int


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    stem: ConvLayer
    stages: Tuple[StageSpec, ...]
    head: Head
    stem_bn: Optional[BatchNormLayer] = None
    pool: Optional[PoolLayer] = None
    final_bn: Optional[BatchNormLayer] = None

    def iter_blocks(self):
        """Yield ``(path, block)`` for every residual block in order."""
        for si, stage in enumerate(self.stages, start=1):
            for bi, block in enumerate(stage.blocks, start=1):
                yield f"stage{si}.block{bi}", block


@dataclass(frozen=True)
class Diagnostic:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


# ---------------------------------------------------------------------------
# builders


def projection(in_channels: int, out_channels: int, stride: int,
               order: ActivationOrder) -> Tuple[Layer, ...]:
    """Shortcut layers for a block, empty when the identity suffices."""
    if stride == 1 and in_channels == out_channels:
        return ()
    conv = ConvLayer(in_channels, out_channels, 1, 1, stride=stride,
                     role=Role.SHORTCUT_PROJECTION)
    # pre-activation shortcuts share the block's leading BN
    if order is ActivationOrder.PRE_ACTIVATION:
        return (conv,)
    return (conv, BatchNormLayer(out_channels))


def standard_block(in_channels: int, out_channels: int, stride: int,
                   order: ActivationOrder, kernel: int = 3) -> BlockInstance:
    c1 = ConvLayer(in_channels, out_channels, kernel, kernel, stride=stride)
    c2 = ConvLayer(out_channels, out_channels, kernel, kernel)
    if order is ActivationOrder.PRE_ACTIVATION:
        layers = (BatchNormLayer(in_channels), c1, BatchNormLayer(out_channels), c2)
    else:
        layers = (c1, BatchNormLayer(out_channels), c2, BatchNormLayer(out_channels))
    shortcut = projection(in_channels, out_channels, stride, order)
    return BlockInstance(BlockKind.S, layers, order, in_channels, out_channels,
                         stride, bool(shortcut), shortcut)


def _stage(in_channels: int, out_channels: int, stride: int, n_blocks: int,
           order: ActivationOrder) -> StageSpec:
    blocks = [standard_block(in_channels, out_channels, stride, order)]
    blocks += [standard_block(out_channels, out_channels, 1, order)
               for _ in range(n_blocks - 1)]
    return StageSpec(tuple(blocks), in_channels, out_channels, stride)


def build_wrn(depth: int, width_multiplier: int, num_classes: int) -> NetworkSpec:
    """Wide residual network WRN-depth-width with pre-activation S blocks."""
    if depth < 10 or (depth - 4) % 6:
        raise SpecError(
            f"WRN depth must have the form 6n+4 with n >= 1, got {depth}: "
            f"(depth - 4) / 6 = {(depth - 4) / 6:g}")
    if width_multiplier < 1:
        raise SpecError(f"width multiplier must be >= 1, got {width_multiplier}")
    if num_classes < 2:
        raise SpecError(f"num_classes must be >= 2, got {num_classes}")
    n = (depth - 4) // 6
    order = ActivationOrder.PRE_ACTIVATION
    widths = [16 * width_multiplier, 32 * width_multiplier, 64 * width_multiplier]
    stages = []
    c_in = 16
    for width, stride in zip(widths, (1, 2, 2)):
        stages.append(_stage(c_in, width, stride, n, order))
        c_in = width
    return NetworkSpec(
        name=f"WRN-{depth}-{width_multiplier}",
        stem=ConvLayer(3, 16, 3, 3, role=Role.STEM),
        stages=tuple(stages),
        head=Head(widths[-1], num_classes),
        final_bn=BatchNormLayer(widths[-1]),
    )


RESNET_BLOCKS = {"resnet18": (2, 2, 2, 2), "resnet34": (3, 4, 6, 3)}
RESNET_WIDTHS = (64, 128, 256, 512)


def build_resnet(variant: str, width_scale: Sequence = (1, 1, 1, 1),
                 num_classes: int = 1000) -> NetworkSpec:
    """ImageNet ResNet-18/34 with post-activation basic blocks.

    ``width_scale`` multiplies the base widths 64/128/256/512 stage by stage;
    each product must be a positive integer (fractions and decimal strings
    such as ``"1/2"`` or ``0.5`` are accepted).
    """
    if variant not in RESNET_BLOCKS:
        raise SpecError(f"unknown ResNet variant {variant!r}; "
                        f"expected one of {sorted(RESNET_BLOCKS)}")
    if len(width_scale) != 4:
        raise SpecError(f"width_scale needs 4 entries, got {len(width_scale)}")
    if num_classes < 2:
        raise SpecError(f"num_classes must be >= 2, got {num_classes}")
    widths = []
    for i, (base, scale) in enumerate(zip(RESNET_WIDTHS, width_scale)):
        c = base * Fraction(str(scale))
        if c.denominator != 1 or c <= 0:
            raise SpecError(f"stage {i + 1}: {base} * {scale} = {float(c):g} "
                            "is not a positive integer channel count")
        widths.append(int(c))
    order = ActivationOrder.POST_ACTIVATION
    stages = []
    c_in = 64
    for i, (n, width) in enumerate(zip(RESNET_BLOCKS[variant], widths)):
        stages.append(_stage(c_in, width, 1 if i == 0 else 2, n, order))
        c_in = width
    suffix = "" if all(Fraction(str(s)) == 1 for s in width_scale) else \
        "-w" + ",".join(str(Fraction(str(s))) for s in width_scale)
    return NetworkSpec(
        name=f"ResNet-{variant[6:]}{suffix}",
        stem=ConvLayer(3, 64, 7, 7, stride=2, role=Role.STEM),
        stem_bn=BatchNormLayer(64),
        pool=PoolLayer(kernel=3, stride=2, padding=1),
        stages=tuple(stages),
        head=Head(widths[-1], num_classes),
    )


def count_weighted_layers(network: NetworkSpec, include_shortcuts: bool = False) -> int:
    """Number of convolutions plus the linear classifier."""
    n = 2  # stem + linear
    for _, block in network.iter_blocks():
        n += len(block.convs)
        if include_shortcuts:
            n += sum(isinstance(l, ConvLayer) for l in block.shortcut)
    return n


# ---------------------------------------------------------------------------
# validation


def _check_conv(conv: ConvLayer, path: str, out: list) -> None:
    for name in ("in_channels", "out_channels", "kernel_h", "kernel_w",
                 "stride", "dilation", "groups"):
        v = getattr(conv, name)
        if not isinstance(v, int) or v < 1:
            out.append(Diagnostic(path, f"{name} must be a positive integer, got {v!r}"))
            return
    if conv.in_channels % conv.groups or conv.out_channels % conv.groups:
        out.append(Diagnostic(
            path, f"groups must divide channels: groups={conv.groups}, "
                  f"in={conv.in_channels}, out={conv.out_channels}"))


def _check_block(block: BlockInstance, path: str, out: list) -> None:
    if not block.layers:
        out.append(Diagnostic(path, "block has no layers"))
        return
    convs = block.convs
    if not convs:
        out.append(Diagnostic(path, "block has no convolutions"))
        return
    for i, layer in enumerate(block.layers):
        if isinstance(layer, ConvLayer):
            _check_conv(layer, f"{path}.layers[{i}]", out)
            if layer.role in (Role.STEM, Role.SHORTCUT_PROJECTION):
                out.append(Diagnostic(f"{path}.layers[{i}]",
                                      f"role {layer.role.value} inside a residual branch"))

    if convs[0].in_channels != block.in_channels:
        out.append(Diagnostic(path, f"first conv consumes {convs[0].in_channels} "
                                    f"channels, block input is {block.in_channels}"))
    if convs[-1].out_channels != block.out_channels:
        out.append(Diagnostic(path, f"last conv produces {convs[-1].out_channels} "
                                    f"channels, block output is {block.out_channels}"))
    for a, b in zip(convs, convs[1:]):
        if a.out_channels != b.in_channels:
            out.append(Diagnostic(path, f"conv chain broken: {a.out_channels} -> "
                                        f"{b.in_channels}"))
    stride = 1
    for c in convs:
        stride *= c.stride
    if stride != block.stride:
        out.append(Diagnostic(path, f"conv strides multiply to {stride}, "
                                    f"block stride is {block.stride}"))

    # BN placement: one per conv, before it (pre) or after it (post)
    pre = block.activation_order is ActivationOrder.PRE_ACTIVATION
    layers = block.layers
    for i, layer in enumerate(layers):
        if not isinstance(layer, ConvLayer):
            continue
        j = i - 1 if pre else i + 1
        bn = layers[j] if 0 <= j < len(layers) else None
        want = layer.in_channels if pre else layer.out_channels
        where = "before" if pre else "after"
        if not isinstance(bn, BatchNormLayer):
            out.append(Diagnostic(f"{path}.layers[{i}]",
                                  f"{block.activation_order.value} block needs a BN {where} each conv"))
        elif bn.channels != want:
            out.append(Diagnostic(f"{path}.layers[{j}]",
                                  f"BN over {bn.channels} channels, expected {want}"))
    n_bn = sum(isinstance(l, BatchNormLayer) for l in layers)
    if n_bn != len(convs):
        out.append(Diagnostic(path, f"{n_bn} BN layers for {len(convs)} convs"))

    needs = block.stride != 1 or block.in_channels != block.out_channels
    if block.has_projection_shortcut != needs:
        out.append(Diagnostic(path, "has_projection_shortcut must be true iff "
                                    "stride != 1 or in_channels != out_channels"))
    sc_convs = [l for l in block.shortcut if isinstance(l, ConvLayer)]
    if block.has_projection_shortcut:
        if len(sc_convs) != 1:
            out.append(Diagnostic(f"{path}.shortcut", "projection shortcut needs exactly one conv"))
        else:
            sc = sc_convs[0]
            _check_conv(sc, f"{path}.shortcut[0]", out)
            if (sc.in_channels, sc.out_channels, sc.stride) != \
                    (block.in_channels, block.out_channels, block.stride):
                out.append(Diagnostic(
                    f"{path}.shortcut",
                    f"projection {sc.in_channels}->{sc.out_channels}/s{sc.stride} does not "
                    f"match block {block.in_channels}->{block.out_channels}/s{block.stride}"))
    elif block.shortcut:
        out.append(Diagnostic(f"{path}.shortcut", "identity shortcut must carry no layers"))


def validate(network: NetworkSpec) -> list:
    """Return one :class:`Diagnostic` per violated invariant (empty if valid)."""
    out: list = []
    _check_conv(network.stem, "stem", out)
    if network.stem_bn is not None and network.stem_bn.channels != network.stem.out_channels:
        out.append(Diagnostic("stem_bn", f"BN over {network.stem_bn.channels} channels, "
                                         f"stem produces {network.stem.out_channels}"))
    if not network.stages:
        out.append(Diagnostic("stages", "network has no stages"))
    channels = network.stem.out_channels
    for si, stage in enumerate(network.stages, start=1):
        spath = f"stage{si}"
        if stage.in_channels != channels:
            out.append(Diagnostic(spath, f"stage consumes {stage.in_channels} channels, "
                                         f"previous output is {channels}"))
        if not stage.blocks:
            out.append(Diagnostic(spath, "stage has no blocks"))
        for bi, block in enumerate(stage.blocks, start=1):
            bpath = f"{spath}.block{bi}"
            if bi == 1:
                want = (stage.in_channels, stage.out_channels, stage.stride)
            else:
                want = (stage.out_channels, stage.out_channels, 1)
            got = (block.in_channels, block.out_channels, block.stride)
            if got != want:
                out.append(Diagnostic(bpath, f"block interface (in, out, stride)={got}, "
                                             f"stage expects {want}"))
            _check_block(block, bpath, out)
        channels = stage.out_channels
    if network.final_bn is not None and network.final_bn.channels != channels:
        out.append(Diagnostic("final_bn", f"BN over {network.final_bn.channels} channels, "
                                          f"last stage produces {channels}"))
    if network.head.in_features != channels:
        out.append(Diagnostic("head", f"linear expects {network.head.in_features} features, "
                                      f"last stage produces {channels}"))
    if network.head.num_classes < 1:
        out.append(Diagnostic("head", "num_classes must be positive"))
    return out
