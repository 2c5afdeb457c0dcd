"""Block substitution passes.

Every residual block of a network is rebuilt as one of the cheap blocks
S, S-2x2 (dilated), G(g), B(b) or BG(b, g) while the stem, shortcuts, head
and the block's channel/stride interface are left alone.

Recipes have a small text form used by the CLI and for table labels::

    S   S-2x2   G(4)   G(N/8)   G(N)   B(2)   BG(2,M/4)   BG(4,M)

Bare integers are absolute group counts (or bottleneck factors); ``N/x`` and
``M/x`` are group counts relative to the channel count of the grouped conv.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Optional, Tuple

from .errors import TransformError
from .ir import (ActivationOrder, BatchNormLayer, BlockInstance, BlockKind,
                 ConvLayer, NetworkSpec, Role, StageSpec, validate)

ABSOLUTE = "absolute"
RELATIVE = "relative_to_channels"


@dataclass(frozen=True)
class GroupSpec:
    mode: str
    value: int

    def __post_init__(self):
        if self.mode not in (ABSOLUTE, RELATIVE):
            raise TransformError(f"group spec mode must be {ABSOLUTE!r} or {RELATIVE!r}")
        if isinstance(self.value, bool) or not isinstance(self.value, int) or self.value < 1:
            raise TransformError(f"group spec value must be a positive integer, got {self.value!r}")

    @classmethod
    def absolute(cls, g: int) -> "GroupSpec":
        return cls(ABSOLUTE, g)

    @classmethod
    def relative(cls, divisor: int) -> "GroupSpec":
        return cls(RELATIVE, divisor)

    def label(self, symbol: str = "N") -> str:
        if self.mode == ABSOLUTE:
            return str(self.value)
        return symbol if self.value == 1 else f"{symbol}/{self.value}"


@dataclass(frozen=True)
class BlockRecipe:
    kind: BlockKind
    b: Optional[int] = None
    gspec: Optional[GroupSpec] = None

    def __post_init__(self):
        kind = self.kind
        if kind in (BlockKind.B, BlockKind.BG):
            if self.b is None or isinstance(self.b, bool) or not isinstance(self.b, int):
                raise TransformError(f"{kind.value} recipe needs an integer bottleneck factor")
            if self.b < 2:
                raise TransformError(f"bottleneck factor must be >= 2, got {self.b}")
        elif self.b is not None:
            raise TransformError(f"{kind.value} recipe takes no bottleneck factor")
        if kind in (BlockKind.G, BlockKind.BG):
            if self.gspec is None:
                raise TransformError(f"{kind.value} recipe needs a group spec")
        elif self.gspec is not None:
            raise TransformError(f"{kind.value} recipe takes no group spec")

    @property
    def label(self) -> str:
        k = self.kind
        if k is BlockKind.S:
            return "S"
        if k is BlockKind.S_DILATED:
            return "S-2x2"
        if k is BlockKind.G:
            return f"G({self.gspec.label('N')})"
        if k is BlockKind.B:
            return f"B({self.b})"
        return f"BG({self.b},{self.gspec.label('M')})"

    def __str__(self) -> str:
        return self.label


_RECIPE_RE = re.compile(r"^\s*(S-2[x×]2|BG|S|G|B)\s*(?:\((.*)\))?\s*$", re.IGNORECASE)
_GROUP_RE = re.compile(r"^([NM])(?:\s*/\s*(\d+))?$|^(\d+)$", re.IGNORECASE)


def _parse_group(text: str, full: str) -> GroupSpec:
    m = _GROUP_RE.match(text.strip())
    if not m:
        raise TransformError(f"bad group spec {text.strip()!r} in recipe {full!r}; "
                             "expected an integer, N, M, N/x or M/x")
    if m.group(3) is not None:
        return GroupSpec.absolute(int(m.group(3)))
    return GroupSpec.relative(int(m.group(2) or 1))


def _parse_int(text: str, what: str, full: str) -> int:
    text = text.strip()
    if not text.isdigit():
        raise TransformError(f"bad {what} {text!r} in recipe {full!r}")
    return int(text)


def parse_recipe(text: str) -> BlockRecipe:
    """Parse the recipe mini-language, e.g. ``"BG(2, M/4)"``."""
    m = _RECIPE_RE.match(text)
    if not m:
        raise TransformError(f"cannot parse recipe {text!r}")
    head, args = m.group(1).upper().replace("×", "X"), m.group(2)
    parts = [] if args is None or not args.strip() else args.split(",")
    if head in ("S", "S-2X2"):
        if parts:
            raise TransformError(f"recipe {text!r}: {head} takes no arguments")
        return BlockRecipe(BlockKind.S if head == "S" else BlockKind.S_DILATED)
    if head == "G":
        if len(parts) != 1:
            raise TransformError(f"recipe {text!r}: G takes one group spec")
        return BlockRecipe(BlockKind.G, gspec=_parse_group(parts[0], text))
    if head == "B":
        if len(parts) != 1:
            raise TransformError(f"recipe {text!r}: B takes one bottleneck factor")
        return BlockRecipe(BlockKind.B, b=_parse_int(parts[0], "bottleneck factor", text))
    if len(parts) != 2:
        raise TransformError(f"recipe {text!r}: BG takes a bottleneck factor and a group spec")
    return BlockRecipe(BlockKind.BG, b=_parse_int(parts[0], "bottleneck factor", text),
                       gspec=_parse_group(parts[1], text))


def resolve_groups(gspec: GroupSpec, channels: int, path: str = "") -> int:
    """Concrete group count of ``gspec`` applied to a conv over ``channels``."""
    where = f" at {path}" if path else ""
    if channels < 1:
        raise TransformError(f"channel count must be positive{where}, got {channels}")
    if gspec.mode == ABSOLUTE:
        g = gspec.value
    else:
        if channels % gspec.value:
            raise TransformError(f"relative group spec N/{gspec.value} does not divide "
                                 f"{channels} channels{where}")
        g = channels // gspec.value
    if channels % g:
        raise TransformError(f"{g} groups do not divide {channels} channels{where} "
                             f"(group spec {gspec.label()})")
    return g


def _spatial_kernel(block: BlockInstance) -> Tuple[int, int, int]:
    for c in block.convs:
        if c.role is Role.BLOCK_SPATIAL:
            return c.kernel_h, c.kernel_w, c.dilation
    # a block made only of pointwise convs has nothing to go on
    raise TransformError("block has no spatial convolution to take the kernel size from")


def _with_bns(units, order: ActivationOrder) -> Tuple:
    """Interleave BN layers with the convs of ``units`` (lists of convs).

    Only the BN at a unit's boundary (entry for pre-activation, exit for
    post-activation) is a block-level BN; the rest are marked internal.
    """
    layers = []
    pre = order is ActivationOrder.PRE_ACTIVATION
    for unit in units:
        last = len(unit) - 1
        for i, conv in enumerate(unit):
            if pre:
                layers += [BatchNormLayer(conv.in_channels, internal=i != 0), conv]
            else:
                layers += [conv, BatchNormLayer(conv.out_channels, internal=i != last)]
    return tuple(layers)


def rebuild_block(block: BlockInstance, recipe: BlockRecipe, path: str = "") -> BlockInstance:
    """Rebuild one block from its (in, out, stride) interface."""
    I, O, s = block.in_channels, block.out_channels, block.stride
    kh, kw, dil = _spatial_kernel(block)
    where = f"{path}: " if path else ""

    def spatial(cin, cout, stride=1, groups=1):
        return ConvLayer(cin, cout, kh, kw, stride=stride, dilation=dil, groups=groups,
                         role=Role.BLOCK_SPATIAL)

    def pointwise(cin, cout):
        return ConvLayer(cin, cout, 1, 1, role=Role.BLOCK_POINTWISE)

    kind = recipe.kind
    if kind is BlockKind.S:
        units = [[spatial(I, O, s)], [spatial(O, O)]]
    elif kind is BlockKind.S_DILATED:
        units = [[ConvLayer(I, O, 2, 2, stride=s, dilation=2)],
                 [ConvLayer(O, O, 2, 2, dilation=2)]]
    elif kind is BlockKind.G:
        g_in = resolve_groups(recipe.gspec, I, f"{path} first grouped conv")
        g_out = resolve_groups(recipe.gspec, O, f"{path} second grouped conv")
        units = [[spatial(I, I, s, g_in), pointwise(I, O)],
                 [spatial(O, O, 1, g_out), pointwise(O, O)]]
    else:
        if O % recipe.b:
            raise TransformError(f"{where}bottleneck {O}/{recipe.b} is not an integer")
        m = O // recipe.b
        g = 1
        if kind is BlockKind.BG:
            g = resolve_groups(recipe.gspec, m, f"{path} bottleneck grouped conv")
        units = [[pointwise(I, m), spatial(m, m, s, g), pointwise(m, O)]]
    return replace(block, kind=kind, layers=_with_bns(units, block.activation_order))


def substitute(network: NetworkSpec, recipe: BlockRecipe) -> NetworkSpec:
    """Rebuild every residual block of ``network`` per ``recipe``."""
    problems = validate(network)
    if problems:
        raise TransformError("cannot substitute into an invalid network: "
                             + "; ".join(map(str, problems)))
    stages = []
    for si, stage in enumerate(network.stages, start=1):
        blocks = tuple(rebuild_block(b, recipe, f"stage{si}.block{bi}")
                       for bi, b in enumerate(stage.blocks, start=1))
        stages.append(StageSpec(blocks, stage.in_channels, stage.out_channels, stage.stride))
    name = network.name.split("/")[0]
    if recipe.kind is not BlockKind.S:
        name = f"{name}/{recipe.label}"
    return replace(network, name=name, stages=tuple(stages))
