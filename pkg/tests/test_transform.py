import pytest
from hypothesis import given, settings, strategies as st

from cheapconv.cost import network_cost
from cheapconv.errors import TransformError
from cheapconv.ir import (ActivationOrder, BatchNormLayer, BlockKind, ConvLayer, Role,
                          build_resnet, build_wrn, standard_block, validate)
from cheapconv.transform import (BlockRecipe, GroupSpec, parse_recipe, rebuild_block,
                                 resolve_groups, substitute)

TABLE2_LABELS = ["S", "S-2x2", "G(2)", "G(4)", "G(8)", "G(16)", "G(N/16)", "G(N/8)",
                 "G(N/4)", "G(N/2)", "G(N)", "B(2)", "B(4)", "BG(2,2)", "BG(2,4)",
                 "BG(2,8)", "BG(2,16)", "BG(2,M/16)", "BG(2,M/8)", "BG(2,M/4)",
                 "BG(2,M/2)", "BG(2,M)", "BG(4,M)"]


def test_resolve_groups_examples():
    assert resolve_groups(GroupSpec.relative(1), 128) == 128
    assert resolve_groups(GroupSpec.absolute(2), 32) == 2
    assert resolve_groups(GroupSpec.relative(8), 16) == 2


@pytest.mark.parametrize("spec,channels", [(GroupSpec.absolute(3), 32),
                                           (GroupSpec.relative(3), 32),
                                           (GroupSpec.absolute(64), 32)])
def test_resolve_groups_rejects(spec, channels):
    with pytest.raises(TransformError, match="at stage9"):
        resolve_groups(spec, channels, "stage9")


@pytest.mark.parametrize("label", TABLE2_LABELS)
def test_parse_table2_labels(label):
    assert parse_recipe(label).label == label


@pytest.mark.parametrize("text,label", [("BG(2, M/4)", "BG(2,M/4)"), ("g( n / 8 )", "G(N/8)"),
                                        ("BG(2,N/4)", "BG(2,M/4)"), ("G(M)", "G(N)"),
                                        ("s-2×2", "S-2x2"), (" B(4) ", "B(4)")])
def test_parse_canonicalizes(text, label):
    assert parse_recipe(text).label == label


@pytest.mark.parametrize("text", ["", "X", "G", "G()", "G(2,2)", "B(1)", "B(N)", "BG(2)",
                                  "S(2)", "BG(1,M)", "G(N/0)", "G(0)", "G(N/x)"])
def test_parse_rejects(text):
    with pytest.raises(TransformError):
        parse_recipe(text)


def test_recipe_invariants():
    with pytest.raises(TransformError):
        BlockRecipe(BlockKind.B, b=1)
    with pytest.raises(TransformError):
        BlockRecipe(BlockKind.G)
    with pytest.raises(TransformError):
        BlockRecipe(BlockKind.S, b=2)


def _conv_params(block):
    return sum(c.in_channels * c.out_channels * c.kernel_h * c.kernel_w // c.groups
               for c in block.convs)


def _bn_params(block):
    return sum(2 * l.channels for l in block.layers if isinstance(l, BatchNormLayer))


@pytest.mark.parametrize("N", [32, 64, 128])
@pytest.mark.parametrize("order", list(ActivationOrder))
def test_uniform_block_costs_match_closed_forms(N, order):
    """I = O = N, stride 1, k = 3: block costs against the closed forms."""
    k2 = 9
    base = standard_block(N, N, 1, order)
    cases = [
        ("S", 2 * N * N * k2, 4 * N),
        ("G(4)", 2 * N * N * k2 // 4 + 2 * N * N, 8 * N),
        ("G(N)", 2 * N * k2 + 2 * N * N, 8 * N),
        ("B(2)", N * N * k2 // 4 + N * N, N * (2 + 2)),
        ("B(4)", N * N * k2 // 16 + N * N // 2, N * 2 + N),
        ("BG(2,2)", N * N * k2 // 8 + N * N, N * (2 + 2)),
        ("BG(2,M)", (N // 2) * k2 + N * N, N * (2 + 2)),
    ]
    for label, conv, bn in cases:
        block = rebuild_block(base, parse_recipe(label))
        assert _conv_params(block) == conv, label
        assert _bn_params(block) == bn, label


def test_g_block_layout():
    base = standard_block(16, 32, 2, ActivationOrder.PRE_ACTIVATION)
    block = rebuild_block(base, parse_recipe("G(N/8)"))
    convs = block.convs
    assert [(c.in_channels, c.out_channels, c.groups, c.stride, c.kernel_h) for c in convs] == [
        (16, 16, 2, 2, 3), (16, 32, 1, 1, 1), (32, 32, 4, 1, 3), (32, 32, 1, 1, 1)]
    bns = [l for l in block.layers if isinstance(l, BatchNormLayer)]
    assert [(b.channels, b.internal) for b in bns] == [(16, False), (16, True), (32, False), (32, True)]
    assert block.shortcut == base.shortcut


def test_bg_block_layout_post_activation():
    base = standard_block(64, 128, 2, ActivationOrder.POST_ACTIVATION)
    block = rebuild_block(base, parse_recipe("BG(2,M/4)"))
    assert [(c.in_channels, c.out_channels, c.groups, c.stride, c.role) for c in block.convs] == [
        (64, 64, 1, 1, Role.BLOCK_POINTWISE), (64, 64, 16, 2, Role.BLOCK_SPATIAL),
        (64, 128, 1, 1, Role.BLOCK_POINTWISE)]
    assert isinstance(block.layers[-1], BatchNormLayer) and not block.layers[-1].internal
    assert block.layers[1].internal and block.layers[3].internal


def test_dilated_block():
    net = substitute(build_wrn(40, 2, 10), parse_recipe("S-2x2"))
    for _, block in net.iter_blocks():
        for c in block.convs:
            assert (c.kernel_h, c.kernel_w, c.dilation) == (2, 2, 2)
        for c in block.shortcut:
            assert (c.kernel_h, c.dilation) == (1, 1)
    assert net.stem.kernel_h == 3


def test_substitute_s_is_identity():
    net = build_wrn(40, 2, 10)
    assert substitute(net, parse_recipe("S")) == net


def test_substitute_preserves_interface():
    net = build_resnet("resnet34", [1, 1, 1, 1], 1000)
    out = substitute(net, parse_recipe("G(4)"))
    assert out.stem == net.stem and out.head == net.head and out.pool == net.pool
    for (_, a), (_, b) in zip(net.iter_blocks(), out.iter_blocks()):
        assert (a.in_channels, a.out_channels, a.stride, a.activation_order, a.shortcut) == \
               (b.in_channels, b.out_channels, b.stride, b.activation_order, b.shortcut)
        assert b.kind is BlockKind.G


def test_substitute_rejects():
    with pytest.raises(TransformError, match="divide"):
        substitute(build_wrn(40, 2, 10), parse_recipe("G(3)"))
    # 16 / 32 leaves no bottleneck channels at the stage-1 width of WRN-16-1
    with pytest.raises(TransformError, match="bottleneck"):
        substitute(build_wrn(16, 1, 10), parse_recipe("B(3)"))
    with pytest.raises(TransformError, match="N/32"):
        substitute(build_wrn(16, 1, 10), parse_recipe("G(N/32)"))


def test_substitute_rejects_invalid_network():
    import dataclasses
    net = build_wrn(16, 1, 10)
    bad = dataclasses.replace(net, head=dataclasses.replace(net.head, in_features=7))
    with pytest.raises(TransformError, match="invalid network"):
        substitute(bad, parse_recipe("G(2)"))


@pytest.mark.parametrize("label", TABLE2_LABELS)
def test_substitute_idempotent_and_valid(label):
    net = build_wrn(40, 2, 10)
    r = parse_recipe(label)
    once = substitute(net, r)
    assert validate(once) == []
    assert substitute(once, r) == once


def test_g1_is_ordinary_conv():
    block = rebuild_block(standard_block(32, 32, 1, ActivationOrder.PRE_ACTIVATION),
                          parse_recipe("G(1)"))
    assert all(c.groups == 1 for c in block.convs)


RECIPE_STRATEGY = st.one_of(
    st.just("S"), st.just("S-2x2"),
    st.sampled_from([1, 2, 4, 8, 16]).map(lambda g: f"G({g})"),
    st.sampled_from([1, 2, 4, 8, 16]).map(lambda d: f"G(N/{d})"),
    st.sampled_from([2, 4]).map(lambda b: f"B({b})"),
    st.tuples(st.sampled_from([2, 4]), st.sampled_from(["1", "2", "4", "M", "M/2", "M/4"]))
      .map(lambda t: f"BG({t[0]},{t[1]})"),
)


@settings(max_examples=60, deadline=None)
@given(recipe=RECIPE_STRATEGY, width=st.sampled_from([1, 2, 4]), n=st.integers(1, 3))
def test_substitution_always_valid(recipe, width, n):
    net = build_wrn(6 * n + 4, width, 10)
    try:
        out = substitute(net, parse_recipe(recipe))
    except TransformError:
        return
    assert validate(out) == []
    assert substitute(out, parse_recipe(recipe)) == out
    assert network_cost(out).total_params > 0
