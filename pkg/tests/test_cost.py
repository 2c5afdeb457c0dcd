import pytest
from hypothesis import given, settings, strategies as st

from cheapconv.cost import (conv_mult_adds, conv_output_size, conv_params, format_mult_adds_m,
                            format_params_k, materialized_param_count, network_cost)
from cheapconv.errors import CostError
from cheapconv.ir import ConvLayer, build_resnet, build_wrn
from cheapconv.transform import parse_recipe, substitute


def test_conv_examples():
    assert conv_params(ConvLayer(64, 64, 3, 3)) == 36864
    assert conv_params(ConvLayer(128, 128, 3, 3, groups=128)) == 1152
    assert conv_params(ConvLayer(16, 32, 1, 1)) == 512
    assert conv_mult_adds(ConvLayer(16, 32, 3, 3), 32, 32) == (4608 * 1024, 32, 32)
    assert conv_mult_adds(ConvLayer(32, 64, 3, 3, stride=2), 32, 32) == (18432 * 256, 16, 16)


def test_grouped_mult_adds_divide_by_groups():
    dense = conv_mult_adds(ConvLayer(64, 64, 3, 3), 32, 32)[0]
    assert conv_mult_adds(ConvLayer(64, 64, 3, 3, groups=4), 32, 32)[0] * 4 == dense
    assert conv_mult_adds(ConvLayer(48, 32, 3, 3), 32, 32) == (442368 * 32, 32, 32)


@pytest.mark.parametrize("size,k,s,d,out", [(32, 3, 1, 1, 32), (32, 3, 2, 1, 16), (7, 3, 2, 1, 4),
                                            (32, 2, 1, 2, 32), (224, 7, 2, 1, 112), (1, 1, 1, 1, 1)])
def test_output_size(size, k, s, d, out):
    assert conv_output_size(size, k, s, d) == out


def _wrn_by_hand(depth, width, classes):
    """Closed-form count written out independently of the IR."""
    n = (depth - 4) // 6
    widths = [16 * width, 32 * width, 64 * width]
    total = 3 * 16 * 9
    c = 16
    for out in widths:
        for i in range(n):
            cin = c if i == 0 else out
            total += 2 * cin + cin * out * 9 + 2 * out + out * out * 9
            if i == 0 and cin != out:
                total += cin * out
        c = out
    return total + 2 * c + c * classes + classes


@pytest.mark.parametrize("depth,width", [(40, 2), (16, 2), (40, 1), (16, 1), (10, 1), (28, 10)])
def test_wrn_params_against_hand_count(depth, width):
    assert network_cost(build_wrn(depth, width, 10)).total_params == _wrn_by_hand(depth, width, 10)


def test_wrn40_2_teacher():
    rep = network_cost(build_wrn(40, 2, 10))
    assert rep.total_params == 2243546
    assert format_params_k(rep.total_params) == "2243.5"
    assert format_mult_adds_m(rep.mult_adds) == "328.3"
    assert format_mult_adds_m(network_cost(build_wrn(40, 2, 10), bn_mult_adds="none").mult_adds) == "327.6"


@pytest.mark.parametrize("net", [
    build_wrn(40, 2, 10), build_wrn(16, 1, 100),
    substitute(build_wrn(40, 2, 10), parse_recipe("BG(2,M/4)")),
    substitute(build_wrn(40, 2, 10), parse_recipe("G(N)")),
    substitute(build_wrn(40, 2, 10), parse_recipe("S-2x2")),
    build_resnet("resnet34", [1, 1, 1, 1], 1000),
    substitute(build_resnet("resnet18", [1, 0.5, 0.5, 0.5], 1000), parse_recipe("G(4)")),
], ids=["wrn40-2", "wrn16-1", "bg", "gN", "dil", "r34", "r18g4"])
def test_materialized_matches_formula(net):
    assert materialized_param_count(net) == network_cost(net).total_params


def test_monotone_in_groups_and_bottleneck():
    base = build_wrn(40, 2, 10)
    cost = lambda r: network_cost(substitute(base, parse_recipe(r)))
    for seq in (["G(1)", "G(2)", "G(4)", "G(8)", "G(16)"],
                ["G(N/16)", "G(N/8)", "G(N/4)", "G(N/2)", "G(N)"],
                ["BG(2,1)", "BG(2,2)", "BG(2,4)", "BG(2,M)"],
                ["S", "B(2)", "B(4)"]):
        costs = [cost(r) for r in seq]
        for a, b in zip(costs, costs[1:]):
            assert b.total_params <= a.total_params
            assert b.mult_adds <= a.mult_adds


@pytest.mark.parametrize("recipe", ["S", "G(N/8)", "BG(4,M)"])
def test_class_count_only_touches_head(recipe):
    r = parse_recipe(recipe)
    a = network_cost(substitute(build_wrn(40, 2, 10), r))
    b = network_cost(substitute(build_wrn(40, 2, 100), r))
    assert b.total_params - a.total_params == 11610
    assert b.mult_adds - a.mult_adds == 11520


def test_stride_one_scales_with_area():
    net = build_wrn(10, 1, 10)
    # strip the spatial strides by checking only the stem + stage1 rows
    small = network_cost(net, (3, 32, 32))
    big = network_cost(net, (3, 64, 64))
    for a, b in zip(small.per_block, big.per_block):
        if a.path in ("stem", "stage1.block1"):
            assert b.mult_adds == 4 * a.mult_adds
    assert big.total_params == small.total_params


def test_per_block_sums():
    rep = network_cost(substitute(build_wrn(40, 2, 10), parse_recipe("G(4)")))
    assert sum(b.params for b in rep.per_block) == rep.total_params
    assert sum(b.mult_adds for b in rep.per_block) == rep.mult_adds
    assert [b.path for b in rep.per_block][:2] == ["stem", "stage1.block1"]
    assert rep.per_block[-1].path == "head"
    assert len(rep.per_block) == 1 + 18 + 2


def test_csv_output():
    lines = network_cost(build_wrn(10, 1, 10)).to_csv().splitlines()
    assert lines[0] == "path,kind,params,mult_adds"
    assert lines[1].startswith("stem,stem,")
    assert lines[-1] == "head,linear,650,640"


def test_bn_conventions_order():
    net = substitute(build_wrn(40, 2, 10), parse_recipe("G(4)"))
    none = network_cost(net, bn_mult_adds="none").mult_adds
    boundary = network_cost(net, bn_mult_adds="boundary").mult_adds
    every = network_cost(net, bn_mult_adds="all").mult_adds
    assert none < boundary < every
    with pytest.raises(CostError):
        network_cost(net, bn_mult_adds="some")


def test_underflow_rejected():
    with pytest.raises(CostError, match="stride"):
        network_cost(build_wrn(40, 2, 10), (3, 2, 2))
    with pytest.raises(CostError, match="channels"):
        network_cost(build_wrn(40, 2, 10), (1, 32, 32))
    # ResNet needs far more resolution than CIFAR-sized inputs of 8x8
    with pytest.raises(CostError):
        network_cost(build_resnet("resnet18", [1, 1, 1, 1], 1000), (3, 8, 8))


def test_rounding_half_up():
    assert format_params_k(814650) == "814.7"
    assert format_params_k(814649) == "814.6"
    assert format_mult_adds_m(12_950_000) == "13.0"


@settings(max_examples=40, deadline=None)
@given(cin=st.integers(1, 8), cout_mult=st.integers(1, 4), g=st.sampled_from([1, 2, 4]),
       k=st.sampled_from([1, 3, 5]), stride=st.sampled_from([1, 2]), size=st.integers(4, 40))
def test_conv_mult_adds_counts_output_pixels(cin, cout_mult, g, k, stride, size):
    cin *= g
    cout = cout_mult * g
    layer = ConvLayer(cin, cout, k, k, stride=stride, groups=g)
    ma, oh, ow = conv_mult_adds(layer, size, size)
    assert oh == ow == -(-size // stride)
    assert ma == oh * ow * cout * (cin // g) * k * k
