"""
ResNets at ImageNet resolution
==============================

The same substitutions applied to ResNet-34, next to a shrunken ResNet-18.
Cost is measured on a 224x224 input.
"""

from cheapconv import build_resnet, network_cost, parse_recipe, substitute
from cheapconv.cost import round_half_up

resnet34 = build_resnet("resnet34", [1, 1, 1, 1], 1000)
networks = {
    "Res34": resnet34,
    "Res18": build_resnet("resnet18", [1, 1, 1, 1], 1000),
    # halving every stage after the first
    "Res18-0.5": build_resnet("resnet18", [1, "1/2", "1/2", "1/2"], 1000),
    "Res34-G(4)": substitute(resnet34, parse_recipe("G(4)")),
    "Res34-G(N)": substitute(resnet34, parse_recipe("G(N)")),
}

for name, net in networks.items():
    rep = network_cost(net, (3, 224, 224))
    print(f"{name:<11} {round_half_up(rep.total_params, 10**6, 1):>5}M params  "
          f"{round_half_up(rep.mult_adds, 10**9, 3)}G mult-adds")

# Grouped blocks with one group per channel keep the 34-layer depth
# at roughly the parameter budget of the half-width ResNet-18.
