"""
Costing cheap convolutional blocks
==================================

Swap the standard residual block of a WRN-40-2 for grouped and bottlenecked
alternatives and look at what each substitution saves.
"""

from cheapconv import build_wrn, network_cost, parse_recipe, substitute
from cheapconv.cost import format_mult_adds_m, format_params_k

# The teacher: 40 layers deep, twice the base width, ten classes.
teacher = build_wrn(40, 2, 10)
base = network_cost(teacher)
print(f"{teacher.name}: {format_params_k(base.total_params)}K params, "
      f"{format_mult_adds_m(base.mult_adds)}M mult-adds")

# Each recipe rewrites every residual block while the stem, the stage
# interfaces and the classifier stay put.
for text in ["S-2x2", "G(4)", "G(N)", "B(2)", "BG(2,2)", "BG(4,M)"]:
    student = substitute(teacher, parse_recipe(text))
    rep = network_cost(student)
    print(f"{text:>8}  {format_params_k(rep.total_params):>7}K  "
          f"{format_mult_adds_m(rep.mult_adds):>6}M  "
          f"x{base.total_params / rep.total_params:.1f} smaller")

# Per-block rows show where the parameters go; the last stage dominates.
rep = network_cost(substitute(teacher, parse_recipe("G(N/8)")))
for row in rep.per_block[::6]:
    print(f"{row.path:<15} {row.params:>8} params {row.mult_adds:>10} mult-adds")
