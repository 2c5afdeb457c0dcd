"""Structural model compression planning: residual-network IR, cheap block
substitutions, exact cost accounting, Pareto tables and reference
implementations of the distillation losses."""

from .archfile import dumps, load, loads, save
from .cost import CostReport, conv_mult_adds, conv_params, materialized_param_count, network_cost
from .errors import CheapConvError, CostError, ReportError, SpecError, TransformError
from .ir import (ActivationOrder, BatchNormLayer, BlockInstance, BlockKind, ConvLayer, Head,
                 NetworkSpec, PoolLayer, Role, StageSpec, build_resnet, build_wrn, validate)
from .kernel import (DistillConfig, at_loss, attention_map, conv2d_forward, finite_diff_check,
                     kd_loss)
from .report import ParetoRow, ParetoTable, emit, enumerate_recipes, mark_dominance, pareto_front
from .transform import BlockRecipe, GroupSpec, parse_recipe, resolve_groups, substitute

__version__ = "0.1.0"
