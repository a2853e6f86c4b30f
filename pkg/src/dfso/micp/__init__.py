from .builders import (
    FORMULATIONS,
    bit_planes,
    build,
    build_aggregate_quantile,
    build_complementary,
    build_discretized,
    build_ksd_sublevel,
    build_quantile,
    build_vanilla,
    ksd_indices,
    ksd_level_grid,
    relaxation_floor,
)
from .certificates import certify, complete
from .lpformat import emit_lp, parse_lp, write_model
from .model import Constraint, ModelIR, Variable, solve_model, to_program
from .search import KsdSearchResult, ksd_search
