"""Bootstrap percolation experiments on high-dimensional graphs."""

from .engine import (
    ClosureTrace,
    InfectionState,
    Rule,
    closure,
    parse_rule,
    percolates,
    sample_initial,
    state_from,
    step,
)
from .errors import PercolabError
from .graphs import GraphSpec, make_graph, parse_graph_spec
from .local import LocalEstimate, local_round_prob
from .structure import (
    PropertyReport,
    build_witness,
    count_cherries,
    verify_permutahedron_isometry,
    verify_property,
    witness_stats,
)
from .threshold import (
    PcEstimate,
    PhiEstimate,
    critical_formula,
    estimate_phi,
    exact_phi_small,
    find_pc,
    star_layer_report,
    sweep,
    tail_bound,
)

__version__ = "0.1.0"
