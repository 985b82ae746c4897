"""dagsim: deterministic discrete-event simulator for DAG-based PoW networks."""

from importlib import resources

from .analysis import (
    AnalysisError,
    CollisionReport,
    ProfitReport,
    analyze_collisions,
    analyze_profits,
)
from .engine import RunResult, Simulation, draw_next_block, run_simulation
from .mempool import EQUAL_KEY_SALT, Mempool, NotEnoughTransactions
from .model import (
    Block,
    Link,
    NodeSpec,
    RandomAccessVariant,
    SimConfig,
    Strategy,
    Topology,
    Transaction,
    parse_config,
    parse_topology,
    validate_config,
    write_config,
    write_topology,
)
from .reference import ReferenceMempool
from .sweep import SweepSpec, parse_sweep_spec, run_sweep
from .topology import (
    DiscreteDistribution,
    PowerPlan,
    build_topology,
    parse_distribution,
    sample_discrete,
)

__version__ = "0.1.0"


def example_distribution_path(name):
    """Path to one of the bundled example distribution files.

    Available: "degree_dist.txt" (peer connections per node) and
    "delay_dist.txt" (block propagation delay, milliseconds).  Both are small
    synthetic approximations of public measurements, not the measurements
    themselves.
    """
    return str(resources.files("dagsim").joinpath("data", name))
