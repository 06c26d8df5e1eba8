"""Distributed detection of all min-cuts of size at most three.

The package pairs a synchronous message-passing simulator (``runtime``)
with protocol implementations (``trees``, ``small_cuts``, ``sketches``,
``three_cuts``) that, given an undirected connected graph, locate every
minimum edge cut of size 1, 2 or 3 using only node-local state and
bounded per-edge bandwidth.  ``graphs`` holds the graph model plus
centralized reference algorithms used for validation, and ``cli``
exposes the command-line front end.
"""

from .graphs import (
    Graph,
    OracleResult,
    RootedTree,
    boundary,
    edge_connectivity,
    edge_pairs,
    generate,
    min_cut_oracle,
)
from .runtime import (
    BandwidthError,
    Engine,
    ProtocolError,
    RoundLimitError,
    SimulatorConfig,
    measure_diameter,
)
from .small_cuts import CutReport
from .three_cuts import PipelineResult, run_full_pipeline

__version__ = "0.1.0"

__all__ = [
    "BandwidthError",
    "CutReport",
    "Engine",
    "Graph",
    "OracleResult",
    "PipelineResult",
    "ProtocolError",
    "RootedTree",
    "RoundLimitError",
    "SimulatorConfig",
    "boundary",
    "edge_connectivity",
    "edge_pairs",
    "generate",
    "measure_diameter",
    "min_cut_oracle",
    "run_full_pipeline",
    "__version__",
]
