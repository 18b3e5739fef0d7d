"""Event-triggered distributed target tracking with information-pedigree fusion."""

from .belief import GaussianBelief, MotionModel, SensorModel, geometric_pool, predict, update
from .config import ScenarioConfig
from .engine import Engine
from .errors import PrimexError
from .fusion import primex_pairwise_fuse, solve_primex_weights
from .harness import MetricsReport, run_experiment
from .ic_codes import InformationCode, PrimeIndexAllocator
from .network import NetworkGraph, generate_topology, load_topology
from .protocols import ALGORITHMS, ProtocolConfig, run_time_step

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "Engine",
    "GaussianBelief",
    "InformationCode",
    "MetricsReport",
    "MotionModel",
    "NetworkGraph",
    "PrimeIndexAllocator",
    "PrimexError",
    "ProtocolConfig",
    "ScenarioConfig",
    "SensorModel",
    "generate_topology",
    "geometric_pool",
    "load_topology",
    "predict",
    "primex_pairwise_fuse",
    "run_experiment",
    "run_time_step",
    "solve_primex_weights",
    "update",
]
