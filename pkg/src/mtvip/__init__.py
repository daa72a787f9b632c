"""Multi-tier VIP caching: virtual plane, assignment solver, packet simulator."""
from .config import POLICIES, ConfigError, ScenarioConfig, SweepSpec, TierParams, preset_defaults
from .model import (MigrationBuffer, ModelError, NetworkModel, NodeCacheConfig, ObjectCatalog,
                    RoutingTable, TierSpec, assign_sources, build_routing, zipf_pmf)
from .rap import KERNEL, Assignment, BenefitMatrix, RapError, brute_force, collapse, expand, solve
from .topology import make_topology

__version__ = "0.1.0"

__all__ = [
    "POLICIES", "ConfigError", "ScenarioConfig", "SweepSpec", "TierParams", "preset_defaults",
    "MigrationBuffer", "ModelError", "NetworkModel", "NodeCacheConfig", "ObjectCatalog",
    "RoutingTable", "TierSpec", "assign_sources", "build_routing", "zipf_pmf",
    "KERNEL", "Assignment", "BenefitMatrix", "RapError", "brute_force", "collapse", "expand", "solve",
    "make_topology", "__version__",
]
