"""Scenario and sweep configuration, with JSON round-tripping."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .model import ModelError, NodeCacheConfig, TierSpec
from .topology import BUILTIN

POLICIES = ("vip", "lfu", "lru", "fifo", "rand", "none")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TierParams:
    capacity: int
    read_rate: float
    write_rate: float
    admission_cost: float
    eviction_cost: float

    def spec(self) -> TierSpec:
        return TierSpec(self.capacity, self.read_rate, self.write_rate,
                        self.admission_cost, self.eviction_cost)


@dataclass(frozen=True)
class ScenarioConfig:
    topology: str = "abilene"
    num_objects: int = 1000
    zipf_exponent: float = 0.75
    arrival_rate: float = 10.0
    link_capacity: float = 10.0
    tiers: tuple[TierParams, ...] = ()
    omega: float = 0.0
    window: int = 100
    slot_length: float = 1.0
    duration: float = 100.0
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    policy: str = "vip"
    regular_nodes: int = 16
    topology_seed: int = 0
    device_model: str = "shared"

    def __post_init__(self):
        object.__setattr__(self, "tiers", tuple(
            t if isinstance(t, TierParams) else TierParams(**t) for t in self.tiers))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        self.validate()

    def validate(self):
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}; choose from {', '.join(POLICIES)}")
        if self.device_model not in ("split", "shared"):
            raise ConfigError(f"unknown device_model {self.device_model!r} (split or shared)")
        if not self.seeds:
            raise ConfigError("seed list is empty")
        if self.topology not in BUILTIN and not Path(self.topology).exists():
            raise ConfigError(f"topology file {self.topology!r} does not exist")
        if self.num_objects < 1:
            raise ConfigError("num_objects must be at least 1")
        if self.window < 1:
            raise ConfigError("window must be at least 1 slot")
        if not (self.slot_length > 0 and self.duration > 0):
            raise ConfigError("slot_length and duration must be positive")
        if self.omega < 0:
            raise ConfigError("omega must be non-negative")
        try:
            self.cache_config()
        except ModelError as e:
            raise ConfigError(str(e)) from e

    def cache_config(self) -> NodeCacheConfig:
        return NodeCacheConfig(tuple(t.spec() for t in self.tiers))

    @property
    def tier2_capacity(self):
        return self.tiers[1].capacity if len(self.tiers) > 1 else None

    def with_(self, **kw) -> "ScenarioConfig":
        if "tier2_capacity" in kw:
            cap = kw.pop("tier2_capacity")
            tiers = list(self.tiers)
            tiers[1] = replace(tiers[1], capacity=int(cap))
            kw["tiers"] = tuple(tiers)
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tiers"] = [asdict(t) for t in self.tiers]
        d["seeds"] = list(self.seeds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path):
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}") from None
        return cls.from_dict(data)

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def preset_defaults(tier2_capacity=100, **overrides) -> ScenarioConfig:
    """The common experiment setting: 10 obj/s links, 1000 Zipf(0.75) objects,
    Poisson(10) requests per node for 100 s, a small fast tier over a larger slow one."""
    tiers = (
        TierParams(capacity=5, read_rate=20.0, write_rate=20.0, admission_cost=4.0, eviction_cost=2.0),
        TierParams(capacity=tier2_capacity, read_rate=10.0, write_rate=10.0,
                   admission_cost=2.0, eviction_cost=1.0),
    )
    return ScenarioConfig(tiers=tiers, **overrides)


DEFAULT_OMEGAS = (0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0)


@dataclass(frozen=True)
class SweepSpec:
    """Cartesian sweep over topologies, policies, omega and tier-2 capacity.

    ``tier2_by_policy`` overrides the capacity axis per policy, since the
    best capacity differs between policies.
    """

    base: ScenarioConfig
    topologies: tuple[str, ...] = ("abilene",)
    policies: tuple[str, ...] = ("vip",)
    omegas: tuple[float, ...] = (0.0,)
    tier2_capacities: tuple[int, ...] = ()
    tier2_by_policy: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("topologies", "policies"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "omegas", tuple(float(w) for w in self.omegas))
        object.__setattr__(self, "tier2_capacities", tuple(int(c) for c in self.tier2_capacities))
        for name in ("omegas", "tier2_capacities"):
            axis = getattr(self, name)
            if len(set(axis)) != len(axis):
                raise ConfigError(f"{name} has duplicate values")
            if list(axis) != sorted(axis):
                raise ConfigError(f"{name} must be sorted ascending")
        for p in self.policies:
            if p not in POLICIES:
                raise ConfigError(f"unknown policy {p!r}")

    def configs(self) -> list[ScenarioConfig]:
        out = []
        for topo in self.topologies:
            for pol in self.policies:
                caps = self.tier2_by_policy.get(pol, self.tier2_capacities) or (None,)
                for cap in caps:
                    for w in self.omegas:
                        c = self.base.with_(topology=topo, policy=pol, omega=w)
                        if cap is not None:
                            c = c.with_(tier2_capacity=cap)
                        out.append(c)
        return out

    def to_dict(self) -> dict:
        return {
            "base": self.base.to_dict(), "topologies": list(self.topologies),
            "policies": list(self.policies), "omegas": list(self.omegas),
            "tier2_capacities": list(self.tier2_capacities),
            "tier2_by_policy": {k: list(v) for k, v in self.tier2_by_policy.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        d = dict(d)
        base = d.pop("base", None)
        base = ScenarioConfig.from_dict(base) if base is not None else preset_defaults()
        tbp = {k: tuple(v) for k, v in d.pop("tier2_by_policy", {}).items()}
        return cls(base=base, tier2_by_policy=tbp, **d)

    @classmethod
    def load(cls, path) -> "SweepSpec":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except FileNotFoundError:
            raise ConfigError(f"sweep file {path} not found") from None
        except (json.JSONDecodeError, TypeError) as e:
            raise ConfigError(f"bad sweep file {path}: {e}") from None
