"""Per-node caching subproblem as a rectangular assignment problem.

Objects are assigned to tier *slots*: a tier with capacity ``L`` contributes
``L`` identical slot columns. With that expansion the per-tier capacity and
one-tier-per-object constraints become plain one-to-one assignment
constraints.
"""
from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

if os.environ.get("MTVIP_PURE"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        from . import _kernels_py as _impl
from . import _kernels_py as _kpy

KERNEL = "compiled" if _impl.__name__.endswith("._kernels") else "python"


BRUTE_MAX = 8


class RapError(ValueError):
    pass


@dataclass(frozen=True)
class BenefitMatrix:
    values: np.ndarray      # (K, J)
    capacities: np.ndarray  # (J,)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        c = np.asarray(self.capacities, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != len(c):
            raise RapError(f"benefits {v.shape} do not match {len(c)} tier capacities")
        if np.any(c < 1):
            raise RapError("tier capacities must be at least 1")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "capacities", c)


@dataclass(frozen=True)
class SlotExpandedMatrix:
    values: np.ndarray     # (K, sum(L))
    slot_tier: np.ndarray  # tier index of each slot column

    def tier_slots(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.slot_tier == j)


@dataclass(frozen=True)
class Assignment:
    pairs: tuple[tuple[int, int], ...]  # (object, slot)
    objective: float


def expand(benefits: BenefitMatrix) -> SlotExpandedMatrix:
    slot_tier = np.repeat(np.arange(len(benefits.capacities)), benefits.capacities)
    return SlotExpandedMatrix(benefits.values[:, slot_tier], slot_tier)


def solve(matrix: SlotExpandedMatrix | np.ndarray) -> Assignment:
    """Maximum-benefit partial assignment of objects (rows) to slots (columns).

    Every slot is treated as one that must be filled: one zero-benefit
    "empty" row per slot is appended so a full-cardinality solve is always
    feasible and never forced onto a negative entry. Pairs with negative
    benefit (and empty-row pairs) are dropped from the result afterwards.
    """
    values = matrix.values if isinstance(matrix, SlotExpandedMatrix) else np.asarray(matrix, float)
    if values.ndim != 2:
        raise RapError("benefit matrix must be two-dimensional")
    if not np.all(np.isfinite(values)):
        raise RapError("benefit matrix has non-finite entries")
    K, M = values.shape
    if K == 0 or M == 0:
        return Assignment((), 0.0)
    padded = np.vstack([values, np.zeros((M, M))])
    row_to_slot = _impl.lap_max(padded)
    pairs = []
    total = 0.0
    for k in range(K):
        i = int(row_to_slot[k])
        if i >= 0 and values[k, i] >= 0:
            pairs.append((k, i))
            total += values[k, i]
    return Assignment(tuple(pairs), float(total))


def collapse(assignment: Assignment, slot_tier: np.ndarray, num_objects: int,
             num_tiers: int | None = None) -> np.ndarray:
    """Binary (object, tier) cache states from an object-to-slot assignment."""
    if num_tiers is None:
        num_tiers = int(slot_tier.max()) + 1 if len(slot_tier) else 0
    s = np.zeros((num_objects, num_tiers), dtype=bool)
    for k, i in assignment.pairs:
        s[k, slot_tier[i]] = True
    return s


@lru_cache(maxsize=64)
def _placements(K: int, J: int) -> np.ndarray:
    return np.array(list(itertools.product(range(-1, J), repeat=K)), dtype=np.int64).reshape(-1, K)


def brute_force(benefits: BenefitMatrix) -> tuple[float, np.ndarray]:
    """Exhaustive optimum over every feasible placement (small instances only).

    Each object independently goes to one tier or nowhere; placements that
    exceed a capacity are discarded.
    """
    v = benefits.values
    K, J = v.shape
    cap = benefits.capacities
    if K > BRUTE_MAX or int(cap.sum()) > BRUTE_MAX:
        raise RapError(f"brute_force limited to {BRUTE_MAX} objects and {BRUTE_MAX} slots, "
                       f"got {K} and {int(cap.sum())}")
    choice = _placements(K, J)
    counts = np.stack([(choice == j).sum(axis=1) for j in range(J)], axis=1)
    feasible = np.all(counts <= cap, axis=1)
    gains = np.where(choice >= 0, v[np.arange(K), np.maximum(choice, 0)], 0.0)
    totals = np.where(feasible, gains.sum(axis=1), -np.inf)
    best = int(np.argmax(totals))
    s = np.zeros((K, J), dtype=bool)
    if totals[best] <= 0:
        return 0.0, s
    for k, c in enumerate(choice[best]):
        if c >= 0:
            s[k, c] = True
    return float(totals[best]), s


def brute_force_slots(values: np.ndarray) -> float:
    """Exhaustive optimum of a plain rectangular matrix over partial injections.

    Dynamic program over the set of used columns, so it is exact but
    independent of the augmenting-path solver.
    """
    values = np.asarray(values, dtype=float)
    K, M = values.shape
    best = np.full(1 << M, -np.inf)
    best[0] = 0.0
    for k in range(K):
        nxt = best.copy()
        for mask in np.flatnonzero(np.isfinite(best)):
            for i in range(M):
                if not mask & (1 << i):
                    cand = best[mask] + values[k, i]
                    if cand > nxt[mask | (1 << i)]:
                        nxt[mask | (1 << i)] = cand
        best = nxt
    return float(best.max())


def solve_tiered(benefits: BenefitMatrix, prefer: np.ndarray | None = None) -> np.ndarray:
    """Fast exact solver for tier-structured instances, returns ``(K, J)`` states.

    Reaches the same optimum as ``collapse(solve(expand(b)))`` by exploiting
    that all slots of one tier are interchangeable. ``prefer[k]`` is the tier
    currently holding k (-1 if none); among optimal placements the one that
    keeps the most current pairs is returned.
    """
    v = benefits.values
    if not np.all(np.isfinite(v)):
        raise RapError("benefit matrix has non-finite entries")
    K, J = v.shape
    cap = benefits.capacities
    if prefer is not None:
        prefer = np.asarray(prefer, dtype=np.int64)
    s = np.zeros((K, J), dtype=bool)
    idx = _kpy.candidates(v, cap, prefer)
    if len(idx) == 0:
        return s
    tier = _impl.tiered_max(v[idx], cap, None if prefer is None else prefer[idx])
    hit = tier >= 0
    s[idx[hit], tier[hit]] = True
    return s


def solve_tiered_batch(values: np.ndarray, capacities: np.ndarray, prefer: np.ndarray,
                       allowed: np.ndarray) -> np.ndarray:
    """:func:`solve_tiered` over a stack of nodes; returns ``(N, K)`` tier indices.

    ``capacities`` is ``(N, J)``; a zero capacity disables that tier.
    """
    return _impl.tiered_max_batch(np.asarray(values, float), np.asarray(capacities, np.int64),
                                  np.asarray(prefer, np.int64), np.asarray(allowed, bool))


def objective(values: np.ndarray, states: np.ndarray) -> float:
    return float(np.sum(values[states]))


def cache_phase(V, tier_of, rates, ca, ce, caps, omega, allowed, impl=None) -> np.ndarray:
    """Benefits and optimal tiered placement for every node in one call.

    Equivalent to building the benefit matrix per node and calling
    :func:`solve_tiered` with ``prefer=tier_of[n]``; objects with
    ``allowed[n, k]`` false are never cached at n.
    """
    impl = impl or _impl
    return impl.vip_cache_phase(
        np.ascontiguousarray(V, dtype=np.float64), np.ascontiguousarray(tier_of, dtype=np.int64),
        np.ascontiguousarray(rates, dtype=np.float64), np.ascontiguousarray(ca, dtype=np.float64),
        np.ascontiguousarray(ce, dtype=np.float64), np.ascontiguousarray(caps, dtype=np.int64),
        float(omega), np.ascontiguousarray(allowed, dtype=np.uint8))


def max_differential(V, la, lb, perm, rev_cap, impl=None):
    """Per link ``(obj, mu, w)`` for the largest positive permitted differential."""
    impl = impl or _impl
    return impl.vip_forward(np.ascontiguousarray(V, dtype=np.float64),
                            np.ascontiguousarray(la, dtype=np.int64),
                            np.ascontiguousarray(lb, dtype=np.int64),
                            np.ascontiguousarray(perm, dtype=np.uint8),
                            np.ascontiguousarray(rev_cap, dtype=np.float64))
