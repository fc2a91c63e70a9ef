"""Scheduling policies: MEW, l-Approximate MEW and MEW2.

Each policy is a pure single-slot decision function plus the `Scheduler`
stepper that owns queue state and random streams across slots.

MEW's allocation step needs max_u q.u over the admissible set of every
connectivity reachable from every allocation. `MewTables` precomputes, once
per config, the admissible vectors of each distinct connectivity stacked into
one matrix and the probability of each connectivity under each allocation, so
a slot costs one matrix-vector product plus a segmented max.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import ConfigError, PolicyPreconditionError
from .matching import WeightedGraph, capped_matching, matching_to_classes
from .model import (
    DEFAULT_SERVICE_CAP,
    Binary,
    ServiceVector,
    SwitchConfig,
    _witness,
    admissible_matrix,
    connectivity_support,
    enumerate_allocations,
    queue_step,
    sample_connectivity,
)

# relative slack when comparing float objectives of different allocations
OBJECTIVE_RTOL = 1e-12


class PolicyKind(str, enum.Enum):
    MEW = "MEW"
    MEW2 = "MEW2"
    APPROX_MEW = "APPROX_MEW"


@dataclass(frozen=True)
class PolicySpec:
    kind: PolicyKind
    approx_budget: int | None = None
    rng_seed: int = 0
    # l-Approximate knobs: keep last slot's allocation among the candidates,
    # and draw a fresh candidate sample every slot (False: once per run)
    carry_over: bool = False
    resample: bool = True

    def __post_init__(self):
        try:
            kind = PolicyKind(self.kind)
        except ValueError:
            raise ConfigError(f"unknown policy kind {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        if (self.approx_budget is not None) != (kind is PolicyKind.APPROX_MEW):
            raise ConfigError("approx_budget must be given exactly when kind is APPROX_MEW")
        if self.approx_budget is not None and self.approx_budget < 1:
            raise ConfigError(f"approx_budget must be >= 1, got {self.approx_budget}")

    def validate(self, config: SwitchConfig) -> None:
        if self.kind is PolicyKind.APPROX_MEW:
            total = math.comb(config.n_clients, config.n_memories)
            if self.approx_budget > total:
                raise ConfigError(f"approx_budget {self.approx_budget} exceeds C(N, M) = {total}")
        if self.kind is PolicyKind.MEW2:
            check_mew2_regime(config)

    @property
    def label(self) -> str:
        if self.kind is PolicyKind.APPROX_MEW:
            return f"{self.approx_budget}-Approx MEW"
        return self.kind.value

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "approx_budget": self.approx_budget,
            "rng_seed": self.rng_seed,
            "carry_over": self.carry_over,
            "resample": self.resample,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PolicySpec":
        return cls(
            data["kind"],
            data.get("approx_budget"),
            int(data.get("rng_seed", 0)),
            bool(data.get("carry_over", False)),
            bool(data.get("resample", True)),
        )


@dataclass(frozen=True)
class SlotDecision:
    allocation: Binary
    connectivity: Binary
    service: ServiceVector
    objective: float


class MewTables:
    """Per-config lookup tables for evaluating MEW objectives in bulk."""

    def __init__(self, config: SwitchConfig, cap: int = DEFAULT_SERVICE_CAP):
        self.config = config
        self.allocations = enumerate_allocations(config, full_only=True)
        supports = [connectivity_support(m, config) for m in self.allocations]
        self.connectivities: list[Binary] = sorted({k for sup in supports for k, _ in sup})
        self.k_index = {k: i for i, k in enumerate(self.connectivities)}
        self.prob = np.zeros((len(self.allocations), len(self.connectivities)))
        for a, sup in enumerate(supports):
            for k, p in sup:
                self.prob[a, self.k_index[k]] = p
        blocks = [admissible_matrix(k, config, cap) for k in self.connectivities]
        self.offsets = np.cumsum([0] + [len(b) for b in blocks])
        self.services = np.vstack(blocks)

    def best_weights(self, q: np.ndarray) -> np.ndarray:
        """max_u q.u per connectivity."""
        return np.maximum.reduceat(self.services @ q, self.offsets[:-1])

    def objectives(self, q: np.ndarray) -> np.ndarray:
        """sum_r q_r mu_r(m, q) for every allocation, in allocation order."""
        return self.prob @ self.best_weights(q)

    def best_service(self, k: Binary, q: np.ndarray) -> tuple[Binary, int]:
        i = self.k_index[k]
        block = self.services[self.offsets[i]:self.offsets[i + 1]]
        j = int(np.argmax(block @ q))
        row = block[j]
        return tuple(int(x) for x in row), int(row @ q)


@lru_cache(maxsize=16)
def mew_tables(config: SwitchConfig) -> MewTables:
    return MewTables(config)


def _pick(objectives: np.ndarray, indices: Sequence[int]) -> int:
    vals = objectives[list(indices)]
    top = vals.max()
    tol = OBJECTIVE_RTOL * max(1.0, abs(top))
    return list(indices)[int(np.flatnonzero(vals >= top - tol)[0])]


def _as_queue(q, config: SwitchConfig) -> np.ndarray:
    q = np.asarray(q, dtype=np.int64)
    if q.shape != (config.n_classes,):
        raise ConfigError(f"queue vector must have length {config.n_classes}")
    return q


def mew_allocate(q, config: SwitchConfig, tables: MewTables | None = None) -> tuple[Binary, float]:
    """Full allocation maximizing the expected max-weight service.

    Ties (within a relative 1e-12) go to the first allocation in
    `enumerate_allocations` order.
    """
    tables = tables or mew_tables(config)
    q = _as_queue(q, config)
    obj = tables.objectives(q)
    idx = _pick(obj, range(len(obj)))
    return tables.allocations[idx], float(obj[idx])


def sample_allocation_indices(n_total: int, budget: int, rng: np.random.Generator) -> list[int]:
    """``budget`` distinct allocation indices drawn uniformly, returned sorted."""
    return sorted(int(i) for i in rng.choice(n_total, size=budget, replace=False))


def approx_mew_allocate(
    q,
    config: SwitchConfig,
    l: int,
    rng: np.random.Generator,
    tables: MewTables | None = None,
) -> tuple[Binary, float]:
    """MEW's allocation step restricted to ``l`` uniformly sampled allocations."""
    tables = tables or mew_tables(config)
    q = _as_queue(q, config)
    total = len(tables.allocations)
    if not 1 <= l <= total:
        raise ConfigError(f"l must lie in 1..{total}, got {l}")
    indices = sample_allocation_indices(total, l, rng)
    obj = tables.objectives(q)
    idx = _pick(obj, indices)
    return tables.allocations[idx], float(obj[idx])


def _serve(k: Binary, q: np.ndarray, config: SwitchConfig, tables: MewTables) -> ServiceVector:
    served, _ = tables.best_service(k, q)
    return ServiceVector(served, _witness(served, config))


def mew_step(
    q,
    a,
    config: SwitchConfig,
    spec: PolicySpec,
    rng: np.random.Generator,
    sample_rng: np.random.Generator | None = None,
) -> tuple[SlotDecision, np.ndarray]:
    """One slot of MEW (or l-Approximate MEW): allocate, attempt LLEs, serve, update.

    ``sample_rng`` feeds the allocation sampling of the approximate variant and
    defaults to ``rng``; LLE outcomes always come from ``rng``.
    """
    if spec.kind is PolicyKind.MEW2:
        raise PolicyPreconditionError("mew_step handles MEW and APPROX_MEW; use mew2_step")
    tables = mew_tables(config)
    q = _as_queue(q, config)
    if spec.kind is PolicyKind.APPROX_MEW:
        m, objective = approx_mew_allocate(q, config, spec.approx_budget, sample_rng or rng, tables)
    else:
        m, objective = mew_allocate(q, config, tables)
    k = sample_connectivity(m, config, rng)
    service = _serve(k, q, config, tables)
    return SlotDecision(m, k, service, objective), queue_step(q, service, a)


def check_mew2_regime(config: SwitchConfig) -> None:
    if not config.is_bipartite:
        raise PolicyPreconditionError("MEW2 requires every request class to be bipartite (two clients)")
    if config.n_memories % 2:
        raise PolicyPreconditionError(f"MEW2 requires M to be even, got M={config.n_memories}")
    if not config.always_successful:
        raise PolicyPreconditionError("MEW2 requires p_n = 1 for every client")


def pair_graph(q, config: SwitchConfig) -> WeightedGraph:
    """Complete client graph weighted by the backlog of each pair class."""
    edges = {}
    for r, omega in enumerate(config.request_classes):
        if len(omega) == 2 and q[r] > 0:
            edges[omega] = int(q[r])
    return WeightedGraph(config.n_clients, edges)


def mew2_decide(q, config: SwitchConfig, matcher=capped_matching) -> tuple[Binary, ServiceVector, int]:
    """MEW2's allocation and service for backlog ``q`` (no randomness involved).

    Matched clients get a memory; leftover memories go to the lowest-indexed
    unmatched clients so the allocation is a full one. ``matcher`` replaces
    the capped-matching routine (used for fault injection).
    """
    check_mew2_regime(config)
    q = _as_queue(q, config)
    matching = matcher(pair_graph(q, config), config.n_memories // 2)
    matched = matching.vertices
    spare = config.n_memories - len(matched)
    alloc = [0] * config.n_clients
    for n in range(config.n_clients):
        if n in matched:
            alloc[n] = 1
        elif spare > 0:
            alloc[n] = 1
            spare -= 1
    served = matching_to_classes(matching, config)
    return tuple(alloc), ServiceVector(served, _witness(served, config)), int(matching.total_weight)


def mew2_step(q, a, config: SwitchConfig, rng: np.random.Generator) -> tuple[SlotDecision, np.ndarray]:
    """One slot of MEW2. LLE draws are still consumed to keep streams aligned."""
    m, service, weight = mew2_decide(q, config)
    k = sample_connectivity(m, config, rng)
    return SlotDecision(m, k, service, float(weight)), queue_step(q, service, a)


class Scheduler:
    """Stateful stepper: owns the backlog and the policy's random streams.

    Not safe to share between threads; hand it over whole if needed.
    """

    def __init__(
        self,
        config: SwitchConfig,
        spec: PolicySpec,
        rng: np.random.Generator,
        sample_rng: np.random.Generator | None = None,
        q0=None,
    ):
        spec.validate(config)
        self.config = config
        self.spec = spec
        self.rng = rng
        self.sample_rng = sample_rng or rng
        self.q = np.zeros(config.n_classes, dtype=np.int64) if q0 is None else _as_queue(q0, config).copy()
        self._tables = None if spec.kind is PolicyKind.MEW2 else mew_tables(config)
        self._fixed: list[int] | None = None
        self._last: int | None = None

    def _candidates(self) -> list[int]:
        total = len(self._tables.allocations)
        if self.spec.resample or self._fixed is None:
            sample = sample_allocation_indices(total, self.spec.approx_budget, self.sample_rng)
            if not self.spec.resample:
                self._fixed = sample
        else:
            sample = self._fixed
        if self.spec.carry_over and self._last is not None and self._last not in sample:
            sample = sorted(sample + [self._last])
        return sample

    def step(self, a) -> SlotDecision:
        config, kind = self.config, self.spec.kind
        if kind is PolicyKind.MEW2:
            decision, self.q = mew2_step(self.q, a, config, self.rng)
            return decision
        obj = self._tables.objectives(self.q)
        indices = range(len(obj)) if kind is PolicyKind.MEW else self._candidates()
        idx = _pick(obj, indices)
        self._last = idx
        m = self._tables.allocations[idx]
        k = sample_connectivity(m, config, self.rng)
        service = _serve(k, self.q, config, self._tables)
        decision = SlotDecision(m, k, service, float(obj[idx]))
        self.q = queue_step(self.q, service, a)
        return decision
