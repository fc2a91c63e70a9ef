"""Independent brute-force oracles and the on-demand oracle sweep.

Nothing here shares a code path with the solvers it checks: matchings are
enumerated, service vectors are searched over all 2^R candidates, LPs are
solved by enumerating basic solutions, and the pair-request capacity check
builds its own LP over capped matchings only.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .capacity import ArrivalDirection
from .errors import InfeasibleLP, OracleMismatch
from .lp import LPInstance, lp_solve
from .matching import (
    WeightedGraph,
    brute_force_matching,
    capped_matching,
    max_weight_matching,
    max_weight_service,
)
from .model import SwitchConfig, connectivity_support, enumerate_allocations, subset_classes
from .policies import mew2_decide, mew_allocate, mew_tables

DEFAULT_MAX_N = 8
VERTEX_ORACLE_MAX_VARS = 8


def witness_exists(b: Sequence[int], k: Sequence[int], config: SwitchConfig) -> bool:
    """Whether some assignment matrix S certifies ``b`` under connectivity ``k``.

    With one memory per client the only candidate S has s_rn = b_r for n in
    Omega(r), so the search collapses to a per-client load check.
    """
    load = [0] * config.n_clients
    for r, served in enumerate(b):
        if served:
            for n in config.request_classes[r]:
                load[n] += 1
    return all(load[n] <= k[n] for n in range(config.n_clients))


def exhaustive_service(k: Sequence[int], q: Sequence[int], config: SwitchConfig) -> tuple[tuple[int, ...], int]:
    """Max-weight admissible service by scanning every binary R-vector.

    ``itertools.product`` yields vectors in lexicographic order, so keeping
    only strict improvements returns the lexicographically smallest optimum.
    """
    best, best_w = (0,) * config.n_classes, 0
    for b in itertools.product((0, 1), repeat=config.n_classes):
        if not witness_exists(b, k, config):
            continue
        w = sum(int(qr) * br for qr, br in zip(q, b))
        if w > best_w:
            best, best_w = b, w
    return best, best_w


def brute_mew_objectives(q: Sequence[int], config: SwitchConfig) -> list[float]:
    """sum_r Q_r mu_r(m, Q) for every full allocation, via exhaustive service search."""
    out = []
    for m in enumerate_allocations(config, full_only=True):
        out.append(sum(p * exhaustive_service(k, q, config)[1] for k, p in connectivity_support(m, config)))
    return out


def vertex_enumeration_lp(inst: LPInstance) -> float:
    """Optimum of a bounded LP by enumerating every basic feasible solution.

    Each vertex of {A_ub x <= b_ub, A_eq x = b_eq, x >= 0} sits where n
    linearly independent constraints (all equalities included) are tight.
    Raises InfeasibleLP when no vertex exists.
    """
    n = inst.n_vars
    if n > VERTEX_ORACLE_MAX_VARS:
        raise ValueError(f"vertex enumeration limited to {VERTEX_ORACLE_MAX_VARS} variables")
    ineq_A = np.vstack([inst.A_ub, -np.eye(n)])
    ineq_b = np.concatenate([inst.b_ub, np.zeros(n)])
    n_free = n - inst.A_eq.shape[0]
    best = None
    for rows in itertools.combinations(range(ineq_A.shape[0]), max(n_free, 0)):
        A = np.vstack([inst.A_eq, ineq_A[list(rows)]])
        b = np.concatenate([inst.b_eq, ineq_b[list(rows)]])
        if A.shape[0] != n or abs(np.linalg.det(A)) < 1e-10:
            continue
        x = np.linalg.solve(A, b)
        scale = 1e-9 * max(1.0, float(np.abs(x).max()))
        if np.any(ineq_A @ x > ineq_b + scale) or np.any(np.abs(inst.A_eq @ x - inst.b_eq) > scale):
            continue
        val = float(inst.c @ x)
        if best is None or val > best:
            best = val
    if best is None:
        raise InfeasibleLP("no basic feasible solution")
    return best


def capped_matching_vectors(config: SwitchConfig) -> list[tuple[int, ...]]:
    """Service vectors of every matching of pair classes with at most M/2 edges."""
    pairs = [(r, omega) for r, omega in enumerate(config.request_classes) if len(omega) == 2]
    out = []

    def grow(start: int, used: int, chosen: list[int]) -> None:
        vec = [0] * config.n_classes
        for r in chosen:
            vec[r] = 1
        out.append(tuple(vec))
        if len(chosen) == config.n_memories // 2:
            return
        for idx in range(start, len(pairs)):
            r, (i, j) = pairs[idx]
            mask = (1 << i) | (1 << j)
            if not used & mask:
                grow(idx + 1, used | mask, chosen + [r])

    grow(0, 0, [])
    return out


def matching_polytope_intensity(config: SwitchConfig, direction: ArrivalDirection | None = None) -> float:
    """rho* from an LP whose only columns are capped matchings (p = 1, pair classes)."""
    direction = direction or ArrivalDirection.uniform(config.n_classes)
    vecs = np.array(capped_matching_vectors(config), dtype=float)
    n = len(vecs)
    # columns: one weight per matching, then rho
    A_ub = np.hstack([-vecs.T, direction.as_array()[:, None]])
    A_eq = np.zeros((1, n + 1))
    A_eq[0, :n] = 1.0
    c = np.zeros(n + 1)
    c[-1] = 1.0
    return lp_solve(LPInstance(c, A_ub, np.zeros(config.n_classes), A_eq, [1.0])).objective


def random_graph(n: int, rng: np.random.Generator, max_weight: int = 6) -> WeightedGraph:
    """Random integer weights on every pair; about a third of the pairs get weight 0."""
    edges = {}
    for i, j in itertools.combinations(range(n), 2):
        w = int(rng.integers(0, max_weight + 1)) if rng.random() > 1 / 3 else 0
        if w:
            edges[(i, j)] = w
    return WeightedGraph(n, edges)


def random_hypergraph(rng: np.random.Generator, max_n: int = 8, max_r: int = 10) -> SwitchConfig:
    n = int(rng.integers(2, max_n + 1))
    classes = set()
    target = int(rng.integers(1, max_r + 1))
    for _ in range(50 * target):
        if len(classes) == target:
            break
        size = int(rng.integers(2, n + 1))
        classes.add(tuple(sorted(int(x) for x in rng.choice(n, size=size, replace=False))))
    return SwitchConfig(n, n, 1.0, tuple(sorted(classes)))


def corollary_configs(max_n: int = DEFAULT_MAX_N, memories: Sequence[int] = (2, 4, 6)) -> list[SwitchConfig]:
    return [
        SwitchConfig(n, m, 1.0, subset_classes(n, [2]))
        for m in memories
        for n in range(max(2, m), max_n + 1)
    ]


def corollary_gap(q: np.ndarray, config: SwitchConfig, mew2=mew2_decide) -> tuple[int, int]:
    """(MEW S1 objective, MEW2 matching weight) in exact integers."""
    tables = mew_tables(config)
    best = tables.best_weights(q)
    # p = 1: the only connectivity of allocation m is m itself
    s1 = max(int(best[tables.k_index[m]]) for m in tables.allocations)
    _, float_obj = mew_allocate(q, config, tables)
    if float_obj != s1:
        raise OracleMismatch("MEW float objective disagrees with integer objective", (config, q.tolist()))
    return s1, int(mew2(q, config)[2])


@dataclass
class OracleReport:
    checks: dict[str, int] = field(default_factory=dict)

    def add(self, name: str, count: int = 1) -> None:
        self.checks[name] = self.checks.get(name, 0) + count

    @property
    def total(self) -> int:
        return sum(self.checks.values())


def run_oracle_checks(
    max_n: int = DEFAULT_MAX_N,
    seed: int = 0,
    n_graphs: int = 200,
    n_hypergraphs: int = 200,
    n_queues: int = 500,
    capped: Callable[[WeightedGraph, int], object] = capped_matching,
) -> OracleReport:
    """Compare every exact solver with its brute-force oracle.

    ``capped`` swaps in an alternative capped-matching routine (fault
    injection). The first disagreement raises `OracleMismatch` carrying the
    offending instance.
    """
    report = OracleReport()
    if max_n < 2:
        warnings.warn(f"max_n={max_n} leaves nothing to check; oracle sweep is vacuous", stacklevel=2)
        return report
    rng = np.random.default_rng(seed)

    for _ in range(n_graphs):
        g = random_graph(int(rng.integers(2, max_n + 1)), rng)
        got, want = max_weight_matching(g), brute_force_matching(g)
        if got != want:
            raise OracleMismatch(f"max_weight_matching {got} != brute force {want}", g)
        report.add("max_weight_matching")
        for cap in range(1, g.n_vertices // 2 + 1):
            got, want = capped(g, cap), brute_force_matching(g, cap)
            if got != want:
                raise OracleMismatch(f"capped_matching(cap={cap}) {got} != brute force {want}", g)
            report.add("capped_matching")

    for _ in range(n_hypergraphs):
        config = random_hypergraph(rng, max_n)
        k = tuple(int(x) for x in rng.integers(0, 2, size=config.n_clients))
        q = [int(x) for x in rng.integers(0, 10, size=config.n_classes)]
        service, weight = max_weight_service(k, q, config)
        want = exhaustive_service(k, q, config)
        if (service.served, weight) != want:
            raise OracleMismatch(f"max_weight_service {(service.served, weight)} != exhaustive {want}", (config, k, q))
        report.add("max_weight_service")

    def mew2(q, config):
        return mew2_decide(q, config, capped)

    for config in corollary_configs(max_n):
        for _ in range(n_queues):
            q = rng.integers(0, 20, size=config.n_classes)
            s1, w2 = corollary_gap(q, config, mew2)
            if s1 != w2:
                raise OracleMismatch(f"MEW objective {s1} != MEW2 weight {w2}", (config, q.tolist()))
            report.add("corollary_equivalence")
    return report


def off_by_one_capped(g: WeightedGraph, max_edges: int):
    """Deliberately faulty capped matching (allows one edge too many)."""
    return capped_matching(g, max_edges + 1)


MUTATIONS = {"capped-off-by-one": off_by_one_capped}

