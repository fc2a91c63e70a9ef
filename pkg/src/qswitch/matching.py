"""Exact weighted matching: graph matchings, capped matchings and class selection.

Every maximizer in this module breaks ties the same way. Among optimal
matchings the one with the fewest edges wins, then the one whose sorted edge
list is lexicographically smallest. Among optimal service vectors the
lexicographically smallest 0/1 tuple wins.

The graph solver is an exact dynamic program over vertex subsets (always
branching on the lowest remaining vertex). The tie-break is folded into the
weights as an integer perturbation, so the DP only ever compares exact ints
and its maximizer is unique on the real edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError
from .model import (
    DEFAULT_SERVICE_CAP,
    ServiceVector,
    SwitchConfig,
    _witness,
    candidate_classes,
    check_service_cap,
    connectivity_support,
)

BRUTE_FORCE_MAX_VERTICES = 12

Edge = tuple[int, int]


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected graph on vertices 0..n-1; missing pairs have weight 0."""

    n_vertices: int
    edge_weights: Mapping[Edge, float]

    def __post_init__(self):
        if self.n_vertices < 0:
            raise ConfigError("n_vertices must be nonnegative")
        clean = {}
        for (i, j), w in dict(self.edge_weights).items():
            i, j = int(i), int(j)
            if i == j:
                raise ConfigError(f"self-loop on vertex {i}")
            if not (0 <= i < self.n_vertices and 0 <= j < self.n_vertices):
                raise ConfigError(f"edge ({i}, {j}) outside 0..{self.n_vertices - 1}")
            if w < 0:
                raise ConfigError(f"negative weight {w} on edge ({i}, {j})")
            key = (min(i, j), max(i, j))
            if key in clean and clean[key] != w:
                raise ConfigError(f"asymmetric weights on edge {key}")
            clean[key] = w
        object.__setattr__(self, "edge_weights", clean)

    def weight(self, i: int, j: int):
        return self.edge_weights.get((min(i, j), max(i, j)), 0)

    @classmethod
    def from_matrix(cls, matrix) -> "WeightedGraph":
        mat = np.asarray(matrix)
        n = mat.shape[0]
        if not np.array_equal(mat, mat.T):
            raise ConfigError("weight matrix must be symmetric")
        edges = {}
        for i in range(n):
            for j in range(i + 1, n):
                w = mat[i, j].item()
                if w:
                    edges[(i, j)] = w
        return cls(n, edges)


@dataclass(frozen=True)
class Matching:
    edges: tuple[Edge, ...]
    total_weight: float

    def __len__(self) -> int:
        return len(self.edges)

    @property
    def vertices(self) -> set[int]:
        return {v for e in self.edges for v in e}


def _make_matching(g: WeightedGraph, edges) -> Matching:
    edges = tuple(sorted((min(i, j), max(i, j)) for i, j in edges))
    return Matching(edges, sum((g.weight(i, j) for i, j in edges), 0))


def _integer_weights(g: WeightedGraph) -> dict[Edge, int]:
    """Positive edge weights scaled to exact integers (order preserving)."""
    fracs = {e: Fraction(w) for e, w in g.edge_weights.items() if w > 0}
    denom = 1
    for f in fracs.values():
        denom = math.lcm(denom, f.denominator)
    return {e: int(f * denom) for e, f in sorted(fracs.items())}


def _solve_dp(n: int, adj: list[list[tuple[int, int]]], first_virtual: int) -> list[Edge]:
    """Maximum-weight matching by DP over vertex subsets.

    ``adj[i]`` lists ``(j, w)`` for j > i with positive integer ``w``. Only
    strictly better alternatives replace the incumbent, so ties resolve to the
    first option explored. Vertices from ``first_virtual`` on are
    interchangeable, so only the lowest free one is tried as a partner.
    """
    memo: dict[int, int] = {0: 0}
    choice: dict[int, int] = {}

    def best(mask: int) -> int:
        hit = memo.get(mask)
        if hit is not None:
            return hit
        i = (mask & -mask).bit_length() - 1
        rest = mask ^ (1 << i)
        value = best(rest)
        pick = -1
        for j, w in adj[i]:
            if rest >> j & 1:
                cand = w + best(rest ^ (1 << j))
                if cand > value:
                    value, pick = cand, j
                if j >= first_virtual:
                    break
        memo[mask] = value
        choice[mask] = pick
        return value

    full = (1 << n) - 1
    best(full)
    edges = []
    mask = full
    while mask:
        i = (mask & -mask).bit_length() - 1
        j = choice[mask]
        mask ^= 1 << i
        if j >= 0:
            edges.append((i, j))
            mask ^= 1 << j
    return edges


def _solve(g: WeightedGraph, n_virtual: int) -> list[Edge]:
    weights = _integer_weights(g)
    order = list(weights)
    n_edges = len(order)
    count_penalty = 1 << n_edges
    scale = (g.n_vertices // 2 + 2) * count_penalty
    n = g.n_vertices + n_virtual
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for idx, (i, j) in enumerate(order):
        # weight first, then fewer edges, then lexicographically smaller edge set
        w = weights[(i, j)] * scale - count_penalty + (1 << (n_edges - 1 - idx))
        adj[i].append((j, w))
    if n_virtual:
        # finite stand-in for an infinite weight: beats every real matching
        surrogate = (1 + sum(weights.values())) * scale
        for i in range(g.n_vertices):
            for v in range(g.n_vertices, n):
                adj[i].append((v, surrogate))
    for row in adj:
        row.sort()
    return [(i, j) for i, j in _solve_dp(n, adj, g.n_vertices) if j < g.n_vertices]


def max_weight_matching(g: WeightedGraph) -> Matching:
    """Maximum-weight matching with the module's deterministic tie-break."""
    return _make_matching(g, _solve(g, 0))


def capped_matching(g: WeightedGraph, max_edges: int) -> Matching:
    """Maximum-weight matching with at most ``max_edges`` edges.

    The cap is enforced by augmentation: ``n - 2*max_edges`` virtual vertices
    joined to every real vertex by a dominating weight occupy all but
    ``2*max_edges`` real vertices at any optimum. Virtual edges are stripped
    from the result.
    """
    if max_edges < 1:
        raise ConfigError(f"max_edges must be >= 1, got {max_edges}")
    n_virtual = max(0, g.n_vertices - 2 * max_edges)
    return _make_matching(g, _solve(g, n_virtual))


def _all_matchings(n: int):
    def rec(remaining: tuple[int, ...]):
        if not remaining:
            yield ()
            return
        i, rest = remaining[0], remaining[1:]
        yield from rec(rest)
        for idx, j in enumerate(rest):
            for tail in rec(rest[:idx] + rest[idx + 1:]):
                yield ((i, j),) + tail

    yield from rec(tuple(range(n)))


def brute_force_matching(g: WeightedGraph, max_edges: int | None = None) -> Matching:
    """Exhaustive optimum over every matching of the complete graph on g's vertices."""
    if g.n_vertices > BRUTE_FORCE_MAX_VERTICES:
        raise ConfigError(f"brute force limited to {BRUTE_FORCE_MAX_VERTICES} vertices, got {g.n_vertices}")
    best_key = None
    best_edges: tuple[Edge, ...] = ()
    for edges in _all_matchings(g.n_vertices):
        if max_edges is not None and len(edges) > max_edges:
            continue
        edges = tuple(sorted(edges))
        total = sum((Fraction(g.weight(i, j)) for i, j in edges), Fraction(0))
        key = (-total, len(edges), edges)
        if best_key is None or key < best_key:
            best_key, best_edges = key, edges
    return _make_matching(g, best_edges)


def max_weight_service(
    k: Sequence[int], q: Sequence[int], config: SwitchConfig, cap: int = DEFAULT_SERVICE_CAP
) -> tuple[ServiceVector, int]:
    """Service vector maximizing sum_r q_r b_r over the admissible set of ``k``.

    Depth-first branch and bound over classes in index order, trying b_r = 0
    before b_r = 1, so leaves are visited in lexicographic order and the first
    optimum found is the lexicographically smallest one.
    """
    k = tuple(int(x) for x in k)
    q = [int(x) for x in q]
    if len(q) != config.n_classes:
        raise ConfigError(f"queue vector has length {len(q)}, expected {config.n_classes}")
    candidates = candidate_classes(k, config)
    check_service_cap(len(candidates), cap)
    masks = config.class_masks
    # zero-backlog classes never raise the objective and only make b larger
    live = [r for r in candidates if q[r] > 0]
    suffix = [0] * (len(live) + 1)
    for i in range(len(live) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + q[live[i]]

    best_value = -1
    best_set = 0

    def search(i: int, used: int, value: int, chosen: int) -> None:
        nonlocal best_value, best_set
        if i == len(live):
            if value > best_value:
                best_value, best_set = value, chosen
            return
        if value + suffix[i] <= best_value:
            return
        search(i + 1, used, value, chosen)
        r = live[i]
        if masks[r] & used == 0:
            search(i + 1, used | masks[r], value + q[r], chosen | (1 << r))

    search(0, 0, 0, 0)
    served = tuple((best_set >> r) & 1 for r in range(config.n_classes))
    return ServiceVector(served, _witness(served, config)), best_value


def expected_service(
    m: Sequence[int], q: Sequence[int], config: SwitchConfig, cap: int = DEFAULT_SERVICE_CAP
) -> np.ndarray:
    """Connectivity-averaged max-weight service vector for allocation ``m``."""
    mu = np.zeros(config.n_classes)
    for k, prob in connectivity_support(m, config):
        service, _ = max_weight_service(k, q, config, cap)
        mu += prob * service.as_array()
    return mu


def matching_to_classes(matching: Matching, config: SwitchConfig) -> tuple[int, ...]:
    """Service vector of the pair classes whose client pair is a matched edge.

    Edges with no registered class are dropped.
    """
    index = {omega: r for r, omega in enumerate(config.request_classes) if len(omega) == 2}
    served = [0] * config.n_classes
    for edge in matching.edges:
        r = index.get(edge)
        if r is not None:
            served[r] = 1
    return tuple(served)


def count_matchings(n: int) -> int:
    """Number of matchings (incl. empty) in the complete graph K_n."""
    return sum(math.comb(n, 2 * j) * math.prod(range(2 * j - 1, 0, -2)) for j in range(n // 2 + 1))


__all__ = [
    "WeightedGraph",
    "Matching",
    "max_weight_matching",
    "capped_matching",
    "brute_force_matching",
    "max_weight_service",
    "expected_service",
    "matching_to_classes",
    "count_matchings",
]
