"""Switch model: configuration, memory allocations, LLE connectivity and services.

Clients and request classes are 0-indexed everywhere inside the library.
`SwitchConfig.from_dict` / `to_dict` speak the 1-indexed convention used in
scenario files and CLI output.

Vectors over clients (allocations ``m``, connectivities ``k``) and over request
classes (service vectors ``b``) are plain tuples of 0/1 ints so that they hash,
compare lexicographically and print cleanly. Queue backlogs are int64 numpy
arrays.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .errors import CapExceeded, ConfigError

DEFAULT_SERVICE_CAP = 2**20

Binary = tuple[int, ...]


@dataclass(frozen=True)
class SwitchConfig:
    """Static switch instance: N clients, M memories, LLE success p_n, classes."""

    n_clients: int
    n_memories: int
    lle_success: tuple[float, ...]
    request_classes: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        n, m = self.n_clients, self.n_memories
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ConfigError(f"n_clients must be a positive integer, got {n!r}")
        if not isinstance(m, (int, np.integer)) or not 1 <= m <= n:
            raise ConfigError(f"n_memories must satisfy 1 <= M <= N={n}, got {m!r}")
        p = self.lle_success
        if isinstance(p, (int, float)):
            p = (float(p),) * n
        p = tuple(float(x) for x in p)
        if len(p) != n:
            raise ConfigError(f"lle_success has length {len(p)}, expected {n}")
        if any(not (0.0 <= x <= 1.0) for x in p):
            raise ConfigError(f"lle_success entries must lie in [0, 1]: {p}")
        classes = []
        seen = set()
        for r, omega in enumerate(self.request_classes):
            members = tuple(sorted(int(c) for c in omega))
            if len(members) < 2 or len(set(members)) != len(members):
                raise ConfigError(f"request class {r} must list at least 2 distinct clients: {omega!r}")
            if members[0] < 0 or members[-1] >= n:
                raise ConfigError(f"request class {r} references a client outside the {n} configured clients: {omega!r}")
            if members in seen:
                raise ConfigError(f"duplicate request class {members}")
            seen.add(members)
            classes.append(members)
        if not classes:
            raise ConfigError("at least one request class is required")
        object.__setattr__(self, "n_clients", int(n))
        object.__setattr__(self, "n_memories", int(m))
        object.__setattr__(self, "lle_success", p)
        object.__setattr__(self, "request_classes", tuple(classes))

    @property
    def n_classes(self) -> int:
        return len(self.request_classes)

    @cached_property
    def class_masks(self) -> tuple[int, ...]:
        """Bitmask of participating clients per request class."""
        return tuple(sum(1 << c for c in omega) for omega in self.request_classes)

    @cached_property
    def incidence(self) -> np.ndarray:
        """R x N 0/1 matrix with a 1 where client n takes part in class r."""
        mat = np.zeros((self.n_classes, self.n_clients), dtype=np.int64)
        for r, omega in enumerate(self.request_classes):
            mat[r, list(omega)] = 1
        return mat

    @property
    def is_bipartite(self) -> bool:
        return all(len(omega) == 2 for omega in self.request_classes)

    @property
    def always_successful(self) -> bool:
        return all(x == 1.0 for x in self.lle_success)

    @classmethod
    def from_dict(cls, data: dict) -> "SwitchConfig":
        """Build from the 1-indexed JSON form used by scenario files."""
        try:
            n = data["n_clients"]
            classes = [[int(c) - 1 for c in omega] for omega in data["request_classes"]]
            return cls(n, data["n_memories"], data.get("lle_success", 1.0), tuple(map(tuple, classes)))
        except KeyError as exc:
            raise ConfigError(f"missing config field {exc}") from None
        except TypeError as exc:
            raise ConfigError(f"malformed config: {exc}") from None

    def to_dict(self) -> dict:
        return {
            "n_clients": self.n_clients,
            "n_memories": self.n_memories,
            "lle_success": list(self.lle_success),
            "request_classes": [[c + 1 for c in omega] for omega in self.request_classes],
        }


def subset_classes(n_clients: int, sizes: Sequence[int]) -> tuple[tuple[int, ...], ...]:
    """All client subsets of the given sizes, sizes in order, each lexicographic."""
    out = []
    for size in sizes:
        out.extend(itertools.combinations(range(n_clients), size))
    return tuple(out)


class WeightedOutcome(NamedTuple):
    connectivity: Binary
    probability: float


@dataclass(frozen=True)
class ServiceVector:
    """Binary service indicator per class, optionally with its assignment witness.

    ``witness`` is the R x N matrix S with s_rn = 1 when class r consumes the
    LLE of client n.
    """

    served: Binary
    witness: tuple[Binary, ...] | None = field(default=None, compare=False)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.served, dtype=np.int64)

    @property
    def is_zero(self) -> bool:
        return not any(self.served)


def _to_mask(vec: Sequence[int]) -> int:
    return sum(1 << i for i, v in enumerate(vec) if v)


def _from_mask(mask: int, length: int) -> Binary:
    return tuple((mask >> i) & 1 for i in range(length))


@lru_cache(maxsize=64)
def _allocations(n: int, m: int, full_only: bool) -> tuple[Binary, ...]:
    sizes = [m] if full_only else range(m + 1)
    combos = sorted(c for size in sizes for c in itertools.combinations(range(n), size))
    out = []
    for combo in combos:
        vec = [0] * n
        for c in combo:
            vec[c] = 1
        out.append(tuple(vec))
    return tuple(out)


def enumerate_allocations(config: SwitchConfig, full_only: bool = True) -> list[Binary]:
    """Memory allocations in lexicographic order of their client-index sets.

    With ``full_only`` every allocation uses all M memories (C(N, M) vectors);
    otherwise every allocation with at most M memories is listed, including the
    empty one.
    """
    return list(_allocations(config.n_clients, config.n_memories, bool(full_only)))


def _check_allocation(m: Sequence[int], config: SwitchConfig) -> Binary:
    m = tuple(int(x) for x in m)
    if len(m) != config.n_clients or any(x not in (0, 1) for x in m):
        raise ConfigError(f"allocation must be a 0/1 vector of length {config.n_clients}: {m}")
    if sum(m) > config.n_memories:
        raise ConfigError(f"allocation uses {sum(m)} memories, only {config.n_memories} available")
    return m


def connectivity_support(m: Sequence[int], config: SwitchConfig) -> list[WeightedOutcome]:
    """Every connectivity reachable from allocation ``m`` with nonzero probability.

    Outcomes come in ascending lexicographic order of the connectivity vector.
    Clients with p_n in {0, 1} are deterministic and do not branch.
    """
    m = _check_allocation(m, config)
    p = config.lle_success
    base = [0] * config.n_clients
    uncertain = []
    for n, assigned in enumerate(m):
        if not assigned:
            continue
        if p[n] == 1.0:
            base[n] = 1
        elif p[n] > 0.0:
            uncertain.append(n)
    out = []
    for pattern in itertools.product((0, 1), repeat=len(uncertain)):
        k = list(base)
        prob = 1.0
        for n, bit in zip(uncertain, pattern):
            k[n] = bit
            prob *= p[n] if bit else 1.0 - p[n]
        out.append(WeightedOutcome(tuple(k), prob))
    return out


def sample_connectivity(m: Sequence[int], config: SwitchConfig, rng: np.random.Generator) -> Binary:
    """Draw one connectivity for allocation ``m``.

    Exactly N uniforms are consumed per call regardless of ``m`` so that a
    stream shared across policies stays aligned slot by slot.
    """
    u = rng.random(config.n_clients)
    return tuple(int(assigned and u[n] < config.lle_success[n]) for n, assigned in enumerate(m))


def _witness(served: Binary, config: SwitchConfig) -> tuple[Binary, ...]:
    rows = []
    for r, bit in enumerate(served):
        row = [0] * config.n_clients
        if bit:
            for n in config.request_classes[r]:
                row[n] = 1
        rows.append(tuple(row))
    return tuple(rows)


def candidate_classes(k: Sequence[int], config: SwitchConfig) -> list[int]:
    """Classes whose every participant holds an active LLE under ``k``."""
    active = _to_mask(k)
    return [r for r, mask in enumerate(config.class_masks) if mask & active == mask]


def check_service_cap(n_candidates: int, cap: int) -> None:
    size = 2**n_candidates
    if size > cap:
        raise CapExceeded("admissible-service candidate vectors", size, cap)


@lru_cache(maxsize=4096)
def _admissible_masks(k: Binary, config: SwitchConfig, cap: int) -> tuple[int, ...]:
    candidates = candidate_classes(k, config)
    check_service_cap(len(candidates), cap)
    masks = config.class_masks
    found = []

    def grow(start: int, used: int, chosen: int) -> None:
        found.append(chosen)
        for i in range(start, len(candidates)):
            r = candidates[i]
            if masks[r] & used == 0:
                grow(i + 1, used | masks[r], chosen | (1 << r))

    grow(0, 0, 0)
    R = config.n_classes
    return tuple(sorted(found, key=lambda s: _from_mask(s, R)))


def admissible_services(
    k: Sequence[int], config: SwitchConfig, cap: int = DEFAULT_SERVICE_CAP
) -> list[ServiceVector]:
    """All service vectors that can be served with connectivity ``k``.

    Served classes must be pairwise client-disjoint and fully covered by active
    LLEs. Vectors come sorted lexicographically (zero vector first), each with a
    witness matrix. Raises `CapExceeded` when 2**(#servable classes) exceeds
    ``cap`` rather than truncating.
    """
    k = tuple(int(x) for x in k)
    if len(k) != config.n_clients:
        raise ConfigError(f"connectivity must have length {config.n_clients}")
    R = config.n_classes
    out = []
    for mask in _admissible_masks(k, config, cap):
        served = _from_mask(mask, R)
        out.append(ServiceVector(served, _witness(served, config)))
    return out


def admissible_matrix(k: Sequence[int], config: SwitchConfig, cap: int = DEFAULT_SERVICE_CAP) -> np.ndarray:
    """Admissible service vectors for ``k`` stacked as rows (lexicographic order)."""
    k = tuple(int(x) for x in k)
    masks = _admissible_masks(k, config, cap)
    R = config.n_classes
    mat = np.zeros((len(masks), R), dtype=np.int64)
    for i, mask in enumerate(masks):
        mat[i] = _from_mask(mask, R)
    return mat


def validate_witness(service: ServiceVector, k: Sequence[int], config: SwitchConfig) -> bool:
    """Check the witness of ``service`` against connectivity ``k``.

    Row r must cover every client of class r exactly when b_r = 1, and no
    client may be used by more rows than it has active LLEs.
    """
    S = service.witness
    if S is None or len(S) != config.n_classes:
        return False
    for r, (bit, row) in enumerate(zip(service.served, S)):
        if len(row) != config.n_clients or any(x not in (0, 1) for x in row):
            return False
        covers = all(row[n] == 1 for n in config.request_classes[r])
        if covers != bool(bit):
            return False
    for n in range(config.n_clients):
        if sum(row[n] for row in S) > k[n]:
            return False
    return True


def queue_step(q: np.ndarray, b, a) -> np.ndarray:
    """One slot of queue evolution: ``max(q - b, 0) + a`` componentwise."""
    if isinstance(b, ServiceVector):
        b = b.served
    q = np.asarray(q, dtype=np.int64)
    return np.maximum(q - np.asarray(b, dtype=np.int64), 0) + np.asarray(a, dtype=np.int64)


def n_allocations(config: SwitchConfig, full_only: bool = True) -> int:
    N, M = config.n_clients, config.n_memories
    if full_only:
        return math.comb(N, M)
    return sum(math.comb(N, j) for j in range(M + 1))
