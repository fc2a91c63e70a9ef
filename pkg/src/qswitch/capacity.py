"""Capacity region LP: certify rate vectors and find the maximal load along a direction.

The region is the set of rates f = sum_m theta_m sum_k P(k; m) sum_b delta^{m,k}_b b
with theta and each delta^{m,k} probability vectors. Substituting
gamma^{m,k}_b = theta_m delta^{m,k}_b makes every constraint linear:

    sum_b gamma^{m,k}_b = theta_m   for every (m, k)
    sum_m theta_m = 1,  theta, gamma >= 0

Columns are laid out as [theta (one per allocation) | gamma (one per (m, k, b))
| one extra scalar], the scalar being the load factor rho in
`max_intensity` and the uniform slack in `membership`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CapExceeded, ConfigError
from .lp import LPInstance, lp_solve
from .model import (
    DEFAULT_SERVICE_CAP,
    Binary,
    SwitchConfig,
    admissible_matrix,
    connectivity_support,
    enumerate_allocations,
    sample_connectivity,
)

DEFAULT_COLUMN_CAP = 10**6
MEMBERSHIP_TOL = 1e-9


@dataclass(frozen=True)
class ArrivalDirection:
    """Nonnegative per-class direction, normalized to sum 1."""

    rates: tuple[float, ...]

    def __post_init__(self):
        r = np.asarray(self.rates, dtype=float)
        if r.ndim != 1 or r.size == 0:
            raise ConfigError("direction must be a nonempty vector")
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise ConfigError("direction entries must be finite and nonnegative")
        if r.sum() <= 0:
            raise ConfigError("direction needs at least one positive entry")
        object.__setattr__(self, "rates", tuple(float(x) for x in r / r.sum()))

    @classmethod
    def uniform(cls, n_classes: int) -> "ArrivalDirection":
        return cls((1.0,) * n_classes)

    @classmethod
    def ramp(cls, n_classes: int, top: float) -> "ArrivalDirection":
        """Weights rising linearly from 1 (first class) to ``top`` (last class)."""
        if n_classes < 1 or top <= 0:
            raise ConfigError("ramp needs n_classes >= 1 and top > 0")
        return cls(tuple(np.linspace(1.0, top, n_classes)))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.rates)


@dataclass
class Block:
    alloc_index: int
    connectivity: Binary
    probability: float
    services: np.ndarray  # rows are admissible service vectors
    first_column: int


@dataclass
class CapacityLP:
    config: SwitchConfig
    allocations: list[Binary]
    blocks: list[Block]
    n_columns: int  # theta + gamma, excluding the extra scalar

    @property
    def n_theta(self) -> int:
        return len(self.allocations)

    def rate_matrix(self) -> np.ndarray:
        """R x (n_columns + 1) matrix mapping the LP vector to the achieved rates."""
        G = np.zeros((self.config.n_classes, self.n_columns + 1))
        for blk in self.blocks:
            cols = slice(blk.first_column, blk.first_column + len(blk.services))
            G[:, cols] = blk.probability * blk.services.T
        return G

    def equality_rows(self) -> tuple[np.ndarray, np.ndarray]:
        A = np.zeros((len(self.blocks) + 1, self.n_columns + 1))
        for row, blk in enumerate(self.blocks):
            A[row, blk.first_column:blk.first_column + len(blk.services)] = 1.0
            A[row, blk.alloc_index] = -1.0
        A[-1, :self.n_theta] = 1.0
        b = np.zeros(len(self.blocks) + 1)
        b[-1] = 1.0
        return A, b

    def intensity_instance(self, direction: ArrivalDirection) -> LPInstance:
        """max rho  s.t.  rho * direction <= f."""
        lam = direction.as_array()
        if lam.size != self.config.n_classes:
            raise ConfigError(f"direction has {lam.size} entries, config has {self.config.n_classes} classes")
        G = self.rate_matrix()
        A_ub = -G
        A_ub[:, -1] = lam
        A_eq, b_eq = self.equality_rows()
        c = np.zeros(self.n_columns + 1)
        c[-1] = 1.0
        return LPInstance(c, A_ub, np.zeros(len(lam)), A_eq, b_eq)

    def margin_instance(self, rates: np.ndarray) -> tuple[LPInstance, float]:
        """max e  s.t.  rates + (e - shift) <= f, with shift = max(rates) keeping e >= 0."""
        rates = np.asarray(rates, dtype=float)
        shift = float(rates.max()) if rates.size else 0.0
        G = self.rate_matrix()
        A_ub = -G
        A_ub[:, -1] = 1.0
        A_eq, b_eq = self.equality_rows()
        c = np.zeros(self.n_columns + 1)
        c[-1] = 1.0
        return LPInstance(c, A_ub, shift - rates, A_eq, b_eq), shift


def build_lp(
    config: SwitchConfig,
    full_only: bool = True,
    column_cap: int = DEFAULT_COLUMN_CAP,
    service_cap: int = DEFAULT_SERVICE_CAP,
) -> CapacityLP:
    """Enumerate allocations, connectivities and admissible services into LP blocks."""
    allocations = enumerate_allocations(config, full_only)
    pending = []
    n_cols = len(allocations)
    for a, m in enumerate(allocations):
        for k, p in connectivity_support(m, config):
            services = admissible_matrix(k, config, service_cap)
            pending.append((a, k, p, services))
            n_cols += len(services)
            if n_cols > column_cap:
                raise CapExceeded("capacity LP columns", n_cols, column_cap)
    blocks = []
    col = len(allocations)
    for a, k, p, services in pending:
        blocks.append(Block(a, k, p, services, col))
        col += len(services)
    return CapacityLP(config, allocations, blocks, col)


@dataclass(frozen=True)
class DeltaEntry:
    alloc_index: int
    connectivity: Binary
    service: Binary
    weight: float


@dataclass
class CapacityCertificate:
    """A point of the capacity region together with the mixture realizing it."""

    allocations: list[Binary]
    theta: np.ndarray
    delta: list[DeltaEntry]
    achieved_rate: np.ndarray
    intensity: float
    stability_margin: float
    lp_rate: np.ndarray = field(repr=False, default=None)

    def reconstruct_rate(self, config: SwitchConfig) -> np.ndarray:
        """Recompute f from theta, delta and the connectivity probabilities."""
        probs = {}
        for a, m in enumerate(self.allocations):
            for k, p in connectivity_support(m, config):
                probs[(a, k)] = p
        f = np.zeros(config.n_classes)
        for e in self.delta:
            f += self.theta[e.alloc_index] * probs[(e.alloc_index, e.connectivity)] * e.weight * np.asarray(e.service)
        return f

    def to_json(self, config: SwitchConfig) -> dict:
        def clients(v):
            return [i + 1 for i, x in enumerate(v) if x]

        return {
            "intensity": self.intensity,
            "stability_margin": self.stability_margin,
            "achieved_rate": [float(x) for x in self.achieved_rate],
            "theta": [
                {"allocation": clients(self.allocations[a]), "weight": float(w)}
                for a, w in enumerate(self.theta)
                if w > 0
            ],
            "delta": [
                {
                    "allocation": clients(self.allocations[e.alloc_index]),
                    "connectivity": clients(e.connectivity),
                    "service": clients(e.service),
                    "weight": e.weight,
                }
                for e in self.delta
            ],
            "config": config.to_dict(),
        }

    @classmethod
    def from_json(cls, data: dict) -> tuple["CapacityCertificate", SwitchConfig]:
        config = SwitchConfig.from_dict(data["config"])
        allocations = enumerate_allocations(config, full_only=False)
        index = {m: a for a, m in enumerate(allocations)}

        def vec(idx, length):
            v = [0] * length
            for i in idx:
                v[i - 1] = 1
            return tuple(v)

        theta = np.zeros(len(allocations))
        for t in data["theta"]:
            theta[index[vec(t["allocation"], config.n_clients)]] = t["weight"]
        delta = [
            DeltaEntry(
                index[vec(d["allocation"], config.n_clients)],
                vec(d["connectivity"], config.n_clients),
                vec(d["service"], config.n_classes),
                float(d["weight"]),
            )
            for d in data["delta"]
        ]
        cert = cls(
            allocations,
            theta,
            delta,
            np.asarray(data["achieved_rate"], dtype=float),
            float(data["intensity"]),
            float(data["stability_margin"]),
        )
        return cert, config


def _certificate(lp: CapacityLP, x: np.ndarray, intensity: float, target: np.ndarray) -> CapacityCertificate:
    x = np.clip(np.asarray(x, dtype=float), 0.0, None)
    theta = x[:lp.n_theta]
    theta = theta / theta.sum()
    delta = []
    for blk in lp.blocks:
        gamma = x[blk.first_column:blk.first_column + len(blk.services)]
        if theta[blk.alloc_index] <= 0:
            continue
        total = gamma.sum()
        # theta_m > 0 but no mass recorded: fall back to a uniform mix
        weights = gamma / total if total > 0 else np.full(len(gamma), 1.0 / len(gamma))
        for row, w in zip(blk.services, weights):
            if w > 0:
                delta.append(DeltaEntry(blk.alloc_index, blk.connectivity, tuple(int(v) for v in row), float(w)))
    cert = CapacityCertificate(lp.allocations, theta, delta, np.zeros(lp.config.n_classes), intensity, 0.0)
    cert.achieved_rate = cert.reconstruct_rate(lp.config)
    cert.lp_rate = lp.rate_matrix() @ x
    cert.stability_margin = float(np.min(cert.achieved_rate - target))
    return cert


def max_intensity(
    config: SwitchConfig,
    direction: ArrivalDirection | None = None,
    lp: CapacityLP | None = None,
) -> tuple[float, CapacityCertificate]:
    """Largest rho with rho * direction inside the capacity region, plus a certificate."""
    direction = direction or ArrivalDirection.uniform(config.n_classes)
    lp = lp or build_lp(config)
    sol = lp_solve(lp.intensity_instance(direction))
    rho = float(sol.objective)
    return rho, _certificate(lp, sol.x, rho, rho * direction.as_array())


def stability_margin(
    config: SwitchConfig, rates: Sequence[float], lp: CapacityLP | None = None
) -> tuple[float, CapacityCertificate]:
    """Largest eps such that rates + eps <= f for some achievable f (negative outside)."""
    rates = np.asarray(rates, dtype=float)
    if rates.shape != (config.n_classes,):
        raise ConfigError(f"rates must have length {config.n_classes}")
    lp = lp or build_lp(config)
    inst, shift = lp.margin_instance(rates)
    sol = lp_solve(inst)
    eps = float(sol.objective) - shift
    return eps, _certificate(lp, sol.x, float("nan"), rates)


def membership(
    config: SwitchConfig, rates: Sequence[float], lp: CapacityLP | None = None
) -> tuple[bool, float]:
    """Whether ``rates`` lies in the capacity region, and its uniform slack."""
    rates = np.asarray(rates, dtype=float)
    if np.any(rates < 0):
        raise ConfigError("rates must be nonnegative")
    lp = lp or build_lp(config)
    margin, _ = stability_margin(config, rates, lp)
    total = rates.sum()
    if total == 0:
        return True, margin
    rho, _ = max_intensity(config, ArrivalDirection(tuple(rates)), lp)
    return bool(rho >= total * (1 - MEMBERSHIP_TOL)), margin


def replay_certificate(
    cert: CapacityCertificate, config: SwitchConfig, slots: int, rng: np.random.Generator
) -> np.ndarray:
    """Empirical service rate of the stationary randomized policy a certificate encodes.

    Each slot draws m from theta, the connectivity from the LLE model, and b
    from delta^{m,k}.
    """
    mixes: dict[tuple[int, Binary], tuple[np.ndarray, np.ndarray]] = {}
    grouped: dict[tuple[int, Binary], list[DeltaEntry]] = {}
    for e in cert.delta:
        grouped.setdefault((e.alloc_index, e.connectivity), []).append(e)
    for key, entries in grouped.items():
        w = np.array([e.weight for e in entries])
        mixes[key] = (np.array([e.service for e in entries]), w / w.sum())
    served = np.zeros(config.n_classes)
    theta = cert.theta / cert.theta.sum()
    picks = rng.choice(len(theta), size=slots, p=theta)
    for a in picks:
        k = sample_connectivity(cert.allocations[a], config, rng)
        mix = mixes.get((int(a), k))
        if mix is None:
            continue
        services, w = mix
        served += services[rng.choice(len(w), p=w)]
    return served / slots


def save_certificate(cert: CapacityCertificate, config: SwitchConfig) -> str:
    return json.dumps(cert.to_json(config), indent=2, sort_keys=True)
