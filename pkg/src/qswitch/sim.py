"""Traffic generation, replication harness and trajectory statistics.

Seeding scheme
--------------
Replication ``i`` of a scenario runs with seed ``base_seed + i``. From that
seed three independent PCG64 streams are derived with
``SeedSequence(seed, spawn_key=(j,))``:

* ``j = 0``  arrivals, R uniforms per slot
* ``j = 1``  LLE outcomes, N uniforms per slot
* ``j = 2``  allocation sampling of l-Approximate MEW (salted with the
  policy's ``rng_seed``)

Every stream is consumed in a fixed amount per slot, so slot t always reads
the same stream offsets. Different policies run on the same seed therefore
see identical arrivals and identical LLE coin flips.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import __version__
from .capacity import ArrivalDirection, build_lp, max_intensity, stability_margin
from .errors import ConfigError, SwitchError
from .model import SwitchConfig, subset_classes
from .policies import PolicyKind, PolicySpec, Scheduler

DEFAULT_HORIZON = 20_000
DEFAULT_REPLICATIONS = 10
DEFAULT_BASE_SEED = 1
STABILITY_RATIO = 1.5
# sim2/sim3 arrivals are skewed: under a uniform direction the symmetric class
# sets make a uniformly random allocation capacity-achieving, which would
# erase any gap between MEW and its sampled approximations
PRESET_RAMP_TOP = 5.0


class SimulationAborted(SwitchError):
    """A replication failed; ``__cause__`` holds the original error."""

    def __init__(self, message: str, replication: int | None = None, slot: int | None = None):
        super().__init__(message)
        self.replication = replication
        self.slot = slot


@dataclass(frozen=True)
class Scenario:
    config: SwitchConfig
    direction: ArrivalDirection
    intensity: float
    policy: PolicySpec
    horizon: int = DEFAULT_HORIZON
    replications: int = DEFAULT_REPLICATIONS
    base_seed: int = DEFAULT_BASE_SEED
    name: str = "scenario"

    def __post_init__(self):
        if not self.intensity > 0:
            raise ConfigError(f"intensity must be positive, got {self.intensity}")
        if self.horizon < 1 or self.replications < 1:
            raise ConfigError("horizon and replications must be positive")
        if self.base_seed < 0:
            raise ConfigError("base_seed must be nonnegative")
        if len(self.direction.rates) != self.config.n_classes:
            raise ConfigError(
                f"direction has {len(self.direction.rates)} entries, config has {self.config.n_classes} classes"
            )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "config": self.config.to_dict(),
            "direction": list(self.direction.rates),
            "intensity": self.intensity,
            "policy": self.policy.to_dict(),
            "horizon": self.horizon,
            "replications": self.replications,
            "base_seed": self.base_seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        """Parse the scenario JSON schema (see README); client ids are 1-based."""
        try:
            config = SwitchConfig.from_dict(data["config"])
            raw_dir = data.get("direction", "uniform")
            if raw_dir == "uniform":
                direction = ArrivalDirection.uniform(config.n_classes)
            else:
                direction = ArrivalDirection(tuple(float(x) for x in raw_dir))
            return cls(
                config=config,
                direction=direction,
                intensity=float(data["intensity"]),
                policy=PolicySpec.from_dict(data.get("policy", {"kind": "MEW"})),
                horizon=int(data.get("horizon", DEFAULT_HORIZON)),
                replications=int(data.get("replications", DEFAULT_REPLICATIONS)),
                base_seed=int(data.get("base_seed", DEFAULT_BASE_SEED)),
                name=str(data.get("name", "scenario")),
            )
        except KeyError as exc:
            raise ConfigError(f"scenario is missing field {exc}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed scenario: {exc}") from None

    def replace(self, **changes) -> "Scenario":
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(changes)
        return Scenario(**data)


@lru_cache(maxsize=32)
def boundary_intensity(config: SwitchConfig, direction: ArrivalDirection) -> float:
    """rho* along ``direction`` (the 100% load)."""
    rho, _ = max_intensity(config, direction)
    return rho


def resolve_rates(scenario: Scenario) -> tuple[np.ndarray, float]:
    """Per-class Bernoulli rates intensity * rho* * direction; hard error if any exceeds 1."""
    rho = boundary_intensity(scenario.config, scenario.direction)
    rates = scenario.intensity * rho * scenario.direction.as_array()
    if np.any(rates > 1.0):
        raise ConfigError(
            f"scaled rate {rates.max():.6f} exceeds 1 at intensity {scenario.intensity}; Bernoulli arrivals infeasible"
        )
    return rates, rho


def generate_arrivals(rates, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli arrivals, one per class."""
    rates = np.asarray(rates, dtype=float)
    return (rng.random(rates.size) < rates).astype(np.int64)


def streams(seed: int, policy_seed: int = 0) -> tuple[np.random.Generator, ...]:
    def gen(*key):
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))

    return gen(0), gen(1), gen(2, policy_seed)


@dataclass
class ReplicationResult:
    seed: int
    total_backlog: np.ndarray  # sum_r Q_r at the end of each slot, length T
    arrivals: np.ndarray  # cumulative arrivals per class
    served: np.ndarray  # cumulative requests actually served per class
    final_queue: np.ndarray


def run_replication(scenario: Scenario, seed: int, rates: np.ndarray | None = None) -> ReplicationResult:
    """Run one replication from an empty switch; deterministic in (scenario, seed)."""
    if rates is None:
        rates, _ = resolve_rates(scenario)
    config = scenario.config
    arrival_rng, lle_rng, sample_rng = streams(seed, scenario.policy.rng_seed)
    sched = Scheduler(config, scenario.policy, lle_rng, sample_rng)
    T = scenario.horizon
    # one R-wide row per slot; identical to T successive generate_arrivals calls
    arrivals = (arrival_rng.random((T, config.n_classes)) < rates).astype(np.int64)
    totals = np.zeros(T, dtype=np.int64)
    served = np.zeros(config.n_classes, dtype=np.int64)
    for t in range(T):
        q_before = sched.q
        try:
            decision = sched.step(arrivals[t])
        except SwitchError as exc:
            raise SimulationAborted(f"slot {t + 1}: {exc}", slot=t + 1) from exc
        served += np.minimum(q_before, decision.service.served)
        totals[t] = sched.q.sum()
    return ReplicationResult(seed, totals, arrivals.sum(axis=0), served, sched.q.copy())


def _linear_fit(y: np.ndarray) -> tuple[float, float]:
    x = np.arange(y.size, dtype=float)
    if y.size < 2:
        return 0.0, 0.0
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 0.0
    return float(slope), r2


@dataclass
class TrajectoryStats:
    mean: np.ndarray
    stderr: np.ndarray
    traces: np.ndarray = field(repr=False)
    final_window_mean: float = 0.0  # last quarter of the horizon
    middle_window_mean: float = 0.0  # quarter centred on T/2
    tail_slope: float = 0.0  # least-squares slope over the last half
    tail_r2: float = 0.0
    time_average: float = 0.0

    @classmethod
    def from_traces(cls, traces: np.ndarray) -> "TrajectoryStats":
        traces = np.asarray(traces, dtype=float)
        n, T = traces.shape
        mean = traces.mean(axis=0)
        stderr = traces.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(T)
        final = mean[(3 * T) // 4:]
        middle = mean[(3 * T) // 8:max((5 * T) // 8, (3 * T) // 8 + 1)]
        slope, r2 = _linear_fit(mean[T // 2:])
        return cls(
            mean=mean,
            stderr=stderr,
            traces=traces,
            final_window_mean=float(final.mean()),
            middle_window_mean=float(middle.mean()),
            tail_slope=slope,
            tail_r2=r2,
            time_average=float(mean.mean()),
        )

    @property
    def horizon(self) -> int:
        return self.mean.size

    def is_stable(self, ratio: float = STABILITY_RATIO) -> bool:
        """Empirical stability proxy: late backlog not growing past ``ratio`` x mid-run backlog."""
        return self.final_window_mean <= ratio * self.middle_window_mean

    def final_quarter_band(self) -> tuple[float, float]:
        """(mean, stderr) of the mean curve averaged over the final quarter."""
        start = (3 * self.horizon) // 4
        return float(self.mean[start:].mean()), float(self.stderr[start:].mean())


def _replicate(args):
    scenario, seed, rates = args
    try:
        return run_replication(scenario, seed, rates)
    except SimulationAborted as exc:
        exc.replication = seed - scenario.base_seed
        raise


def run_experiment(
    scenario: Scenario, workers: int = 1, rates: np.ndarray | None = None
) -> tuple[TrajectoryStats, list[ReplicationResult]]:
    """All replications of a scenario and their pointwise statistics.

    Results are gathered in seed order, so the output does not depend on
    ``workers``.
    """
    if rates is None:
        rates, _ = resolve_rates(scenario)
    scenario.policy.validate(scenario.config)
    jobs = [(scenario, scenario.base_seed + i, rates) for i in range(scenario.replications)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate, jobs))
    else:
        results = [_replicate(j) for j in jobs]
    stats = TrajectoryStats.from_traces(np.stack([r.total_backlog for r in results]))
    return stats, results


def config_hash(config: SwitchConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def scenario_metadata(scenario: Scenario, stats: TrajectoryStats | None = None) -> dict:
    """Every resolved parameter needed to re-run the scenario bit-identically."""
    rates, rho = resolve_rates(scenario)
    margin, _ = stability_margin(scenario.config, rates, build_lp(scenario.config))
    meta = {
        "tool": "qswitch",
        "version": __version__,
        "scenario": scenario.to_dict(),
        "config_hash": config_hash(scenario.config),
        "rho_star": rho,
        "resolved_rates": [float(x) for x in rates],
        "stability_margin": margin,
        "seeds": [scenario.base_seed + i for i in range(scenario.replications)],
        "seed_scheme": "replication i uses seed base_seed+i; streams SeedSequence(seed, spawn_key=(0|1|2,...))",
    }
    if stats is not None:
        meta["summary"] = {
            "time_average": stats.time_average,
            "final_window_mean": stats.final_window_mean,
            "middle_window_mean": stats.middle_window_mean,
            "tail_slope": stats.tail_slope,
            "tail_r2": stats.tail_r2,
            "stable": stats.is_stable(),
        }
    return meta


SIM1_CLASSES = subset_classes(6, [3])[:8]


def preset(
    name: str,
    horizon: int = DEFAULT_HORIZON,
    replications: int = DEFAULT_REPLICATIONS,
    base_seed: int = DEFAULT_BASE_SEED,
) -> list[Scenario]:
    """Scenario sets for the three reference simulations."""
    common = dict(horizon=horizon, replications=replications, base_seed=base_seed)
    if name == "sim1":
        config = SwitchConfig(6, 3, 0.9, SIM1_CLASSES)
        direction = ArrivalDirection.uniform(config.n_classes)
        return [
            Scenario(config, direction, x, PolicySpec(PolicyKind.MEW), name=f"sim1_MEW_{round(x * 100)}", **common)
            for x in (0.70, 0.99, 1.20)
        ]
    if name == "sim2":
        config = SwitchConfig(6, 3, 0.9, subset_classes(6, [2, 3]))
        direction = ArrivalDirection.ramp(config.n_classes, PRESET_RAMP_TOP)
        policies = [
            PolicySpec(PolicyKind.MEW),
            PolicySpec(PolicyKind.APPROX_MEW, approx_budget=1),
            PolicySpec(PolicyKind.APPROX_MEW, approx_budget=10),
        ]
        return [
            Scenario(config, direction, x, p, name=f"sim2_{_slug(p)}_{round(x * 100)}", **common)
            for x in (0.70, 0.99)
            for p in policies
        ]
    if name == "sim3":
        config = SwitchConfig(7, 4, 1.0, subset_classes(7, [2]))
        direction = ArrivalDirection.ramp(config.n_classes, PRESET_RAMP_TOP)
        policies = [
            PolicySpec(PolicyKind.MEW),
            PolicySpec(PolicyKind.MEW2),
            PolicySpec(PolicyKind.APPROX_MEW, approx_budget=1),
        ]
        return [Scenario(config, direction, 0.99, p, name=f"sim3_{_slug(p)}_99", **common) for p in policies]
    raise ConfigError(f"unknown preset {name!r}; expected sim1, sim2 or sim3")


def _slug(spec: PolicySpec) -> str:
    if spec.kind is PolicyKind.APPROX_MEW:
        return f"approx{spec.approx_budget}"
    return spec.kind.value
