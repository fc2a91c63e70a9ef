"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The simulation criteria run the presets at full scale (horizon 20000, 10
replications) and take several minutes on one core. Run alone with

    pytest tests/test_acceptance.py -v -s
"""

import sys

import numpy as np
import pytest

from qswitch.artifacts import trace_csv
from qswitch.capacity import max_intensity, membership
from qswitch.model import SwitchConfig
from qswitch.oracles import run_oracle_checks
from qswitch.sim import preset, resolve_rates, run_experiment

pytestmark = pytest.mark.slow

_runs = {}


def run(name):
    """Stats of every scenario of a preset, keyed by scenario name; computed once per session."""
    if name not in _runs:
        _runs[name] = {s.name: run_experiment(s)[0] for s in preset(name)}
    return _runs[name]


def report(capsys, label, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
    assert ok, detail


def test_ac1_sim1_stability_and_growth(capsys):
    stats = run("sim1")
    lines, ok = [], True
    for name in ("sim1_MEW_70", "sim1_MEW_99"):
        s = stats[name]
        ok &= s.is_stable()
        lines.append(f"{name} final/middle {s.final_window_mean:.2f}/{s.middle_window_mean:.2f}")
    s = stats["sim1_MEW_120"]
    ok &= s.tail_slope > 0 and s.tail_r2 > 0.9
    lines.append(f"sim1_MEW_120 slope {s.tail_slope:.4f} R2 {s.tail_r2:.4f}")
    report(capsys, "AC1 sim1 bounded at 70/99%, linear growth at 120%", ok, "; ".join(lines))


def test_ac2_drift_bound(capsys):
    scenario = preset("sim1")[0]
    rates, _ = resolve_rates(scenario)
    inside, eps = membership(scenario.config, rates)
    bound = scenario.config.n_clients**2 / eps
    avg = run("sim1")[scenario.name].time_average
    report(capsys, "AC2 time-average backlog <= N^2/eps", inside and avg <= bound, f"{avg:.3f} <= {bound:.1f}")


def test_ac3_sim2_ordering(capsys):
    stats = run("sim2")
    want = {
        "sim2_approx1_70": True,
        "sim2_approx1_99": False,
        "sim2_approx10_99": True,
        "sim2_MEW_99": True,
    }
    got = {name: stats[name].is_stable() for name in want}
    detail = "; ".join(
        f"{n} {'stable' if got[n] else 'unstable'} ({stats[n].final_window_mean:.1f}/{stats[n].middle_window_mean:.1f})"
        for n in want
    )
    report(capsys, "AC3 sim2 approx1 fails only at 99%, approx10 and MEW pass", got == want, detail)


def test_ac4_sim3_mew2_tracks_mew(capsys):
    stats = run("sim3")
    mew, mew2, approx = stats["sim3_MEW_99"], stats["sim3_MEW2_99"], stats["sim3_approx1_99"]
    start = (3 * mew.horizon) // 4
    diff = np.abs(mew.mean[start:] - mew2.mean[start:])
    band = 2 * np.minimum(mew.stderr[start:], mew2.stderr[start:])
    within = bool(np.all(diff <= band))
    ok = within and not approx.is_stable()
    detail = (
        f"max |MEW-MEW2| {diff.max():.3f}, worst slack {float((band - diff).min()):.3f}; "
        f"approx1 final/middle {approx.final_window_mean:.1f}/{approx.middle_window_mean:.1f}"
    )
    report(capsys, "AC4 MEW2 within 2SE of MEW, 1-Approx unstable", ok, detail)


def test_ac5_and_ac6_exact_oracles(capsys):
    checks = run_oracle_checks(max_n=8, n_graphs=200, n_hypergraphs=200, n_queues=500).checks
    ok5 = checks.get("corollary_equivalence") == 15 * 500
    report(capsys, "AC5 MEW S1 objective == MEW2 weight", ok5, f"{checks.get('corollary_equivalence')} queue states")
    ok6 = checks["max_weight_matching"] == 200 and checks["max_weight_service"] == 200
    report(
        capsys,
        "AC6 matching and hypergraph oracles",
        ok6,
        f"{checks['max_weight_matching']} graphs, {checks['capped_matching']} capped, "
        f"{checks['max_weight_service']} hypergraphs",
    )


def test_ac7_closed_form_capacity(capsys):
    rows, ok = [], True
    for p, want in ((1.0, 1.0), ((0.9, 0.9), 0.81)):
        config = SwitchConfig(2, 2, p, ((0, 1),))
        rho, cert = max_intensity(config)
        residual = float(np.abs(cert.reconstruct_rate(config) - cert.lp_rate).max())
        ok &= abs(rho - want) <= 1e-6 and residual <= 1e-9
        rows.append(f"p={p}: rho*={rho:.9f} residual {residual:.1e}")
    report(capsys, "AC7 pair toy rho* = 1 and 0.81", ok, "; ".join(rows))


@pytest.mark.parametrize("name", ["sim1", "sim2", "sim3"])
def test_ac8_determinism(capsys, name):
    def csvs(workers):
        out = []
        for s in preset(name, horizon=500, replications=3, base_seed=7):
            stats, _ = run_experiment(s, workers=workers)
            out.append(trace_csv(stats.mean, stats.stderr).encode())
        return out

    first, again, parallel = csvs(1), csvs(1), csvs(2)
    ok = first == again == parallel
    report(capsys, f"AC8 {name} CSVs byte-identical", ok, f"{len(first)} scenarios, workers 1/1/2")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
