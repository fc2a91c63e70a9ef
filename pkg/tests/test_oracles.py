import numpy as np
import pytest

from qswitch.errors import OracleMismatch
from qswitch.matching import WeightedGraph
from qswitch.model import SwitchConfig, subset_classes
from qswitch.oracles import (
    MUTATIONS,
    capped_matching_vectors,
    corollary_configs,
    corollary_gap,
    exhaustive_service,
    run_oracle_checks,
    witness_exists,
)


class TestWitness:
    def test_disjoint_pairs(self):
        c = SwitchConfig(4, 4, 1.0, ((0, 1), (2, 3), (1, 2)))
        assert witness_exists((1, 1, 0), (1, 1, 1, 1), c)
        assert not witness_exists((1, 0, 1), (1, 1, 1, 1), c)  # share client 2

    def test_needs_lles(self):
        c = SwitchConfig(3, 3, 1.0, ((0, 1),))
        assert not witness_exists((1,), (1, 0, 1), c)
        assert witness_exists((0,), (0, 0, 0), c)


def test_exhaustive_service_prefers_heavier_then_lexicographic():
    c = SwitchConfig(4, 4, 1.0, ((0, 1), (2, 3), (0, 1, 2, 3)))
    assert exhaustive_service((1, 1, 1, 1), [2, 2, 3], c) == ((1, 1, 0), 4)
    assert exhaustive_service((1, 1, 1, 1), [2, 2, 4], c) == ((0, 0, 1), 4)


def test_capped_matching_vectors_k4():
    c = SwitchConfig(4, 2, 1.0, subset_classes(4, [2]))
    vecs = capped_matching_vectors(c)
    # empty plus the six single pairs
    assert len(vecs) == 7 and all(sum(v) <= 1 for v in vecs)


def test_corollary_configs_cover_memory_sizes():
    configs = corollary_configs()
    assert len(configs) == 15
    assert {c.n_memories for c in configs} == {2, 4, 6}
    assert all(c.n_memories <= c.n_clients <= 8 for c in configs)


def test_corollary_gap_agrees_on_small_instance():
    c = SwitchConfig(4, 2, 1.0, subset_classes(4, [2]))
    assert corollary_gap(np.array([1, 2, 1, 9, 3, 2]), c) == (9, 9)


def test_default_sweep_passes():
    report = run_oracle_checks()
    assert report.checks["max_weight_matching"] == 200
    assert report.checks["max_weight_service"] == 200
    assert report.checks["corollary_equivalence"] == 15 * 500
    assert report.checks["capped_matching"] > 200


def test_mutation_is_caught_with_counterexample():
    with pytest.raises(OracleMismatch) as info:
        run_oracle_checks(n_graphs=50, n_hypergraphs=0, n_queues=0, capped=MUTATIONS["capped-off-by-one"])
    g = info.value.instance
    assert isinstance(g, WeightedGraph)
    assert any(len(MUTATIONS["capped-off-by-one"](g, cap)) > cap for cap in range(1, g.n_vertices // 2 + 1))


@pytest.mark.parametrize("max_n", [0, 1])
def test_degenerate_size_warns_and_passes(max_n):
    with pytest.warns(UserWarning, match="vacuous"):
        report = run_oracle_checks(max_n=max_n)
    assert report.total == 0
