import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qswitch.errors import CapExceeded, ConfigError
from qswitch.model import (
    ServiceVector,
    SwitchConfig,
    admissible_matrix,
    admissible_services,
    connectivity_support,
    enumerate_allocations,
    n_allocations,
    queue_step,
    sample_connectivity,
    subset_classes,
    validate_witness,
)
from qswitch.oracles import witness_exists


@st.composite
def configs(draw, max_n=6, max_r=8):
    n = draw(st.integers(2, max_n))
    m = draw(st.integers(1, n))
    pool = [c for size in range(2, n + 1) for c in itertools.combinations(range(n), size)]
    classes = draw(st.lists(st.sampled_from(pool), min_size=1, max_size=max_r, unique=True))
    p = draw(st.lists(st.sampled_from([0.0, 0.3, 0.9, 1.0]), min_size=n, max_size=n))
    return SwitchConfig(n, m, tuple(p), tuple(classes))


class TestSwitchConfig:
    def test_scalar_probability_broadcasts(self):
        c = SwitchConfig(3, 2, 0.9, ((0, 1),))
        assert c.lle_success == (0.9, 0.9, 0.9)

    def test_classes_are_canonicalized(self):
        c = SwitchConfig(3, 2, 1.0, ((2, 0), (1, 2)))
        assert c.request_classes == ((0, 2), (1, 2))

    @pytest.mark.parametrize(
        "args",
        [
            (3, 0, 1.0, ((0, 1),)),
            (3, 4, 1.0, ((0, 1),)),
            (3, 2, 1.5, ((0, 1),)),
            (3, 2, (1.0, 1.0), ((0, 1),)),
            (3, 2, 1.0, ((0,),)),
            (3, 2, 1.0, ((0, 3),)),
            (3, 2, 1.0, ((0, 1), (1, 0))),
            (3, 2, 1.0, ()),
        ],
    )
    def test_invalid_configs_rejected(self, args):
        with pytest.raises(ConfigError):
            SwitchConfig(*args)

    def test_dict_round_trip_is_one_indexed(self):
        c = SwitchConfig(4, 2, (0.5, 1.0, 1.0, 0.9), ((0, 3), (1, 2)))
        d = c.to_dict()
        assert d["request_classes"] == [[1, 4], [2, 3]]
        assert SwitchConfig.from_dict(d) == c

    def test_subset_classes_counts(self):
        assert len(subset_classes(6, [2, 3])) == 15 + 20
        assert len(subset_classes(7, [2])) == 21


class TestAllocations:
    def test_counts(self):
        assert len(enumerate_allocations(SwitchConfig(6, 3, 1.0, ((0, 1),)))) == 20
        assert len(enumerate_allocations(SwitchConfig(16, 8, 1.0, ((0, 1),)))) == 12_870

    def test_all_memories_forced(self):
        assert enumerate_allocations(SwitchConfig(3, 3, 1.0, ((0, 1),))) == [(1, 1, 1)]

    def test_lexicographic_by_client_tuple(self):
        allocs = enumerate_allocations(SwitchConfig(4, 2, 1.0, ((0, 1),)))
        assert allocs[0] == (1, 1, 0, 0)
        assert allocs[-1] == (0, 0, 1, 1)
        members = [tuple(i for i, x in enumerate(m) if x) for m in allocs]
        assert members == sorted(members)

    @pytest.mark.parametrize("n", range(2, 11))
    def test_full_count_is_binomial(self, n):
        for m in range(1, n + 1):
            c = SwitchConfig(n, m, 1.0, ((0, 1),))
            assert len(enumerate_allocations(c)) == math.comb(n, m) == n_allocations(c)

    def test_partial_allocations(self):
        c = SwitchConfig(4, 2, 1.0, ((0, 1),))
        allocs = enumerate_allocations(c, full_only=False)
        assert len(allocs) == 1 + 4 + 6 == n_allocations(c, full_only=False)
        assert all(sum(m) <= 2 for m in allocs)


class TestConnectivity:
    def test_two_client_support(self):
        c = SwitchConfig(3, 2, 0.9, ((0, 1),))
        support = dict(connectivity_support((1, 1, 0), c))
        assert support.keys() == {(0, 0, 0), (0, 1, 0), (1, 0, 0), (1, 1, 0)}
        assert support[(1, 1, 0)] == pytest.approx(0.81)
        assert support[(1, 0, 0)] == pytest.approx(0.09)
        assert support[(0, 1, 0)] == pytest.approx(0.09)
        assert support[(0, 0, 0)] == pytest.approx(0.01)

    def test_certain_success_single_outcome(self):
        c = SwitchConfig(4, 2, 1.0, ((0, 1),))
        assert connectivity_support((0, 1, 1, 0), c) == [((0, 1, 1, 0), 1.0)]

    def test_empty_allocation(self):
        c = SwitchConfig(3, 2, 0.5, ((0, 1),))
        assert connectivity_support((0, 0, 0), c) == [((0, 0, 0), 1.0)]

    def test_zero_probability_pruned(self):
        c = SwitchConfig(3, 3, (0.0, 0.5, 1.0), ((0, 1),))
        support = connectivity_support((1, 1, 1), c)
        assert [k for k, _ in support] == [(0, 0, 1), (0, 1, 1)]

    def test_rejects_overfull_allocation(self):
        with pytest.raises(ConfigError):
            connectivity_support((1, 1, 1), SwitchConfig(3, 2, 1.0, ((0, 1),)))

    @settings(max_examples=60, deadline=None)
    @given(configs(max_n=8))
    def test_probabilities_sum_to_one(self, config):
        for m in enumerate_allocations(config):
            support = connectivity_support(m, config)
            assert abs(sum(p for _, p in support) - 1.0) <= 1e-12
            assert all(all(kn <= mn for kn, mn in zip(k, m)) for k, _ in support)

    def test_sampling_extremes(self):
        rng = np.random.default_rng(0)
        ones = SwitchConfig(4, 2, 1.0, ((0, 1),))
        zeros = SwitchConfig(4, 2, 0.0, ((0, 1),))
        for _ in range(50):
            assert sample_connectivity((1, 0, 1, 0), ones, rng) == (1, 0, 1, 0)
            assert sample_connectivity((1, 0, 1, 0), zeros, rng) == (0, 0, 0, 0)

    def test_sampling_frequencies_match_support(self):
        c = SwitchConfig(3, 2, (0.9, 0.6, 0.5), ((0, 1),))
        m = (1, 1, 0)
        rng = np.random.default_rng(7)
        draws = 100_000
        counts = {}
        for _ in range(draws):
            k = sample_connectivity(m, c, rng)
            counts[k] = counts.get(k, 0) + 1
        for k, p in connectivity_support(m, c):
            sigma = math.sqrt(draws * p * (1 - p))
            assert abs(counts.get(k, 0) - draws * p) <= 3 * sigma


class TestAdmissibleServices:
    def test_no_lle_only_zero(self):
        c = SwitchConfig(3, 3, 1.0, ((0, 1), (1, 2)))
        assert [s.served for s in admissible_services((0, 0, 0), c)] == [(0, 0)]

    def test_shared_client_excluded(self):
        # classes {1,4}, {1,2}, {2,3} with client 4 inactive
        c = SwitchConfig(4, 4, 1.0, ((0, 3), (0, 1), (1, 2)))
        served = {s.served for s in admissible_services((1, 1, 1, 0), c)}
        assert served == {(0, 0, 0), (0, 1, 0), (0, 0, 1)}

    def test_bipartite_active_pair(self):
        c = SwitchConfig(4, 2, 1.0, subset_classes(4, [2]))
        served = [s.served for s in admissible_services((0, 1, 0, 1), c) if not s.is_zero]
        assert served == [tuple(int(omega == (1, 3)) for omega in c.request_classes)]

    def test_sorted_and_witnessed(self):
        c = SwitchConfig(4, 4, 1.0, subset_classes(4, [2]))
        services = admissible_services((1, 1, 1, 1), c)
        assert [s.served for s in services] == sorted(s.served for s in services)
        assert all(validate_witness(s, (1, 1, 1, 1), c) for s in services)

    def test_matrix_matches_list(self):
        c = SwitchConfig(5, 5, 1.0, subset_classes(5, [2, 3]))
        k = (1, 1, 0, 1, 1)
        mat = admissible_matrix(k, c)
        assert [tuple(row) for row in mat] == [s.served for s in admissible_services(k, c)]

    def test_cap_raises_instead_of_truncating(self):
        c = SwitchConfig(5, 5, 1.0, subset_classes(5, [2]))
        with pytest.raises(CapExceeded) as info:
            admissible_services((1, 1, 1, 1, 1), c, cap=2**9)
        assert info.value.size == 2**10

    def test_bad_witness_rejected(self):
        c = SwitchConfig(3, 3, 1.0, ((0, 1), (1, 2)))
        good = admissible_services((1, 1, 0), c)[1]
        assert validate_witness(good, (1, 1, 0), c)
        assert not validate_witness(good, (1, 0, 0), c)
        assert not validate_witness(ServiceVector((1, 1), ((1, 1, 0), (0, 1, 1))), (1, 1, 1), c)
        assert not validate_witness(ServiceVector((1, 0), None), (1, 1, 1), c)

    @settings(max_examples=80, deadline=None)
    @given(configs(max_n=8, max_r=10), st.data())
    def test_exactly_the_witnessable_vectors(self, config, data):
        k = tuple(data.draw(st.lists(st.integers(0, 1), min_size=config.n_clients, max_size=config.n_clients)))
        got = {s.served for s in admissible_services(k, config)}
        for b in itertools.product((0, 1), repeat=config.n_classes):
            assert (b in got) == witness_exists(b, k, config)
        for s in admissible_services(k, config):
            assert validate_witness(s, k, config)
            # downward closure
            for r in range(config.n_classes):
                if s.served[r]:
                    lowered = s.served[:r] + (0,) + s.served[r + 1:]
                    assert lowered in got


class TestQueueStep:
    def test_clamp_on_empty_queue(self):
        assert queue_step([2, 0], [1, 1], [0, 1]).tolist() == [1, 1]

    def test_fixed_point(self):
        assert queue_step([0, 0, 0], [0, 0, 0], [0, 0, 0]).tolist() == [0, 0, 0]

    def test_serve_one_arrive_one(self):
        assert queue_step([5], [1], [1]).tolist() == [5]

    def test_accepts_service_vector(self):
        assert queue_step([3, 1], ServiceVector((1, 1)), [0, 0]).tolist() == [2, 0]

    @given(st.lists(st.tuples(st.integers(0, 50), st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=12))
    def test_lower_bounds(self, rows):
        q, b, a = (np.array(x) for x in zip(*rows))
        out = queue_step(q, b, a)
        assert np.all(out >= a) and np.all(out >= q - b)
