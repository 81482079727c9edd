"""Measure construction, sampling, exact rewards, and serialization."""

import math

import numpy as np
import pytest

from bestofk.errors import DomainError
from bestofk.measures import (
    CoverageMeasure,
    JointTableMeasure,
    PlantedMeasure,
    ProductMeasure,
    dumps,
    expected_max,
    from_coverage,
    loads,
    make_planted,
    marginal_means,
    optimal_subset,
    planted_gap,
    sample,
    sample_matrix,
)
from bestofk.oracle import exact_planted_table


class TestConstruction:
    def test_planted_rejects_mu_above_half(self):
        with pytest.raises(DomainError):
            make_planted(5, 2, 0.6, 1.0)

    def test_planted_rejects_bad_k(self):
        with pytest.raises(DomainError):
            make_planted(5, 1, 0.3, 1.0)
        with pytest.raises(DomainError):
            make_planted(5, 6, 0.3, 1.0)

    def test_planted_accepts_k_equals_n(self):
        m = make_planted(2, 2, 0.5, 1.0)
        assert m.planted_set == (0, 1)

    def test_planted_rejects_p_zero_via_constructor(self):
        with pytest.raises(DomainError):
            make_planted(5, 2, 0.3, 0.0)
        # the dataclass itself tolerates the degenerate fixture
        assert PlantedMeasure(n=5, k=2, mu=0.3, p=0.0, planted_set=(0, 1)).p == 0.0

    def test_planted_relabeling(self):
        m = make_planted(6, 3, 0.25, 0.5, planted_set=(1, 3, 5))
        assert m.planted_set == (1, 3, 5)
        with pytest.raises(DomainError):
            make_planted(6, 3, 0.25, 0.5, planted_set=(1, 3, 6))

    def test_coverage_rejects_out_of_range(self):
        with pytest.raises(DomainError):
            from_coverage(4, [{0, 4}])

    def test_joint_table_normalization(self):
        probs = [0.25, 0.25, 0.25, 0.25 + 5e-10]
        m = JointTableMeasure(k=2, probs=tuple(probs))
        assert abs(sum(m.probs) - 1.0) < 1e-15
        assert m.normalization_correction == pytest.approx(5e-10)
        with pytest.raises(DomainError):
            JointTableMeasure(k=2, probs=(0.25, 0.25, 0.25, 0.26))
        with pytest.raises(DomainError):
            JointTableMeasure(k=2, probs=(0.5, 0.5, 0.1, -0.1))


class TestPlantedGap:
    def test_half_mu_unit_p(self):
        assert planted_gap(0.5, 1.0, 2) == 0.25

    @pytest.mark.parametrize("p", [0.25, 0.5, 1.0])
    @pytest.mark.parametrize("k", [2, 3, 5])
    def test_mu_half_closed_form(self, p, k):
        assert planted_gap(0.5, p, k) == pytest.approx(p * 2.0**-k, rel=0, abs=0)

    def test_degenerate_inputs_rejected(self):
        with pytest.raises(DomainError):
            planted_gap(0.5, 0.0, 2)
        with pytest.raises(DomainError):
            planted_gap(0.0, 1.0, 2)


class TestExpectedMax:
    def test_product_example(self):
        m = ProductMeasure(means=(0.75, 0.75, 0.75))
        assert expected_max(m, (0, 1)) == pytest.approx(15.0 / 16.0, abs=1e-15)

    def test_planted_best_subset_is_one(self):
        m = make_planted(2, 2, 0.5, 1.0)
        assert expected_max(m, (0, 1)) == pytest.approx(1.0, abs=1e-15)

    def test_unit_mean_dominates(self):
        m = ProductMeasure(means=(1.0, 0.2, 0.3))
        assert expected_max(m, (0, 2)) == 1.0
        cov = from_coverage(4, [set(range(4)), {0}])
        assert expected_max(cov, (0, 1)) == 1.0

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            expected_max(ProductMeasure(means=(0.5,)), ())

    def test_planted_gap_between_subsets(self):
        m = make_planted(6, 3, 0.3, 0.5)
        best = expected_max(m, m.planted_set)
        other = expected_max(m, (0, 1, 3))
        assert best - other == pytest.approx(planted_gap(0.3, 0.5, 3), abs=1e-15)

    def test_planted_superset_closed_form_matches_oracle(self):
        m = make_planted(6, 3, 0.25, 0.75)
        table = exact_planted_table(m, n_extra=1)
        assert expected_max(m, (0, 1, 2, 3)) == pytest.approx(
            1.0 - float(table.probs[0]), abs=1e-12
        )


class TestCoverage:
    def test_full_set_mean_one(self):
        m = from_coverage(3, [set(range(3))])
        assert marginal_means(m) == (1.0,)

    def test_union_reward(self):
        m = from_coverage(4, [{0, 1}, {2}])
        assert expected_max(m, (0, 1)) == pytest.approx(0.75)

    def test_disjoint_pairs_exhaustive(self):
        # three pairwise-disjoint 2-element sets over a 6-element universe
        m = from_coverage(6, [{0, 1}, {2, 3}, {4, 5}])
        for pair in ((0, 1), (0, 2), (1, 2)):
            assert expected_max(m, pair) == pytest.approx(2.0 / 3.0, abs=1e-15)


class TestSampling:
    def test_all_zero_product(self):
        m = ProductMeasure(means=(0.0, 0.0, 0.0))
        rng = np.random.default_rng(0)
        assert not sample_matrix(m, rng, 100).any()

    def test_planted_parity_deterministic_at_p_one(self):
        m = make_planted(5, 3, 0.5, 1.0)
        rng = np.random.default_rng(1)
        draws = sample_matrix(m, rng, 20_000)
        parity = draws[:, list(m.planted_set)].sum(axis=1) % 2
        assert (parity == 1).all()

    def test_coverage_frequency(self):
        m = from_coverage(4, [{0, 1}, {2}])
        rng = np.random.default_rng(2)
        draws = sample_matrix(m, rng, 100_000)
        freq = draws[:, 0].mean()
        assert abs(freq - 0.5) < 0.01

    def test_product_max_monte_carlo(self):
        rng = np.random.default_rng(3)
        m = ProductMeasure(means=(0.7, 0.4, 0.2, 0.1))
        s = (0, 1, 3)
        draws = sample_matrix(m, rng, 100_000)[:, list(s)].max(axis=1)
        exact = expected_max(m, s)
        se = math.sqrt(exact * (1 - exact) / 100_000)
        assert abs(draws.mean() - exact) < 4 * se

    def test_sample_reproducible_per_seed(self):
        m = make_planted(7, 3, 0.4, 0.5)
        a = sample_matrix(m, np.random.default_rng(123), 50)
        b = sample_matrix(m, np.random.default_rng(123), 50)
        assert (a == b).all()

    def test_joint_table_sampler_frequencies(self):
        m = JointTableMeasure(k=2, probs=(0.1, 0.2, 0.3, 0.4))
        rng = np.random.default_rng(4)
        draws = sample_matrix(m, rng, 200_000)
        atom = draws[:, 0] + 2 * draws[:, 1]
        for a, p in enumerate(m.probs):
            assert abs((atom == a).mean() - p) < 4 * math.sqrt(p * (1 - p) / 200_000)

    def test_single_draw_matches_matrix_head(self):
        m = ProductMeasure(means=(0.5, 0.5))
        assert (
            sample(m, np.random.default_rng(9))
            == sample_matrix(m, np.random.default_rng(9), 1)[0]
        ).all()


class TestSerialization:
    @pytest.mark.parametrize(
        "measure",
        [
            ProductMeasure(means=(0.1, 0.625, 1.0)),
            make_planted(6, 3, 0.3, 0.7, planted_set=(0, 2, 4)),
            from_coverage(5, [{0, 1}, {2, 4}]),
            JointTableMeasure(k=2, probs=(0.1, 0.2, 0.3, 0.4)),
        ],
    )
    def test_round_trip_exact(self, measure):
        again = loads(dumps(measure))
        assert type(again) is type(measure)
        assert marginal_means(again) == marginal_means(measure)
        if not isinstance(measure, JointTableMeasure):
            assert again == measure
        else:
            assert again.probs == measure.probs

    def test_unknown_type_rejected(self):
        with pytest.raises(DomainError):
            loads('{"type": "mystery"}')


class TestOptimalSubset:
    def test_product_top_k(self):
        m = ProductMeasure(means=(0.2, 0.9, 0.5, 0.7))
        assert optimal_subset(m, 2) == (1, 3)

    def test_tie_returns_none(self):
        m = ProductMeasure(means=(0.5, 0.5, 0.2))
        assert optimal_subset(m, 1) is None

    def test_planted(self):
        m = make_planted(6, 3, 0.4, 0.5, planted_set=(1, 2, 5))
        assert optimal_subset(m, 3) == (1, 2, 5)

    def test_coverage_enumeration(self):
        m = from_coverage(6, [{0, 1}, {2, 3}, {3, 4, 5}])
        assert optimal_subset(m, 2) == (0, 2)
