"""Exact-enumeration oracle: tables, independence, query statistics."""

from itertools import permutations

import numpy as np
import pytest

from bestofk.errors import DomainError
from bestofk.measures import PlantedMeasure, ProductMeasure, from_coverage, make_planted
from bestofk.oracle import (
    ExactTable,
    all_zero_prob,
    exact_planted_table,
    exact_query_stats,
    exact_table,
    independence_check,
    verify_all,
)


class TestExactPlantedTable:
    def test_mu_half_p_one_k_two(self):
        m = make_planted(4, 2, 0.5, 1.0)
        t = exact_planted_table(m)
        assert np.allclose(t.probs, [0.0, 0.5, 0.5, 0.0], atol=1e-15)

    def test_p_zero_reduces_to_product(self):
        m = PlantedMeasure(n=5, k=3, mu=0.35, p=0.0, planted_set=(0, 1, 2))
        t = exact_planted_table(m)
        prod = exact_table(ProductMeasure(means=(0.35,) * 3), (0, 1, 2))
        assert np.allclose(t.probs, prod.probs, atol=1e-15)

    def test_all_zero_mass_example(self):
        m = make_planted(5, 3, 0.4, 0.7)
        t = exact_planted_table(m)
        assert float(t.probs[0]) == pytest.approx(0.1712, abs=1e-12)

    def test_size_cap(self):
        m = make_planted(20, 6, 0.3, 0.5)
        with pytest.raises(DomainError):
            exact_planted_table(m, n_extra=9)

    @pytest.mark.parametrize("mu", [0.1, 0.25, 0.4, 0.5])
    @pytest.mark.parametrize("p", [0.25, 0.5, 1.0])
    def test_marginals_and_gap_grid(self, mu, p):
        for k in range(2, 7):
            m = make_planted(k + 1, k, mu, p)
            t = exact_planted_table(m)
            for i in range(k):
                assert abs(t.mean(i) - mu) <= 1e-12
            ok, dev = independence_check(t, k - 1)
            assert ok, (k, mu, p, dev)
            gap = 1.0 - float(t.probs[0]) - (1.0 - (1.0 - mu) ** k)
            assert abs(gap - p * mu**k) <= 1e-12

    @pytest.mark.parametrize("k", [2, 3, 4, 5])
    def test_permutation_invariance_inside_planted_set(self, k):
        m = make_planted(k + 2, k, 0.35, 0.6)
        t = exact_planted_table(m)
        base = np.asarray(t.probs)
        for perm in permutations(range(k)):
            relabeled = np.empty_like(base)
            for atom in range(2**k):
                moved = 0
                for bit in range(k):
                    if (atom >> bit) & 1:
                        moved |= 1 << perm[bit]
                relabeled[moved] = base[atom]
            assert np.allclose(relabeled, base, atol=1e-12)


class TestIndependenceCheck:
    def test_product_table_factorizes(self):
        t = exact_table(ProductMeasure(means=(0.2, 0.7, 0.5)), (0, 1, 2))
        for order in (1, 2, 3):
            ok, dev = independence_check(t, order)
            assert ok and dev <= 1e-12

    def test_planted_k3_orders(self):
        m = make_planted(4, 3, 0.4, 0.8)
        t = exact_planted_table(m)
        ok2, _ = independence_check(t, 2)
        assert ok2
        ok3, dev3 = independence_check(t, 3)
        assert not ok3
        assert dev3 > 0.0

    def test_other_size_k_sets_fully_factorize(self):
        # dropping any single hidden arm restores full independence
        m = make_planted(5, 3, 0.35, 0.9)
        for s in ((0, 1, 3), (0, 2, 4), (1, 2, 3), (0, 3, 4)):
            t = exact_table(m, s)
            ok, dev = independence_check(t, 3)
            assert ok, (s, dev)

    def test_coverage_table(self):
        m = from_coverage(4, [{0, 1}, {0, 1, 2}])
        t = exact_table(m, (0, 1))
        # Pr(both fire) = 1/2 but the product of marginals is 3/8
        ok, dev = independence_check(t, 2)
        assert not ok and dev == pytest.approx(0.125, abs=1e-15)


class TestExactQueryStats:
    def test_semi_recovers_means(self):
        m = ProductMeasure(means=(0.9, 0.6, 0.3, 0.1))
        stats = exact_query_stats(m, range(4), k1=2, model="semi")
        for i in range(4):
            assert stats.mu_bar[i] == pytest.approx(m.means[i], abs=1e-15)

    @pytest.mark.parametrize("model", ["bandit", "marked"])
    def test_order_preserving(self, model):
        means = (0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2)
        stats = exact_query_stats(ProductMeasure(means=means), range(8), k1=3, model=model)
        mu_bar = [stats.mu_bar[i] for i in range(8)]
        assert all(a > b for a, b in zip(mu_bar, mu_bar[1:]))

    def test_topoff_changes_bandit_rate(self):
        m = ProductMeasure(means=(0.5, 0.4, 0.3, 0.9, 0.1))
        base = exact_query_stats(m, (0, 1, 2), k1=2, model="bandit")
        padded = exact_query_stats(
            m, (0, 1, 2), k1=2, model="bandit",
            reject_pool=(3,), accept_pool=(4,), k=3, exact_k=True,
        )
        # the high-mean top-off arm occludes more
        assert padded.mu_bar[0] > base.mu_bar[0]
        agreement = exact_query_stats(
            m, (0, 1, 2), k1=2, model="semi",
            reject_pool=(3,), accept_pool=(4,), k=3, exact_k=True,
        )
        assert agreement.mu_bar[1] == pytest.approx(0.4, abs=1e-15)

    def test_all_zero_probability(self):
        m = ProductMeasure(means=(0.5, 0.5, 0.5))
        stats = exact_query_stats(m, (0, 1, 2), k1=2, model="bandit")
        assert stats.all_zero == pytest.approx(0.25, abs=1e-15)

    def test_size_cap(self):
        m = ProductMeasure(means=(0.5,) * 16)
        with pytest.raises(DomainError):
            exact_query_stats(m, range(16), k1=3, model="semi")

    def test_non_bernoulli_fixture_reverses_order(self):
        # deterministic 2/3-valued arms are outside the supported families:
        # with X1 = X2 = 2/3 a.s. and X3 ~ Bernoulli(1/2),
        # E[max(X1, X2)] = 2/3 while E[max(X1, X3)] = 1/2 + (1/2)(2/3) = 5/6,
        # so the lower-mean arm 3 wins pairings despite mu_3 = 1/2 < 2/3.
        pair_12 = 2.0 / 3.0
        pair_13 = 0.5 * 1.0 + 0.5 * (2.0 / 3.0)
        assert pair_13 == pytest.approx(5.0 / 6.0)
        assert pair_13 > pair_12


class TestAllZeroProb:
    def test_product(self):
        m = ProductMeasure(means=(0.2, 0.5))
        assert all_zero_prob(m, (0, 1)) == pytest.approx(0.4, abs=1e-15)

    def test_planted_matches_closed_form(self):
        m = make_planted(6, 3, 0.3, 0.5)
        assert all_zero_prob(m, m.planted_set) == pytest.approx(
            0.7**3 - 0.5 * 0.3**3, abs=1e-14
        )


class TestParityConditionalFixtures:
    """Conditional laws of the coupled arm given the others' parity.

    At mu = 1/2 the latent Zs equal the observed bits, so conditioning the
    exact table on the parity of the non-leading planted arms must give
    mu(1-p) (even parity) and mu(1+p) (odd parity); the quadratic KL bounds
    then cap the divergences these laws induce.
    """

    @pytest.mark.parametrize("p", [0.2, 0.5, 0.8])
    def test_conditional_means(self, p):
        mu = 0.5
        m = PlantedMeasure(n=4, k=3, mu=mu, p=p, planted_set=(0, 1, 2))
        t = exact_planted_table(m)
        idx = np.arange(len(t.probs))
        lead = (idx >> 0) & 1
        parity_rest = (((idx >> 1) & 1) + ((idx >> 2) & 1)) % 2
        probs = np.asarray(t.probs)
        # the coupling flag is the complement of the rest-parity: even parity
        # of the others is exactly the boosted branch
        for parity, expect in ((0, mu * (1 + p)), (1, mu * (1 - p))):
            mask = parity_rest == parity
            cond = probs[mask & (lead == 1)].sum() / probs[mask].sum()
            assert cond == pytest.approx(expect, abs=1e-12)

    @pytest.mark.parametrize("mu", [0.2, 0.35, 0.5])
    @pytest.mark.parametrize("p", [0.2, 0.5, 0.8])
    def test_kl_bound_claims(self, mu, p):
        from bestofk.theory import bernoulli_kl

        if mu * (1 + p) >= 1:
            pytest.skip("degenerate shifted mean")
        kl0 = bernoulli_kl(mu, mu * (1 - p))
        kl1 = bernoulli_kl(mu, mu * (1 + p))
        assert kl0 <= p**2 * mu / 2 / ((1 - p) * (1 - mu * (1 - p))) + 1e-12
        assert kl1 <= p**2 * mu / 2 / (1 - mu * (1 + p)) + 1e-12


class TestMarginalHelper:
    def test_marginal_consistency(self):
        m = make_planted(5, 3, 0.25, 1.0)
        t = exact_planted_table(m, n_extra=1)
        sub = t.marginal((0, 3))
        assert sub.mean(0) == pytest.approx(0.25, abs=1e-14)
        assert float(np.sum(sub.probs)) == pytest.approx(1.0, abs=1e-14)


def test_verify_all_clean():
    assert verify_all(max_k=4) == []
