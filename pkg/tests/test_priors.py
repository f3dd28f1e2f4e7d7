"""Beta-Binomial marginals, predictives, and MFM partition-prior tables."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from acbm import (
    build_mfm_coefficients,
    log_beta_binomial_marginal,
    log_partition_prior,
    log_predictive,
)
from acbm.errors import BlockCountExceedsSupport
from acbm.priors import NEG_INF


class TestMarginal:
    def test_uniform_single_one(self):
        assert log_beta_binomial_marginal(1, 0, 1, 1) == pytest.approx(math.log(0.5))

    def test_uniform_one_each(self):
        assert log_beta_binomial_marginal(1, 1, 1, 1) == pytest.approx(math.log(1 / 6))

    def test_against_telescoping_oracle(self):
        assert log_beta_binomial_marginal(3, 1, 0.01, 0.01) == pytest.approx(
            oracles.log_bb_marginal(3, 1, 0.01, 0.01), rel=1e-12
        )

    def test_symmetry(self):
        for s, f, a0, b0 in [(3, 7, 0.5, 2.0), (0, 4, 1.0, 0.01), (10, 2, 2.0, 0.5)]:
            assert log_beta_binomial_marginal(s, f, a0, b0) == pytest.approx(
                log_beta_binomial_marginal(f, s, b0, a0), rel=1e-12
            )

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            log_beta_binomial_marginal(-1, 0, 1, 1)
        with pytest.raises(ValueError):
            log_beta_binomial_marginal(0, 0, 0.0, 1)


class TestPredictive:
    def test_reduces_to_marginal(self):
        assert log_predictive(1, 0, 0, 0, 1, 1) == pytest.approx(math.log(0.5))

    def test_rule_of_succession(self):
        assert log_predictive(1, 0, 9, 0, 1, 1) == pytest.approx(math.log(10 / 11))

    def test_difference_of_marginals(self):
        val = log_predictive(2, 1, 3, 4, 0.01, 0.01)
        expect = oracles.log_bb_marginal(5, 5, 0.01, 0.01) - oracles.log_bb_marginal(
            3, 4, 0.01, 0.01
        )
        assert val == pytest.approx(expect, rel=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(
        s1=st.integers(0, 12), f1=st.integers(0, 12),
        s2=st.integers(0, 12), f2=st.integers(0, 12),
        a0=st.sampled_from([0.01, 0.5, 1.0, 2.0]),
        b0=st.sampled_from([0.01, 0.5, 1.0, 2.0]),
    )
    def test_chain_rule(self, s1, f1, s2, f2, a0, b0):
        whole = log_beta_binomial_marginal(s1 + s2, f1 + f2, a0, b0)
        chained = log_beta_binomial_marginal(s1, f1, a0, b0) + log_predictive(
            s2, f2, s1, f1, a0, b0
        )
        assert whole == pytest.approx(chained, rel=1e-10, abs=1e-12)


class TestMfmCoefficients:
    def test_v1_is_one(self):
        coeffs = build_mfm_coefficients(1, 1.0, 1.0, k_max=None)
        assert coeffs.log_v_at(1) == pytest.approx(0.0, abs=1e-12)

    def test_v2_unbounded(self):
        # V_2(1) = E[1/(K+1)] over the zero-truncated Poisson(1) = (e-2)/(e-1)
        coeffs = build_mfm_coefficients(2, 1.0, 1.0, k_max=None)
        expect = (math.e - 2) / (math.e - 1)
        assert math.exp(coeffs.log_v_at(1)) == pytest.approx(expect, rel=1e-10)

    def test_single_component_support(self):
        coeffs = build_mfm_coefficients(5, 1.0, 1.0, k_max=1)
        assert math.exp(coeffs.log_v_at(1)) == pytest.approx(1 / 120, rel=1e-10)
        assert coeffs.log_v_at(2) == NEG_INF

    def test_against_series_oracle(self):
        for n in (2, 5, 8):
            for k_max in (None, 1, 2, 3):
                coeffs = build_mfm_coefficients(n, 1.0, 1.0, k_max=k_max)
                tmax = n if k_max is None else min(k_max, n)
                for t in range(1, tmax + 1):
                    expect = oracles.mfm_v(n, t, 1.0, 1.0, k_max)
                    assert math.exp(coeffs.log_v_at(t)) == pytest.approx(expect, rel=1e-9)

    def test_support_pattern(self):
        # V_n(t) finite exactly for t within the supported block counts
        coeffs = build_mfm_coefficients(6, 1.0, 1.0, k_max=2)
        assert math.isfinite(coeffs.log_v_at(1))
        assert math.isfinite(coeffs.log_v_at(2))
        assert coeffs.log_v_at(3) == NEG_INF

    def test_nondefault_rate_and_concentration(self):
        coeffs = build_mfm_coefficients(4, 2.0, 0.5, k_max=3)
        for t in (1, 2, 3):
            expect = oracles.mfm_v(4, t, 2.0, 0.5, 3)
            assert math.exp(coeffs.log_v_at(t)) == pytest.approx(expect, rel=1e-9)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            build_mfm_coefficients(0, 1.0, 1.0)
        with pytest.raises(ValueError):
            build_mfm_coefficients(3, -1.0, 1.0)
        with pytest.raises(ValueError):
            build_mfm_coefficients(3, 1.0, 1.0, k_max=0)


class TestPartitionPrior:
    def test_single_item(self):
        coeffs = build_mfm_coefficients(1, 1.0, 1.0, k_max=None)
        assert log_partition_prior([0], coeffs) == pytest.approx(
            coeffs.log_v_at(1) + math.log(1.0)
        )

    def test_support_violation(self):
        coeffs = build_mfm_coefficients(2, 1.0, 1.0, k_max=1)
        with pytest.raises(BlockCountExceedsSupport):
            log_partition_prior([0, 1], coeffs)

    def test_length_mismatch(self):
        coeffs = build_mfm_coefficients(3, 1.0, 1.0)
        with pytest.raises(ValueError):
            log_partition_prior([0, 0], coeffs)

    def test_matches_oracle_mass(self):
        coeffs = build_mfm_coefficients(3, 1.0, 1.0, k_max=None)
        val = math.exp(log_partition_prior([0, 0, 1], coeffs))
        assert val == pytest.approx(oracles.eppf_mass((0, 0, 1), 1.0, 1.0), rel=1e-9)

    @pytest.mark.parametrize("n", range(2, 9))
    @pytest.mark.parametrize("k_max", [1, 2, 3, None])
    def test_normalization(self, n, k_max):
        # acceptance criterion: masses over all supported partitions sum to 1
        coeffs = build_mfm_coefficients(n, 1.0, 1.0, k_max=k_max)
        total = 0.0
        for labels in oracles.set_partitions(n):
            if k_max is not None and max(labels) + 1 > k_max:
                continue
            total += math.exp(log_partition_prior(labels, coeffs))
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_relabel_invariance(self):
        coeffs = build_mfm_coefficients(4, 1.0, 1.0, k_max=2)
        assert log_partition_prior([0, 1, 0, 1], coeffs) == pytest.approx(
            log_partition_prior(np.array([7, 3, 7, 3]), coeffs)
        )


def test_conjugacy_grid():
    # acceptance criterion: 1e-10 relative agreement with the telescoping
    # oracle over s, f in 0..50 and all 16 shape pairs
    shapes = [0.01, 0.5, 1.0, 2.0]
    for a0 in shapes:
        for b0 in shapes:
            for s in range(51):
                for f in range(51):
                    got = log_beta_binomial_marginal(s, f, a0, b0)
                    want = oracles.log_bb_marginal(s, f, a0, b0)
                    assert got == pytest.approx(want, rel=1e-10, abs=1e-12), (
                        s, f, a0, b0,
                    )
