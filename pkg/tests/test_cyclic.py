import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from supdev.cyclic import (
    TestSequence,
    delta_term,
    kappa_blocks,
    kappa_count,
    perp_process,
    rational_freq,
    sup_diff_bound,
    transfer_bound,
)
from supdev.errors import DomainError
from supdev.mc import GridSpec, mc_expected_sup_diff, sup_diff_samples
from supdev.spectrum import CoefficientSeq, FrequencySeq, PolynomialSpec


def real_spec(x, y=1, coeff_kind="ones", freq_rule=lambda k: 2**0.5 * k):
    return PolynomialSpec(
        coeffs=CoefficientSeq(kind=coeff_kind),
        freqs=FrequencySeq(kind="real", rule=freq_rule),
        y=y,
        x=x,
        convention="raw",
    )


class TestRationalFreq:
    def test_sqrt2_example(self):
        num, den = rational_freq(math.sqrt(2.0), 10)
        assert (num, den) == (14, 10)
        assert abs(num / den - math.sqrt(2.0)) <= 0.1

    def test_integer_frequency_exact(self):
        for m in (1, 3, 17):
            for n in (1, 5, 64):
                assert rational_freq(float(m), n) == (m * n, n)

    @given(st.floats(1e-6, 1e6), st.integers(1, 10**6))
    @settings(max_examples=400, deadline=None)
    def test_error_within_one_over_n_exact_arithmetic(self, L, N):
        num, den = rational_freq(L, N)
        assert den == N
        err = abs(Fraction(num, den) - Fraction(L))
        assert err <= Fraction(1, N)

    def test_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            rational_freq(0.0, 5)


class TestTestSequence:
    def test_pow2_values(self):
        ts = TestSequence(kind="pow2")
        assert ts.values(1, 4) == [2, 4, 8, 16]
        assert ts.value(100) == 2**100  # exact beyond 64 bits

    def test_floor_rule(self):
        ts = TestSequence(kind="floor", floor_value=5)
        assert ts.values(1, 7) == [5, 5, 5, 5, 5, 6, 7]

    def test_below_index_rejected(self):
        ts = TestSequence(kind="explicit", explicit=(2, 3, 2))
        with pytest.raises(DomainError):
            ts.value(3)

    def test_decreasing_rule_rejected(self):
        ts = TestSequence(kind="rule", rule=lambda k: 20 - k if k < 10 else k)
        with pytest.raises(DomainError):
            ts.values(1, 12)


class TestKappaCount:
    def test_pow2_up_to_16(self):
        assert kappa_count(TestSequence(kind="pow2"), 1, 16) == 3  # [2,4), [4,8), [8,16)

    def test_interval_shorter_than_first_block(self):
        assert kappa_count(TestSequence(kind="pow2"), 1, 3) == 0

    def test_identity_counts_m_minus_one(self):
        for m in (2, 5, 17):
            assert kappa_count(TestSequence(kind="identity"), 1, m) == m - 1

    def test_degenerate_blocks_flagged_and_counted(self):
        blocks = kappa_blocks(TestSequence(kind="floor", floor_value=4), 1, 8)
        # N = 4,4,4,4,5,6,7,8: three degenerate [4,4) blocks plus [4,5),...,[7,8)
        assert blocks.degenerate == 3
        assert blocks.count == 3 + 4

    def test_offset_interval(self):
        # blocks inside [3, 20] for pow2: [4,8) and [8,16)
        assert kappa_count(TestSequence(kind="pow2"), 3, 20) == 2


class TestPerpProcess:
    def test_integer_frequencies_unchanged(self):
        spec = real_spec(4, freq_rule=lambda k: float(k))
        perp = perp_process(spec, TestSequence(kind="pow2"))
        for k in range(1, 5):
            assert perp.freqs.value(k) == spec.freqs.value(k)

    def test_per_term_error_bounded(self):
        spec = real_spec(6)
        ts = TestSequence(kind="identity")
        perp = perp_process(spec, ts)
        for k in range(1, 7):
            assert abs(perp.freqs.value(k) - spec.freqs.value(k)) <= 1.0 / ts.value(k)

    def test_rational_pairs_exposed(self):
        perp = perp_process(real_spec(2), TestSequence(kind="pow2"))
        num, den = perp.freqs.rational_pair(1)
        assert den == 2 and num == math.floor(2 * 2**0.5)


class TestDeltaTerm:
    def test_u_below_y_branch(self):
        # constant-coefficient check: Delta = U sqrt(sum 1/N_k^2) sqrt(x - y + 1)
        spec = real_spec(16, y=8)
        ts = TestSequence(kind="identity")
        rep = delta_term(spec, ts, U=4.0)
        expect = 4.0 * math.sqrt(sum(1.0 / k**2 for k in range(8, 17))) * 3.0
        assert rep.branch == "U<=y"
        assert rep.delta == pytest.approx(expect, rel=1e-12)
        assert rep.delta == pytest.approx(3.2322013096145570, rel=1e-10)

    def test_all_zero_coefficients(self):
        spec = PolynomialSpec(
            coeffs=CoefficientSeq.from_values([0.0, 0.0, 0.0]),
            freqs=FrequencySeq(kind="real", rule=lambda k: 2**0.5 * k),
            y=1,
            x=3,
            convention="raw",
        )
        rep = delta_term(spec, TestSequence(kind="pow2"), U=4.0)
        assert rep.delta == 0.0

    def test_pow2_tail_product_bounded(self):
        # N_kappa sqrt(sum_{k >= kappa} 4^{-k}) <= 2/sqrt(3) for every kappa
        ts = TestSequence(kind="pow2")
        for kappa in range(1, 12):
            tail = sum(4.0**-k for k in range(kappa, 40))
            assert (1 << kappa) * math.sqrt(tail) <= 2.0 / math.sqrt(3.0) + 1e-12

    def test_summands_nonnegative_and_reported(self):
        rep = delta_term(real_spec(32), TestSequence(kind="pow2"), U=16.0)
        assert rep.branch == "y<=U"
        assert len(rep.summands) == 3
        assert all(s >= 0.0 for s in rep.summands)
        assert rep.delta == pytest.approx(sum(rep.summands))

    def test_head_sum_matches_enumeration(self):
        # N_k = 2^k, U = 16: largest kappa with N_kappa <= U is 4, so the
        # head sum runs over k = 1..3
        spec = real_spec(10, coeff_kind="inv_sqrt")
        rep = delta_term(spec, TestSequence(kind="pow2"), U=16.0)
        expect = sum(k**-0.5 for k in (1, 2, 3))
        assert rep.summands[1] == pytest.approx(expect, rel=1e-12)

    def test_enlarging_ts_shrinks_first_and_third_summands(self):
        spec = real_spec(24)
        small = delta_term(spec, TestSequence(kind="identity"), U=8.0)
        big = delta_term(spec, TestSequence(kind="rule", rule=lambda k: 4 * k), U=8.0)
        assert big.summands[0] <= small.summands[0] + 1e-12
        assert big.summands[2] <= small.summands[2] + 1e-12


class TestSupDiffBound:
    def test_zero_coefficients_zero_bound(self):
        spec = PolynomialSpec(
            coeffs=CoefficientSeq.from_values([0.0, 0.0]),
            freqs=FrequencySeq(kind="real", rule=lambda k: 2**0.5 * k),
            y=1,
            x=2,
            convention="raw",
        )
        res = sup_diff_bound(spec, TestSequence(kind="pow2"), U=4.0)
        assert res.e_value == 0.0 and res.bound == 0.0

    def test_branch_kappa_selection(self):
        res = sup_diff_bound(real_spec(16, y=8), TestSequence(kind="identity"), U=4.0)
        assert res.branch == "U<=y"
        assert res.kappa == kappa_count(TestSequence(kind="identity"), 1, 4.0)
        res2 = sup_diff_bound(real_spec(16, y=2), TestSequence(kind="identity"), U=8.0)
        assert res2.branch == "y<=U"
        assert res2.kappa == kappa_count(TestSequence(kind="identity"), 2, 8.0)

    def test_mc_calibration_reports_only(self):
        # fitted C from a coupled run: reported, never asserted
        spec = real_spec(24, coeff_kind="inv_sqrt")
        ts = TestSequence(kind="pow2")
        from supdev.cyclic import perp_process

        perp = perp_process(spec, ts)
        grid = GridSpec.uniform(1.0, 8.0, 1024)
        est = mc_expected_sup_diff(spec, perp, grid, 400, seed=9)
        res = sup_diff_bound(spec, ts, U=8.0, C=1.0)
        fitted = est.estimate / (res.e_value * math.sqrt(max(math.log(res.kappa), 1.0)))
        assert fitted > 0.0  # the coupled difference is nondegenerate


class TestTransferBound:
    def test_h_to_zero_vacuous(self):
        tb = transfer_bound(real_spec(8), TestSequence(kind="pow2"), U=4.0, theta=1.0, h=1e-12)
        assert tb.error_term == pytest.approx(2.0, rel=1e-9)

    def test_zero_process_zero_error(self):
        spec = PolynomialSpec(
            coeffs=CoefficientSeq.from_values([0.0, 0.0]),
            freqs=FrequencySeq(kind="real", rule=lambda k: 2**0.5 * k),
            y=1,
            x=2,
            convention="raw",
        )
        tb = transfer_bound(spec, TestSequence(kind="pow2"), U=4.0, theta=1.0, h=0.5)
        assert tb.error_term == 0.0

    def test_h_must_be_below_theta(self):
        with pytest.raises(DomainError):
            transfer_bound(real_spec(4), TestSequence(kind="pow2"), U=4.0, theta=1.0, h=1.0)

    def test_discussion_specialization_scales(self):
        # N_k = 2^k, |a_k| <= k^{-1/2}: Delta stays within a constant of
        # max(sqrt(A_x), sqrt(log U)) as the formula collapses
        for x, U in ((50, 4.0), (100, 16.0), (200, 64.0)):
            spec = real_spec(x, coeff_kind="inv_sqrt")
            rep = delta_term(spec, TestSequence(kind="pow2"), U)
            a2 = float(np.sum(spec.coeff_values() ** 2))
            scale = max(math.sqrt(a2), math.sqrt(math.log(U)))
            assert rep.delta <= 4.0 * scale
            assert rep.delta >= 0.25 * scale

    def test_transfer_probability_inequality_mc(self):
        # coupled MC check at C = 1 (the error term is generous here)
        from supdev.mc import mc_sup_prob

        spec = real_spec(32, coeff_kind="inv_sqrt", freq_rule=lambda k: 0.7 * k)
        ts = TestSequence(kind="pow2")
        perp = perp_process(spec, ts)
        a2 = float(np.sum(spec.coeff_values() ** 2))
        theta, h = 2.0 * math.sqrt(a2), math.sqrt(a2)
        tb = transfer_bound(spec, ts, U=4.0, theta=theta, h=h, C=1.0)
        grid = GridSpec.uniform(1.0, 4.0, 1024)
        est_x = mc_sup_prob(spec, grid, theta - h, 3000, seed=17)
        est_p = mc_sup_prob(perp, grid, theta, 3000, seed=17)
        cushion = 3.0 * (est_x.half_width + est_p.half_width)
        assert est_x.estimate <= est_p.estimate + tb.error_term + cushion


class TestCouplingIdentity:
    def test_integer_frequencies_give_zero_supdiff(self):
        spec = real_spec(6, freq_rule=lambda k: float(k))
        perp = perp_process(spec, TestSequence(kind="identity"))
        sups = sup_diff_samples(spec, perp, GridSpec.uniform(1.0, 4.0, 256), 100, seed=3)
        assert np.all(sups == 0.0)

    def test_rational_companion_tracks_original(self):
        spec = real_spec(12, coeff_kind="inv_sqrt")
        ts = TestSequence(kind="pow2")
        perp = perp_process(spec, ts)
        sups = sup_diff_samples(spec, perp, GridSpec.uniform(1.0, 4.0, 512), 200, seed=4)
        bound = sup_diff_bound(spec, ts, U=4.0, C=1.0)
        assert sups.mean() <= 8.0 * bound.bound  # loose sanity: same scale
