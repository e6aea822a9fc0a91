import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pnpmdi import bsm, optics, oracle
from pnpmdi.bsm import ALL_PATTERNS, BellOutcome, ClickPattern, classify
from pnpmdi.optics import D, H, V, DetectorParams, FieldState

pols = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(
    lambda t: math.hypot(*t) > 0.1).map(lambda t: optics.jones(t[0] + 1j * t[1], t[2] + 1j * t[3], True))


class TestClassify:
    def test_examples(self):
        assert classify(ClickPattern.of(1, 2)) is BellOutcome.PSI_PLUS
        assert classify(ClickPattern.of(3, 4)) is BellOutcome.PSI_PLUS
        assert classify(ClickPattern.of(1, 4)) is BellOutcome.PSI_MINUS
        assert classify(ClickPattern.of(2, 3)) is BellOutcome.PSI_MINUS
        assert classify(ClickPattern.of(1)) is BellOutcome.INCONCLUSIVE
        assert classify(ClickPattern.of(1, 2, 3)) is BellOutcome.INCONCLUSIVE

    @pytest.mark.parametrize("fired", [(), (1, 3), (2, 4), (1, 2, 3, 4), (2, 3, 4)])
    def test_other_patterns_inconclusive(self, fired):
        assert classify(ClickPattern.of(*fired)) is BellOutcome.INCONCLUSIVE

    def test_total_on_sixteen_patterns(self):
        assert len(set(ALL_PATTERNS)) == 16
        outcomes = [classify(p) for p in ALL_PATTERNS]
        assert all(isinstance(o, BellOutcome) for o in outcomes)
        assert outcomes.count(BellOutcome.PSI_PLUS) == 2
        assert outcomes.count(BellOutcome.PSI_MINUS) == 2

    def test_ordering_matches_index(self):
        assert sorted(ALL_PATTERNS) == list(ALL_PATTERNS)
        for k, p in enumerate(ALL_PATTERNS):
            assert p.index == k and ClickPattern.from_index(k) == p

    def test_vectorized_table_agrees(self):
        assert list(bsm.classify_indices(np.arange(16))) == [int(classify(p)) for p in ALL_PATTERNS]


class TestOutcomeProbabilities:
    @given(st.floats(0, 2), st.floats(0, 2), st.floats(0, 1))
    def test_sum_to_one(self, mu_a, mu_b, xi):
        p = bsm.outcome_probabilities(D, H, mu_a, mu_b, xi, DetectorParams(0.5, 1e-4), 64)
        assert abs(sum(p) - 1.0) < 1e-12

    @given(st.floats(0, 2), st.floats(0, 2), st.floats(0, 1))
    def test_parallel_h_never_announces(self, mu_a, mu_b, xi):
        p_plus, p_minus, _ = bsm.outcome_probabilities(H, H, mu_a, mu_b, xi, DetectorParams(0.7, 0.0), 64)
        assert p_plus == 0.0 and p_minus == 0.0

    def test_orthogonal_z_states_split_evenly(self):
        params = DetectorParams(0.5, 0.0)
        p_plus, p_minus, _ = bsm.outcome_probabilities(H, V, 0.1, 0.1, 1.0, params)
        assert abs(p_plus - p_minus) < 1e-15
        ref = bsm.outcome_fibers(np.array(
            oracle.fock_pattern_distribution(H, V, 0.1, 0.1, 1.0, 0.5, 0.0, cutoff=8)))
        assert ref[0] == pytest.approx(p_plus, abs=1e-10)
        assert ref[1] == pytest.approx(p_minus, abs=1e-10)

    def test_x_basis_multiphoton_floor(self):
        p_plus, p_minus, _ = bsm.outcome_probabilities(D, D, 0.01, 0.01, 1.0, DetectorParams(1.0, 0.0))
        assert abs(p_minus / (p_plus + p_minus) - 0.25) < 0.005

    @settings(max_examples=40, deadline=None)
    @given(pols, pols, st.floats(0, 1.5), st.floats(0, 1.5), st.floats(0, 1))
    def test_exchange_symmetry(self, pa, pb, mu_a, mu_b, xi):
        params = DetectorParams(0.6, 1e-4)
        fwd = bsm.outcome_probabilities(pa, pb, mu_a, mu_b, xi, params, 64)
        rev = bsm.outcome_probabilities(pb, pa, mu_b, mu_a, xi, params, 64)
        assert np.allclose(fwd[:2], rev[:2], rtol=0, atol=1e-10)

    @settings(max_examples=40, deadline=None)
    @given(pols, pols, st.sampled_from([0.0, 45.0, 90.0, -45.0]), st.floats(0.01, 1), st.floats(0, 1))
    def test_detection_frame_covariance(self, pa, pb, deg, mu, xi):
        # Waveplates that map the H/V detection frame onto itself.
        params = DetectorParams(0.5, 1e-4)
        m = optics.hwp_matrix(math.radians(deg))
        before = sum(bsm.outcome_probabilities(pa, pb, mu, mu, xi, params, 64)[:2])
        after = sum(bsm.outcome_probabilities(m @ pa, m @ pb, mu, mu, xi, params, 64)[:2])
        assert abs(before - after) < 1e-10

    def test_general_common_rotation_changes_announcement_rate(self):
        # HH never yields psi+-; rotated by 22.5 degrees both become D and do.
        params = DetectorParams(1.0, 0.0)
        m = optics.hwp_matrix(math.radians(22.5))
        hh = sum(bsm.outcome_probabilities(H, H, 0.1, 0.1, 1.0, params)[:2])
        dd = sum(bsm.outcome_probabilities(m @ H, m @ H, 0.1, 0.1, 1.0, params)[:2])
        assert hh == 0.0 and dd > 1e-3

    def test_monte_carlo_consistency(self):
        params = DetectorParams(0.5, 1e-4)
        expected = np.array(bsm.outcome_probabilities(D, D, 0.5, 0.5, 0.9, params))
        rng = np.random.default_rng(11)
        n = 1_000_000
        alpha_a = math.sqrt(0.5) * D
        alpha_b = math.sqrt(0.5) * D
        means = optics.detector_means(alpha_a, alpha_b, 0.9, rng.uniform(0, 2 * np.pi, n))
        outcome = bsm.classify_indices(optics.sample_patterns(means, params, rng))
        freq = np.bincount(outcome, minlength=3)
        sigma = np.sqrt(n * expected * (1 - expected))
        assert np.all(np.abs(freq - n * expected) < 4 * sigma)

    def test_agrees_with_field_distribution(self):
        params = DetectorParams(0.5, 1e-3)
        dist = optics.joint_pattern_distribution(FieldState.from_polarizations(D, V, 0.3, 0.2, 0.7), params)
        p = bsm.outcome_probabilities(D, V, 0.3, 0.2, 0.7, params)
        assert p[0] == pytest.approx(dist[[0b1100, 0b0011]].sum(), abs=1e-15)
        assert p[1] == pytest.approx(dist[[0b1001, 0b0110]].sum(), abs=1e-15)
