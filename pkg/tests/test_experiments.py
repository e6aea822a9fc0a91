import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pnpmdi import experiments
from pnpmdi.bsm import BellOutcome
from pnpmdi.config import bundled_config, load_config
from pnpmdi.errors import InvalidArgument
from pnpmdi.experiments import ScanCurve, fit_sine, hom_visibility
from pnpmdi.optics import DetectorParams
from pnpmdi.protocol import SessionConfig, qber_z, run_session

IDEAL = DetectorParams(1.0, 0.0)
ANGLES = np.radians(np.arange(0, 90, 4))


def synthetic(x, b, a, delta, h=4):
    return b - a * np.cos(h * x - delta)


class TestFitSine:
    def test_exact_recovery(self):
        x = np.radians(np.arange(0, 92, 4))
        fit = fit_sine(ScanCurve(x, synthetic(x, 100, 33.3, 0.0), np.zeros_like(x)))
        assert fit.offset == pytest.approx(100, abs=1e-9)
        assert fit.amplitude == pytest.approx(33.3, abs=1e-9)
        assert fit.phase == pytest.approx(0.0, abs=1e-9)
        assert fit.residual_norm < 1e-9

    @given(st.floats(10, 1000), st.floats(0, 0.99), st.floats(-math.pi + 0.01, math.pi - 0.01))
    def test_recovers_any_phase(self, b, v, delta):
        x = np.radians(np.arange(0, 92, 4))
        fit = fit_sine(ScanCurve(x, synthetic(x, b, v * b, delta), np.zeros_like(x)))
        assert fit.visibility == pytest.approx(v, abs=1e-9)
        if v > 1e-6:
            assert math.cos(fit.phase - delta) == pytest.approx(1.0, abs=1e-9)

    def test_noisy_visibility_within_one_percent(self):
        x = np.radians(np.arange(0, 92, 4))
        clean = synthetic(x, 100, 33.3, 0.4)
        worst = 0.0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            y = clean * (1 + 0.01 * rng.standard_normal(x.size))
            worst = max(worst, abs(fit_sine(ScanCurve(x, y, 0.01 * clean)).visibility - 0.333))
        assert worst < 0.01

    def test_flat_data(self):
        x = np.linspace(0, 1.5, 10)
        fit = fit_sine(ScanCurve(x, np.full(10, 7.0), np.zeros(10)))
        assert fit.visibility == 0.0 and fit.amplitude == 0.0

    def test_insufficient_samples(self):
        with pytest.raises(InvalidArgument):
            fit_sine(ScanCurve(np.linspace(0, 1.5, 5), np.ones(5), np.zeros(5)))
        with pytest.raises(InvalidArgument):
            fit_sine(ScanCurve(np.linspace(0, 0.5, 10), np.ones(10), np.zeros(10)))

    def test_curve_validation(self):
        with pytest.raises(InvalidArgument):
            ScanCurve([0, 1], [1], [0])
        with pytest.raises(InvalidArgument):
            ScanCurve([0, 1], [1, -1], [0, 0])

    def test_phase_harmonic(self):
        x = np.linspace(0, 2 * np.pi, 16, endpoint=False)
        fit = fit_sine(ScanCurve(x, synthetic(x, 1.0, 0.5, 1.0, h=1), np.zeros(16)), harmonic=1)
        assert fit.visibility == pytest.approx(0.5, abs=1e-12)


class TestHomVisibility:
    def test_examples(self):
        assert hom_visibility(0.313) == pytest.approx(0.4768, abs=1e-4)
        assert hom_visibility(0.301) == pytest.approx(0.4627, abs=1e-4)
        assert hom_visibility(1 / 3) == pytest.approx(0.5, abs=1e-15)
        assert hom_visibility(0.0) == 0.0

    @pytest.mark.parametrize("v", [-0.01, 1.0, 1.5, float("nan")])
    def test_range(self, v):
        with pytest.raises(InvalidArgument):
            hom_visibility(v)

    @given(st.floats(0, 0.999))
    def test_monotone_and_bounded(self, v):
        w = hom_visibility(v)
        assert v <= w < 1.0


class TestPhaseScan:
    phases = 2 * np.pi * np.arange(16) / 16

    def test_sync_full_fringe(self):
        cfg = SessionConfig(mu_a=2.0, mu_b=2.0, detector=IDEAL, n_trials=100_000, engine="monte-carlo")
        assert experiments.scan_phase(True, cfg, self.phases).visibility() > 0.99
        assert experiments.scan_phase(True, cfg.replace(engine="analytic"), self.phases).visibility() > 0.99

    def test_independent_phases_wash_out(self):
        cfg = SessionConfig(mu_a=2.0, mu_b=2.0, detector=IDEAL, n_trials=100_000, engine="monte-carlo")
        assert experiments.scan_phase(False, cfg, self.phases).visibility() < 0.01
        assert experiments.scan_phase(False, cfg.replace(engine="analytic"), self.phases).visibility() < 1e-9

    def test_washout_shrinks_with_trials(self):
        vis = []
        for n in (10_000, 1_000_000):
            cfg = SessionConfig(mu_a=0.5, mu_b=0.5, detector=IDEAL, n_trials=n, engine="monte-carlo")
            vis.append(np.mean([experiments.scan_phase(False, cfg.replace(seed=s), self.phases).visibility()
                                for s in range(3)]))
        # 100x more trials -> roughly 10x smaller residual visibility
        assert vis[1] < vis[0] / 4

    @pytest.mark.parametrize("sync", [True, False])
    def test_no_bob_light_is_flat(self, sync):
        cfg = SessionConfig(mu_a=1.0, mu_b=0.0, detector=DetectorParams(0.5, 1e-4), engine="analytic")
        assert experiments.scan_phase(sync, cfg, self.phases).visibility() < 1e-12

    def test_mc_deterministic(self):
        cfg = SessionConfig(mu_a=1.0, mu_b=1.0, n_trials=20_000, engine="monte-carlo")
        a = experiments.scan_phase(False, cfg, self.phases)
        b = experiments.scan_phase(False, cfg, self.phases)
        assert np.array_equal(a.y, b.y) and np.array_equal(a.y_err, b.y_err)


class TestHwpScan:
    def test_ideal_visibility_one_third(self):
        cfg = SessionConfig(mu_a=0.05, mu_b=0.05, detector=IDEAL)
        fit = fit_sine(experiments.scan_hwp(cfg, ANGLES))
        assert fit.visibility == pytest.approx(1 / 3, abs=0.01)
        assert hom_visibility(fit.visibility) == pytest.approx(0.5, abs=1e-3)

    def test_minimum_where_polarizations_align(self):
        cfg = SessionConfig(mu_a=0.05, mu_b=0.05, detector=IDEAL)
        for hwp1_deg in (0.0, 22.5):
            curve = experiments.scan_hwp(cfg, np.radians(np.arange(0, 90, 0.5)), hwp1=math.radians(hwp1_deg))
            assert math.degrees(curve.x[np.argmin(curve.y)]) == pytest.approx(hwp1_deg, abs=1e-9)

    def test_no_overlap_is_flat(self):
        cfg = SessionConfig(mu_a=0.05, mu_b=0.05, overlap=0.0, detector=IDEAL)
        assert fit_sine(experiments.scan_hwp(cfg, ANGLES)).visibility < 0.01

    def test_visibility_monotone_in_overlap_and_darks(self):
        def vis(**kw):
            cfg = SessionConfig(mu_a=0.05, mu_b=0.05, phase_nodes=64, **kw)
            return fit_sine(experiments.scan_hwp(cfg, ANGLES)).visibility
        by_xi = [vis(overlap=xi, detector=IDEAL) for xi in np.linspace(1, 0, 6)]
        by_pd = [vis(detector=DetectorParams(1.0, pd)) for pd in (0, 1e-4, 1e-3, 1e-2)]
        assert np.all(np.diff(by_xi) <= 1e-12)
        assert np.all(np.diff(by_pd) <= 1e-12)

    def test_mc_agrees_with_analytic(self):
        cfg = SessionConfig(mu_a=0.5, mu_b=0.5, detector=IDEAL, n_trials=200_000)
        a = experiments.scan_hwp(cfg, ANGLES[:8])
        m = experiments.scan_hwp(cfg.replace(engine="monte-carlo"), ANGLES[:8])
        assert np.all(np.abs(m.y - a.y) < 4 * a.y_err / math.sqrt(cfg.blocks))

    def test_argument_checks(self):
        cfg = SessionConfig()
        with pytest.raises(InvalidArgument):
            experiments.scan_hwp(cfg, [])
        with pytest.raises(InvalidArgument):
            experiments.scan_hwp(cfg, np.radians([0, 100]))


class TestBars:
    def test_analytic_bar_examples(self):
        cfg = SessionConfig(mu_a=0.05, mu_b=0.05, detector=DetectorParams(0.5, 0.0))
        bars = experiments.reproduce_bsm_bars(cfg)
        assert bars.c("H", "H") == 0.0 and bars.c("V", "V") == 0.0
        assert bars.c("H", "V") == pytest.approx(bars.c("V", "H"), rel=1e-12)
        ratio = bars.c("D", "D", BellOutcome.PSI_PLUS) / bars.c("D", "D", BellOutcome.PSI_MINUS)
        assert ratio == pytest.approx(3.0, rel=0.02)

    def test_monte_carlo_bars_symmetric(self):
        cfg = SessionConfig(mu_a=0.3, mu_b=0.3, overlap=0.88, detector=DetectorParams(0.5, 3e-5),
                            n_trials=200_000, engine="monte-carlo", seed=5)
        bars = experiments.reproduce_bsm_bars(cfg)
        sw = bars.swapped()
        sigma = np.sqrt(bars.stddev ** 2 + sw.stddev ** 2)
        sigma = np.where(sigma > 0, sigma, 1.0)
        assert np.all(np.abs(bars.counts - sw.counts) <= 4 * sigma)

    def test_monte_carlo_bars_match_analytic(self):
        cfg = SessionConfig(mu_a=0.5, mu_b=0.5, n_trials=200_000, seed=2)
        a = experiments.reproduce_bsm_bars(cfg)
        m = experiments.reproduce_bsm_bars(cfg.replace(engine="monte-carlo"))
        sd = np.where(a.stddev > 0, a.stddev, 1.0)
        assert np.all(np.abs(m.counts - a.counts) <= 4 * sd)


class TestQberTable:
    def test_fitted_config_in_neighborhood(self):
        cfg = load_config(bundled_config("table1.json"))
        for r in experiments.reproduce_table1([m for m, _ in cfg.mus], cfg.session):
            assert r.e_z <= 0.005
            assert 0.255 <= r.e_x <= 0.28
            assert r.se_z >= 0 and r.se_x >= 0

    def test_fitted_config_is_a_grid_optimum(self):
        cands = experiments.fit_imperfections([1e-5, 3e-5, 1e-4], np.radians([1.0, 2.0, 3.0]),
                                              [0.85, 0.88, 0.92])
        _, pd, eps, xi, _ = cands[0]
        assert (pd, round(math.degrees(eps), 6), xi) == (3e-5, 2.0, 0.88)
        assert [c[0] for c in cands] == sorted(c[0] for c in cands)

    def test_dark_count_limit(self):
        cfg = SessionConfig(detector=DetectorParams(0.5, 1e-4))
        ez = [qber_z(run_session(cfg.replace(mu_a=m, mu_b=m))[0]) for m in (1e-2, 1e-4, 1e-6)]
        assert ez[0] < ez[1] < ez[2]
        assert abs(ez[2] - 0.5) < 0.01


class TestFaraday:
    def test_passes_for_random_fibers(self):
        r = experiments.faraday_check(1000, seed=0)
        assert r.passed and r.worst_fidelity > 1 - 1e-10

    def test_identity_single_sample(self):
        r = experiments.faraday_check(1, seed=0, identity=True)
        assert r.passed and r.worst_fidelity == pytest.approx(1.0, abs=1e-15)

    def test_non_reciprocal_negative_control(self):
        assert not experiments.faraday_check(100, seed=0, reciprocal=False).passed

    def test_rejects_zero_samples(self):
        with pytest.raises(InvalidArgument):
            experiments.faraday_check(0, seed=0)
