"""
Unit tests for the numerical cross-check of the closed form.

Quadrature of 2 * int kappa ds must agree with the closed-form exponent, and
the RK4 wavefunction must converge at fourth order and follow WKB growth on
thick barriers.
"""
import math

import numpy as np
import pytest

from core.tunnel_engine.exceptions import (BarrierRangeError,
                                           ConfigurationError, NoBarrierError)
from core.tunnel_engine.reference_events import REFERENCE_EVENTS
from core.tunnel_engine.tunneling_core import (MarketParams, Regime,
                                               penetration_distance,
                                               turning_point)
from core.tunnel_engine.verification_lab import (DEFAULT_SEED, BarrierSpec,
                                                 closed_form_exponent,
                                                 integrate_wavefunction, kappa,
                                                 kappa_integral, random_specs,
                                                 verify_oracle,
                                                 wkb_exponent_numeric,
                                                 wkb_growth_ratio,
                                                 wkb_transmission)


@pytest.fixture
def lnkd_spec():
    return BarrierSpec.from_values(0.03, 0.47, 3.9)


@pytest.fixture
def thick_spec():
    """r = sigma: s* = 1 and int kappa ds is about 22."""
    return BarrierSpec.from_values(0.03, 0.03, 0.4)


class TestBarrierSpec:

    def test_derived_fields(self, lnkd_spec):
        assert lnkd_spec.s_star == pytest.approx(3.958114, abs=1e-6)
        assert lnkd_spec.C == pytest.approx(0.03 * (0.47 ** 2 + 0.03) / 0.47 ** 4, rel=1e-14)
        assert lnkd_spec.thickness == pytest.approx(0.058114, abs=1e-6)

    def test_no_barrier_rejected(self):
        with pytest.raises(NoBarrierError):
            BarrierSpec.from_values(0.03, 0.15, 3.0)

    def test_turning_point_is_zero_thickness(self):
        spec = BarrierSpec.from_values(0.03, 0.03, 1.0)
        assert spec.regime is Regime.AT_TURNING_POINT
        assert spec.s_star == 1.0
        assert spec.thickness == 0.0


class TestTurningPoint:

    def test_lnkd(self, lnkd_params):
        assert turning_point(lnkd_params) == pytest.approx(3.958114, abs=1e-6)

    def test_unit(self):
        assert turning_point(MarketParams(r=0.05, sigma=0.05)) == 1.0

    def test_goog_is_sqrt_five(self):
        assert turning_point(MarketParams(r=0.03, sigma=0.15)) == pytest.approx(math.sqrt(5), rel=1e-15)

    def test_consistency_with_penetration(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            params = MarketParams(r=float(rng.uniform(0.001, 0.2)), sigma=float(rng.uniform(0.01, 2.0)))
            K = float(rng.uniform(0.01, 0.99)) * turning_point(params)
            assert turning_point(params) - K == penetration_distance(params, K)


class TestKappa:

    def test_zero_at_turning_point(self, lnkd_spec):
        assert kappa(lnkd_spec, lnkd_spec.s_star) == 0.0

    def test_positive_inside(self, lnkd_spec):
        expected = math.sqrt(lnkd_spec.C * (1 / 3.9 ** 2 - 0.03 / 0.47))
        assert kappa(lnkd_spec, 3.9) == pytest.approx(expected, rel=1e-10)
        assert kappa(lnkd_spec, 3.9) > 0

    def test_square_root_branch(self, thick_spec):
        x1, x2 = 1e-6, 4e-6
        ratio = kappa(thick_spec, thick_spec.s_star - x2) / kappa(thick_spec, thick_spec.s_star - x1)
        assert ratio == pytest.approx(2.0, rel=1e-4)

    @pytest.mark.parametrize('s', [3.0, 4.5])
    def test_outside_barrier(self, lnkd_spec, s):
        with pytest.raises(BarrierRangeError):
            kappa(lnkd_spec, s)

    def test_vanishes_only_at_turning_point(self, thick_spec):
        grid = np.linspace(thick_spec.K, thick_spec.s_star, 200)
        values = [kappa(thick_spec, s) for s in grid]
        assert all(v > 0 for v in values[:-1])
        assert values[-1] == 0.0


class TestQuadrature:
    """The quadrature is the oracle for the closed form."""

    @pytest.mark.parametrize('row', REFERENCE_EVENTS, ids=lambda row: row.symbol)
    def test_matches_closed_form(self, row):
        spec = BarrierSpec.from_values(row.r, row.sigma, row.K)
        numeric = wkb_exponent_numeric(spec)
        closed = closed_form_exponent(spec)
        assert abs(numeric - closed) / closed < 1e-9

    def test_goog_transmission(self):
        spec = BarrierSpec.from_values(0.03, 0.15, 2.1)
        assert wkb_transmission(spec) == pytest.approx(0.95, abs=1e-3)

    def test_empty_interval_at_turning_point(self):
        spec = BarrierSpec.from_values(0.03, 0.03, 1.0)
        assert wkb_exponent_numeric(spec) == 0.0

    def test_error_estimate_reported(self, lnkd_spec):
        value, abserr = kappa_integral(lnkd_spec)
        assert value > 0
        assert 0 <= abserr < 1e-9 * value

    @pytest.mark.parametrize('rel_tol', [1e-15, 1e-14, 1e-3, 0.5])
    def test_rel_tol_range(self, lnkd_spec, rel_tol):
        with pytest.raises(ConfigurationError):
            kappa_integral(lnkd_spec, rel_tol=rel_tol)


class TestWavefunction:

    def test_boundary_condition(self, lnkd_spec):
        profile = integrate_wavefunction(lnkd_spec, n_steps=1000)
        assert profile.psi[-1] == 1.0
        assert profile.s_grid[-1] == lnkd_spec.s_star
        assert profile.s_grid[0] == lnkd_spec.K

    def test_grid_ascending_and_kappa(self, thick_spec):
        profile = integrate_wavefunction(thick_spec, n_steps=1000)
        assert np.all(np.diff(profile.s_grid) > 0)
        assert np.all(profile.kappa >= 0)
        assert profile.kappa[-1] == 0.0

    def test_growth_into_barrier(self, thick_spec):
        profile = integrate_wavefunction(thick_spec, n_steps=2000)
        # psi strictly increases as s moves from s* down to K
        assert np.all(np.diff(profile.psi) < 0)

    def test_thin_barrier_growth_resolved(self, lnkd_spec):
        profile = integrate_wavefunction(lnkd_spec)
        integral, _ = kappa_integral(lnkd_spec)
        assert 0 < profile.log_growth < integral
        assert np.all(np.diff(profile.log_psi) <= 0)

    def test_step_halving_lnkd(self, lnkd_spec):
        coarse = integrate_wavefunction(lnkd_spec, n_steps=10000)
        fine = integrate_wavefunction(lnkd_spec, n_steps=20000)
        assert abs(fine.psi[0] - coarse.psi[0]) / fine.psi[0] < 1e-8
        assert fine.log_growth == pytest.approx(coarse.log_growth, rel=1e-6)

    def test_fourth_order_convergence(self, thick_spec):
        reference = integrate_wavefunction(thick_spec, n_steps=12800).log_growth
        err_coarse = abs(integrate_wavefunction(thick_spec, n_steps=400).log_growth - reference)
        err_fine = abs(integrate_wavefunction(thick_spec, n_steps=800).log_growth - reference)
        assert 8 < err_coarse / err_fine < 32

    def test_wkb_agreement_on_thick_barrier(self, thick_spec):
        profile = integrate_wavefunction(thick_spec)
        assert wkb_growth_ratio(profile, thick_spec) == pytest.approx(1.0, abs=0.15)

    def test_too_few_steps(self, lnkd_spec):
        with pytest.raises(ConfigurationError):
            integrate_wavefunction(lnkd_spec, n_steps=50)

    def test_unresolved_barrier(self):
        # kappa(K) is about 5e5 here, so 100 steps cannot resolve the barrier
        spec = BarrierSpec.from_values(0.5, 0.01, 0.01)
        with pytest.raises(ConfigurationError):
            integrate_wavefunction(spec, n_steps=100)

    def test_turning_point_rejected(self):
        with pytest.raises(ConfigurationError):
            integrate_wavefunction(BarrierSpec.from_values(0.03, 0.03, 1.0))

    def test_profile_frame(self, lnkd_spec):
        frame = integrate_wavefunction(lnkd_spec, n_steps=200).to_frame()
        assert list(frame.columns) == ['s', 'psi', 'kappa']
        assert len(frame) == 201
        assert frame['psi'].iloc[-1] == 1.0


class TestOracle:

    def test_default_run_passes(self):
        report = verify_oracle()
        assert len(report.cases) == len(REFERENCE_EVENTS) + 50
        assert report.max_rel_deviation < 1e-9
        assert report.passed
        assert report.to_dict()['status'] == 'PASS'

    def test_seeded_runs_identical(self):
        first = verify_oracle(n_random=10, seed=DEFAULT_SEED)
        second = verify_oracle(n_random=10, seed=DEFAULT_SEED)
        assert first.to_dict() == second.to_dict()

    def test_unattainable_tolerance_fails(self):
        report = verify_oracle(rel_tol=1e-15, n_random=5)
        assert not report.attainable
        assert not report.passed

    def test_random_specs_are_tunneling(self):
        for spec in random_specs(50):
            assert 0.005 <= spec.params.r <= 0.08
            assert 0.05 <= spec.params.sigma <= 1.0
            assert spec.K < spec.s_star
