import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anls import BlowUpError, ComplexField, GridSpec, ProblemParams, RealField, ValidationError
from anls.evolution import (EvolutionState, PropagatorConfig, conserved_quantities,
                            gauge_deviation, measure_growth_rate, perturbation_field,
                            phase_wrap_ratio, propagate, shape_error, split_step, strang_order,
                            time_reversal_error, write_snapshots)
from anls.linearization import LinearizedPair, unstable_eigenvalue

from conftest import smooth_field

P3 = ProblemParams(0.5, 3.0)


def _packet(grid, rng):
    return ComplexField(grid, smooth_field(grid, rng, positive=True) * (1 + 0.3j))


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValidationError):
            PropagatorConfig(dt=0.0)
        with pytest.raises(ValidationError):
            PropagatorConfig(dt=2.0, t_end=1.0)
        with pytest.raises(ValidationError):
            PropagatorConfig(record_every=-1)
        assert PropagatorConfig(1e-3, 0.5).n_steps == 500

    def test_phase_wrap_ratio(self):
        g = GridSpec(32, 64, 16.0, 32.0)
        assert phase_wrap_ratio(g, 0.5, 1e-3) < 1


class TestLinearFlow:
    @pytest.mark.parametrize("s", [0.3, 0.5, 1.0])
    def test_plane_wave_exact(self, s):
        g = GridSpec(16, 32, 4.0, 8.0)
        X, Y = g.mesh()
        kx, ky = 2 * np.pi * 3 / g.lx, 2 * np.pi * 2 / g.ly
        u0 = np.exp(1j * (kx * X + ky * Y))
        t = 0.37
        traj = propagate(ComplexField(g, u0), ProblemParams(s, 3.0), PropagatorConfig(t / 10, t),
                         nonlinear=False)
        exact = u0 * np.exp(1j * t * (kx**2 + ky ** (2 * s)))
        assert np.abs(traj.final.values - exact).max() < 1e-12


class TestNonlinearFlow:
    def test_soliton_phase_rotation(self, tiny_3):
        t = 0.5
        traj = propagate(tiny_3.field, tiny_3.params, PropagatorConfig(1e-3, t))
        u = traj.final.values
        assert shape_error(u, tiny_3.values) < 1e-6
        # phi e^{-i omega t}
        ph = np.angle(np.sum(u * tiny_3.values))
        assert abs(ph + t) < 1e-6

    def test_mass_and_energy(self, rng):
        g = GridSpec(32, 64, 16.0, 32.0)
        traj = propagate(_packet(g, rng), P3, PropagatorConfig(1e-3, 0.2), sample_every=20)
        assert np.abs(traj.mass / traj.mass[0] - 1).max() < 1e-12
        assert np.abs(traj.energy / traj.energy[0] - 1).max() < 1e-4

    def test_time_reversal(self, rng):
        g = GridSpec(32, 64, 16.0, 32.0)
        assert time_reversal_error(_packet(g, rng), P3, 1e-3, 100) < 1e-12

    def test_strang_order(self, rng):
        g = GridSpec(32, 64, 16.0, 32.0)
        orders, errs = strang_order(_packet(g, rng), P3, 0.2, [0.02, 0.01, 0.005, 0.0025])
        assert np.all(np.abs(orders - 2.0) < 0.1), orders

    def test_long_run_drift(self, rng):
        g = GridSpec(32, 64, 16.0, 32.0)
        traj = propagate(_packet(g, rng), P3, PropagatorConfig(1e-3, 10.0), sample_every=500)
        assert np.abs(traj.mass / traj.mass[0] - 1).max() <= 1e-10
        assert np.abs(traj.energy / traj.energy[0] - 1).max() <= 1e-6

    def test_mass_per_step(self, rng):
        g = GridSpec(32, 64, 16.0, 32.0)
        state = conserved_quantities(EvolutionState(_packet(g, rng)), P3)
        for _ in range(20):
            m0 = state.mass
            state = conserved_quantities(split_step(state, P3, 1e-2), P3)
            assert abs(state.mass / m0 - 1) <= 1e-14

    @pytest.mark.parametrize("alpha", [0.9, -2.3])
    def test_gauge_covariance(self, rng, alpha):
        g = GridSpec(32, 64, 16.0, 32.0)
        u0 = _packet(g, rng)
        cfg = PropagatorConfig(1e-3, 0.5)
        a = propagate(u0, P3, cfg).final.values
        b = propagate(ComplexField(g, np.exp(1j * alpha) * u0.values), P3, cfg).final.values
        assert np.abs(b - np.exp(1j * alpha) * a).max() <= 1e-13 * np.abs(a).max()

    def test_zero_state(self):
        g = GridSpec(8, 8, 1.0, 1.0)
        st0 = conserved_quantities(EvolutionState(ComplexField(g, np.zeros(g.shape, complex))), P3)
        assert st0.mass == 0.0 and st0.energy == 0.0

    def test_split_step_updates_state(self, tiny_3):
        st0 = conserved_quantities(EvolutionState(ComplexField(tiny_3.grid, tiny_3.values + 0j)), P3)
        st1 = split_step(st0, P3, 1e-3)
        assert st1.t == pytest.approx(1e-3)
        assert st1.mass == pytest.approx(st0.mass, rel=1e-13)

    def test_blow_up_detected(self):
        g = GridSpec(8, 8, 1.0, 1.0)
        v = np.ones(g.shape, complex)
        v[0, 0] = 1e200  # |u|^(p-2) overflows in the nonlinear phase
        with pytest.raises(BlowUpError):
            split_step(ComplexField(g, v), ProblemParams(0.5, 4.0), 1e-3)

    def test_snapshots(self, tmp_path, tiny_3):
        traj = propagate(tiny_3.field, tiny_3.params, PropagatorConfig(1e-2, 0.1, record_every=5))
        idx = write_snapshots(traj, tmp_path, tiny_3.params)
        assert len(idx) == 2
        assert json.loads((tmp_path / "index.json").read_text())[1]["t"] == pytest.approx(0.1)


class TestGaugeDeviation:
    @settings(max_examples=30, deadline=None)
    @given(st.floats(-math.pi, math.pi))
    def test_phase_invariant(self, theta):
        rng = np.random.default_rng(3)
        phi = rng.random((8, 8))
        u = phi + 0.1 * rng.standard_normal((8, 8))
        d0 = gauge_deviation(u + 0j, phi, 0.5)
        assert np.isclose(gauge_deviation(u * np.exp(1j * theta), phi, 0.5), d0, atol=1e-12)

    def test_zero_on_rotated_soliton(self):
        phi = np.random.default_rng(1).random((8, 8))
        assert gauge_deviation(phi * np.exp(0.7j), phi, 1.0) < 1e-7


class TestPerturbation:
    def test_random_is_unit_and_even(self, tiny_3):
        w = perturbation_field(tiny_3, "random", seed=2)
        g = tiny_3.grid
        assert np.isclose(np.sum(np.abs(w) ** 2) * g.cell, 1.0)
        from anls.grid import reflect
        assert np.allclose(reflect(w, 0), w) and np.allclose(reflect(w, 1), w)

    def test_bad_inputs(self, tiny_3):
        with pytest.raises(ValidationError):
            perturbation_field(tiny_3, "noise")
        with pytest.raises(ValidationError):
            perturbation_field(tiny_3, np.zeros((4, 4)))
        with pytest.raises(ValidationError):
            measure_growth_rate(tiny_3, amplitude=1.0)


class TestGrowthRate:
    def test_unstable_rate_matches_eigenvalue(self, tiny_4):
        lam = unstable_eigenvalue(LinearizedPair(tiny_4)).value
        rep = measure_growth_rate(tiny_4, dt=1e-3, t_end=20.0)
        assert rep.grew and abs(rep.lambda_est - lam) < 0.1 * lam
        assert np.isfinite(rep.fitted()[(rep.times >= rep.window[0]) & (rep.times <= rep.window[1])]).all()

    def test_amplitude_halving(self, tiny_4):
        full = measure_growth_rate(tiny_4, dt=1e-3, t_end=20.0)
        half = measure_growth_rate(tiny_4, amplitude=full.amplitude / 2, dt=1e-3, t_end=20.0)
        assert abs(half.lambda_est / full.lambda_est - 1) <= 0.02

    def test_stable_does_not_grow(self, tiny_3):
        rep = measure_growth_rate(tiny_3, dt=2e-3, t_end=10.0)
        assert not rep.grew and rep.lambda_est == 0.0
        assert rep.deviation.max() < 10 * rep.amplitude
