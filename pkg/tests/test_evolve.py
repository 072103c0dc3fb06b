import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blowup import energy
from blowup.errors import ConfigError, DomainError
from blowup.evolve import (
    EvolutionConfig,
    Trajectory,
    fit_log_slope,
    integrate,
    linear_decay_rate,
    rhs,
    tail_fraction,
)
from blowup.family import c_p, kappa_p, profile_fields, tangent_g_fields, tangent_h_fields
from blowup.harmonics import ModeState, ParityBasis, random_mode_state

ZERO = (0.0, 0.0, 0.0)


def sampled(basis, fields):
    return ModeState(basis, *(basis.project_axisymmetric(f) for f in fields))


def rel(a, b):
    return energy.energy_norm(a - b) / energy.energy_norm(b)


class TestConfig:
    def test_default_step_obeys_cfl(self):
        cfg = EvolutionConfig(5.0, N=16, Lmax=4, tau_max=1.0)
        assert cfg.dtau <= 1.0 / (16**2 + 4**2)
        assert abs(round(cfg.tau_max / cfg.dtau) * cfg.dtau - 1.0) < 1e-12

    def test_cfl_violation(self):
        with pytest.raises(ConfigError):
            EvolutionConfig(5.0, N=16, Lmax=4, dtau=0.01)

    def test_unknown_mode(self):
        with pytest.raises(ConfigError):
            EvolutionConfig(5.0, mode="implicit")

    def test_transverse_boost_rejected(self):
        with pytest.raises(DomainError):
            EvolutionConfig(5.0, mode="linear_a", a=(0.1, 0.0, 0.0))

    def test_nonlinear_needs_axisymmetry(self):
        with pytest.raises(ConfigError):
            EvolutionConfig(5.0, m=1)

    def test_subcritical_exponent(self):
        with pytest.raises(ConfigError):
            EvolutionConfig(3.0)


class TestRightHandSide:
    def test_static_profile_at_rest(self):
        p = 7.0
        cfg = EvolutionConfig(p, N=16, Lmax=4)
        s = ModeState.zeros(cfg.basis())
        y00 = np.sqrt(4 * np.pi)  # a constant c has coefficient c / Y_00
        s.c1[0, 0], s.c2[0, 0] = c_p(p) * y00, kappa_p(p) * y00
        assert energy.energy_norm(rhs(s, cfg)) < 1e-12
        # projected samples carry ~1e-13 noise in high degrees, which the Laplacian amplifies
        s = sampled(cfg.basis(), profile_fields(p, ZERO))
        assert energy.energy_norm(rhs(s, cfg)) < 1e-7

    @pytest.mark.parametrize("a3", [0.1, -0.2])
    def test_boosted_static_profile(self, a3):
        # the modal route carries a projection-noise floor; the grid route is checked in test_family
        cfg = EvolutionConfig(5.0, N=24, Lmax=12)
        s = sampled(cfg.basis(), profile_fields(5.0, (0.0, 0.0, a3)))
        assert energy.energy_norm(rhs(s, cfg)) < 1e-6 * energy.energy_norm(s)

    def test_time_translation_mode_grows(self):
        cfg = EvolutionConfig(7.0, "linear_a", N=20, Lmax=4)
        g = sampled(cfg.basis(), tangent_g_fields(7.0, ZERO))
        assert rel(rhs(g, cfg), g) < 1e-8

    def test_boost_mode_is_neutral(self):
        cfg = EvolutionConfig(7.0, "linear_a", N=20, Lmax=4)
        h = sampled(cfg.basis(), tangent_h_fields(7.0, ZERO, 3))
        assert energy.energy_norm(rhs(h, cfg)) < 1e-8 * energy.energy_norm(h)

    def test_free_mode_drops_potential(self, rng):
        b = ParityBasis(12, 4)
        s = random_mode_state(b, rng)
        lin = rhs(s, EvolutionConfig(5.0, "linear_a", N=12, Lmax=4))
        free = rhs(s, EvolutionConfig(5.0, "linear_free", N=12, Lmax=4))
        assert np.allclose(lin.c1, free.c1)
        assert not np.allclose(lin.c2, free.c2)

    def test_rejects_foreign_state(self):
        with pytest.raises(ConfigError):
            rhs(np.zeros(4), EvolutionConfig(5.0))


class TestIntegrate:
    def test_zero_stays_zero(self):
        cfg = EvolutionConfig(5.0, N=12, Lmax=4, tau_max=0.5)
        traj = integrate(ModeState.zeros(cfg.basis()), cfg)
        assert traj.reason == "horizon"
        assert np.all(traj.final.c1 == 0) and np.all(traj.final.c2 == 0)

    def test_times_increase_and_norms_finite(self, rng):
        cfg = EvolutionConfig(5.0, "linear_free", N=12, Lmax=4, tau_max=0.5, cadence=7)
        traj = integrate(random_mode_state(cfg.basis(), rng), cfg)
        assert np.all(np.diff(traj.times) > 0)
        assert abs(traj.times[-1] - 0.5) < 1e-12
        assert np.all(np.isfinite(traj.norm_total)) and np.all(np.isfinite(traj.norm_sobolev))

    def test_growth_along_time_translation(self):
        p = 7.0
        cfg = EvolutionConfig(p, N=16, Lmax=2, tau_max=1.0, cadence=10)
        b = cfg.basis()
        psi0 = sampled(b, profile_fields(p, ZERO))
        g0 = sampled(b, tangent_g_fields(p, ZERO))
        traj = integrate(psi0 + 1e-3 * g0, cfg, reference=psi0)
        fit = fit_log_slope(traj.times, traj.norm_total)
        assert abs(fit.rate - 1.0) < 0.05

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([4.0, 5.0, 7.0]))
    def test_free_contraction(self, seed, p):
        cfg = EvolutionConfig(p, "linear_free", N=12, Lmax=4, tau_max=1.0, cadence=5)
        traj = integrate(random_mode_state(cfg.basis(), np.random.default_rng(seed)), cfg)
        t, n, _ = traj.as_arrays()
        for i in range(len(t)):
            for j in range(i + 1, len(t)):
                assert n[j] <= n[i] * np.exp(-2 / (p - 1) * (t[j] - t[i])) * (1 + 1e-6)

    def test_fourth_order(self):
        p = 5.0
        b = ParityBasis(12, 2)
        s = random_mode_state(b, np.random.default_rng(7), decay=1.0)
        h0 = 1.0 / (12**2 + 2**2)
        finals = []
        for k in (1, 2, 4):
            cfg = EvolutionConfig(p, "linear_a", N=12, Lmax=2, tau_max=40 * h0, dtau=h0 / k, cadence=10**6)
            finals.append(integrate(s, cfg, diagnostics=False).final)
        e1 = energy.energy_norm(finals[0] - finals[2])
        e2 = energy.energy_norm(finals[1] - finals[2])
        # with the reference at h/4: (1 - 1/256) / (1/16 - 1/256) = 17
        assert 13 < e1 / e2 < 21

    def test_semigroup(self, rng):
        b = ParityBasis(12, 4)
        s = random_mode_state(b, rng)
        h = 1.0 / (12**2 + 4**2)

        def run(state, steps):
            cfg = EvolutionConfig(5.0, "linear_a", N=12, Lmax=4, tau_max=steps * h, dtau=h, cadence=10**6)
            return integrate(state, cfg, diagnostics=False).final

        split = run(run(s, 60), 90)
        whole = run(s, 150)
        assert energy.energy_norm(split - whole) < 1e-8 * 150 * h * energy.energy_norm(whole)

    def test_resolution_robustness(self):
        p = 5.0
        f1 = lambda x: np.exp(-np.sum(x**2, axis=-1)) * (1 + 0.3 * x[..., 2])  # noqa: E731
        f2 = lambda x: 0.5 * np.cos(np.sum(x**2, axis=-1))  # noqa: E731
        norms = []
        for N in (16, 32):
            cfg = EvolutionConfig(p, "linear_free", N=N, Lmax=6, tau_max=0.5, cadence=10**6)
            traj = integrate((f1, f2), cfg)
            norms.append(traj.norm_total[-1])
        assert abs(norms[0] - norms[1]) < 1e-6 * norms[1]

    def test_large_data_stops_early(self):
        p = 5.0
        cfg = EvolutionConfig(p, N=12, Lmax=2, tau_max=20.0, cadence=20)
        b = cfg.basis()
        traj = integrate(2.0 * sampled(b, profile_fields(p, ZERO)), cfg)
        assert traj.reason in ("overflow", "tail_blowup")
        assert traj.times[-1] < 20.0

    def test_sector_mismatch(self):
        cfg = EvolutionConfig(5.0, "linear_free", N=12, Lmax=4, m=1)
        with pytest.raises(ConfigError):
            integrate(ModeState.zeros(ParityBasis(12, 4, 0)), cfg)


class TestRates:
    def _run(self, fields, tau=3.0, p=7.0):
        cfg = EvolutionConfig(p, "linear_a", N=20, Lmax=2, tau_max=tau, cadence=20)
        return integrate(sampled(cfg.basis(), fields), cfg)

    def test_time_translation_rate(self):
        assert abs(linear_decay_rate(self._run(tangent_g_fields(7.0, ZERO))).rate - 1.0) < 1e-3

    def test_boost_rate(self):
        assert abs(linear_decay_rate(self._run(tangent_h_fields(7.0, ZERO, 3))).rate) < 0.01

    def test_needs_ten_samples(self):
        traj = Trajectory(times=[0.0, 1.0], norm_total=[1.0, 0.5], norm_sobolev=[1.0, 0.5])
        with pytest.raises(ConfigError):
            linear_decay_rate(traj)

    def test_floor_truncates(self):
        t = np.linspace(0, 10, 41)
        y = np.maximum(np.exp(-3 * t), 1e-12)
        fit = fit_log_slope(t, y, floor=1e-12)
        assert fit.truncated
        assert abs(fit.rate + 3) < 1e-9


class TestTail:
    def test_low_modes_have_no_tail(self):
        b = ParityBasis(15, 3)
        s = ModeState.zeros(b)
        s.c1[0, 0] = 1.0
        assert tail_fraction(s) == 0.0

    def test_top_block_is_tail(self):
        b = ParityBasis(15, 3)
        s = ModeState.zeros(b)
        s.c2[-1, 0] = 1.0
        s.c1[0, -1] = 1.0
        assert tail_fraction(s) == 1.0

    def test_zero_state(self):
        assert tail_fraction(ModeState.zeros(ParityBasis(8, 2))) == 0.0
