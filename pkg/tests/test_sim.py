"""Fixed-step integration, oscillation detection, boundedness."""

import math
import warnings

import numpy as np
import pytest

from mfa.equilibria import STABLE, UNSTABLE, find_equilibria
from mfa.sim import (
    InputSchedule,
    StateSpace,
    Trajectory,
    amplifier_statespace,
    boundedness_check,
    detect_oscillation,
    integrate,
    linearize,
    vector_field,
)
from mfa.tf_core import AmplifierParams

TAUS = (0.01, 0.1, 1.0)


def mixed(k, beta, taus=TAUS):
    return AmplifierParams(*taus, k=k, beta=beta)


def linear_decay_reference(params, ic, t):
    """Matrix-exponential solution of the k = 0 lag chain."""
    a = amplifier_statespace(params).a_matrix()
    vals, vecs = np.linalg.eig(a)
    c = np.linalg.solve(vecs, np.asarray(ic, dtype=complex))
    return (vecs @ (c * np.exp(vals * t))).real


class TestVectorField:
    def test_origin_is_equilibrium(self):
        assert vector_field(mixed(5.0, 0.3), (0.0, 0.0, 0.0), 0.0) == (0.0, 0.0, 0.0)

    def test_open_loop_lags(self):
        assert vector_field(mixed(0.0, 0.3), (1.0, 0.0, 0.0), 0.0) == \
            pytest.approx((-100.0, 10.0, 1.0))

    def test_zero_at_solver_equilibria(self):
        p = mixed(5.0, 0.8)
        for eq in find_equilibria(p, 0.2):
            assert np.linalg.norm(vector_field(p, eq.state, 0.2)) < 1e-8


class TestSchedule:
    def test_invariants(self):
        with pytest.raises(ValueError, match="first t_start"):
            InputSchedule(((1.0, 0.0),))
        with pytest.raises(ValueError, match="strictly increasing"):
            InputSchedule(((0.0, 0.0), (5.0, 1.0), (5.0, 2.0)))

    def test_json_round_trip(self):
        sched = InputSchedule(((0.0, 0.0), (20.0, -0.5), (30.0, 0.0)))
        assert InputSchedule.from_json(sched.to_json()) == sched

    def test_change_applies_at_first_sample_at_or_after_start(self):
        sched = InputSchedule(((0.0, 1.0), (0.25, 2.0)))
        vals = sched.values_for_steps(0.1, 6)
        assert list(vals) == [1.0, 1.0, 1.0, 2.0, 2.0, 2.0]
        vals = sched.values_for_steps(0.25, 4)
        assert list(vals) == [1.0, 2.0, 2.0, 2.0]


class TestIntegrate:
    def test_linear_decay_endpoint(self):
        p = mixed(0.0, 0.3)
        ic = (1.0, 1.0, 1.0)
        traj = integrate(p, ic, dt=0.001, t_end=1.0)  # dt = tau_min / 10
        exact = linear_decay_reference(p, ic, 1.0)
        assert np.abs(traj.states[-1] - exact).max() < 1e-6

    def test_rk4_order_ratio(self):
        p = AmplifierParams(0.5, 0.1, 1.0, k=0.0, beta=0.3)
        ic = (1.0, 1.0, 1.0)

        def endpoint(dt):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                return integrate(p, ic, dt=dt, t_end=1.0).states[-1]

        ref = endpoint(0.05 / 16)
        e1 = np.abs(endpoint(0.05) - ref).sum()
        e2 = np.abs(endpoint(0.025) - ref).sum()
        assert 12.0 <= e1 / e2 <= 20.0

    def test_coarse_step_warns(self):
        with pytest.warns(UserWarning, match="dt"):
            integrate(mixed(0.0, 0.3), (1.0, 0.0, 0.0), dt=0.01, t_end=0.1)

    def test_divergence_reported_with_time(self):
        ss = StateSpace(a=((5.0,),), b=(0.0,), c=(1.0,), labels=("x",))
        with pytest.raises(ArithmeticError, match="divergence at t="):
            integrate(ss, (1.0,), dt=0.5, t_end=1000.0)

    def test_statespace_requires_dt(self):
        ss = amplifier_statespace(mixed(1.0, 0.3))
        with pytest.raises(ValueError, match="dt"):
            integrate(ss, (0.0, 0.0, 0.0))

    def test_odd_symmetry(self):
        p = mixed(5.0, 0.4)
        a = integrate(p, (0.1, 0.0, 0.0), dt=5e-4, t_end=5.0)
        b = integrate(p, (-0.1, 0.0, 0.0), dt=5e-4, t_end=5.0)
        assert np.abs(a.states + b.states).max() < 1e-10

    def test_stable_equilibrium_holds(self):
        p = AmplifierParams(0.01, 0.1, 0.3, k=5.0, beta=0.8)
        eqs = find_equilibria(p, 0.0)
        eq = next(e for e in eqs if e.stability == STABLE)
        traj = integrate(p, eq.state, dt=5e-4, t_end=30.0)  # 100 max(tau)
        assert np.abs(traj.states - np.asarray(eq.state)).max() < 1e-6

    def test_unstable_equilibrium_departs(self):
        p = mixed(5.0, 0.8)
        eqs = find_equilibria(p, 0.05)
        eq = next(e for e in eqs if e.stability == UNSTABLE)
        assert max(z.real for z in eq.eigenvalues) > 1e-2
        traj = integrate(p, eq.state, InputSchedule.constant(0.05),
                         dt=1e-3, t_end=100.0)
        dist = np.abs(traj.states - np.asarray(eq.state)).max(axis=1)
        assert dist.max() > 1e-3


class TestDetectOscillation:
    def test_constant_trajectory(self):
        t = np.arange(0.0, 20.0, 1e-3)
        traj = Trajectory(t, np.zeros((len(t), 1)), np.full(len(t), 0.7),
                          InputSchedule.constant(0.0), ("x",))
        rep = detect_oscillation(traj)
        assert not rep.oscillating and rep.period is None

    def test_synthetic_sinusoid_period(self):
        t = np.arange(0.0, 40.0 + 1e-12, 1e-3)
        y = np.sin(2 * math.pi * t)
        traj = Trajectory(t, np.zeros((len(t), 1)), y,
                          InputSchedule.constant(0.0), ("x",))
        rep = detect_oscillation(traj)  # window is the last 20 s
        assert rep.oscillating
        assert abs(rep.period - 1.0) < 0.002
        assert rep.method_agreement < 0.02

    def test_insufficient_horizon(self):
        t = np.arange(0.0, 6.0, 1e-3)
        y = np.sin(2 * math.pi * t)  # window 3 s covers only 3 periods
        traj = Trajectory(t, np.zeros((len(t), 1)), y,
                          InputSchedule.constant(0.0), ("x",))
        with pytest.raises(ArithmeticError, match="insufficient horizon"):
            detect_oscillation(traj)

    def test_oscillating_regime(self):
        traj = integrate(mixed(5.0, 0.4), (0.1, 0.0, 0.0), dt=5e-4, t_end=50.0)
        rep = detect_oscillation(traj)
        assert rep.oscillating and rep.period > 0.0
        assert rep.method_agreement < 0.02


class TestBoundedness:
    def test_decay_to_zero(self):
        traj = integrate(mixed(0.0, 0.3), (1.0, 1.0, 1.0), dt=1e-3, t_end=5.0)
        assert boundedness_check(traj, r_max=0.0, margin=0.1)

    def test_pulse_run_bounded(self):
        sched = InputSchedule(((0.0, 0.0), (2.0, -0.5), (3.0, 0.0)))
        traj = integrate(mixed(5.0, 0.4), (0.1, 0.0, 0.0), sched,
                         dt=1e-3, t_end=15.0)
        assert boundedness_check(traj, r_max=0.5, margin=0.1, settle_time=10.0)

    def test_diverging_series_rejected(self):
        t = np.arange(0.0, 10.0, 1e-2)
        states = np.exp(t)[:, None] * np.ones((1, 3))
        traj = Trajectory(t, states, states[:, 0],
                          InputSchedule.constant(0.0), ("x", "xp", "xn"))
        assert not boundedness_check(traj, r_max=0.0, margin=0.1)

    def test_ultimate_bound_over_tunings(self):
        for k in (0.1, 5.0, 100.0):
            for beta in (0.0, 0.25, 0.5, 0.75, 1.0):
                traj = integrate(mixed(k, beta), (0.5, -0.5, 0.2),
                                 dt=2e-3, t_end=15.0)
                assert boundedness_check(traj, r_max=0.0, margin=0.1,
                                         settle_time=10.0), (k, beta)


class TestLinearize:
    def test_matches_equilibrium_jacobian(self):
        from mfa.equilibria import jacobian_at

        p = mixed(5.0, 0.8)
        ss = amplifier_statespace(p)
        for eq in find_equilibria(p, 0.0):
            assert linearize(ss, eq.y_star) == pytest.approx(
                jacobian_at(p, eq.y_star))
