import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad, solve_ivp

from semiclassical import analytic
from semiclassical.analytic import CoherentScenario, LinearScenario
from semiclassical.domain import CoherentPrep, Free, GaussianPrep, Harmonic, Linear, SystemParams
from semiclassical.errors import ValidationError


# independent finite-difference oracle --------------------------------------

def _d1(f, x, axis, h):
    e = np.zeros_like(x)
    e[..., axis] = h
    return (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * h)


def _d2(f, x, axis, h):
    e = np.zeros_like(x)
    e[..., axis] = h
    return (-f(x + 2 * e) + 16 * f(x + e) - 30 * f(x) + 16 * f(x - e) - f(x - 2 * e)) / (12 * h * h)


def madelung_residuals(fields, x, t, params, quantum=True, h=1e-3, k=1e-3):
    """HJ and continuity residuals of ``fields(x, t) -> (rho, S)`` at points ``x``."""
    m, hb = params.mass, params.hbar
    dim = x.shape[-1]
    rho = lambda y, s=t: fields(y, s)[0]  # noqa: E731
    S = lambda y, s=t: fields(y, s)[1]  # noqa: E731
    S_t = (-S(x, t + 2 * k) + 8 * S(x, t + k) - 8 * S(x, t - k) + S(x, t - 2 * k)) / (12 * k)
    rho_t = (-rho(x, t + 2 * k) + 8 * rho(x, t + k) - 8 * rho(x, t - k) + rho(x, t - 2 * k)) / (12 * k)
    grad_S = np.stack([_d1(S, x, a, h) for a in range(dim)], axis=-1)
    hj = S_t + np.sum(grad_S**2, axis=-1) / (2 * m) + params.V(x)
    if quantum:
        amp = lambda y: np.sqrt(rho(y))  # noqa: E731
        lap = sum(_d2(amp, x, a, h) for a in range(dim))
        hj = hj - hb**2 / (2 * m) * lap / amp(x)
    flux = lambda y, a: rho(y) * _d1(S, y, a, h) / m  # noqa: E731
    div = sum(_d1(lambda y: flux(y, a), x, a, h) for a in range(dim))
    return hj, (rho_t + div) / rho(x)


# sigma_hbar -----------------------------------------------------------------

def test_sigma_examples():
    p2 = SystemParams(1.0, 2.0)
    assert analytic.sigma_hbar(0.0, p2, 1.0) == 1.0
    assert analytic.sigma_hbar(1.0, p2, 1.0) == pytest.approx(math.sqrt(2), abs=1e-12)
    assert analytic.sigma_hbar(5.0, SystemParams(1.0, 0.0), 1.0) == 1.0


@given(st.floats(0, 10), st.floats(0, 10), st.floats(1e-3, 5))
def test_sigma_monotone_in_time(t1, dt, hbar):
    p = SystemParams(1.0, hbar)
    assert analytic.sigma_hbar(t1 + dt, p, 0.7) >= analytic.sigma_hbar(t1, p, 0.7)


# linear scenario ------------------------------------------------------------

def test_linear_fields_initial(linear_1d):
    x = np.array([[0.0]])
    rho, S = analytic.linear_fields(x, 0.0, linear_1d)
    assert rho[0] == pytest.approx((2 * math.pi) ** -0.5)
    assert S[0] == pytest.approx(0.0)


def test_linear_free_packet_peak():
    p = SystemParams(1.0, 1.5, Free(), 2)
    sc = LinearScenario(GaussianPrep((0.0, 0.0), 1.0, (0.0, 0.0)), p)
    for t in (0.3, 2.0):
        rho, _ = analytic.linear_fields(np.zeros((1, 2)), t, sc)
        sh = analytic.sigma_hbar(t, p, 1.0)
        assert rho[0] == pytest.approx((2 * math.pi * sh * sh) ** -1)


def test_classical_action_example():
    p = SystemParams(1.0, 1.0, Linear((1.0,)), 1)
    sc = LinearScenario(GaussianPrep((0.0,), 1.0, (1.0,)), p)
    _, S = analytic.classical_limit_fields(np.array([[0.0]]), 1.0, sc)
    assert S[0] == pytest.approx(-7.0 / 6.0, abs=1e-14)


def test_classical_free_at_rest_has_zero_action():
    sc = LinearScenario(GaussianPrep((0.0,), 1.0, (0.0,)), SystemParams(1.0, 1.0))
    _, S = analytic.classical_limit_fields(np.linspace(-3, 3, 7)[:, None], 2.0, sc)
    assert np.all(S == 0)


def test_linear_fields_need_positive_hbar(linear_1d):
    with pytest.raises(ValidationError, match="hbar"):
        analytic.linear_fields(np.zeros((1, 1)), 1.0, linear_1d.with_hbar(0.0))


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_linear_fields_solve_madelung(dim, rng):
    K = np.linspace(0.5, 1.0, dim)
    p = SystemParams(1.3, 0.7, Linear(tuple(K)), dim)
    sc = LinearScenario(GaussianPrep(np.full(dim, 0.2), 0.9, np.full(dim, -0.4)), p)
    x = sc.center(0.8) + rng.normal(size=(20, dim))
    hj, cont = madelung_residuals(lambda y, s: analytic.linear_fields(y, s, sc), x, 0.8, p)
    assert np.max(np.abs(hj)) < 1e-8
    assert np.max(np.abs(cont)) < 1e-8


def test_linear_fields_without_q_are_not_a_solution(linear_1d, rng):
    x = linear_1d.center(0.8) + rng.normal(size=(20, 1))
    hj, _ = madelung_residuals(lambda y, s: analytic.linear_fields(y, s, linear_1d), x, 0.8,
                               linear_1d.params, quantum=False)
    assert np.max(np.abs(hj)) > 1e-2


def test_classical_fields_solve_statistical_hj(rng):
    p = SystemParams(1.0, 0.0, Linear((1.0, -0.5)), 2)
    sc = LinearScenario(GaussianPrep((0.1, 0.0), 1.0, (1.0, 0.5)), p)
    x = sc.center(1.2) + rng.normal(size=(20, 2))
    hj, cont = madelung_residuals(lambda y, s: analytic.classical_limit_fields(y, s, sc), x, 1.2, p,
                                  quantum=False)
    assert np.max(np.abs(hj)) < 1e-8
    assert np.max(np.abs(cont)) < 1e-8


def test_hbar_squared_convergence(linear_1d):
    hbars = 2.0 ** -np.arange(6)
    x = linear_1d.center(1.0) + np.linspace(-3, 3, 17)[:, None]
    rho_c, S_c = analytic.classical_limit_fields(x, 1.0, linear_1d)
    err_s, err_sigma = [], []
    for hb in hbars:
        sc = linear_1d.with_hbar(hb)
        _, S = analytic.linear_fields(x, 1.0, sc)
        err_s.append(np.max(np.abs(S - S_c)))
        err_sigma.append(analytic.sigma_hbar(1.0, sc.params, 1.0) - 1.0)
    slope_s = np.polyfit(np.log(hbars), np.log(err_s), 1)[0]
    slope_sigma = np.polyfit(np.log(hbars), np.log(err_sigma), 1)[0]
    assert slope_sigma == pytest.approx(2.0, abs=0.05)
    assert slope_s == pytest.approx(2.0, abs=0.1)
    assert all(a > b for a, b in zip(err_s, err_s[1:]))


# coherent state -------------------------------------------------------------

def test_coherent_example_quarter_period():
    p = SystemParams(1.0, 0.3, Harmonic(1.0), 2)
    sc = CoherentScenario(CoherentPrep((1.0, 0.0), (0.0, 0.0), 1.0), p)
    xi, vel = analytic.harmonic_path(sc.prep, math.pi / 2)
    assert np.allclose(xi, 0, atol=1e-15) and np.allclose(vel, [-1.0, 0.0])
    assert analytic.coherent_g(math.pi / 2, sc) == pytest.approx(0.0, abs=1e-10)
    x = np.array([[0.4, -2.0], [1.5, 0.3]])
    _, S = analytic.coherent_fields(x, math.pi / 2, sc)
    assert np.allclose(S, -x[:, 0] - 0.3 * math.pi / 2, atol=1e-10)


def test_coherent_initial_values(coherent_2d):
    rho, S = analytic.coherent_fields(coherent_2d.prep.x0[None, :], 0.0, coherent_2d)
    s2 = coherent_2d.sigma**2
    assert rho[0] == pytest.approx(1 / (2 * math.pi * s2))
    assert S[0] == pytest.approx(coherent_2d.prep.v0 @ coherent_2d.prep.x0)


@pytest.mark.parametrize("t", [0.3, 1.0, 2.7])
def test_coherent_g_against_quad(coherent_2d, t):
    m, w = 1.0, 1.0

    def lag(s):
        xi, v = analytic.harmonic_path(coherent_2d.prep, s)
        return -0.5 * m * v @ v + 0.5 * m * w * w * xi @ xi

    assert analytic.coherent_g(t, coherent_2d) == pytest.approx(quad(lag, 0, t, epsabs=1e-13)[0], abs=1e-10)


def test_coherent_g_closed_form_at_rest():
    p = SystemParams(1.0, 1.0, Harmonic(2.0), 1)
    sc = CoherentScenario(CoherentPrep((1.5,), (0.0,), 2.0), p)
    for t in (0.2, 0.9):
        assert analytic.coherent_g(t, sc) == pytest.approx(0.25 * 2.0 * 1.5**2 * math.sin(4 * t), abs=1e-10)


def test_coherent_fields_solve_madelung(coherent_2d, rng):
    xi, _ = analytic.harmonic_path(coherent_2d.prep, 0.9)
    x = xi + coherent_2d.sigma * rng.normal(size=(20, 2))
    hj, cont = madelung_residuals(lambda y, s: analytic.coherent_fields(y, s, coherent_2d), x, 0.9,
                                  coherent_2d.params)
    assert np.max(np.abs(hj)) < 1e-8
    assert np.max(np.abs(cont)) < 1e-8


def test_quantum_potential_examples():
    p = SystemParams(1.0, 2.0, Harmonic(1.0), 2)
    sc = CoherentScenario(CoherentPrep((1.0, 0.0), (0.0, 1.0), 1.0), p)
    xi, _ = analytic.harmonic_path(sc.prep, 0.4)
    assert analytic.coherent_quantum_potential(xi[None], 0.4, sc)[0] == pytest.approx(2.0)
    small = CoherentScenario(sc.prep, p.with_hbar(1e-12))
    assert analytic.coherent_quantum_potential(xi[None], 0.4, small)[0] == pytest.approx(0.0, abs=1e-11)
    p2 = SystemParams(1.0, 0.0, Harmonic(2.0), 1)
    sc2 = CoherentScenario(CoherentPrep((0.0,), (0.0,), 2.0), p2)
    assert analytic.coherent_quantum_potential(np.array([[1.0]]), 0.0, sc2)[0] == pytest.approx(-2.0)


def test_coherent_requires_matching_omega():
    with pytest.raises(ValidationError):
        CoherentScenario(CoherentPrep((1.0,), (0.0,), 2.0), SystemParams(1.0, 1.0, Harmonic(1.0), 1))


# Bohm closed forms -----------------------------------------------------------

def _guidance_ode(scen, mode_spin=False):
    """Velocity of the closed-form fields by central differences (independent of the package)."""
    p = scen.params
    h = 1e-5

    def rhs(t, y):
        x = y[None, :]
        dim = len(y)
        v = np.empty(dim)
        gl = np.empty(dim)
        for a in range(dim):
            e = np.zeros(dim)
            e[a] = h
            rp, sp = analytic.linear_fields(x + e, t, scen)
            rm, sm = analytic.linear_fields(x - e, t, scen)
            v[a] = (sp[0] - sm[0]) / (2 * h) / p.mass
            gl[a] = (math.log(rp[0]) - math.log(rm[0])) / (2 * h)
        if mode_spin:
            v += p.hbar / (2 * p.mass) * np.cross(gl, [0.0, 0.0, 1.0])
        return v

    return rhs


def test_bohm_1d_examples():
    p = SystemParams(1.0, 2.0, Free(), 1)
    sc = LinearScenario(GaussianPrep((0.0,), 1.0, (0.0,)), p)
    assert analytic.bohm_trajectory_1d(1.0, 1.0, sc) == pytest.approx(math.sqrt(2))
    p = SystemParams(1.0, 0.8, Linear((1.5,)), 1)
    sc = LinearScenario(GaussianPrep((0.3,), 1.0, (0.5,)), p)
    for t in (0.0, 0.7, 2.0):
        assert analytic.bohm_trajectory_1d(0.0, t, sc) == pytest.approx(sc.center(t)[0])


def test_bohm_1d_matches_ode(linear_1d, rng):
    rhs = _guidance_ode(linear_1d)
    for _ in range(20):
        eta, t = rng.normal(), rng.uniform(0.1, 2.0)
        sol = solve_ivp(rhs, (0, t), [linear_1d.prep.zeta0[0] + eta], rtol=1e-11, atol=1e-12)
        assert sol.y[0, -1] == pytest.approx(analytic.bohm_trajectory_1d(eta, t, linear_1d), abs=1e-6)


def test_bohm_1d_classical_limit(linear_1d):
    for eta in (-1.0, 0.5, 2.0):
        classical = linear_1d.prep.zeta0[0] + eta + linear_1d.prep.v0[0] * 1.0 + 0.5
        sc = linear_1d.with_hbar(1e-4)
        assert analytic.bohm_trajectory_1d(eta, 1.0, sc) == pytest.approx(classical, abs=1e-8)
        err = abs(analytic.bohm_trajectory_1d(eta, 1.0, linear_1d) - classical)
        ratio = analytic.sigma_hbar(1.0, linear_1d.params, 1.0) - 1.0
        assert err == pytest.approx(abs(eta) * ratio)


def test_bohm_3d_spin_radius_example():
    p = SystemParams(1.0, 2.0, Linear((0.0, 0.0, 0.0)), 3)
    sc = LinearScenario(GaussianPrep((0.0, 0.0, 0.0), 1.0, (0.0, 0.0, 0.0)), p)
    x = analytic.bohm_trajectory_3d_spin(np.array([1.0, 1.0, 0.0]), 1.0, sc)
    assert math.hypot(x[0], x[1]) == pytest.approx(2.0)


def test_bohm_3d_spin_axial_only(linear_3d):
    x = analytic.bohm_trajectory_3d_spin(np.array([0.0, 0.0, 0.7]), 1.3, linear_3d)
    c = linear_3d.center(1.3)
    assert x[:2] == pytest.approx(c[:2])


def test_bohm_3d_spin_matches_ode(linear_3d, rng):
    rhs = _guidance_ode(linear_3d, mode_spin=True)
    for _ in range(20):
        eta = rng.normal(size=3)
        t = rng.uniform(0.2, 1.5)
        sol = solve_ivp(rhs, (0, t), linear_3d.prep.zeta0 + eta, rtol=1e-11, atol=1e-12)
        ref = analytic.bohm_trajectory_3d_spin(eta, t, linear_3d)
        assert np.allclose(sol.y[:, -1], ref, atol=1e-5)


def test_bohm_3d_spin_rejects_transverse_force():
    p = SystemParams(1.0, 1.0, Linear((1.0, 0.0, 0.0)), 3)
    sc = LinearScenario(GaussianPrep((0.0, 0.0, 0.0), 1.0, (0.0, 0.0, 0.0)), p)
    with pytest.raises(ValidationError):
        analytic.bohm_trajectory_3d_spin(np.ones(3), 1.0, sc)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.0, 3.0))
def test_bohm_3d_spin_classical_limit(e1, e2, t):
    p = SystemParams(1.0, 1e-9, Linear((0.0, 0.0, 1.0)), 3)
    sc = LinearScenario(GaussianPrep((0.0, 0.0, 0.0), 1.0, (0.1, 0.2, 0.3)), p)
    eta = np.array([e1, e2, 0.5])
    assert np.allclose(analytic.bohm_trajectory_3d_spin(eta, t, sc), sc.center(t) + eta, atol=1e-7)


def test_gaussian_quantum_potential_matches_coherent(coherent_2d, rng):
    x = rng.normal(size=(10, 2))
    xi, _ = analytic.harmonic_path(coherent_2d.prep, 0.6)
    q1 = analytic.gaussian_quantum_potential(x, xi, coherent_2d.sigma, coherent_2d.params)
    assert np.allclose(q1, analytic.coherent_quantum_potential(x, 0.6, coherent_2d))


def test_adaptive_simpson():
    assert analytic.adaptive_simpson(math.sin, 0, math.pi) == pytest.approx(2.0, abs=1e-10)
