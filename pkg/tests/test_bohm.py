import numpy as np
import pytest
from scipy.integrate import solve_ivp

from semiclassical import analytic, bohm, madelung, schrodinger
from semiclassical.analytic import LinearScenario
from semiclassical.domain import BohmSample, Free, GaussianPrep, Linear, SystemParams, make_grid, \
    prepare_wavefunction
from semiclassical.errors import ValidationError


def _fields_fn(sc):
    return lambda x, t: analytic.linear_fields(x, t, sc)


def test_spin_axis_must_be_unit():
    with pytest.raises(ValidationError, match="spin_axis"):
        bohm.SpinCurrent((0.0, 0.0, 2.0))


def test_spin_axis_in_plane_rejected_in_2d():
    p = SystemParams(1.0, 1.0, Free(), 2)
    with pytest.raises(ValidationError, match="normal to the plane"):
        bohm.spin_term(np.ones((4, 2)), bohm.SpinCurrent((1.0, 0.0, 0.0)), p)


def test_spin_term_is_rotated_gradient():
    p = SystemParams(2.0, 0.5, Free(), 2)
    g = np.array([[1.0, 0.0], [0.0, 3.0]])
    out = bohm.spin_term(g, bohm.SpinCurrent(), p)
    # grad x z-hat = (g_y, -g_x)
    assert np.allclose(out, 0.5 / 4 * np.array([[0.0, -1.0], [3.0, 0.0]]))


def test_velocity_field_of_plane_wave():
    p = SystemParams(1.0, 1.0, Free(), 1)
    g = make_grid(1, (-20, 20), 512)
    psi = prepare_wavefunction(GaussianPrep((0.0,), 2.0, (1.5,)), p, g)
    v = bohm.velocity_field(madelung.decompose(psi, p), p)
    ok = np.isfinite(v[..., 0])
    assert ok.sum() > 200
    assert np.allclose(v[ok, 0], 1.5, atol=1e-9)


def test_interpolator_exact_for_cubics():
    g = make_grid(2, [(-2, 2), (-1, 3)], [32, 16])
    X, Y = g.mesh()
    f = (X**3 - 2 * X * Y**2 + Y**3 - 1)[..., None]
    pts = np.random.default_rng(1).uniform([-1.5, -0.5], [1.5, 2.5], (50, 2))
    out = bohm.GridInterpolator(g)(f, pts)[:, 0]
    ref = pts[:, 0]**3 - 2 * pts[:, 0] * pts[:, 1]**2 + pts[:, 1]**3 - 1
    assert np.allclose(out, ref, atol=1e-12)


def test_interpolator_nan_outside():
    g = make_grid(1, (0, 1), 16)
    out = bohm.GridInterpolator(g)(np.ones((16, 1)), np.array([[0.03], [0.5], [0.97]]))
    assert np.isnan(out[0, 0]) and out[1, 0] == 1.0 and np.isnan(out[2, 0])


def test_sample_initial_is_deterministic():
    prep = GaussianPrep((1.0, 2.0), 0.5, (0.0, 0.0))
    a = bohm.sample_initial(prep, 100, 7)
    b = bohm.sample_initial(prep, 100, 7)
    assert np.array_equal(a.eta0, b.eta0)
    assert not np.array_equal(a.eta0, bohm.sample_initial(prep, 100, 8).eta0)
    with pytest.raises(ValidationError):
        bohm.sample_initial(prep, 0, 1)


def test_closed_form_velocity_matches_1d_trajectory(linear_1d):
    prep = linear_1d.prep
    eta = np.linspace(-2, 2, 9)
    x0 = prep.zeta0[0] + eta
    vel = bohm.closed_form_velocity(_fields_fn(linear_1d), linear_1d.params)
    times = np.linspace(0, 2, 5)
    pos, frozen = bohm.integrate_velocity(vel, x0[:, None], times, 1e-3)
    ref = analytic.bohm_trajectory_1d(eta[None, :], times[:, None], linear_1d)
    assert not frozen.any()
    assert np.max(np.abs(pos[..., 0] - ref)) < 1e-6


def test_closed_form_velocity_against_solve_ivp():
    p = SystemParams(1.0, 1.0, Linear((0.0, 0.0, 1.0)), 3)
    sc = LinearScenario(GaussianPrep((0.0, 0.0, 0.0), 1.0, (0.2, 0.0, 0.3)), p)
    vel = bohm.closed_form_velocity(_fields_fn(sc), p, bohm.SpinCurrent())
    start = np.array([0.7, -0.4, 0.5])
    sol = solve_ivp(lambda t, y: vel(y[None], t)[0], (0, 1.5), start, method="DOP853", rtol=1e-11, atol=1e-12)
    ref = analytic.bohm_trajectory_3d_spin(start, 1.5, sc)
    assert np.allclose(sol.y[:, -1], ref, atol=1e-6)


class TestEnsemble:
    @pytest.fixture(scope="class")
    @staticmethod
    def setup():
        p = SystemParams(1.0, 1.0, Linear((1.0,)), 1)
        sc = LinearScenario(GaussianPrep((0.0,), 1.0, (0.5,)), p)
        g = make_grid(1, (-20, 30), 1024)
        psi = prepare_wavefunction(sc.prep, p, g)
        waves = schrodinger.evolve(psi, p, schrodinger.PropagatorConfig(1e-3, 2000, 10))
        snaps = [madelung.decompose(w, p) for w in waves]
        return sc, p, snaps

    def test_endpoints_match_closed_form(self, setup):
        sc, p, snaps = setup
        s = bohm.sample_initial(sc.prep, 500, 3)
        run = bohm.integrate_ensemble(snaps, s, p)
        ref = analytic.bohm_trajectory_1d(s.eta0[:, 0], 2.0, sc)
        end = run.positions[-1, :, 0]
        assert run.n_flagged == 0
        assert np.max(np.abs(end - ref) / np.maximum(1, np.abs(ref))) < 1e-4

    def test_equivariance_and_misseed(self, setup):
        sc, p, snaps = setup
        s = bohm.sample_initial(sc.prep, 2000, 4)
        run = bohm.integrate_ensemble(snaps, s, p)
        assert bohm.equivariance_distance(run, snaps[-1], 2.0) < 0.04
        bad = BohmSample(np.random.default_rng(5).uniform(-3, 3, (2000, 1)), sc.prep.zeta0, 5)
        run_bad = bohm.integrate_ensemble(snaps, bad, p)
        assert bohm.equivariance_distance(run_bad, snaps[-1], 2.0) > 0.1

    def test_too_few_samples(self, setup):
        sc, p, snaps = setup
        run = bohm.integrate_ensemble(snaps, bohm.sample_initial(sc.prep, 10, 1), p)
        with pytest.raises(ValidationError, match="unflagged"):
            bohm.equivariance_distance(run, snaps[-1], 2.0)

    def test_cfl_violation(self, setup):
        sc, p, snaps = setup
        with pytest.raises(ValidationError, match="violates"):
            bohm.integrate_ensemble(snaps, bohm.sample_initial(sc.prep, 10, 1), p, dt=1.0)

    def test_unknown_snapshot_time(self, setup):
        sc, p, snaps = setup
        run = bohm.integrate_ensemble(snaps[:3], bohm.sample_initial(sc.prep, 10, 1), p)
        with pytest.raises(ValidationError, match="snapshot"):
            run.index(0.005)


def test_samples_leaving_the_grid_are_flagged():
    p = SystemParams(1.0, 1.0, Free(), 1)
    g = make_grid(1, (-10, 10), 256)
    psi = prepare_wavefunction(GaussianPrep((0.0,), 1.0, (2.0,)), p, g)
    waves = schrodinger.evolve(psi, p, schrodinger.PropagatorConfig(1e-3, 1000, 100))
    snaps = [madelung.decompose(w, p) for w in waves]
    s = BohmSample(np.array([[8.5], [-3.0]]), np.zeros(1), None)
    run = bohm.integrate_ensemble(snaps, s, p)
    assert run.flagged.tolist() == [True, False]
    assert np.all(run.positions[-1, 0] < 10)


def test_interpolator_nan_point_is_outside():
    g = make_grid(1, (0, 1), 16)
    out = bohm.GridInterpolator(g)(np.ones((16, 1)), np.array([[np.nan], [0.5]]))
    assert np.isnan(out[0, 0]) and out[1, 0] == 1.0
