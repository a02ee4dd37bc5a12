import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semiclassical import analytic, madelung, schrodinger
from semiclassical.analytic import LinearScenario
from semiclassical.domain import Free, GaussianPrep, Linear, SystemParams, WaveField, make_grid, \
    prepare_wavefunction
from semiclassical.errors import ValidationError


def _closed_form_snapshots(sc, grid, t, dt, scale=1.0):
    out = []
    for s in (t - dt, t, t + dt):
        rho, S = analytic.linear_fields(grid.nodes(), s, sc)
        out.append(madelung.from_arrays(grid, s, rho, scale * S))
    return out


@settings(max_examples=15, deadline=None)
@given(st.floats(-3, 3), st.floats(0.2, 2.0), st.floats(0.5, 4.0))
def test_round_trip(v0, hbar, t):
    p = SystemParams(1.0, hbar, Linear((0.7,)), 1)
    sc = LinearScenario(GaussianPrep((0.0,), 1.0, (v0,)), p)
    g = make_grid(1, (-60, 60), 2048)
    rho, S = analytic.linear_fields(g.nodes(), t, sc)
    psi = WaveField(g, t, np.sqrt(rho) * np.exp(1j * S / hbar))
    f = madelung.decompose(psi, p)
    back = madelung.recompose(f, p)
    assert np.allclose(back.values[f.support], psi.values[f.support], atol=1e-12)
    # the unwrapped action differs from the true one by a constant multiple of 2 pi hbar
    diff = (f.action - S)[f.support] / (2 * math.pi * hbar)
    assert np.ptp(diff) < 1e-8
    assert abs(diff[0] - round(diff[0])) < 1e-8


def test_align_gauge_recovers_reference():
    p = SystemParams(1.0, 0.5, Free(), 1)
    sc = LinearScenario(GaussianPrep((0.0,), 1.0, (2.0,)), p)
    g = make_grid(1, (-20, 20), 512)
    rho, S = analytic.linear_fields(g.nodes(), 1.0, sc)
    shifted = madelung.from_arrays(g, 1.0, rho, S + 3 * 2 * math.pi * 0.5)
    aligned, n = madelung.align_gauge(shifted, S, p)
    assert n == 3
    assert np.allclose(aligned.action[aligned.support], S[aligned.support])


def test_unwrap_2d_plane_wave():
    g = make_grid(2, [(-8, 8)] * 2, [64, 64])
    p = SystemParams(1.0, 1.0, Free(), 2)
    psi = prepare_wavefunction(GaussianPrep((0.0, 0.0), 1.0, (1.0, 2.0)), p, g)
    f = madelung.decompose(psi, p)
    assert f.defects == 0 and f.components == 1
    X, Y = g.mesh()
    diff = (f.action - (X + 2 * Y))[f.support]
    assert np.ptp(diff) < 1e-9


def test_vortex_is_masked():
    g = make_grid(2, [(-4, 4)] * 2, [64, 64])
    X, Y = g.mesh()
    psi = WaveField(g, 0.0, (X + 1j * Y) * np.exp(-(X**2 + Y**2) / 2))
    f = madelung.decompose(psi, SystemParams(1.0, 1.0, Free(), 2))
    assert f.defects > 0
    assert not f.support.all()


def test_two_components_each_gauged(caplog):
    g = make_grid(1, (-20, 20), 512)
    x = g.axes[0]
    vals = np.exp(-(x - 8) ** 2) * np.exp(1j * 3 * x) + np.exp(-(x + 8) ** 2)
    with caplog.at_level("WARNING"):
        f = madelung.decompose(WaveField(g, 0.0, vals + 0j), SystemParams(1.0, 1.0), threshold_rel=1e-6)
    assert f.components == 2 and len(f.gauge) == 2
    assert "components" in caplog.text


def test_quantum_potential_of_gaussian():
    p = SystemParams(1.0, 0.7, Free(), 2)
    g = make_grid(2, [(-16, 16)] * 2, [128, 128])
    rho = analytic.gaussian_density(g.nodes(), np.zeros(2), 1.3)
    f = madelung.from_arrays(g, 0.0, rho, np.zeros(g.shape))
    Q = madelung.quantum_potential(f, p)
    ref = analytic.gaussian_quantum_potential(g.nodes(), np.zeros(2), 1.3, p)
    core = rho > 1e-6 * rho.max()
    assert np.max(np.abs(Q - ref)[core]) < 1e-9


def test_fd_gradient_fourth_order():
    errs = []
    for n in (32, 64, 128):
        x = np.linspace(0, 1, n)
        h = x[1] - x[0]
        g = madelung.fd_gradient(np.sin(3 * x), h)[0]
        errs.append(np.nanmax(np.abs(g - 3 * np.cos(3 * x))))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 3.7)


def test_fd_gradient_masks_outside_valid():
    f = np.arange(16.0)
    valid = np.ones(16, bool)
    valid[8] = False
    g = madelung.fd_gradient(f, 1.0, valid)[0]
    # the central stencil skips its own node, so only the neighbours lose their value
    assert np.all(np.isnan(g[[6, 7, 9, 10]])) and np.allclose(g[[2, 3, 4, 5, 8]], 1.0)


class TestResiduals:
    def setup_method(self):
        self.p = SystemParams(1.0, 1.0, Linear((1.0,)), 1)
        self.sc = LinearScenario(GaussianPrep((0.0,), 1.0, (0.5,)), self.p)
        self.grid = make_grid(1, (-20, 20), 512)

    def test_closed_form_is_at_discretization_level(self):
        rep = madelung.residuals(_closed_form_snapshots(self.sc, self.grid, 1.0, 1e-3), self.p)
        assert rep.lsq_functional <= 1e-8
        assert rep.hj_residual_l2 < 1e-4
        assert rep.nodes > 100

    def test_doubled_action_is_rejected(self):
        rep = madelung.residuals(_closed_form_snapshots(self.sc, self.grid, 1.0, 1e-3, scale=2.0), self.p)
        assert rep.lsq_functional > 1e-2

    def test_dropping_q_leaves_a_residual(self):
        rep = madelung.residuals(_closed_form_snapshots(self.sc, self.grid, 1.0, 1e-3), self.p,
                                 include_quantum_potential=False)
        assert rep.lsq_functional > 1e-3
        assert rep.to_dict()["include_quantum_potential"] is False

    def test_solver_snapshots(self):
        psi = prepare_wavefunction(self.sc.prep, self.p, self.grid)
        snaps = schrodinger.evolve(psi, self.p, schrodinger.PropagatorConfig(1e-3, 1001, 1))[-3:]
        fields = [madelung.decompose(s, self.p) for s in snaps]
        rep = madelung.residuals(fields, self.p)
        assert rep.lsq_functional <= 1e-8
        assert rep.continuity_residual_l2 < 1e-4

    def test_gauge_jump_between_snapshots_is_corrected(self):
        snaps = _closed_form_snapshots(self.sc, self.grid, 1.0, 1e-3)
        jumped = madelung.from_arrays(self.grid, snaps[2].time, snaps[2].rho, snaps[2].action + 2 * math.pi)
        rep = madelung.residuals([snaps[0], snaps[1], jumped], self.p)
        assert rep.gauge_corrections == ((snaps[2].time, 1),)
        assert rep.lsq_functional <= 1e-8

    def test_needs_uniform_spacing(self):
        snaps = _closed_form_snapshots(self.sc, self.grid, 1.0, 1e-3)
        bad = madelung.from_arrays(self.grid, 1.5, snaps[2].rho, snaps[2].action)
        with pytest.raises(ValidationError, match="uniformly"):
            madelung.residuals([snaps[0], snaps[1], bad], self.p)
