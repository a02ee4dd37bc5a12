"""Classical baselines: local action along one path, statistical HJ by characteristics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.stats import gaussian_kde

from .domain import GaussianPrep, LocalAction, Sampled, SystemParams, Trajectory
from .errors import CausticError, NumericalError, ValidationError

#: Tolerance of the adaptive integrator used for sampled potentials.
ADAPTIVE_TOL = 1e-9
#: Offset of the auxiliary characteristics, in units of the packet width.
JACOBIAN_OFFSET = 1e-6


def rk4_step(f, t, y, dt):
    k1 = f(t, y)
    k2 = f(t + dt / 2, y + dt / 2 * k1)
    k3 = f(t + dt / 2, y + dt / 2 * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _time_grid(t_max, dt):
    if not t_max > 0:
        raise ValidationError(f"t_max: must be > 0 (got {t_max})")
    if not dt > 0:
        raise ValidationError(f"dt: must be > 0 (got {dt})")
    n = max(1, int(math.ceil(t_max / dt - 1e-9)))
    return np.linspace(0.0, t_max, n + 1)


def local_action_evolve(x0, v0, params: SystemParams, t_max: float, dt: float) -> LocalAction:
    """Integrate Newton's equation and the local-action scalar ``g``.

    ``dg/dt = -m xi'^2 / 2 - V(xi) - m xi'' . xi`` with ``g(0) = 0``. Closed-form
    potentials use fixed-step RK4; sampled ones an adaptive integrator.
    """
    m, dim = params.mass, params.dim
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    v0 = np.atleast_1d(np.asarray(v0, dtype=float))
    if x0.shape != (dim,) or v0.shape != (dim,):
        raise ValidationError(f"x0/v0: expected {dim} components")
    times = _time_grid(t_max, dt)

    def rhs(t, y):
        xi, vel = y[:dim], y[dim:2 * dim]
        acc = -params.grad_V(xi) / m
        dg = -0.5 * m * (vel @ vel) - params.V(xi) - m * (acc @ xi)
        return np.concatenate([vel, acc, [dg]])

    y0 = np.concatenate([x0, v0, [0.0]])
    if isinstance(params.potential, Sampled):
        sol = solve_ivp(rhs, (0.0, times[-1]), y0, method="DOP853", t_eval=times,
                        rtol=ADAPTIVE_TOL, atol=ADAPTIVE_TOL)
        if not sol.success:
            raise NumericalError(f"adaptive integration failed: {sol.message}")
        ys = sol.y.T
    else:
        ys = np.empty((len(times), 2 * dim + 1))
        ys[0] = y0
        for i in range(1, len(times)):
            ys[i] = rk4_step(rhs, times[i - 1], ys[i - 1], times[i] - times[i - 1])
    if not np.all(np.isfinite(ys)):
        raise NumericalError("local action integration produced non-finite values")
    traj = Trajectory(times, ys[:, :dim], ys[:, dim:2 * dim])
    return LocalAction(traj, ys[:, -1], m)


def _derivative_weights(offsets):
    """Weights ``w`` with ``f'(0) ~ sum w_k f(offsets_k)`` for unit spacing (exact for degree < len)."""
    offsets = np.asarray(offsets, dtype=float)
    n = len(offsets)
    A = np.vander(offsets, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[1] = 1.0
    return np.linalg.solve(A, rhs)


def local_hj_residual(action: LocalAction, params: SystemParams, t: float) -> float:
    """``|dS/dt + |grad S|^2 / 2m + V|`` of the local action at ``x = xi(t)``.

    ``t`` is snapped to the nearest stored time. The time derivative of
    ``S(xi(t), .)`` uses five stored times (fourth order), centered where
    possible and shifted inwards at the ends.
    """
    traj = action.trajectory
    times = traj.times
    if not times[0] - 1e-12 <= t <= times[-1] + 1e-12:
        raise ValidationError(f"t={t} outside the computed range [{times[0]}, {times[-1]}]")
    if len(times) < 5:
        raise ValidationError("local_hj_residual: need at least five stored times")
    i = int(np.argmin(np.abs(times - t)))
    x = traj.positions[i]
    j0 = min(max(i - 2, 0), len(times) - 5)
    window = np.arange(j0, j0 + 5)
    h = times[1] - times[0]
    w = _derivative_weights((times[window] - times[i]) / h)
    dSdt = sum(wk * action.action(x, j) for wk, j in zip(w, window)) / h
    grad = action.gradient(x, i)
    return float(abs(dSdt + grad @ grad / (2 * params.mass) + params.V(x)))


def guidance_residual(action: LocalAction, t: float) -> float:
    """``|xi'(t) - grad S(xi(t), t) / m|``; zero by construction of the local action."""
    traj = action.trajectory
    i = traj.index(t)
    return float(np.max(np.abs(traj.velocities[i] - action.gradient(traj.positions[i], i) / action.mass)))


# --------------------------------------------------------------------------
# statistical Hamilton-Jacobi system


@dataclass(frozen=True)
class CharacteristicField:
    """Ensemble of characteristics with per-particle action and Jacobian.

    ``positions`` has shape ``(n_times, n_particles, dim)``. ``caustic_time``
    is the first stored time at which some Jacobian determinant is <= 0.
    """

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    actions: np.ndarray
    jacobians: np.ndarray
    caustic_time: float | None
    seed: int

    @property
    def n_particles(self) -> int:
        return self.positions.shape[1]

    def index(self, t) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValidationError(f"t={t} is not a stored time")
        return i

    def _check_caustic(self, i):
        if self.caustic_time is not None and self.times[i] >= self.caustic_time:
            raise CausticError(f"no single-valued field at t={self.times[i]:.6g}: "
                               f"caustic at t={self.caustic_time:.6g}", self.caustic_time)

    def density(self, x, t):
        """Kernel density estimate (Silverman bandwidth) of the ensemble at time ``t``."""
        i = self.index(t)
        self._check_caustic(i)
        x = np.asarray(x, dtype=float)
        kde = gaussian_kde(self.positions[i].T, bw_method="silverman")
        return kde(x.reshape(-1, x.shape[-1]).T).reshape(x.shape[:-1])

    def bandwidth(self, t) -> np.ndarray:
        """Kernel covariance used by :meth:`density` at time ``t``."""
        i = self.index(t)
        return gaussian_kde(self.positions[i].T, bw_method="silverman").covariance

    def action_along(self, t) -> tuple:
        """Particle positions and accumulated actions at time ``t``."""
        i = self.index(t)
        self._check_caustic(i)
        return self.positions[i], self.actions[i]


def statistical_hj_evolve(prep: GaussianPrep, params: SystemParams, t_grid, n_particles: int,
                          seed: int, max_dt: float = 1e-3) -> CharacteristicField:
    """Transport a Gaussian ensemble along classical characteristics.

    Particles start from ``rho0`` with velocity ``grad S0 / m = v0`` and
    accumulate ``S0(x_i) + int (m |x'|^2 / 2 - V) ds``. Each particle drags
    ``dim`` auxiliary characteristics offset by ``JACOBIAN_OFFSET * sigma0``
    to estimate ``det(dx/dx0)``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if n_particles < 100:
        raise ValidationError(f"n_particles: need at least 100 (got {n_particles})")
    if t_grid.ndim != 1 or len(t_grid) < 1 or t_grid[0] != 0 or np.any(np.diff(t_grid) <= 0):
        raise ValidationError("t_grid: must start at 0 and increase strictly")
    m, dim = params.mass, params.dim
    if prep.dim != dim:
        raise ValidationError("prep/params: dimension mismatch")

    rng = np.random.default_rng(seed)
    x0 = prep.zeta0 + prep.sigma0 * rng.standard_normal((n_particles, dim))
    delta = JACOBIAN_OFFSET * prep.sigma0
    # copy 0 is the particle itself, copy 1 + a is offset along axis a
    pos = np.repeat(x0[:, None, :], dim + 1, axis=1)
    pos[:, 1:, :] += delta * np.eye(dim)
    vel = np.broadcast_to(prep.v0, pos.shape).copy()
    S = m * (x0 @ prep.v0)

    def rhs(t, y):
        p, v = y[0], y[1]
        acc = -params.grad_V(p) / m
        lag = 0.5 * m * np.sum(v[:, 0] ** 2, axis=-1) - params.V(p[:, 0])
        return np.stack([v, acc]), lag

    def step(t, state, dt):
        # RK4 on (positions, velocities) with the action as a quadrature
        y, _ = state
        k1, l1 = rhs(t, y)
        k2, l2 = rhs(t + dt / 2, y + dt / 2 * k1)
        k3, l3 = rhs(t + dt / 2, y + dt / 2 * k2)
        k4, l4 = rhs(t + dt, y + dt * k3)
        return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4), dt / 6 * (l1 + 2 * l2 + 2 * l3 + l4)

    nt = len(t_grid)
    out_pos = np.empty((nt, n_particles, dim))
    out_vel = np.empty_like(out_pos)
    out_S = np.empty((nt, n_particles))
    out_J = np.empty((nt, n_particles))
    y = np.stack([pos, vel])

    def record(i):
        out_pos[i] = y[0][:, 0]
        out_vel[i] = y[1][:, 0]
        out_S[i] = S
        jac = (y[0][:, 1:, :] - y[0][:, :1, :]) / delta
        out_J[i] = np.linalg.det(jac)

    record(0)
    for i in range(1, nt):
        span = t_grid[i] - t_grid[i - 1]
        n_sub = max(1, int(math.ceil(span / max_dt - 1e-9)))
        h = span / n_sub
        for k in range(n_sub):
            y, dS = step(t_grid[i - 1] + k * h, (y, S), h)
            S = S + dS
        if not np.all(np.isfinite(y)):
            raise NumericalError("characteristics became non-finite")
        record(i)

    bad = np.nonzero(out_J.min(axis=1) <= 0)[0]
    caustic = float(t_grid[bad[0]]) if len(bad) else None
    return CharacteristicField(t_grid, out_pos, out_vel, out_S, out_J, caustic, seed)
