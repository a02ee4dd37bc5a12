"""de Broglie-Bohm trajectories: velocity laws, ensembles and equivariance."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import kstest

from .domain import BohmSample, CoherentPrep, Grid, MadelungFields, Preparation, SystemParams, Trajectory
from .errors import ValidationError
from .madelung import action_gradient, log_density_gradient

#: Frozen/flagged samples must stay this many nodes away from the grid edge.
INTERIOR_NODES = 2


@dataclass(frozen=True)
class Standard:
    """``v = grad S / m``."""

    name = "standard"


@dataclass(frozen=True)
class SpinCurrent:
    """``v = grad S / m + (hbar / 2m) grad ln rho x k`` with unit spin axis ``k``."""

    spin_axis: tuple = (0.0, 0.0, 1.0)
    name = "spin-current"

    def __post_init__(self):
        k = np.asarray(self.spin_axis, dtype=float)
        if k.shape != (3,) or not math.isclose(float(np.linalg.norm(k)), 1.0, rel_tol=1e-12):
            raise ValidationError(f"spin_axis: must be a 3-component unit vector (got {self.spin_axis})")
        object.__setattr__(self, "spin_axis", tuple(float(c) for c in k))


VelocityMode = Standard | SpinCurrent


def spin_term(grad_ln_rho, mode: SpinCurrent, params: SystemParams):
    """``(hbar / 2m) grad ln rho x k``; arrays have the spatial axis last."""
    g = np.asarray(grad_ln_rho, dtype=float)
    dim = g.shape[-1]
    k = np.asarray(mode.spin_axis)
    if dim == 2 and (k[0] != 0 or k[1] != 0):
        raise ValidationError("spin_axis: in two dimensions the spin axis must be normal to the plane")
    g3 = np.zeros(g.shape[:-1] + (3,))
    g3[..., :dim] = g
    return params.hbar / (2 * params.mass) * np.cross(g3, k)[..., :dim]


def velocity_field(fields: MadelungFields, params: SystemParams, mode: VelocityMode = Standard()) -> np.ndarray:
    """Velocity on the grid, shape ``grid.shape + (dim,)``; NaN where undefined.

    Gradients are fourth-order differences restricted to the support, the
    same scheme as the Madelung residuals.
    """
    v = np.stack(action_gradient(fields), axis=-1) / params.mass
    if isinstance(mode, SpinCurrent):
        v = v + spin_term(np.stack(log_density_gradient(fields), axis=-1), mode, params)
    return v


# --------------------------------------------------------------------------
# sampling


def sample_initial(prep: Preparation, n: int, seed: int, params: SystemParams | None = None) -> BohmSample:
    """Draw ``n`` offsets from the centered initial Gaussian.

    For a :class:`CoherentPrep` the width is ``sigma_hbar`` and ``params`` is
    required.
    """
    if n < 1:
        raise ValidationError(f"n: need at least one sample (got {n})")
    if isinstance(prep, CoherentPrep):
        if params is None:
            raise ValidationError("params: needed to size a coherent-state sample")
        sigma = prep.sigma_hbar(params.hbar, params.mass)
    else:
        sigma = prep.sigma0
    rng = np.random.default_rng(seed)
    return BohmSample(sigma * rng.standard_normal((n, prep.dim)), prep.center, seed)


# --------------------------------------------------------------------------
# interpolation


def _lagrange4(f):
    """Cubic Lagrange weights for nodes at offsets -1, 0, 1, 2."""
    return np.stack([
        -f * (f - 1) * (f - 2) / 6,
        (f + 1) * (f - 1) * (f - 2) / 2,
        -(f + 1) * f * (f - 2) / 2,
        (f + 1) * f * (f - 1) / 6,
    ], axis=-1)


class GridInterpolator:
    """Per-axis cubic interpolation of vector fields on a grid.

    Points whose four-node stencil leaves the grid, or touches a NaN node,
    evaluate to NaN.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        self.lower = np.asarray(grid.lower)
        self.h = grid.spacing
        self.n = np.asarray(grid.points)

    def stencil(self, x):
        s = (x - self.lower) / self.h
        finite = np.all(np.isfinite(s), axis=-1)
        s = np.where(finite[:, None], s, 0.0)
        base = np.floor(s)
        frac = s - base
        i0 = base.astype(int) - 1
        inside = finite & np.all((i0 >= 0) & (i0 + 3 <= self.n - 1), axis=-1)
        i0 = np.where(inside[:, None], i0, 0)
        return i0, _lagrange4(frac), inside

    def __call__(self, field, x, stencil=None):
        """Interpolate ``field`` (shape ``grid.shape + (c,)``) at points ``x`` (``(n, dim)``)."""
        i0, w, inside = stencil if stencil is not None else self.stencil(x)
        dim = self.grid.dim
        out = np.zeros((len(x), field.shape[-1]))
        for offs in itertools.product(range(4), repeat=dim):
            idx = tuple(i0[:, a] + offs[a] for a in range(dim))
            weight = np.prod([w[:, a, offs[a]] for a in range(dim)], axis=0)
            out += weight[:, None] * field[idx]
        out[~inside] = np.nan
        return out


# --------------------------------------------------------------------------
# ensembles


@dataclass(frozen=True)
class EnsembleRun:
    """Positions of all samples at the snapshot times.

    ``positions`` has shape ``(n_times, n_samples, dim)``. Flagged samples
    left the grid interior or entered a region without a velocity; they are
    frozen from that point on and excluded from statistics.
    """

    samples: BohmSample
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    flagged: np.ndarray
    mode: VelocityMode
    seed: int | None
    dt: float

    @property
    def n_flagged(self) -> int:
        return int(self.flagged.sum())

    def index(self, t) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValidationError(f"t={t} is not a snapshot time")
        return i

    def good_positions(self, t) -> np.ndarray:
        return self.positions[self.index(t)][~self.flagged]

    @property
    def trajectories(self) -> list:
        return [Trajectory(self.times, self.positions[:, j], np.nan_to_num(self.velocities[:, j]))
                for j in range(self.positions.shape[1])]


def _rk4_ensemble(velocity, x, t, dt):
    k1 = velocity(x, t)
    k2 = velocity(x + dt / 2 * k1, t + dt / 2)
    k3 = velocity(x + dt / 2 * k2, t + dt / 2)
    k4 = velocity(x + dt * k3, t + dt)
    return x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_velocity(velocity, x_start, times, dt):
    """RK4 transport of points through a velocity callable ``velocity(x, t)``.

    Returns positions at ``times`` (shape ``(len(times), n, dim)``) and a flag
    per point that became non-finite (such points are frozen).
    """
    times = np.asarray(times, dtype=float)
    x = np.array(x_start, dtype=float)
    frozen = np.zeros(len(x), dtype=bool)
    out = np.empty((len(times),) + x.shape)
    out[0] = x
    for i in range(1, len(times)):
        span = times[i] - times[i - 1]
        n_sub = max(1, int(math.ceil(span / dt - 1e-9)))
        h = span / n_sub
        for k in range(n_sub):
            t = times[i - 1] + k * h
            with np.errstate(invalid="ignore"):
                new = _rk4_ensemble(velocity, x, t, h)
            bad = ~np.all(np.isfinite(new), axis=-1)
            frozen |= bad
            x = np.where(frozen[:, None], x, new)
        out[i] = x
    return out, frozen


def closed_form_velocity(fields_fn, params: SystemParams, mode: VelocityMode = Standard(), h: float = 1e-4):
    """Velocity callable built by central differences of ``fields_fn(x, t) -> (rho, S)``.

    Intended for closed-form fields, whose actions are low-order polynomials
    in ``x``; the differences are then exact up to rounding.
    """

    def velocity(x, t):
        x = np.asarray(x, dtype=float)
        dim = x.shape[-1]
        gS = np.empty_like(x)
        gL = np.empty_like(x)
        for a in range(dim):
            e = np.zeros(dim)
            e[a] = h
            rp, sp = fields_fn(x + e, t)
            rm, sm = fields_fn(x - e, t)
            gS[..., a] = (sp - sm) / (2 * h)
            gL[..., a] = (np.log(rp) - np.log(rm)) / (2 * h)
        v = gS / params.mass
        if isinstance(mode, SpinCurrent):
            v = v + spin_term(gL, mode, params)
        return v

    return velocity


def integrate_ensemble(snapshots, samples: BohmSample, params: SystemParams,
                       mode: VelocityMode = Standard(), dt: float | None = None) -> EnsembleRun:
    """Transport samples through velocity fields interpolated from snapshots.

    Space: cubic per axis. Time: linear between consecutive snapshots. One
    global RK4 step is used, the snapshot spacing shrunk until
    ``max|v| dt <= min spacing``.
    """
    if len(snapshots) < 2:
        raise ValidationError("snapshots: need at least two")
    grid = snapshots[0].grid
    times = np.array([s.time for s in snapshots])
    if np.any(np.diff(times) <= 0):
        raise ValidationError("snapshots: times must increase")
    if samples.eta0.shape[1] != grid.dim:
        raise ValidationError("samples: dimension differs from grid")
    fields = [velocity_field(s, params, mode) for s in snapshots]
    vmax = max(float(np.nanmax(np.abs(f))) if np.isfinite(f).any() else 0.0 for f in fields)
    spacing = float(np.diff(times).min())
    cfl = float(grid.spacing.min()) / vmax if vmax > 0 else spacing
    step = min(spacing, cfl) if dt is None else float(dt)
    if vmax * step > grid.spacing.min() * (1 + 1e-12):
        raise ValidationError(f"dt={step:g} violates max|v| dt <= spacing (max|v|={vmax:.4g})")

    interp = GridInterpolator(grid)
    lo = np.asarray(grid.lower) + INTERIOR_NODES * grid.spacing
    hi = np.asarray(grid.upper) - (INTERIOR_NODES + 1) * grid.spacing

    def velocity(x, t):
        k = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
        lam = (t - times[k]) / (times[k + 1] - times[k])
        st = interp.stencil(x)
        v = (1 - lam) * interp(fields[k], x, st) + lam * interp(fields[k + 1], x, st)
        outside = ~np.all((x >= lo) & (x <= hi), axis=-1)
        v[outside] = np.nan
        return v

    positions, flagged = integrate_velocity(velocity, samples.x_start, times, step)
    vel = np.empty_like(positions)
    for i, f in enumerate(fields):
        vel[i] = interp(f, positions[i])
    return EnsembleRun(samples, times, positions, vel, flagged, mode, samples.seed, step)


# --------------------------------------------------------------------------
# equivariance


def marginal_cdf(fields: MadelungFields, axis: int):
    """CDF of the ``axis`` marginal of ``rho``, piecewise linear between cell edges."""
    grid = fields.grid
    other = tuple(a for a in range(grid.dim) if a != axis)
    marg = fields.rho.sum(axis=other) if other else np.array(fields.rho)
    h = grid.spacing[axis]
    edges = grid.axes[axis] - h / 2
    edges = np.append(edges, edges[-1] + h)
    cum = np.concatenate([[0.0], np.cumsum(marg)])
    cum /= cum[-1]
    return lambda x: np.interp(x, edges, cum)


def ks_distance(points, fields: MadelungFields) -> float:
    """Largest per-axis Kolmogorov-Smirnov statistic against the marginals of ``rho``."""
    points = np.atleast_2d(points)
    return max(float(kstest(points[:, a], marginal_cdf(fields, a)).statistic)
               for a in range(points.shape[1]))


def equivariance_distance(run: EnsembleRun, fields: MadelungFields, t: float, min_samples: int = 1000) -> float:
    """KS distance between unflagged trajectory positions at ``t`` and ``rho(., t)``."""
    pts = run.good_positions(t)
    if len(pts) < min_samples:
        raise ValidationError(f"equivariance: only {len(pts)} unflagged trajectories (need {min_samples})")
    return ks_distance(pts, fields)
