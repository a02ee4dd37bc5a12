"""Physical and numerical value types shared by every solver.

Positions are numpy arrays whose last axis has length ``dim``; scalar fields
on a :class:`Grid` are arrays of shape ``grid.shape``. All containers are
frozen and their arrays are flagged read-only once constructed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import GridError, ValidationError

#: Upper bound on the number of grid nodes accepted by :func:`make_grid`.
MAX_GRID_NODES = 2**24

#: Default tolerance on the discrete norm of freshly prepared states.
NORM_TOL = 1e-9

#: Geometric grid adequacy rule: nodes per width and widths of margin.
MIN_POINTS_PER_SIGMA = 4.0
SIGMA_MARGIN = 8.0


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


def _vec(v, dim, name):
    a = np.atleast_1d(np.asarray(v, dtype=float))
    if a.shape == (1,) and dim > 1:
        raise ValidationError(f"{name}: expected {dim} components, got 1")
    if a.shape != (dim,):
        raise ValidationError(f"{name}: expected {dim} components, got {a.size}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name}: components must be finite")
    return _frozen(a)


# --------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class Grid:
    """Uniform periodic rectangular grid.

    Node ``j`` on axis ``a`` sits at ``lower[a] + j * spacing[a]`` with
    ``spacing = (upper - lower) / points``; the node at ``upper`` is the
    periodic image of the first one and is not stored.
    """

    lower: tuple
    upper: tuple
    points: tuple

    @property
    def dim(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple:
        return tuple(self.points)

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def spacing(self) -> np.ndarray:
        return np.array([(u - l) / n for l, u, n in zip(self.lower, self.upper, self.points)])

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def axes(self) -> list:
        return [l + h * np.arange(n) for l, h, n in zip(self.lower, self.spacing, self.points)]

    def mesh(self) -> list:
        return np.meshgrid(*self.axes, indexing="ij")

    def nodes(self) -> np.ndarray:
        """All node coordinates, shape ``shape + (dim,)``."""
        return np.stack(self.mesh(), axis=-1)

    def wavenumbers(self) -> list:
        return [2 * np.pi * np.fft.fftfreq(n, d=h) for n, h in zip(self.points, self.spacing)]

    def contains(self, x, margin=0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo = np.asarray(self.lower) + margin
        hi = np.asarray(self.upper) - margin
        return np.all((x >= lo) & (x <= hi), axis=-1)


def make_grid(dim: int, bounds, points, max_nodes: int = MAX_GRID_NODES) -> Grid:
    """Build a :class:`Grid`.

    ``bounds`` is a sequence of ``(lower, upper)`` pairs (a single pair is
    accepted in 1D) and ``points`` one node count per axis, each a power of two.
    """
    if dim not in (1, 2, 3):
        raise ValidationError(f"dim: must be 1, 2 or 3 (got {dim})")
    bounds = np.asarray(bounds, dtype=float)
    if bounds.shape == (2,):
        bounds = bounds[None, :]
    points = [int(p) for p in np.atleast_1d(points)]
    if bounds.shape != (dim, 2) or len(points) != dim:
        raise ValidationError(f"bounds/points: need one entry per axis for dim={dim}")
    for a, ((lo, hi), n) in enumerate(zip(bounds, points)):
        if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
            raise ValidationError(f"bounds[{a}]: upper must exceed lower (got {lo}, {hi})")
        if n < 8 or n & (n - 1):
            raise ValidationError(f"points[{a}]: must be a power of two >= 8 (got {n})")
    total = math.prod(points)
    if total > max_nodes:
        raise GridError(f"grid has {total} nodes, above the cap of {max_nodes}")
    return Grid(
        lower=tuple(float(b[0]) for b in bounds),
        upper=tuple(float(b[1]) for b in bounds),
        points=tuple(points),
    )


def next_pow2(n) -> int:
    return 1 << max(3, int(math.ceil(math.log2(max(n, 1)))))


# --------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class Free:
    def value(self, x, mass):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1])

    def gradient(self, x, mass):
        return np.zeros_like(np.asarray(x, dtype=float))

    def on_grid(self, grid, mass):
        return np.zeros(grid.shape)


@dataclass(frozen=True)
class Linear:
    """``V(x) = -K . x``; the force on the particle is ``+K``."""

    K: np.ndarray

    def __post_init__(self):
        K = np.atleast_1d(np.asarray(self.K, dtype=float))
        if not np.all(np.isfinite(K)):
            raise ValidationError("K: force vector must be finite")
        object.__setattr__(self, "K", _frozen(K))

    def value(self, x, mass):
        return -np.asarray(x, dtype=float) @ self.K

    def gradient(self, x, mass):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(-self.K, x.shape).copy()

    def on_grid(self, grid, mass):
        return self.value(grid.nodes(), mass)


@dataclass(frozen=True)
class Harmonic:
    """Isotropic oscillator ``V(x) = m omega^2 |x|^2 / 2``."""

    omega: float

    def __post_init__(self):
        if not (np.isfinite(self.omega) and self.omega > 0):
            raise ValidationError(f"omega: must be > 0 (got {self.omega})")

    def value(self, x, mass):
        x = np.asarray(x, dtype=float)
        return 0.5 * mass * self.omega**2 * np.sum(x * x, axis=-1)

    def gradient(self, x, mass):
        return mass * self.omega**2 * np.asarray(x, dtype=float)

    def on_grid(self, grid, mass):
        return self.value(grid.nodes(), mass)


@dataclass(frozen=True)
class Sampled:
    """Potential tabulated on a grid, evaluated off-grid by cubic interpolation."""

    grid: Grid
    values: np.ndarray
    _interp: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValidationError(f"values: shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("values: sampled potential must be finite at every node")
        object.__setattr__(self, "values", _frozen(v))
        method = "cubic" if min(self.grid.points) >= 4 else "linear"
        grads = np.gradient(v, *self.grid.spacing) if self.grid.dim > 1 else [np.gradient(v, self.grid.spacing[0])]
        interp = [RegularGridInterpolator(self.grid.axes, f, method=method, bounds_error=False, fill_value=None)
                  for f in [v, *grads]]
        object.__setattr__(self, "_interp", interp)

    def value(self, x, mass):
        x = np.asarray(x, dtype=float)
        return self._interp[0](x.reshape(-1, self.grid.dim)).reshape(x.shape[:-1])

    def gradient(self, x, mass):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, self.grid.dim)
        g = np.stack([f(flat) for f in self._interp[1:]], axis=-1)
        return g.reshape(x.shape)

    def on_grid(self, grid, mass):
        if grid == self.grid:
            return np.array(self.values)
        return self.value(grid.nodes(), mass)


PotentialSpec = Union[Free, Linear, Harmonic, Sampled]


@dataclass(frozen=True)
class SystemParams:
    mass: float
    hbar: float
    potential: PotentialSpec = field(default_factory=Free)
    dim: int = 1

    def __post_init__(self):
        problems = []
        if not (np.isfinite(self.mass) and self.mass > 0):
            problems.append(f"mass: must be > 0 (got {self.mass})")
        if not (np.isfinite(self.hbar) and self.hbar >= 0):
            problems.append(f"hbar: must be >= 0 (got {self.hbar})")
        if self.dim not in (1, 2, 3):
            problems.append(f"dim: must be 1, 2 or 3 (got {self.dim})")
        if isinstance(self.potential, Linear) and self.potential.K.size != self.dim:
            problems.append(f"potential.K: expected {self.dim} components, got {self.potential.K.size}")
        if isinstance(self.potential, Sampled) and self.potential.grid.dim != self.dim:
            problems.append("potential: sampled grid dimension differs from dim")
        if problems:
            raise ValidationError("; ".join(problems))

    def with_hbar(self, hbar) -> "SystemParams":
        return SystemParams(self.mass, float(hbar), self.potential, self.dim)

    def V(self, x):
        return self.potential.value(x, self.mass)

    def grad_V(self, x):
        return self.potential.gradient(x, self.mass)


# --------------------------------------------------------------------------
# preparations


@dataclass(frozen=True)
class GaussianPrep:
    """Classical-style preparation: width and velocity independent of hbar."""

    zeta0: np.ndarray
    sigma0: float
    v0: np.ndarray

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.zeta0, dtype=float))
        v = np.atleast_1d(np.asarray(self.v0, dtype=float))
        if z.shape != v.shape:
            raise ValidationError("zeta0/v0: dimension mismatch")
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(v))):
            raise ValidationError("zeta0/v0: components must be finite")
        if not (np.isfinite(self.sigma0) and self.sigma0 > 0):
            raise ValidationError(f"sigma0: must be > 0 (got {self.sigma0})")
        object.__setattr__(self, "zeta0", _frozen(z))
        object.__setattr__(self, "v0", _frozen(v))

    @property
    def dim(self):
        return self.zeta0.size

    @property
    def center(self):
        return self.zeta0

    def width(self, params: SystemParams) -> float:
        return float(self.sigma0)


@dataclass(frozen=True)
class CoherentPrep:
    """Oscillator coherent state; its width ``sqrt(hbar / 2 m omega)`` shrinks with hbar."""

    x0: np.ndarray
    v0: np.ndarray
    omega: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x0, dtype=float))
        v = np.atleast_1d(np.asarray(self.v0, dtype=float))
        if x.shape != v.shape:
            raise ValidationError("x0/v0: dimension mismatch")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise ValidationError("x0/v0: components must be finite")
        if not (np.isfinite(self.omega) and self.omega > 0):
            raise ValidationError(f"omega: must be > 0 (got {self.omega})")
        object.__setattr__(self, "x0", _frozen(x))
        object.__setattr__(self, "v0", _frozen(v))

    @property
    def dim(self):
        return self.x0.size

    @property
    def center(self):
        return self.x0

    def sigma_hbar(self, hbar, mass) -> float:
        return math.sqrt(hbar / (2.0 * mass * self.omega))

    def width(self, params: SystemParams) -> float:
        return self.sigma_hbar(params.hbar, params.mass)


Preparation = Union[GaussianPrep, CoherentPrep]


# --------------------------------------------------------------------------
# fields and trajectories


@dataclass(frozen=True)
class WaveField:
    grid: Grid
    time: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise ValidationError(f"values: shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("values: wave function must be finite")
        object.__setattr__(self, "values", _frozen(v, complex))

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2


@dataclass(frozen=True)
class MadelungFields:
    """Density and action on a grid.

    ``support`` marks nodes where the action is meaningful (density above
    ``threshold`` and no unwrapping defect); ``action`` is NaN elsewhere.
    """

    grid: Grid
    time: float
    rho: np.ndarray
    action: np.ndarray
    support: np.ndarray = None
    threshold: float = 0.0
    gauge: tuple = ()
    defects: int = 0
    components: int = 1

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        S = np.asarray(self.action, dtype=float)
        if rho.shape != self.grid.shape or S.shape != self.grid.shape:
            raise ValidationError("rho/action: shape does not match grid")
        if np.any(rho < 0):
            raise ValidationError("rho: density must be non-negative")
        support = rho > self.threshold if self.support is None else np.asarray(self.support, dtype=bool)
        if not np.all(np.isfinite(S[support])):
            raise ValidationError("action: must be finite on the support")
        object.__setattr__(self, "rho", _frozen(rho))
        object.__setattr__(self, "action", _frozen(S))
        object.__setattr__(self, "support", _frozen(support, bool))

    @property
    def mass_total(self) -> float:
        return float(self.rho.sum() * self.grid.cell_volume)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.positions, dtype=float)
        v = np.asarray(self.velocities, dtype=float)
        if x.ndim == 1:
            x, v = x[:, None], v[:, None]
        if t.ndim != 1 or len(t) != len(x) or x.shape != v.shape:
            raise ValidationError("trajectory arrays have inconsistent shapes")
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise ValidationError("times: must be strictly increasing")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise ValidationError("positions/velocities: must be finite")
        for name, a in (("times", t), ("positions", x), ("velocities", v)):
            object.__setattr__(self, name, _frozen(a))

    def index(self, t, atol=1e-9) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > atol * max(1.0, abs(t)):
            raise ValidationError(f"t={t} is not a stored time (range {self.times[0]}..{self.times[-1]})")
        return i


@dataclass(frozen=True)
class LocalAction:
    """A classical path together with the scalar ``g(t)`` of its local action.

    The local action is ``m xi'(t) . x + g(t)``; it solves the Hamilton-Jacobi
    equation only at ``x = xi(t)``.
    """

    trajectory: Trajectory
    g: np.ndarray
    mass: float

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.shape != self.trajectory.times.shape:
            raise ValidationError("g: one value per trajectory time required")
        if not np.all(np.isfinite(g)):
            raise ValidationError("g: must be finite")
        if g[0] != 0.0:
            raise ValidationError("g: gauge requires g(0) = 0")
        object.__setattr__(self, "g", _frozen(g))

    @property
    def times(self):
        return self.trajectory.times

    def action(self, x, i: int):
        """Evaluate the local action at stored time index ``i``."""
        x = np.asarray(x, dtype=float)
        return self.mass * x @ self.trajectory.velocities[i] + self.g[i]

    def gradient(self, x, i: int):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.mass * self.trajectory.velocities[i], x.shape).copy()


@dataclass(frozen=True)
class BohmSample:
    """A batch of initial offsets ``eta0`` (shape ``(n, dim)``) from ``center``."""

    eta0: np.ndarray
    center: np.ndarray
    seed: int = None

    def __post_init__(self):
        eta = np.asarray(self.eta0, dtype=float)
        if eta.ndim == 1:
            eta = eta[None, :]
        object.__setattr__(self, "eta0", _frozen(eta))
        object.__setattr__(self, "center", _frozen(np.atleast_1d(self.center)))

    def __len__(self):
        return len(self.eta0)

    @property
    def x_start(self) -> np.ndarray:
        return self.center + self.eta0


# --------------------------------------------------------------------------
# preparation of wave functions


def check_grid_adequacy(grid: Grid, center, sigma, extent=0.0):
    """Reject grids that under-resolve a Gaussian of width ``sigma`` or clip its tails.

    ``extent`` is an extra per-axis allowance (drift of the packet center,
    spreading) added to the ``SIGMA_MARGIN * sigma`` margin.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    extent = np.broadcast_to(np.asarray(extent, dtype=float), center.shape)
    h = grid.spacing
    if np.any(sigma < MIN_POINTS_PER_SIGMA * h):
        raise GridError(f"grid spacing {h.max():.4g} too coarse for width {sigma:.4g} "
                        f"(need {MIN_POINTS_PER_SIGMA:g} nodes per width)")
    lo = center - SIGMA_MARGIN * sigma - extent
    hi = center + SIGMA_MARGIN * sigma + extent
    if np.any(lo < np.asarray(grid.lower)) or np.any(hi > np.asarray(grid.upper)):
        raise GridError(f"grid too small: packet needs [{lo}, {hi}] but grid is "
                        f"[{grid.lower}, {grid.upper}]")


def gaussian_density(x, center, sigma):
    """Isotropic normalized Gaussian ``(2 pi sigma^2)^(-dim/2) exp(-|x-c|^2 / 2 sigma^2)``."""
    x = np.asarray(x, dtype=float)
    d = x - center
    dim = x.shape[-1]
    return (2 * np.pi * sigma**2) ** (-dim / 2) * np.exp(-np.sum(d * d, axis=-1) / (2 * sigma**2))


def prepare_wavefunction(prep: Preparation, params: SystemParams, grid: Grid, time: float = 0.0) -> WaveField:
    """Sample ``sqrt(rho0) exp(i m v0.x / hbar)`` on the grid.

    The initial action is gauged so that it vanishes at the origin. The
    density is the continuum Gaussian evaluated at the nodes; no discrete
    renormalization is applied, so the extracted ``(rho0, S0)`` are exactly
    hbar-independent for a :class:`GaussianPrep`.
    """
    if params.hbar <= 0:
        raise ValidationError("hbar: wave functions need hbar > 0")
    if prep.dim != grid.dim or params.dim != grid.dim:
        raise ValidationError(f"dimension mismatch: prep {prep.dim}, params {params.dim}, grid {grid.dim}")
    sigma = prep.width(params)
    check_grid_adequacy(grid, prep.center, sigma)
    x = grid.nodes()
    rho = gaussian_density(x, prep.center, sigma)
    S0 = params.mass * x @ prep.v0
    return WaveField(grid, time, np.sqrt(rho) * np.exp(1j * S0 / params.hbar))
