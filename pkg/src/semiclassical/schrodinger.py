"""Split-step spectral propagation of the Schrodinger equation on a periodic grid."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import fft

from .domain import Grid, SystemParams, WaveField
from .errors import GridError, NumericalError, ValidationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PropagatorConfig:
    """Time stepping controls.

    ``stride`` is the number of steps between emitted snapshots. The outer
    ``boundary_band`` fraction of every axis is watched for probability
    leaking towards the periodic seam; more than ``tail_tol`` there is an
    error unless an absorbing mask of width ``absorbing_margin`` (fraction of
    the axis length) is active.
    """

    dt: float
    n_steps: int
    stride: int = 1
    absorbing_margin: float = 0.0
    tail_tol: float = 1e-8
    boundary_band: float = 0.05
    splitting: str = "strang"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError(f"dt: must be > 0 (got {self.dt})")
        if self.n_steps < 0 or self.stride < 1:
            raise ValidationError("n_steps must be >= 0 and stride >= 1")
        if not 0 <= self.absorbing_margin <= 0.25:
            raise ValidationError(f"absorbing_margin: must lie in [0, 0.25] (got {self.absorbing_margin})")
        if self.splitting != "strang":
            raise ValidationError(f"splitting: only 'strang' is supported (got {self.splitting!r})")


def norm(psi: WaveField) -> float:
    """Discrete ``int |psi|^2 dx`` (plain sum times cell volume)."""
    return float(np.sum(np.abs(psi.values) ** 2) * psi.grid.cell_volume)


def kinetic_phase(grid: Grid, params: SystemParams, dt: float) -> np.ndarray:
    k2 = sum(k * k for k in np.meshgrid(*grid.wavenumbers(), indexing="ij"))
    return np.exp(-0.5j * params.hbar * k2 * dt / params.mass)


def absorbing_mask(grid: Grid, margin: float) -> np.ndarray:
    """Cosine-ramp mask, 1 in the interior and falling to 0 at the grid edges."""
    mask = np.ones(grid.shape)
    if margin <= 0:
        return mask
    for a, x in enumerate(grid.axes):
        length = grid.upper[a] - grid.lower[a]
        width = margin * length
        d = np.minimum(x - grid.lower[a], grid.upper[a] - x)
        prof = np.where(d < width, np.abs(np.cos(0.5 * np.pi * (width - d) / width)) ** 0.125, 1.0)
        shape = [1] * grid.dim
        shape[a] = -1
        mask = mask * prof.reshape(shape)
    return mask


def boundary_mass(psi: np.ndarray, grid: Grid, band: float) -> float:
    """Probability in the outer ``band`` fraction of any axis."""
    inside = np.ones(grid.shape, dtype=bool)
    for a, n in enumerate(grid.points):
        w = max(1, int(round(band * n)))
        idx = np.arange(n)
        keep = (idx >= w) & (idx < n - w)
        shape = [1] * grid.dim
        shape[a] = -1
        inside &= keep.reshape(shape)
    return float(np.sum(np.abs(psi[~inside]) ** 2) * grid.cell_volume)


def evolve(psi0: WaveField, params: SystemParams, cfg: PropagatorConfig) -> list:
    """Strang-split propagation; returns snapshots every ``cfg.stride`` steps.

    Each step applies half the potential phase, the exact free propagator in
    Fourier space, then the other half of the potential phase. The first
    snapshot is ``psi0`` itself; the last is always at ``n_steps``.
    """
    if params.hbar <= 0:
        raise ValidationError("hbar: propagation needs hbar > 0")
    grid = psi0.grid
    if params.dim != grid.dim:
        raise ValidationError("params/grid: dimension mismatch")
    V = params.potential.on_grid(grid, params.mass)
    if not np.all(np.isfinite(V)):
        raise ValidationError("potential: not finite at every node")
    half_v = np.exp(-0.5j * V * cfg.dt / params.hbar)
    kin = kinetic_phase(grid, params, cfg.dt)
    mask = absorbing_mask(grid, cfg.absorbing_margin) if cfg.absorbing_margin > 0 else None
    axes = tuple(range(grid.dim))

    def check(psi, t):
        if not np.all(np.isfinite(psi)):
            raise NumericalError(f"non-finite wave function at t={t:.6g}")
        if mask is None:
            tail = boundary_mass(psi, grid, cfg.boundary_band)
            if tail > cfg.tail_tol:
                raise GridError(f"probability {tail:.3g} reached the boundary band at t={t:.6g} "
                                f"(limit {cfg.tail_tol:g}); enlarge the grid")

    psi = np.array(psi0.values)
    check(psi, psi0.time)
    out = [psi0]
    for n in range(1, cfg.n_steps + 1):
        psi *= half_v
        psi = fft.ifftn(kin * fft.fftn(psi, axes=axes), axes=axes)
        psi *= half_v
        if mask is not None:
            psi *= mask
        if n % cfg.stride == 0 or n == cfg.n_steps:
            t = psi0.time + n * cfg.dt
            check(psi, t)
            out.append(WaveField(grid, t, psi.copy()))
    return out


# --------------------------------------------------------------------------
# helpers shared by the analysis modules


def spectral_derivative(values: np.ndarray, grid: Grid, axis: int, order: int = 1) -> np.ndarray:
    k = grid.wavenumbers()[axis]
    shape = [1] * grid.dim
    shape[axis] = -1
    k = k.reshape(shape)
    if order == 1 and grid.points[axis] % 2 == 0:
        # Nyquist mode has no well-defined first derivative
        k = k.copy()
        k.reshape(-1)[grid.points[axis] // 2] = 0.0
    f = fft.fft(values, axis=axis)
    d = fft.ifft((1j * k) ** order * f, axis=axis)
    return d.real if np.isrealobj(values) else d


def spectral_laplacian(values: np.ndarray, grid: Grid) -> np.ndarray:
    return sum(spectral_derivative(values, grid, a, order=2) for a in range(grid.dim))


def spectral_interpolate(psi: WaveField, points) -> np.ndarray:
    """Trigonometric interpolation of the wave function at off-grid points."""
    grid = psi.grid
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    coef = fft.fftn(psi.values) / grid.size
    out = coef
    # contract one axis at a time, keeping the point index in front
    for a, (k, lo) in enumerate(zip(grid.wavenumbers(), grid.lower)):
        e = np.exp(1j * np.outer(pts[:, a] - lo, k))  # (npts, n_a)
        if a == 0:
            out = np.tensordot(e, out, axes=([1], [0]))
        else:
            out = np.einsum("pk,pk...->p...", e, out)
    return out.reshape(pts.shape[0])


def moments(psi: WaveField):
    """Mean position and per-axis variance of ``|psi|^2``."""
    rho = psi.density
    mass = rho.sum()
    x = psi.grid.mesh()
    mean = np.array([np.sum(rho * xa) / mass for xa in x])
    var = np.array([np.sum(rho * (xa - mu) ** 2) / mass for xa, mu in zip(x, mean)])
    return mean, var
