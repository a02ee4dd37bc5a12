"""Closed-form densities, actions and trajectories.

Everything here is a pure function of value inputs and serves as the oracle
for the numerical modules. Positions have shape ``(..., dim)``; scalar
results have the leading shape. Gaussian families are isotropic and built
axis by axis, so the prefactors carry ``dim / 2`` exponents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import CoherentPrep, Free, GaussianPrep, Harmonic, Linear, SystemParams, gaussian_density
from .errors import ValidationError

#: Coefficient ``c`` of the coherent-state phase offset ``-c * dim * hbar * omega * t``.
#: With ``c = 1/2`` the offset is the zero-point energy times t; in two
#: dimensions it is ``hbar * omega * t``.
COHERENT_PHASE_PER_AXIS = 0.5


@dataclass(frozen=True)
class LinearScenario:
    prep: GaussianPrep
    params: SystemParams

    def __post_init__(self):
        if not isinstance(self.params.potential, (Linear, Free)):
            raise ValidationError("potential: linear scenario needs a Linear or Free potential")
        if self.prep.dim != self.params.dim:
            raise ValidationError("prep/params: dimension mismatch")

    @property
    def K(self) -> np.ndarray:
        pot = self.params.potential
        return np.array(pot.K) if isinstance(pot, Linear) else np.zeros(self.params.dim)

    def with_hbar(self, hbar) -> "LinearScenario":
        return LinearScenario(self.prep, self.params.with_hbar(hbar))

    def center(self, t):
        """Classical path of the packet center."""
        p, m = self.prep, self.params.mass
        return p.zeta0 + p.v0 * t + self.K * t * t / (2 * m)


@dataclass(frozen=True)
class CoherentScenario:
    prep: CoherentPrep
    params: SystemParams

    def __post_init__(self):
        pot = self.params.potential
        if not isinstance(pot, Harmonic):
            raise ValidationError("potential: coherent scenario needs a Harmonic potential")
        if not math.isclose(pot.omega, self.prep.omega, rel_tol=1e-12):
            raise ValidationError(f"omega: prep has {self.prep.omega}, potential has {pot.omega}")
        if self.prep.dim != self.params.dim:
            raise ValidationError("prep/params: dimension mismatch")

    @property
    def omega(self) -> float:
        return self.prep.omega

    @property
    def sigma(self) -> float:
        return self.prep.sigma_hbar(self.params.hbar, self.params.mass)

    def with_hbar(self, hbar) -> "CoherentScenario":
        return CoherentScenario(self.prep, self.params.with_hbar(hbar))


def sigma_hbar(t, params: SystemParams, sigma0):
    """Width of a freely spreading Gaussian, ``sigma0 sqrt(1 + (hbar t / 2 m sigma0^2)^2)``."""
    tau = params.hbar * np.asarray(t, dtype=float) / (2 * params.mass * sigma0**2)
    return sigma0 * np.sqrt(1.0 + tau * tau)


def linear_fields(x, t, scen: LinearScenario):
    """Exact density and action of a Gaussian packet in ``V = -K.x``.

    Returns ``(rho, S)``. The action keeps the hbar-dependent Gouy-type term
    ``-(dim/2) hbar arctan(hbar t / 2 m sigma0^2)`` and the curvature term of
    the spreading packet.
    """
    p, prm = scen.prep, scen.params
    if prm.hbar <= 0:
        raise ValidationError("hbar: linear_fields needs hbar > 0; use classical_limit_fields")
    m, hb, s0 = prm.mass, prm.hbar, p.sigma0
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1]
    sh = sigma_hbar(t, prm, s0)
    d = x - scen.center(t)
    rho = gaussian_density(x, scen.center(t), sh)
    S = (-(dim / 2) * hb * math.atan(hb * t / (2 * m * s0**2))
         + _classical_action(x, t, scen)
         + np.sum(d * d, axis=-1) * hb**2 * t / (8 * m * s0**2 * sh**2))
    return rho, S


def _classical_action(x, t, scen: LinearScenario):
    m, K, v0 = scen.params.mass, scen.K, scen.prep.v0
    return (-0.5 * m * (v0 @ v0) * t + m * (x @ v0) + (x @ K) * t
            - 0.5 * (K @ v0) * t * t - (K @ K) * t**3 / (6 * m))


def classical_limit_fields(x, t, scen: LinearScenario):
    """hbar-free limit of :func:`linear_fields`: fixed-width Gaussian and classical action."""
    x = np.asarray(x, dtype=float)
    rho = gaussian_density(x, scen.center(t), scen.prep.sigma0)
    return rho, _classical_action(x, t, scen)


# --------------------------------------------------------------------------
# harmonic oscillator


def harmonic_path(prep: CoherentPrep, t):
    """Classical oscillator path ``(xi(t), xi'(t))`` starting from ``(x0, v0)``."""
    w = prep.omega
    c, s = math.cos(w * t), math.sin(w * t)
    xi = prep.x0 * c + prep.v0 * s / w
    vel = -prep.x0 * w * s + prep.v0 * c
    return xi, vel


def adaptive_simpson(f, a, b, tol=1e-10, max_depth=50):
    """Adaptive Simpson quadrature of a scalar function on ``[a, b]``."""

    def simpson(fa, fm, fb, a, b):
        return (b - a) * (fa + 4 * fm + fb) / 6

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        if depth <= 0 or abs(left + right - whole) <= 15 * tol:
            return left + right + (left + right - whole) / 15
        return (recurse(a, m, fa, flm, fm, left, tol / 2, depth - 1)
                + recurse(m, b, fm, frm, fb, right, tol / 2, depth - 1))

    if b == a:
        return 0.0
    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, max_depth)


def coherent_g(t, scen: CoherentScenario, path=None, tol=1e-10):
    """``g(t) = int_0^t (-m xi'^2 / 2 + m omega^2 xi^2 / 2) ds`` by adaptive Simpson.

    ``path(s) -> (xi, xi')`` defaults to the closed-form oscillator path.
    """
    m, w = scen.params.mass, scen.omega
    path = path or (lambda s: harmonic_path(scen.prep, s))

    def integrand(s):
        xi, vel = path(s)
        return -0.5 * m * float(vel @ vel) + 0.5 * m * w * w * float(xi @ xi)

    return adaptive_simpson(integrand, 0.0, float(t), tol)


def coherent_fields(x, t, scen: CoherentScenario, path=None):
    """Density and action of the oscillator coherent state at time ``t``.

    ``S = m xi'(t).x + g(t) - (dim/2) hbar omega t``.
    """
    prm = scen.params
    if prm.hbar <= 0:
        raise ValidationError("hbar: coherent_fields needs hbar > 0")
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1]
    xi, vel = (path or (lambda s: harmonic_path(scen.prep, s)))(t)
    rho = gaussian_density(x, xi, scen.sigma)
    S = (prm.mass * (x @ vel) + coherent_g(t, scen, path)
         - COHERENT_PHASE_PER_AXIS * dim * prm.hbar * scen.omega * t)
    return rho, S


def coherent_quantum_potential(x, t, scen: CoherentScenario):
    """``Q = (dim/2) hbar omega - m omega^2 |x - xi(t)|^2 / 2`` for the coherent state."""
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1]
    xi, _ = harmonic_path(scen.prep, t)
    d = x - xi
    m, w = scen.params.mass, scen.omega
    return COHERENT_PHASE_PER_AXIS * dim * scen.params.hbar * w - 0.5 * m * w * w * np.sum(d * d, axis=-1)


def gaussian_quantum_potential(x, center, sigma, params: SystemParams):
    """``Q`` of an isotropic Gaussian density of width ``sigma``.

    ``sqrt(rho) ~ exp(-r^2 / 4 sigma^2)`` gives
    ``Q = (hbar^2 / 2m) (dim / 2 sigma^2 - r^2 / 4 sigma^4)``.
    """
    x = np.asarray(x, dtype=float)
    d = x - np.asarray(center, dtype=float)
    dim = x.shape[-1]
    r2 = np.sum(d * d, axis=-1)
    return params.hbar**2 / (2 * params.mass) * (dim / (2 * sigma**2) - r2 / (4 * sigma**4))


# --------------------------------------------------------------------------
# Bohm trajectories


def bohm_trajectory_1d(eta0, t, scen: LinearScenario):
    """Standard-velocity Bohm trajectory started at ``zeta0 + eta0``.

    ``zeta0 + v0 t + K t^2 / 2m + eta0 sigma_hbar(t) / sigma0``, applied
    axis by axis. The drift sign follows the density center (force ``+K``).
    """
    t = np.asarray(t, dtype=float)
    eta0 = np.asarray(eta0, dtype=float)
    p = scen.prep
    scale = sigma_hbar(t, scen.params, p.sigma0) / p.sigma0
    if p.dim == 1:
        # 1D offsets are plain scalars of any shape
        m, K = scen.params.mass, scen.K[0]
        return p.zeta0[0] + p.v0[0] * t + K * t * t / (2 * m) + eta0 * scale
    return scen.center(t[..., None]) + eta0 * scale[..., None]


def bohm_trajectory_3d_spin(eta0, t, scen: LinearScenario):
    """Spin-current Bohm trajectory in 3D with spin axis and force along axis 3.

    The transverse offset keeps its radius scaled by ``sigma_hbar / sigma0``
    and turns by ``arctan(hbar t / 2 m sigma0^2)`` about the spin axis,
    counter-clockwise from the initial angle ``atan2(eta_2, eta_1)``.
    """
    if scen.params.dim != 3:
        raise ValidationError("bohm_trajectory_3d_spin: scenario must be three-dimensional")
    K = scen.K
    if K[0] != 0 or K[1] != 0:
        raise ValidationError("K: force must point along axis 3")
    eta0 = np.asarray(eta0, dtype=float)
    t = np.asarray(t, dtype=float)
    p, prm = scen.prep, scen.params
    scale = sigma_hbar(t, prm, p.sigma0) / p.sigma0
    turn = np.arctan(prm.hbar * t / (2 * prm.mass * p.sigma0**2))
    radius = np.hypot(eta0[..., 0], eta0[..., 1]) * scale
    phi = np.arctan2(eta0[..., 1], eta0[..., 0]) + turn
    c = scen.center(t[..., None]) if t.ndim else scen.center(t)
    out = np.empty(np.broadcast(eta0, c).shape)
    out[..., 0] = c[..., 0] + radius * np.cos(phi)
    out[..., 1] = c[..., 1] + radius * np.sin(phi)
    out[..., 2] = c[..., 2] + eta0[..., 2] * scale
    return out
