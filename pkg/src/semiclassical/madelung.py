"""The change of variables psi <-> (rho, S) and the Madelung residuals.

Phase unwrapping is a breadth-first flood fill over the nodes whose density
exceeds ``threshold_rel * max(rho)``, seeded at the density maximum of every
connected component. Edges whose unwrapped jump disagrees with the wrapped
phase difference (loops around a phase singularity) are counted as defects
and their nodes removed from the support.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .domain import MadelungFields, SystemParams, WaveField
from .errors import ValidationError
from .schrodinger import spectral_derivative, spectral_laplacian

log = logging.getLogger(__name__)

#: Default support cutoff relative to the density maximum.
MASS_THRESHOLD = 1e-10
_DEFECT_TOL = 1e-6


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def _support_edges(support):
    """Pairs of flat indices of face-adjacent supported nodes (no periodic wrap)."""
    idx = np.arange(support.size).reshape(support.shape)
    a_list, b_list = [], []
    for ax in range(support.ndim):
        lo = [slice(None)] * support.ndim
        hi = [slice(None)] * support.ndim
        lo[ax], hi[ax] = slice(0, -1), slice(1, None)
        both = support[tuple(lo)] & support[tuple(hi)]
        a_list.append(idx[tuple(lo)][both])
        b_list.append(idx[tuple(hi)][both])
    return np.concatenate(a_list), np.concatenate(b_list)


def _unwrap(phase, rho, support):
    """Flood-fill unwrapping; returns (unwrapped, support, seeds, defects, n_components)."""
    flat_phase = phase.ravel()
    flat_rho = rho.ravel()
    nodes = np.flatnonzero(support)
    compact = np.full(support.size, -1)
    compact[nodes] = np.arange(len(nodes))
    a, b = _support_edges(support)
    n = len(nodes)
    graph = coo_matrix((np.ones(len(a)), (compact[a], compact[b])), shape=(n, n)).tocsr()
    n_comp, labels = connected_components(graph, directed=False)

    unwrapped = np.full(support.size, np.nan)
    seeds = []
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        seed = members[np.argmax(flat_rho[nodes[members]])]
        order, pred = breadth_first_order(graph, seed, directed=False, return_predecessors=True)
        g_order = nodes[order]
        inc = _wrap(flat_phase[g_order[1:]] - flat_phase[nodes[pred[order[1:]]]])
        u = {int(order[0]): float(flat_phase[g_order[0]])}
        for node, p, d in zip(order[1:].tolist(), pred[order[1:]].tolist(), inc.tolist()):
            u[node] = u[p] + d
        vals = np.array([u[int(i)] for i in order])
        unwrapped[g_order] = vals
        seeds.append(int(nodes[seed]))

    # loops around phase singularities show up as inconsistent edges
    jump = unwrapped[b] - unwrapped[a]
    bad = np.abs(jump - _wrap(flat_phase[b] - flat_phase[a])) > _DEFECT_TOL
    defect_nodes = np.union1d(a[bad], b[bad])
    new_support = support.copy().ravel()
    new_support[defect_nodes] = False
    unwrapped[~new_support] = np.nan
    return unwrapped.reshape(support.shape), new_support.reshape(support.shape), seeds, int(bad.sum()), n_comp


def decompose(psi: WaveField, params: SystemParams, threshold_rel: float = MASS_THRESHOLD) -> MadelungFields:
    """Split ``psi`` into density and unwrapped action ``S = hbar * phase``.

    The action at each component's density maximum equals ``hbar`` times the
    principal phase there; ``gauge`` records these values.
    """
    if params.hbar <= 0:
        raise ValidationError("hbar: decomposition needs hbar > 0")
    rho = np.abs(psi.values) ** 2
    thr = threshold_rel * float(rho.max())
    support = rho > thr
    phase = np.angle(psi.values)
    u, support, seeds, defects, n_comp = _unwrap(phase, rho, support)
    if n_comp > 1:
        log.warning("support at t=%.6g splits into %d components; each carries its own gauge",
                    psi.time, n_comp)
    if defects:
        log.info("t=%.6g: %d unwrapping defects masked", psi.time, defects)
    S = params.hbar * u
    gauge = tuple(float(S.flat[s]) for s in seeds)
    return MadelungFields(psi.grid, psi.time, rho, S, support, thr, gauge, defects, n_comp)


def recompose(fields: MadelungFields, params: SystemParams) -> WaveField:
    """``sqrt(rho) exp(i S / hbar)``; zero phase outside the support."""
    S = np.where(fields.support, fields.action, 0.0)
    return WaveField(fields.grid, fields.time, np.sqrt(fields.rho) * np.exp(1j * S / params.hbar))


def from_arrays(grid, time, rho, action, threshold_rel=MASS_THRESHOLD) -> MadelungFields:
    """Wrap sampled (e.g. closed-form) density and action as :class:`MadelungFields`."""
    rho = np.asarray(rho, dtype=float)
    thr = threshold_rel * float(rho.max())
    return MadelungFields(grid, time, rho, np.asarray(action, dtype=float), rho > thr, thr)


def align_gauge(fields: MadelungFields, reference, params: SystemParams):
    """Shift the action by the multiple of ``2 pi hbar`` closest to the reference.

    ``reference`` is another :class:`MadelungFields` or an action array on the
    same grid. The median of the difference over the common support decides
    the branch. Returns ``(aligned_fields, n_turns)``.
    """
    if isinstance(reference, MadelungFields):
        ref, ref_support = reference.action, reference.support
    else:
        ref = np.asarray(reference, dtype=float)
        ref_support = np.isfinite(ref)
    common = fields.support & ref_support
    if not common.any():
        raise ValidationError("align_gauge: no common support")
    period = 2 * np.pi * params.hbar
    n = int(np.round(np.median(fields.action[common] - ref[common]) / period))
    if n == 0:
        return fields, 0
    gauge = tuple(g - n * period for g in fields.gauge)
    return replace(fields, action=fields.action - n * period, gauge=gauge), n


# --------------------------------------------------------------------------
# derivatives


def fd_gradient(f: np.ndarray, spacing, valid=None) -> list:
    """Fourth-order central differences, NaN where the stencil leaves ``valid``."""
    f = np.asarray(f, dtype=float)
    if valid is not None:
        f = np.where(valid, f, np.nan)
    out = []
    for ax, h in enumerate(np.atleast_1d(spacing)):
        g = np.full(f.shape, np.nan)
        n = f.shape[ax]

        def sl(a, b):
            s = [slice(None)] * f.ndim
            s[ax] = slice(a, n + b if b else None)
            return tuple(s)

        g[sl(2, -2)] = (-f[sl(4, 0)] + 8 * f[sl(3, -1)] - 8 * f[sl(1, -3)] + f[sl(0, -4)]) / (12 * h)
        out.append(g)
    return out


def action_gradient(fields: MadelungFields) -> list:
    return fd_gradient(fields.action, fields.grid.spacing, fields.support)


def log_density_gradient(fields: MadelungFields) -> list:
    with np.errstate(divide="ignore"):
        lr = np.where(fields.support, np.log(np.where(fields.rho > 0, fields.rho, 1.0)), np.nan)
    return fd_gradient(lr, fields.grid.spacing)


def quantum_potential(fields: MadelungFields, params: SystemParams) -> np.ndarray:
    """``-(hbar^2 / 2m) lap(sqrt rho) / sqrt rho``, spectral Laplacian; NaN off the support."""
    amp = np.sqrt(fields.rho)
    lap = spectral_laplacian(amp, fields.grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        Q = -params.hbar**2 / (2 * params.mass) * lap / amp
    return np.where(fields.support, Q, np.nan)


# --------------------------------------------------------------------------
# residuals


@dataclass(frozen=True)
class ResidualReport:
    hj_residual_l2: float
    continuity_residual_l2: float
    lsq_functional: float
    mass_threshold: float
    include_quantum_potential: bool = True
    gauge_corrections: tuple = ()
    nodes: int = 0
    notes: tuple = field(default_factory=tuple)

    def to_dict(self):
        return {
            "hj_residual_l2": self.hj_residual_l2,
            "continuity_residual_l2": self.continuity_residual_l2,
            "lsq_functional": self.lsq_functional,
            "mass_threshold": self.mass_threshold,
            "include_quantum_potential": self.include_quantum_potential,
            "gauge_corrections": list(self.gauge_corrections),
            "nodes": self.nodes,
            "notes": list(self.notes),
        }


def hj_residual_field(snapshots, params: SystemParams, include_quantum_potential=True):
    """Pointwise ``dS/dt + |grad S|^2/2m + V (+ Q)`` at the middle snapshot.

    Returns ``(residual, continuity, weights, corrections)``; NaN marks nodes
    where the stencils leave the common support.
    """
    if len(snapshots) != 3:
        raise ValidationError("residuals: need exactly three consecutive snapshots")
    f0, f1, f2 = snapshots
    dt = f1.time - f0.time
    if not dt > 0 or abs((f2.time - f1.time) - dt) > 1e-9 * dt:
        raise ValidationError("residuals: snapshots must be uniformly spaced in time")
    corrections = []
    f0, n0 = align_gauge(f0, f1, params)
    f2, n2 = align_gauge(f2, f1, params)
    for t, n in ((f0.time, n0), (f2.time, n2)):
        if n:
            log.info("gauge of snapshot t=%.6g shifted by %d x 2 pi hbar", t, n)
            corrections.append((t, n))
    grid = f1.grid
    m = params.mass
    common = f0.support & f1.support & f2.support
    S0 = np.where(common, f0.action, np.nan)
    S2 = np.where(common, f2.action, np.nan)
    dSdt = (S2 - S0) / (2 * dt)
    grad = fd_gradient(f1.action, grid.spacing, common)
    kinetic = sum(g * g for g in grad) / (2 * m)
    V = params.potential.on_grid(grid, m)
    hj = dSdt + kinetic + V
    if include_quantum_potential:
        hj = hj + quantum_potential(f1, params)
    flux = [np.where(np.isfinite(g), f1.rho * g / m, 0.0) for g in grad]
    # the flux decays with rho, so its divergence is taken spectrally
    div = sum(spectral_derivative(j, grid, ax) for ax, j in enumerate(flux))
    cont = (f2.rho - f0.rho) / (2 * dt) + np.where(np.isfinite(hj), div, np.nan)
    return hj, cont, f1.rho, tuple(corrections)


def residuals(snapshots, params: SystemParams, include_quantum_potential: bool = True) -> ResidualReport:
    """L2 norms of the Madelung residuals and the density-weighted functional.

    ``lsq_functional`` is ``int rho [dS/dt + |grad S|^2/2m + V + Q]^2 dx``;
    with ``include_quantum_potential=False`` the bracket drops ``Q``.
    """
    hj, cont, rho, corrections = hj_residual_field(snapshots, params, include_quantum_potential)
    dv = snapshots[1].grid.cell_volume
    ok = np.isfinite(hj) & np.isfinite(cont)
    if not ok.any():
        raise ValidationError("residuals: no node has a complete stencil on the support")
    return ResidualReport(
        hj_residual_l2=float(np.sqrt(np.sum(hj[ok] ** 2) * dv)),
        continuity_residual_l2=float(np.sqrt(np.sum(cont[ok] ** 2) * dv)),
        lsq_functional=float(np.sum(rho[ok] * hj[ok] ** 2) * dv),
        mass_threshold=snapshots[1].threshold,
        include_quantum_potential=include_quantum_potential,
        gauge_corrections=corrections,
        nodes=int(ok.sum()),
    )
