"""hbar -> 0 convergence harness.

Each scenario is swept over a geometric sequence of hbar values; at every
value the quantum fields (closed form and, optionally, split-step solver)
are compared with their classical limits and the error sequences are fitted
for a convergence order. The orders are measured, not quoted.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import linregress, wasserstein_distance

from . import analytic, bohm, classical, madelung, schrodinger
from .analytic import CoherentScenario, LinearScenario
from .domain import (BohmSample, Free, GaussianPrep, Grid, SystemParams, WaveField, gaussian_density, make_grid,
                     next_pow2, prepare_wavefunction)
from .errors import ValidationError

log = logging.getLogger(__name__)

NON_DISCERNED = "non-discerned semi-classically"
DISCERNED = "discerned semi-classically"

#: Probe stencil: offsets in units of the packet width along every axis.
PROBE_OFFSETS = np.linspace(-3.0, 3.0, 17)
#: Discretization error must stay this factor below the smallest model error.
BUDGET_FACTOR = 0.1
#: Relative slack before a rising error sequence is called non-monotone.
MONOTONE_SLACK = 1e-9


# --------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class LinearGaussian:
    scenario: LinearScenario
    name: str = "linear-gaussian"
    classification: str = NON_DISCERNED


@dataclass(frozen=True)
class HarmonicCoherent:
    scenario: CoherentScenario
    name: str = "harmonic-coherent"
    classification: str = DISCERNED


@dataclass(frozen=True)
class DoubleSlit:
    """Two equal-weight Gaussian beams displaced along ``axis`` with a common velocity."""

    params: SystemParams
    sigma0: float
    separation: float
    v0: tuple
    axis: int = 0
    name: str = "double-slit"
    classification: str = NON_DISCERNED

    def __post_init__(self):
        if not isinstance(self.params.potential, Free):
            raise ValidationError("potential: the double-slit scenario is free flight")
        if self.params.dim < 2:
            raise ValidationError("dim: the double-slit scenario needs at least two dimensions")
        if not self.separation > 0:
            raise ValidationError(f"separation: must be > 0 (got {self.separation})")
        if len(self.v0) != self.params.dim:
            raise ValidationError("v0: one component per dimension")

    def preps(self):
        shift = np.zeros(self.params.dim)
        shift[self.axis] = self.separation / 2
        v0 = np.asarray(self.v0, dtype=float)
        return GaussianPrep(-shift, self.sigma0, v0), GaussianPrep(shift, self.sigma0, v0)

    def with_hbar(self, hbar):
        return DoubleSlit(self.params.with_hbar(hbar), self.sigma0, self.separation, self.v0, self.axis)

    def amplitude(self, x):
        """Unnormalized real amplitude ``psi0 exp(-i m v0.x / hbar)`` at points ``x``."""
        x = np.atleast_2d(x)
        return sum(np.sqrt(gaussian_density(x, p.zeta0, self.sigma0)) for p in self.preps())

    def sample(self, n, seed) -> BohmSample:
        """Exact draws from ``|psi0|^2`` by rejection from the two-beam mixture.

        The mixture density is ``(rho1 + rho2) / 2`` and the target is
        ``(sqrt rho1 + sqrt rho2)^2 / Z``, so ``target <= 4 mixture / Z`` and
        the acceptance ratio is ``(sqrt rho1 + sqrt rho2)^2 / (2 (rho1 + rho2))``.
        """
        rng = np.random.default_rng(seed)
        p1, p2 = self.preps()
        out = []
        have = 0
        while have < n:
            m = 2 * (n - have) + 16
            side = rng.random(m) < 0.5
            x = np.where(side[:, None], p1.zeta0, p2.zeta0) + self.sigma0 * rng.standard_normal((m, self.params.dim))
            r1 = gaussian_density(x, p1.zeta0, self.sigma0)
            r2 = gaussian_density(x, p2.zeta0, self.sigma0)
            ratio = (np.sqrt(r1) + np.sqrt(r2)) ** 2 / (2 * (r1 + r2))
            keep = x[rng.random(m) * 2 < ratio]
            out.append(keep)
            have += len(keep)
        return BohmSample(np.concatenate(out)[:n], np.zeros(self.params.dim), seed)


Scenario = LinearGaussian | HarmonicCoherent | DoubleSlit


@dataclass(frozen=True)
class SweepBudget:
    """Resolution and sampling controls for one sweep.

    ``dt`` is the propagator step and ``snapshot_dt`` the spacing of stored
    snapshots; grids are sized per hbar from the packet width and the
    largest wave number reached.
    """

    t_eval: float = 1.0
    dt: float = 1e-3
    snapshot_dt: float = 0.01
    solver: bool = True
    n_samples: int = 1000
    seed: int = 0
    workers: int = 1
    max_points: int = 1024
    ks_tol: float = 0.02

    def __post_init__(self):
        if not self.t_eval > 0:
            raise ValidationError(f"t_eval: must be > 0 (got {self.t_eval})")
        if not self.dt > 0 or not self.snapshot_dt >= self.dt:
            raise ValidationError("dt: need 0 < dt <= snapshot_dt")
        if self.n_samples < 1:
            raise ValidationError("n_samples: must be >= 1")


@dataclass
class ConvergenceReport:
    scenario: str
    classification: str
    hbar_values: list
    metrics: dict = field(default_factory=dict)
    orders: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict, repr=False)

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "classification": self.classification,
            "hbar_values": list(self.hbar_values),
            "metrics": {k: list(v) for k, v in self.metrics.items()},
            "orders": {k: {"order": o, "ci": c, "label": "measured"} for k, (o, c) in self.orders.items()},
            "checks": dict(self.checks),
            "flags": list(self.flags),
            "notes": list(self.notes),
        }


# --------------------------------------------------------------------------
# order fitting


def fit_order(errors, hbars):
    """Least-squares slope of ``log error`` against ``log hbar``.

    Returns ``(order, ci)`` where ``ci`` is the standard error of the slope.
    Exact zeros are dropped (with a log note); negatives are rejected.
    """
    e = np.asarray(errors, dtype=float)
    h = np.asarray(hbars, dtype=float)
    if e.shape != h.shape:
        raise ValidationError("errors/hbars: lengths differ")
    if np.any(e < 0) or not np.all(np.isfinite(e)):
        raise ValidationError("errors: must be finite and non-negative")
    if np.any(h <= 0):
        raise ValidationError("hbars: must be positive")
    keep = e > 0
    if not keep.all():
        log.info("fit_order: %d exact zero(s) excluded", int((~keep).sum()))
    if keep.sum() < 4:
        raise ValidationError(f"fit_order: need at least 4 positive points (got {int(keep.sum())})")
    res = linregress(np.log(h[keep]), np.log(e[keep]))
    return float(res.slope), float(res.stderr)


def check_hbars(hbars, min_points=5, min_span=10.0):
    """Validate a sweep: positive, strictly decreasing, geometric, long and wide enough."""
    h = np.asarray(hbars, dtype=float)
    if h.ndim != 1 or len(h) < min_points:
        raise ValidationError(f"hbars: need at least {min_points} values (got {len(h)})")
    if np.any(h <= 0) or np.any(np.diff(h) >= 0):
        raise ValidationError("hbars: must be positive and strictly decreasing")
    ratios = h[1:] / h[:-1]
    if not np.allclose(ratios, ratios[0], rtol=1e-9):
        raise ValidationError("hbars: must form a geometric sequence")
    if h[0] / h[-1] < min_span * (1 - 1e-12):
        raise ValidationError(f"hbars: must span a factor of at least {min_span:g}")
    return h


def geometric_hbars(start=1.0, ratio=0.5, count=6):
    return [start * ratio**k for k in range(count)]


def _monotone(values):
    v = np.asarray(values, dtype=float)
    return bool(np.all(v[1:] <= v[:-1] * (1 + MONOTONE_SLACK) + 1e-300))


def probe_points(center, width):
    """17 points per axis across +-3 widths through ``center`` (center counted once)."""
    center = np.asarray(center, dtype=float)
    pts = [center]
    for a in range(center.size):
        for s in PROBE_OFFSETS:
            if s != 0:
                p = center.copy()
                p[a] += s * width
                pts.append(p)
    return np.array(pts)


# --------------------------------------------------------------------------
# grids and solver plumbing


def size_grid(lo, hi, width, kmax, max_points=4096, pad=0.15) -> Grid:
    """Smallest power-of-two grid covering ``[lo, hi]`` (plus padding) and resolving ``width`` and ``kmax``."""
    lo, hi = np.atleast_1d(lo).astype(float), np.atleast_1d(hi).astype(float)
    kmax = np.broadcast_to(np.asarray(kmax, dtype=float), lo.shape)
    length = (hi - lo) * (1 + 2 * pad)
    mid = 0.5 * (lo + hi)
    points = []
    for L, k in zip(length, kmax):
        h = min(width / 4.0, math.pi / k)
        n = next_pow2(L / h)
        if n > max_points:
            raise ValidationError(f"budget: axis needs {n} points, above max_points={max_points}")
        points.append(n)
    bounds = [(m - L / 2, m + L / 2) for m, L in zip(mid, length)]
    return make_grid(len(points), bounds, points)


def linear_grid(scen: LinearScenario, t_end, max_points=4096) -> Grid:
    """Grid holding the packet of a linear-potential scenario over ``[0, t_end]``."""
    prm, prep = scen.params, scen.prep
    sig_max = float(analytic.sigma_hbar(t_end, prm, prep.sigma0))
    ts = np.linspace(0, t_end, 33)
    cs = np.array([scen.center(s) for s in ts])
    vmax = np.max(np.abs(prep.v0 + np.outer(ts, scen.K) / prm.mass), axis=0)
    return size_grid(cs.min(axis=0) - 8 * sig_max, cs.max(axis=0) + 8 * sig_max, prep.sigma0,
                     prm.mass * vmax / prm.hbar + 6.0 / prep.sigma0, max_points)


def evolve_tracked(psi0: WaveField, params, budget: SweepBudget, S0, t_end=None):
    """Evolve to ``t_end`` keeping the action gauge continuous in time.

    Every ``snapshot_dt`` the new action is shifted by the multiple of
    ``2 pi hbar`` closest to the previous one; the first snapshot is matched
    to the exact initial action ``S0``. Returns the final wave function and
    its aligned :class:`MadelungFields` plus the list of all snapshots.
    """
    t_end = budget.t_eval if t_end is None else t_end
    n_steps = int(round(t_end / budget.dt))
    stride = max(1, int(round(budget.snapshot_dt / budget.dt)))
    snaps = schrodinger.evolve(psi0, params, schrodinger.PropagatorConfig(budget.dt, n_steps, stride))
    prev, _ = madelung.align_gauge(madelung.decompose(snaps[0], params), S0, params)
    fields = [prev]
    for s in snaps[1:]:
        cur, _ = madelung.align_gauge(madelung.decompose(s, params), prev, params)
        fields.append(cur)
        prev = cur
    return snaps, fields


def _probe_fields(psi: WaveField, fields, pts, hbar):
    """Density and action at off-grid points by spectral interpolation of psi."""
    vals = schrodinger.spectral_interpolate(psi, pts)
    grid = psi.grid
    nodes = grid.nodes().reshape(-1, grid.dim)
    supp = fields.support.ravel()
    cand = np.flatnonzero(supp)
    S = fields.action.ravel()
    out = np.empty(len(pts))
    for j, p in enumerate(pts):
        k = cand[np.argmin(np.sum((nodes[cand] - p) ** 2, axis=1))]
        out[j] = S[k] + hbar * np.angle(vals[j] / psi.values.ravel()[k])
    return np.abs(vals) ** 2, out


def lsq_closed_form(fields_fn, grid: Grid, t, params: SystemParams, dt):
    """Density-weighted residual functional of closed-form fields at ``t``.

    Three time levels ``t - dt, t, t + dt`` feed the residuals; the functional
    is reported with and without the quantum potential.
    """
    X = grid.nodes()
    snaps = []
    for s in (t - dt, t, t + dt):
        rho, S = fields_fn(X, s)
        snaps.append(madelung.from_arrays(grid, s, rho, S))
    with_q = madelung.residuals(snaps, params)
    without_q = madelung.residuals(snaps, params, include_quantum_potential=False)
    return {"lsq_functional": with_q.lsq_functional, "lsq_without_q": without_q.lsq_functional}


# --------------------------------------------------------------------------
# per-hbar pipelines


def _linear_point(scen: LinearScenario, budget: SweepBudget, with_solver: bool):
    prm, prep, t = scen.params, scen.prep, budget.t_eval
    c = scen.center(t)
    pts = probe_points(c, prep.sigma0)
    rho_q, S_q = analytic.linear_fields(pts, t, scen)
    rho_c, S_c = analytic.classical_limit_fields(pts, t, scen)
    out = {
        "density_error": float(np.max(np.abs(rho_q - rho_c))),
        "action_error": float(np.max(np.abs(S_q - S_c))),
        "width_error": float(analytic.sigma_hbar(t, prm, prep.sigma0) - prep.sigma0),
    }
    # Bohm paths from the probe offsets against the classical characteristics
    etas = (pts - prep.zeta0) if prep.dim > 1 else (pts[:, 0] - prep.zeta0[0])
    qb = analytic.bohm_trajectory_1d(etas, t, scen)
    cl_params = SystemParams(prm.mass, 0.0, prm.potential, prm.dim)
    start = prep.zeta0 + (etas if prep.dim > 1 else etas[:, None])
    ends = np.array([classical.local_action_evolve(x0, prep.v0, cl_params, t, budget.snapshot_dt)
                     .trajectory.positions[-1] for x0 in start])
    qb = qb if prep.dim > 1 else qb[:, None]
    out["trajectory_error"] = float(np.max(np.linalg.norm(qb - ends, axis=-1)))
    grid = linear_grid(scen, t, budget.max_points)
    out.update(lsq_closed_form(lambda x, s: analytic.linear_fields(x, s, scen), grid, t, prm, budget.dt))
    artifacts = {}
    if with_solver:
        psi0 = prepare_wavefunction(prep, prm, grid)
        S0 = prm.mass * grid.nodes() @ prep.v0
        snaps, fields = evolve_tracked(psi0, prm, budget, S0)
        rho_s, S_s = _probe_fields(snaps[-1], fields[-1], pts, prm.hbar)
        out["solver_density_error"] = float(np.max(np.abs(rho_s - rho_c)))
        out["solver_action_error"] = float(np.max(np.abs(S_s - S_c)))
        out["discretization_error"] = float(max(np.max(np.abs(rho_s - rho_q)), np.max(np.abs(S_s - S_q))))
        out["grid_points"] = int(grid.size)
        artifacts = {"psi": snaps[-1], "fields": fields[-1], "snapshots": fields}
    return out, artifacts


def _coherent_point(scen: CoherentScenario, budget: SweepBudget, with_solver: bool):
    prm, prep, t = scen.params, scen.prep, budget.t_eval
    m, w, dim = prm.mass, scen.omega, prm.dim
    sig = scen.sigma
    target = prm.hbar / (2 * m * w)
    xi, vel = analytic.harmonic_path(prep, t)
    local = classical.local_action_evolve(prep.x0, prep.v0, SystemParams(m, 0.0, prm.potential, dim),
                                          t, budget.dt)
    amp = math.sqrt(float(prep.x0 @ prep.x0) + float(prep.v0 @ prep.v0) / w**2)
    vmax = math.sqrt(float(prep.v0 @ prep.v0) + w**2 * float(prep.x0 @ prep.x0))
    grid = size_grid(-np.full(dim, amp + 8 * sig), np.full(dim, amp + 8 * sig), sig,
                     m * vmax / prm.hbar + 6.0 / sig, budget.max_points)
    X = grid.nodes()
    rho_a, S_a = analytic.coherent_fields(X, t, scen)
    d = X - xi
    moment_a = np.array([np.sum(rho_a * d[..., a] ** 2) / np.sum(rho_a) for a in range(dim)])
    pts = probe_points(xi, sig)
    _, S_probe = analytic.coherent_fields(pts, t, scen)
    S_local = local.action(pts, -1)
    out = {
        "second_moment": float(moment_a.mean()),
        "moment_rel_error": float(np.max(np.abs(moment_a / target - 1))),
        "q_on_trajectory": float(analytic.coherent_quantum_potential(xi[None, :], t, scen)[0]),
        "action_error": float(np.max(np.abs(S_probe - S_local))),
        "local_path_error": float(np.max(np.abs(local.trajectory.positions[-1] - xi))),
    }
    out.update(lsq_closed_form(lambda x, s: analytic.coherent_fields(x, s, scen), grid, t, prm, budget.dt))
    artifacts = {}
    if with_solver:
        psi0 = prepare_wavefunction(prep, prm, grid)
        S0 = m * X @ prep.v0
        snaps, fields = evolve_tracked(psi0, prm, budget, S0)
        f = fields[-1]
        mean, var = schrodinger.moments(snaps[-1])
        rho = snaps[-1].density
        moment_s = np.array([np.sum(rho * d[..., a] ** 2) / np.sum(rho) for a in range(dim)])
        out["solver_moment_rel_error"] = float(np.max(np.abs(moment_s / target - 1)))
        out["solver_center_error"] = float(np.max(np.abs(mean - xi)))
        Q = madelung.quantum_potential(f, prm)
        near = (np.sum(d * d, axis=-1) <= sig**2) & np.isfinite(Q)
        Qa = analytic.coherent_quantum_potential(X, t, scen)
        out["solver_q_error"] = float(np.max(np.abs(Q - Qa)[near]))
        # affine structure of the action over the packet support
        core = (np.sum(d * d, axis=-1) <= (2 * sig) ** 2) & f.support
        A = np.column_stack([X[core], np.ones(core.sum())])
        coef, *_ = np.linalg.lstsq(A, f.action[core], rcond=None)
        resid = f.action[core] - A @ coef
        out["slope_error"] = float(np.max(np.abs(coef[:-1] - m * vel)))
        out["regression_residual"] = float(np.sqrt(np.mean(resid**2)))
        phase_const = -analytic.COHERENT_PHASE_PER_AXIS * dim * prm.hbar * w * t
        out["intercept_error"] = float(abs(coef[-1] - (local.g[-1] + phase_const)))
        out["grid_points"] = int(grid.size)
        artifacts = {"psi": snaps[-1], "fields": f, "snapshots": fields}
    return out, artifacts


def _double_slit_point(ds: DoubleSlit, budget: SweepBudget):
    prm, t = ds.params, budget.t_eval
    p1, p2 = ds.preps()
    sig_t = float(analytic.sigma_hbar(t, prm, ds.sigma0))
    ends = [p.zeta0 + p.v0 * s for p in (p1, p2) for s in (0.0, t)]
    lo = np.min(ends, axis=0) - 8 * sig_t
    hi = np.max(ends, axis=0) + 8 * sig_t
    kmax = prm.mass * np.abs(np.asarray(ds.v0)) / prm.hbar + 6.0 / ds.sigma0
    grid = size_grid(lo, hi, ds.sigma0, kmax, budget.max_points, pad=0.05)
    psi0 = superpose([prepare_wavefunction(p, prm, grid) for p in (p1, p2)])
    S0 = prm.mass * grid.nodes() @ np.asarray(ds.v0, dtype=float)
    snaps, fields = evolve_tracked(psi0, prm, budget, S0)
    samples = ds.sample(budget.n_samples, budget.seed)

    out = {}
    runs = {}
    for mode in (bohm.Standard(), bohm.SpinCurrent()):
        run = bohm.integrate_ensemble(fields, samples, prm, mode)
        ks = [bohm.ks_distance(run.positions[i][~run.flagged], f) for i, f in enumerate(fields)]
        out[f"equivariance_{mode.name}"] = float(max(ks))
        out[f"flagged_{mode.name}"] = run.n_flagged
        runs[mode.name] = run
    # classical characteristics from the same starting points
    classical_end = samples.x_start + np.asarray(ds.v0) * t
    run = runs["standard"]
    a = ds.axis
    out["bohm_divergence"] = float(wasserstein_distance(run.positions[-1][~run.flagged, a],
                                                        classical_end[~run.flagged, a]))
    # free characteristics shift the initial density rigidly by v0 t
    cdf_q = bohm.marginal_cdf(fields[-1], a)
    cdf_0 = bohm.marginal_cdf(fields[0], a)
    xs = grid.axes[a]
    out["density_divergence"] = float(trapezoid(np.abs(cdf_q(xs) - cdf_0(xs - ds.v0[a] * t)), xs))
    mid = len(fields) // 2
    rep = madelung.residuals(fields[mid - 1:mid + 2], prm)
    out["hj_residual_l2"] = rep.hj_residual_l2
    out["continuity_residual_l2"] = rep.continuity_residual_l2
    out["lsq_functional"] = rep.lsq_functional
    out["unwrap_defects"] = int(max(f.defects for f in fields))
    out["grid_points"] = int(grid.size)
    return out, {"psi": snaps[-1], "fields": fields[-1], "snapshots": fields, "runs": runs}


def superpose(waves):
    """Equal-weight superposition, renormalized to unit discrete norm."""
    vals = sum(w.values for w in waves)
    psi = WaveField(waves[0].grid, waves[0].time, vals)
    return WaveField(psi.grid, psi.time, vals / math.sqrt(schrodinger.norm(psi)))


# --------------------------------------------------------------------------
# sweep


def hbar_sweep(scenario: Scenario, hbars, budget: SweepBudget = SweepBudget()) -> ConvergenceReport:
    """Run the scenario at every hbar and fit convergence orders."""
    is_slit = isinstance(scenario, DoubleSlit)
    h = check_hbars(hbars, 4 if is_slit else 5, 1.0 if is_slit else 10.0)
    report = ConvergenceReport(scenario.name, scenario.classification, [float(x) for x in h])

    def point(hb):
        if isinstance(scenario, LinearGaussian):
            return _linear_point(scenario.scenario.with_hbar(hb), budget, budget.solver)
        if isinstance(scenario, HarmonicCoherent):
            return _coherent_point(scenario.scenario.with_hbar(hb), budget, budget.solver)
        return _double_slit_point(scenario.with_hbar(hb), budget)

    if budget.workers > 1:
        with ThreadPoolExecutor(max_workers=budget.workers) as pool:
            results = list(pool.map(point, h))
    else:
        results = [point(hb) for hb in h]

    for key in results[0][0]:
        report.metrics[key] = [r[0][key] for r in results]
    report.artifacts = {float(hb): r[1] for hb, r in zip(h, results)}

    if isinstance(scenario, LinearGaussian):
        _finish_linear(report, h)
    elif isinstance(scenario, HarmonicCoherent):
        _finish_coherent(report, h, scenario)
    else:
        _finish_double_slit(report, budget)
    return report


def _fit(report, h, key):
    vals = report.metrics[key]
    report.orders[key] = fit_order(vals, h)
    if not _monotone(vals):
        dominant = "discretization" if key.startswith("solver") else "model"
        report.flags.append(f"{key}: non-monotone along the sweep (resolution-limited; dominant term: {dominant})")


#: Discretization level for the residual functional of closed-form fields.
LSQ_TOL = 1e-8


def _finish_lsq(report, h):
    worst = max(report.metrics["lsq_functional"])
    report.checks["lsq_max"] = worst
    report.checks["lsq_ok"] = bool(worst <= LSQ_TOL)
    report.orders["lsq_without_q"] = fit_order(report.metrics["lsq_without_q"], h)


def _finish_linear(report, h):
    _finish_lsq(report, h)
    for key in ("density_error", "action_error", "width_error", "trajectory_error"):
        _fit(report, h, key)
    if "solver_density_error" in report.metrics:
        for key in ("solver_density_error", "solver_action_error"):
            _fit(report, h, key)
        model = min(min(report.metrics["density_error"]), min(report.metrics["action_error"]))
        disc = max(report.metrics["discretization_error"])
        report.checks["budget_ok"] = bool(disc <= BUDGET_FACTOR * model)
        report.checks["budget"] = {"max_discretization": disc, "min_model": model, "factor": BUDGET_FACTOR}
        if not report.checks["budget_ok"]:
            report.flags.append("budget: discretization error not one order below model error")
    report.notes.append("orders are fitted from measured errors; the closed forms predict 2")


def _finish_coherent(report, h, scenario):
    _finish_lsq(report, h)
    report.orders["second_moment"] = fit_order(report.metrics["second_moment"], h)
    report.orders["action_error"] = fit_order(report.metrics["action_error"], h)
    w = scenario.scenario.omega
    dim = scenario.scenario.params.dim
    q_expected = [analytic.COHERENT_PHASE_PER_AXIS * dim * hb * w for hb in h]
    report.checks["q_on_trajectory_max_error"] = float(np.max(np.abs(np.array(report.metrics["q_on_trajectory"])
                                                                      - q_expected)))
    report.notes.append("second moment per axis should equal hbar / 2 m omega (order 1 in hbar)")


def _finish_double_slit(report, budget):
    for key in ("bohm_divergence", "density_divergence"):
        vals = report.metrics[key]
        ok = _monotone(vals)
        report.checks[f"{key}_monotone"] = ok
        if not ok:
            report.flags.append(f"{key}: not monotone over the sweep")
    worst = max(max(report.metrics["equivariance_standard"]), max(report.metrics["equivariance_spin-current"]))
    report.checks["equivariance_max"] = worst
    report.checks["equivariance_ok"] = bool(worst <= budget.ks_tol)
    report.notes.append("no closed form exists here; metrics are evidence for the limit, not a proof")
