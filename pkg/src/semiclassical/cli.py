"""Batch front end: presets, config validation, runs and serialization.

Usage::

    semiclassical list-presets
    semiclassical run --preset bohm-1d --out runs/bohm --seed 3
    semiclassical run --config my_run.json --threads 4

Each run writes field snapshots (``fields/<label>/snap_<k>.csv``),
trajectories (``trajectories/<label>.csv``), ``report.json``,
``manifest.json`` and ``timing.json``; figures go to ``figures/`` unless
``--no-figures`` is given. Exit codes: 0 success, 2 invalid input,
3 numerical failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import platform
import sys
import time
from dataclasses import asdict, dataclass, fields as dc_fields
from pathlib import Path

import numpy as np
from scipy.interpolate import griddata

from . import __version__, analytic, bohm, classical, lab, madelung
from .analytic import CoherentScenario, LinearScenario
from .domain import (CoherentPrep, Free, GaussianPrep, Harmonic, Linear, SystemParams, make_grid,
                     prepare_wavefunction)
from .errors import NumericalError, SemiclassicalError, ValidationError

log = logging.getLogger("semiclassical")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

KINDS = ("linear", "coherent", "bohm-1d", "bohm-3d-spin", "double-slit", "local-hj")

PRESETS = {
    "linear-sweep": {
        "description": "hbar sweep of a Gaussian packet in a linear potential against its classical limit "
                       "(non-discerned convergence, order fitted)",
        "config": {
            "kind": "linear", "dim": 1, "mass": 1.0, "hbar": 1.0,
            "potential": {"kind": "linear", "K": [1.0]},
            "prep": {"zeta0": [0.0], "sigma0": 1.0, "v0": [1.0]},
            "hbars": [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125],
            "t_final": 1.0, "dt": 1e-3, "snapshot_dt": 0.01, "output_stride": 25,
        },
    },
    "coherent-sweep": {
        "description": "hbar sweep of a 2D harmonic coherent state: second moment, quantum potential on the "
                       "path and affine action (discerned limit)",
        "config": {
            "kind": "coherent", "dim": 2, "mass": 1.0, "hbar": 1.0,
            "potential": {"kind": "harmonic", "omega": 1.0},
            "prep": {"x0": [1.0, 0.5], "v0": [0.0, 0.5]},
            "hbars": [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125],
            "t_final": 1.0, "dt": 1e-3, "snapshot_dt": 0.01, "output_stride": 100,
        },
    },
    "bohm-1d": {
        "description": "standard-velocity Bohm ensemble in a linear potential, transported through solver "
                       "fields and checked against the closed-form trajectories",
        "config": {
            "kind": "bohm-1d", "dim": 1, "mass": 1.0, "hbar": 1.0,
            "potential": {"kind": "linear", "K": [1.0]},
            "prep": {"zeta0": [0.0], "sigma0": 1.0, "v0": [0.5]},
            "t_final": 1.0, "dt": 1e-3, "snapshot_dt": 0.01, "n_samples": 1000, "output_stride": 10,
        },
    },
    "bohm-3d-spin": {
        "description": "spin-current Bohm ensemble in 3D with force along the spin axis, checked against "
                       "the rotating closed-form trajectories",
        "config": {
            "kind": "bohm-3d-spin", "dim": 3, "mass": 1.0, "hbar": 1.0,
            "potential": {"kind": "linear", "K": [0.0, 0.0, 1.0]},
            "prep": {"zeta0": [0.0, 0.0, 0.0], "sigma0": 1.0, "v0": [0.2, 0.0, 0.3]},
            "t_final": 1.0, "dt": 0.01, "snapshot_dt": 0.05, "n_samples": 1000, "output_stride": 10,
        },
    },
    "double-slit": {
        "description": "two-beam superposition in 2D: equivariance in both velocity modes and divergence "
                       "from the classical beams over an hbar sweep (evidence, no closed form)",
        "config": {
            "kind": "double-slit", "dim": 2, "mass": 1.0, "hbar": 1.0,
            "potential": {"kind": "free"},
            "prep": {"sigma0": 1.0, "v0": [0.0, 0.5]}, "separation": 4.0,
            "hbars": [1.0, 0.5, 0.25, 0.125],
            "t_final": 6.0, "dt": 0.05, "snapshot_dt": 0.1, "n_samples": 10000, "max_points": 512,
            "output_stride": 20, "trajectory_samples": 200,
        },
    },
    "local-hj-demo": {
        "description": "local action along single classical paths (free, linear, harmonic) and the "
                       "statistical characteristics up to the harmonic caustic",
        "config": {
            "kind": "local-hj", "dim": 1, "mass": 1.0, "hbar": 0.0,
            "potential": {"kind": "harmonic", "omega": 1.0},
            "prep": {"zeta0": [1.0], "sigma0": 0.5, "v0": [0.0]},
            "t_final": 2.0, "dt": 1e-3, "n_samples": 2000, "output_stride": 250,
        },
    },
}


# --------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    kind: str
    dim: int
    mass: float
    hbar: float
    potential: dict
    prep: dict
    t_final: float
    dt: float
    snapshot_dt: float = 0.01
    hbars: list | None = None
    separation: float = 4.0
    n_samples: int = 1000
    seed: int = 0
    output_stride: int = 1
    trajectory_samples: int = 1000
    max_points: int = 1024
    solver: bool = True
    threads: int = 1


_NUMBER_KEYS = {"mass", "hbar", "t_final", "dt", "snapshot_dt", "separation"}
_INT_KEYS = {"dim", "n_samples", "seed", "output_stride", "trajectory_samples", "max_points", "threads"}


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def parse_config(raw: dict) -> tuple:
    """Validate a raw config mapping.

    Returns ``(config, objects)`` where ``objects`` holds the constructed
    parameters, preparation and scenario. Every violation found is reported
    in one :class:`ValidationError`.
    """
    errors = []
    if not isinstance(raw, dict):
        raise ValidationError("config: must be a mapping")
    known = {f.name for f in dc_fields(RunConfig)}
    unknown = [f"{k}: unknown key" for k in raw if k not in known]
    required = ["kind", "dim", "mass", "hbar", "potential", "prep", "t_final", "dt"]
    errors += [f"{k}: required" for k in required if k not in raw]
    for k in _NUMBER_KEYS & raw.keys():
        if not _is_number(raw[k]):
            errors.append(f"{k}: must be a finite number (got {raw[k]!r})")
    for k in _INT_KEYS & raw.keys():
        if not isinstance(raw[k], int) or isinstance(raw[k], bool):
            errors.append(f"{k}: must be an integer (got {raw[k]!r})")
    if errors:
        raise ValidationError("; ".join(unknown + errors))
    errors = unknown
    cfg = RunConfig(**{k: v for k, v in raw.items() if k in known})

    if cfg.kind not in KINDS:
        errors.append(f"kind: must be one of {', '.join(KINDS)} (got {cfg.kind!r})")
    for name, lo in (("t_final", 0.0), ("dt", 0.0), ("snapshot_dt", 0.0), ("separation", 0.0)):
        if not getattr(cfg, name) > lo:
            errors.append(f"{name}: must be > {lo:g} (got {getattr(cfg, name)})")
    if cfg.snapshot_dt < cfg.dt:
        errors.append(f"snapshot_dt: must be >= dt ({cfg.snapshot_dt} < {cfg.dt})")
    for name in ("n_samples", "output_stride", "trajectory_samples", "threads"):
        if getattr(cfg, name) < 1:
            errors.append(f"{name}: must be >= 1 (got {getattr(cfg, name)})")
    if cfg.seed < 0:
        errors.append(f"seed: must be >= 0 (got {cfg.seed})")

    potential = None
    try:
        potential = _potential(cfg.potential)
    except ValidationError as e:
        errors.append(str(e))
    params = None
    try:
        params = SystemParams(cfg.mass, cfg.hbar, potential if potential is not None else Free(), cfg.dim)
    except ValidationError as e:
        errors.append(str(e))
    prep = None
    if potential is not None:
        try:
            prep = _prep(cfg, potential)
        except (ValidationError, KeyError, TypeError) as e:
            errors.append(f"prep: {e}" if not isinstance(e, ValidationError) else str(e))
    if cfg.kind in ("linear", "coherent", "double-slit"):
        if cfg.hbars is None:
            errors.append("hbars: required for a sweep")
        else:
            try:
                if cfg.kind == "double-slit":
                    lab.check_hbars(cfg.hbars, 4, 1.0)
                else:
                    lab.check_hbars(cfg.hbars)
            except ValidationError as e:
                errors.append(str(e))
    elif cfg.kind in KINDS and cfg.kind != "local-hj" and not cfg.hbar > 0:
        errors.append(f"hbar: must be > 0 for {cfg.kind} (got {cfg.hbar})")
    if errors:
        raise ValidationError("; ".join(errors))

    objects = {"params": params, "prep": prep}
    try:
        if cfg.kind in ("linear", "bohm-1d", "bohm-3d-spin"):
            objects["scenario"] = LinearScenario(prep, params)
            if cfg.kind == "bohm-3d-spin":
                if cfg.dim != 3:
                    raise ValidationError("dim: bohm-3d-spin needs dim = 3")
                if not isinstance(potential, Linear) or potential.K[0] != 0 or potential.K[1] != 0:
                    raise ValidationError("potential: bohm-3d-spin needs a linear force along axis 3")
        elif cfg.kind == "coherent":
            objects["scenario"] = CoherentScenario(prep, params)
        elif cfg.kind == "double-slit":
            objects["scenario"] = lab.DoubleSlit(params, prep.sigma0, cfg.separation, tuple(prep.v0))
    except ValidationError as e:
        raise ValidationError(str(e)) from None
    return cfg, objects


def _potential(spec):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValidationError("potential: must be a mapping with a 'kind'")
    kind = spec["kind"]
    if kind == "free":
        return Free()
    if kind == "linear":
        return Linear(tuple(spec.get("K", ())))
    if kind == "harmonic":
        return Harmonic(spec.get("omega", float("nan")))
    raise ValidationError(f"potential.kind: must be free, linear or harmonic (got {kind!r})")


def _prep(cfg: RunConfig, potential):
    p = cfg.prep
    if not isinstance(p, dict):
        raise ValidationError("prep: must be a mapping")
    if cfg.kind == "coherent":
        if not isinstance(potential, Harmonic):
            raise ValidationError("potential: coherent runs need a harmonic potential")
        return CoherentPrep(p["x0"], p["v0"], potential.omega)
    if cfg.kind == "double-slit":
        return GaussianPrep([0.0] * cfg.dim, p["sigma0"], p["v0"])
    return GaussianPrep(p["zeta0"], p["sigma0"], p["v0"])


def load_config(path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"config: not valid JSON ({e})") from None


# --------------------------------------------------------------------------
# output


def _fmt(values):
    return ",".join("%.17g" % v for v in values)


class Output:
    """Single writer for every file of a run; records the paths it wrote."""

    def __init__(self, root: Path, figures: bool):
        self.root = Path(root)
        self.figures = figures
        self.files = []
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, rel):
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        self.files.append(str(rel))
        return p

    def fields(self, label, k, grid, time, rho, S, Q, hbar):
        """One snapshot: a comment line with time and units, a header, one row per node."""
        nodes = grid.nodes().reshape(-1, grid.dim)
        cols = np.column_stack([nodes, np.ravel(rho), np.ravel(S), np.ravel(Q)])
        names = [f"x{a}" for a in range(grid.dim)] + ["rho", "S", "Q"]
        lines = [f"# t={time:.17g} hbar={hbar:.17g} units=natural(mass,hbar,length as configured)",
                 ",".join(names)]
        lines += [_fmt(row) for row in cols]
        self._path(Path("fields") / label / f"snap_{k:04d}.csv").write_text("\n".join(lines) + "\n")

    def madelung(self, label, k, f, params):
        Q = madelung.quantum_potential(f, params)
        S = np.where(f.support, f.action, np.nan)
        self.fields(label, k, f.grid, f.time, f.rho, S, Q, params.hbar)

    def trajectories(self, label, times, positions):
        """Rows are times; columns ``time`` then ``p<j>_x<a>`` per sample and axis."""
        pos = np.asarray(positions)
        nt, n, dim = pos.shape
        names = ["time"] + [f"p{j}_x{a}" for j in range(n) for a in range(dim)]
        lines = [",".join(names)]
        lines += [_fmt(np.concatenate([[t], pos[i].ravel()])) for i, t in enumerate(times)]
        self._path(Path("trajectories") / f"{label}.csv").write_text("\n".join(lines) + "\n")

    def json(self, name, data):
        self._path(name).write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")

    def figure(self, name):
        return self._path(Path("figures") / name) if self.figures else None


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def _strided(seq, stride):
    idx = list(range(0, len(seq), stride))
    if idx[-1] != len(seq) - 1:
        idx.append(len(seq) - 1)
    return idx


# --------------------------------------------------------------------------
# runs


def _budget(cfg: RunConfig, **extra):
    return lab.SweepBudget(t_eval=cfg.t_final, dt=cfg.dt, snapshot_dt=cfg.snapshot_dt, solver=cfg.solver,
                           n_samples=cfg.n_samples, seed=cfg.seed, workers=cfg.threads,
                           max_points=cfg.max_points, **extra)


def _run_sweep(cfg, obj, out: Output, timer):
    params = obj["params"]
    scen = obj["scenario"]
    if cfg.kind == "linear":
        scenario = lab.LinearGaussian(scen)
    elif cfg.kind == "coherent":
        scenario = lab.HarmonicCoherent(scen)
    else:
        scenario = scen
    with timer("sweep"):
        rep = lab.hbar_sweep(scenario, cfg.hbars, _budget(cfg))
    counts = {"unwrap_defects": 0, "flagged_samples": 0, "caustics": 0}
    with timer("write"):
        for i, hb in enumerate(rep.hbar_values):
            art = rep.artifacts.get(hb, {})
            snaps = art.get("snapshots")
            if not snaps:
                continue
            p = params.with_hbar(hb)
            label = f"hbar_{i:02d}"
            for k in _strided(snaps, cfg.output_stride):
                out.madelung(label, k, snaps[k], p)
            counts["unwrap_defects"] += int(sum(f.defects for f in snaps))
            for mode, run in art.get("runs", {}).items():
                n = min(cfg.trajectory_samples, run.positions.shape[1])
                out.trajectories(f"{label}_{mode}", run.times, run.positions[:, :n])
                counts["flagged_samples"] += run.n_flagged
    report = rep.to_dict()
    _sweep_figures(report, rep, out)
    return report, counts


def _sweep_figures(report, rep, out: Output):
    from . import plotting

    if report["orders"] and (p := out.figure("convergence.png")):
        plotting.convergence(report, p)
    hb = rep.hbar_values[-1]
    art = rep.artifacts.get(hb, {})
    f = art.get("fields")
    if f is not None:
        p = out.figure("field_smallest_hbar.png")
        if p and f.grid.dim == 1:
            plotting.field_1d(f.grid.axes[0], f.rho, np.where(f.support, f.action, np.nan), f"hbar={hb:g}", p)
        elif p and f.grid.dim == 2:
            plotting.field_2d(f.grid, f.rho, f"hbar={hb:g}", p)
    for mode, run in art.get("runs", {}).items():
        if p := out.figure(f"trajectories_{mode}.png"):
            plotting.trajectories(run.times, run.positions, f"{mode}, hbar={hb:g}", p)


def _relative_endpoint_error(x, ref):
    """``|x - ref| / max(1, |ref|)`` per sample, maximized over samples."""
    err = np.linalg.norm(x - ref, axis=-1)
    scale = np.maximum(1.0, np.linalg.norm(ref, axis=-1))
    return float(np.max(err / scale))


def _run_bohm_1d(cfg, obj, out: Output, timer):
    params, prep, scen = obj["params"], obj["prep"], obj["scenario"]
    budget = _budget(cfg)
    with timer("propagate"):
        grid = lab.linear_grid(scen, cfg.t_final, cfg.max_points)
        psi0 = prepare_wavefunction(prep, params, grid)
        _, snaps = lab.evolve_tracked(psi0, params, budget, params.mass * grid.nodes() @ prep.v0)
    samples = bohm.sample_initial(prep, cfg.n_samples, cfg.seed)
    with timer("ensemble"):
        run = bohm.integrate_ensemble(snaps, samples, params, bohm.Standard())
    eta = samples.eta0[:, 0] if prep.dim == 1 else samples.eta0
    ref = analytic.bohm_trajectory_1d(eta, cfg.t_final, scen)
    ref = ref[:, None] if prep.dim == 1 else ref
    good = ~run.flagged
    ks = [bohm.ks_distance(run.positions[i][good], f) for i, f in enumerate(snaps)]
    report = {
        "grid_points": list(grid.points),
        "integration_dt": run.dt,
        "endpoint_relative_error": _relative_endpoint_error(run.positions[-1][good], ref[good]),
        "equivariance_max": max(ks),
        "equivariance_per_snapshot": ks,
        "flagged": run.n_flagged,
        "unwrap_defects": int(sum(f.defects for f in snaps)),
    }
    with timer("write"):
        for k in _strided(snaps, cfg.output_stride):
            out.madelung("solver", k, snaps[k], params)
        n = min(cfg.trajectory_samples, len(samples))
        out.trajectories("standard", run.times, run.positions[:, :n])
        _bohm_figures(out, snaps[-1], run)
    return report, {"unwrap_defects": report["unwrap_defects"], "flagged_samples": run.n_flagged, "caustics": 0}


def _bohm_figures(out, f, run):
    from . import plotting

    if p := out.figure("trajectories.png"):
        plotting.trajectories(run.times, run.positions, run.mode.name, p)
    if f.grid.dim == 1 and (p := out.figure("field_final.png")):
        plotting.field_1d(f.grid.axes[0], f.rho, np.where(f.support, f.action, np.nan), f"t={f.time:g}", p)


def _run_bohm_3d(cfg, obj, out: Output, timer):
    params, prep, scen = obj["params"], obj["prep"], obj["scenario"]
    samples = bohm.sample_initial(prep, cfg.n_samples, cfg.seed)
    n_snap = max(1, int(round(cfg.t_final / cfg.snapshot_dt)))
    times = np.linspace(0.0, cfg.t_final, n_snap + 1)
    fields_fn = lambda x, t: analytic.linear_fields(x, t, scen)  # noqa: E731
    report = {}
    runs = {}
    with timer("ensemble"):
        for mode in (bohm.Standard(), bohm.SpinCurrent()):
            vel = bohm.closed_form_velocity(fields_fn, params, mode)
            pos, frozen = bohm.integrate_velocity(vel, samples.x_start, times, cfg.dt)
            if isinstance(mode, bohm.SpinCurrent):
                ref = analytic.bohm_trajectory_3d_spin(samples.eta0, cfg.t_final, scen)
            else:
                ref = analytic.bohm_trajectory_1d(samples.eta0, cfg.t_final, scen)
            report[f"endpoint_relative_error_{mode.name}"] = _relative_endpoint_error(pos[-1], ref)
            report[f"flagged_{mode.name}"] = int(frozen.sum())
            runs[mode.name] = pos
    with timer("write"):
        for k in _strided(times, cfg.output_stride):
            t = times[k]
            sig = float(analytic.sigma_hbar(t, params, prep.sigma0))
            c = scen.center(t)
            grid = make_grid(3, [(ci - 6 * sig, ci + 6 * sig) for ci in c], [16, 16, 16])
            X = grid.nodes()
            rho, S = fields_fn(X, t)
            Q = analytic.gaussian_quantum_potential(X, c, sig, params)
            out.fields("closed_form", k, grid, t, rho, S, Q, params.hbar)
        n = min(cfg.trajectory_samples, len(samples))
        for name, pos in runs.items():
            out.trajectories(name, times, pos[:, :n])
        if p := out.figure("trajectories_spin.png"):
            from . import plotting

            plotting.trajectories(times, runs["spin-current"], "spin-current", p)
    flagged = sum(v for k, v in report.items() if k.startswith("flagged"))
    return report, {"unwrap_defects": 0, "flagged_samples": flagged, "caustics": 0}


def _run_local_hj(cfg, obj, out: Output, timer):
    params, prep = obj["params"], obj["prep"]
    dim = cfg.dim
    cl = SystemParams(params.mass, 0.0, params.potential, dim)
    potentials = {"free": Free(), "linear": Linear(tuple([1.0] * dim)), "configured": params.potential}
    report = {"local_hj_residual_max": {}, "guidance_residual_max": {}}
    with timer("local"):
        for name, pot in potentials.items():
            p = SystemParams(params.mass, 0.0, pot, dim)
            act = classical.local_action_evolve(prep.zeta0, prep.v0, p, cfg.t_final, cfg.dt)
            times = act.trajectory.times
            probe = times[:: max(1, len(times) // 20)]
            report["local_hj_residual_max"][name] = max(classical.local_hj_residual(act, p, t) for t in probe)
            report["guidance_residual_max"][name] = max(classical.guidance_residual(act, t) for t in probe)
            out.trajectories(f"local_{name}", times, act.trajectory.positions[:, None, :])
    t_grid = np.linspace(0.0, cfg.t_final, max(1, int(round(cfg.t_final / cfg.dt))) + 1)
    with timer("characteristics"):
        ch = classical.statistical_hj_evolve(prep, cl, t_grid, cfg.n_samples, cfg.seed, max_dt=cfg.dt)
    report["caustic_time"] = ch.caustic_time
    report["n_particles"] = ch.n_particles
    with timer("write"):
        sig = prep.sigma0
        bounds = [(z - 6 * sig - abs(v) * cfg.t_final, z + 6 * sig + abs(v) * cfg.t_final)
                  for z, v in zip(prep.zeta0, prep.v0)]
        grid = make_grid(dim, bounds, [64] * dim)
        X = grid.nodes().reshape(-1, dim)
        for k in _strided(t_grid, cfg.output_stride):
            t = t_grid[k]
            if ch.caustic_time is not None and t >= ch.caustic_time:
                break
            rho = ch.density(X, t)
            pos, S_p = ch.action_along(t)
            if dim == 1:
                order = np.argsort(pos[:, 0])
                S = np.interp(X[:, 0], pos[order, 0], S_p[order], left=np.nan, right=np.nan)
            else:
                S = griddata(pos, S_p, X, method="linear")
            out.fields("characteristics", k, grid, t, rho, S, np.zeros(len(X)), 0.0)
        n = min(cfg.trajectory_samples, ch.n_particles)
        out.trajectories("characteristics", ch.times[::cfg.output_stride], ch.positions[::cfg.output_stride, :n])
        if p := out.figure("characteristics.png"):
            from . import plotting

            plotting.trajectories(ch.times, ch.positions, "characteristics", p, max_lines=100)
    return report, {"unwrap_defects": 0, "flagged_samples": 0, "caustics": int(ch.caustic_time is not None)}


RUNNERS = {
    "linear": _run_sweep,
    "coherent": _run_sweep,
    "double-slit": _run_sweep,
    "bohm-1d": _run_bohm_1d,
    "bohm-3d-spin": _run_bohm_3d,
    "local-hj": _run_local_hj,
}


class _Timer:
    def __init__(self):
        self.stages = {}

    def __call__(self, name):
        timer = self

        class _Stage:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                timer.stages[name] = timer.stages.get(name, 0.0) + time.perf_counter() - self.t0

        return _Stage()


def _tolerances():
    from . import domain, schrodinger

    return {
        "mass_threshold_rel": madelung.MASS_THRESHOLD,
        "grid_sigma_margin": domain.SIGMA_MARGIN,
        "grid_min_points_per_sigma": domain.MIN_POINTS_PER_SIGMA,
        "norm_tol": domain.NORM_TOL,
        "boundary_tail_tol": schrodinger.PropagatorConfig(1.0, 0).tail_tol,
        "boundary_band": schrodinger.PropagatorConfig(1.0, 0).boundary_band,
        "bohm_interior_nodes": bohm.INTERIOR_NODES,
        "probe_offsets_sigma": lab.PROBE_OFFSETS.tolist(),
        "budget_factor": lab.BUDGET_FACTOR,
        "lsq_tol": lab.LSQ_TOL,
        "ks_tol": lab.SweepBudget().ks_tol,
        "adaptive_ode_tol": classical.ADAPTIVE_TOL,
        "jacobian_offset_sigma": classical.JACOBIAN_OFFSET,
        "coherent_phase_per_axis": analytic.COHERENT_PHASE_PER_AXIS,
    }


def run(raw: dict, out_dir, figures=True) -> dict:
    """Validate ``raw``, execute it and write all outputs to ``out_dir``."""
    cfg, obj = parse_config(raw)
    timer = _Timer()
    out = Output(out_dir, figures)
    report, counts = RUNNERS[cfg.kind](cfg, obj, out, timer)
    report = {"kind": cfg.kind, "config": asdict(cfg), "results": report}
    out.json("report.json", report)
    manifest = {
        "config": asdict(cfg),
        "versions": {
            "semiclassical": __version__,
            "numpy": np.__version__,
            "scipy": __import__("scipy").__version__,
            "python": platform.python_version(),
        },
        "tolerances": _tolerances(),
        "counts": counts,
        "files": sorted(out.files + ["manifest.json", "timing.json"]),
    }
    out.json("manifest.json", manifest)
    out.json("timing.json", {"wall_clock_s": timer.stages})
    return report


# --------------------------------------------------------------------------
# command line


def list_presets() -> str:
    width = max(len(k) for k in PRESETS)
    return "\n".join(f"{name:<{width}}  {p['description']}" for name, p in PRESETS.items())


def preset_config(name) -> dict:
    if name not in PRESETS:
        raise ValidationError(f"preset: unknown preset {name!r} (choose from {', '.join(PRESETS)})")
    return copy.deepcopy(PRESETS[name]["config"])


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="semiclassical", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="execute a preset or a JSON config")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path)
    src.add_argument("--preset")
    r.add_argument("--out", type=Path)
    r.add_argument("--seed", type=int)
    r.add_argument("--threads", type=int, help="parallel hbar points; 1 forces serial mode")
    r.add_argument("--no-figures", action="store_true")
    sub.add_parser("list-presets", help="show the available presets")
    return ap


def _fail(code, category, message):
    print(json.dumps({"error": category, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "list-presets":
        print(list_presets())
        return EXIT_OK
    try:
        if args.preset:
            raw = preset_config(args.preset)
            out = args.out or Path("runs") / args.preset
        else:
            raw = load_config(args.config)
            out = args.out or Path("runs") / args.config.stem
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.threads is not None:
            raw["threads"] = args.threads
        report = run(raw, out, figures=not args.no_figures)
    except ValidationError as e:
        return _fail(EXIT_VALIDATION, "validation", str(e))
    except NumericalError as e:
        return _fail(EXIT_NUMERICAL, "numerical", str(e))
    except OSError as e:
        return _fail(EXIT_IO, "io", str(e))
    except SemiclassicalError as e:
        return _fail(EXIT_NUMERICAL, "numerical", str(e))
    print(json.dumps({"status": "ok", "out": str(out), "kind": report["kind"]}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
