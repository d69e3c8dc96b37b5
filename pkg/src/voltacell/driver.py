"""Run orchestration: build a configured problem, integrate, record, persist.

A run directory receives the time-series CSV (written incrementally, so an
aborted run keeps its completed prefix), VTK snapshots at the configured
cadence, and a manifest recording the configuration hash, parameter values,
code version and unit scales.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import postprocess as post
from . import units
from . import __version__
from .config import ConfigError, ScenarioConfig, ScaledScenario, \
    nondimensionalize
from .geometry import build_interdigitated_domain
from .mesh import generate_layered_mesh
from .physics import CellProblem
from .state import Guard, History, SimState
from .stepping import StepReport, TimeGrid, step, warmup

log = logging.getLogger(__name__)


@dataclass
class StepExtras:
    """Per-step bookkeeping in internal units (for conservation checks)."""

    t: float
    int_cs: float            # integral of c_s over the electrodes
    int_ce: float            # integral of c_e over the electrolyte
    ibv_mid: float           # interface integral of I_BV at the accepted sweep
    theta_weighted: float    # rho*C_v-weighted mean temperature


@dataclass
class RunResult:
    config: ScenarioConfig
    scaled: ScaledScenario
    problem: CellProblem
    grid: TimeGrid | None
    records: list
    reports: list
    extras: list
    snapshots: list
    final_state: SimState
    warmup_reports: list = field(default_factory=list)
    out_dir: str | None = None
    csv_path: str | None = None
    manifest_path: str | None = None

    def power_density_w_per_m3(self) -> float:
        if self.config.t_end <= 0.0:
            raise ValueError("power density needs a nonzero run duration")
        times = [r.t_s for r in self.records]
        v_out = [r.v_out_v for r in self.records]
        dims = self.config.dims
        return post.power_density(times, v_out, self.config.i_app,
                                  cc_plus_len_m=dims.height,
                                  domain_area_m2=dims.width * dims.height,
                                  t_end_s=self.config.t_end)


def config_hash(config: ScenarioConfig) -> str:
    canonical = json.dumps(config.to_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


def build_problem(config: ScenarioConfig) -> tuple[CellProblem, ScaledScenario]:
    errs = config.validate()
    if errs:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errs))
    scaled = nondimensionalize(config)
    geom = build_interdigitated_domain(scaled.dims)
    mesh = generate_layered_mesh(geom, config.mesh)
    problem = CellProblem(
        mesh, scaled.mats, Guard(scaled.guard),
        mode=config.model, heat_convention=config.heat_convention,
        kappa_d_factor=config.kappa_d_factor,
        soc_init=(config.soc_init_anode, config.soc_init_cathode),
        solver=config.solver, rtol=config.solver_rtol,
        threads=config.threads)
    problem.set_load(scaled.i_app)
    return problem, scaled


def _write_manifest(path, config, scaled, status, n_done, snapshot_names):
    payload = {
        "tool": "voltacell",
        "version": __version__,
        "status": status,
        "config_hash": config_hash(config),
        "config": config.to_dict(),
        "scales": scaled.scales.describe(),
        "steps_completed": n_done,
        "snapshots": snapshot_names,
        "notes": ["power density is per unit out-of-plane depth",
                  "internal computation runs in the rescaled unit system"],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_scenario(config: ScenarioConfig, out_dir: str | None = None) -> RunResult:
    """Execute one scenario end to end.

    On failure the completed prefix of the trajectory (CSV rows, snapshots,
    manifest with status 'failed') is preserved on disk before re-raising.
    """
    problem, scaled = build_problem(config)
    scales = scaled.scales
    state0 = problem.initial_state()

    grid = None
    if config.t_end > 0.0:
        grid = TimeGrid.from_duration(scaled.t_end, scaled.dt)

    csv_path = manifest_path = None
    csv_fh = None
    snapshot_names: list[str] = []
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, "timeseries.csv")
        manifest_path = os.path.join(out_dir, "manifest.json")
        csv_fh = open(csv_path, "w", encoding="utf-8", newline="\n")
        csv_fh.write(post.CSV_HEADER + "\n")
        _write_manifest(manifest_path, config, scaled, "running", 0,
                        snapshot_names)

    def emit_snapshot(state: SimState, snapshots: list):
        snapshots.append((state.t, state.copy()))
        if out_dir is not None:
            t_s = scales.to_si(state.t, units.TIME)
            name = f"snapshot_{len(snapshot_names):04d}_t{t_s:.0f}s.vtk"
            post.export_vtk(problem, state, os.path.join(out_dir, name),
                            scales)
            snapshot_names.append(name)

    records: list = []
    reports: list[StepReport] = []
    extras: list[StepExtras] = []
    snapshots: list = []
    warm_reports: list = []
    n_done = 0
    status = "failed"
    try:
        if grid is not None and config.warmup_steps > 0:
            hist, warm_reports = warmup(
                problem, state0, grid, n_steps=config.warmup_steps,
                extra_iters=config.extra_fp_iters, fp_tol=config.fp_tol)
        else:
            hist = History(prev=state0)
        hist.prev.t = 0.0
        if hist.prev2 is not None:
            hist.prev2.t = -grid.dt

        rec0 = post.record_state(problem, hist.prev, scales, 0)
        records.append(rec0)
        if csv_fh:
            csv_fh.write(post.format_record(rec0) + "\n")
            csv_fh.flush()
        emit_snapshot(hist.prev, snapshots)

        if grid is not None and scaled.i_app != 0.0:
            # Consistent initialization of the quasi-static fields under the
            # applied load: they jump when the current switches on, and
            # averaging the first step across that jump would cost one order
            # of accuracy.  The recorded t=0 state stays the pre-load one.
            d0 = {k: hist.prev[k] for k in problem.D_FIELDS}
            s_loaded = problem.stage2(0.0, d0, hist.prev)
            hist = History(prev=SimState(0.0, {**d0, **s_loaded}))

        if grid is not None:
            ones_cs = np.ones(problem.s_cs.ndof)
            ones_ce = np.ones(problem.s_ce.ndof)
            next_snap = scaled.snapshot_every
            for n in range(1, grid.n_steps + 1):
                state, rep = step(problem, hist, grid, n,
                                  extra_iters=config.extra_fp_iters,
                                  fp_tol=config.fp_tol)
                hist.push(state)
                reports.append(rep)
                extras.append(StepExtras(
                    t=state.t,
                    int_cs=float(ones_cs @ (problem.m_cs @ state["c_s"])),
                    int_ce=float(ones_ce @ (problem.m_ce @ state["c_e"])),
                    ibv_mid=rep.ibv_integral,
                    theta_weighted=post.weighted_temperature(
                        problem, state["theta"]),
                ))
                rec = post.record_state(problem, state, scales,
                                        rep.clamp_events)
                records.append(rec)
                if csv_fh:
                    csv_fh.write(post.format_record(rec) + "\n")
                    csv_fh.flush()
                n_done = n
                is_last = n == grid.n_steps
                if state.t >= next_snap - 1e-9 * scaled.dt or is_last:
                    emit_snapshot(state, snapshots)
                    while next_snap <= state.t + 1e-9 * scaled.dt:
                        next_snap += scaled.snapshot_every
        status = "completed"
        return RunResult(config=config, scaled=scaled, problem=problem,
                         grid=grid, records=records, reports=reports,
                         extras=extras, snapshots=snapshots,
                         final_state=hist.prev,
                         warmup_reports=warm_reports, out_dir=out_dir,
                         csv_path=csv_path, manifest_path=manifest_path)
    finally:
        if csv_fh:
            csv_fh.close()
        if manifest_path:
            _write_manifest(manifest_path, config, scaled, status, n_done,
                            snapshot_names)
