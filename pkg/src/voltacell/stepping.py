"""Two-stage staggered semi-implicit midpoint time integration.

Each step first predicts the new-time solution (explicit Euler on the very
first step, two-point linear extrapolation afterwards), then:

  stage 1: advances the parabolic fields with the midpoint rule, nonlinear
           coefficients frozen at the predicted midpoint;
  stage 2: solves the quasi-static fields at the new time against the
           predicted (or latest) values of their peers.

The pair of stages is then re-swept a configurable number of extra fixed-point
iterations (the fresh iterate replacing the predictor midpoint), with early
exit once the relative update drops below a tolerance.  Backends provide
``stage1``/``stage2``/``d_rate``/``initial_state`` plus field name tuples;
the battery problem and the linear verification surrogate both implement it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .solve import SpdFactor
from .state import History, SimState, extrapolate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform step partition of [0, t_end]: t_n = n * dt."""

    dt: float
    n_steps: int

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("time step must be positive")
        if self.n_steps < 1:
            raise ValueError("need at least one time step")

    @property
    def t_end(self) -> float:
        return self.n_steps * self.dt

    def t(self, n: int) -> float:
        return n * self.dt

    @classmethod
    def from_duration(cls, t_end: float, dt: float) -> "TimeGrid":
        n = round(t_end / dt)
        if n < 1 or abs(n * dt - t_end) > 1e-9 * max(t_end, dt):
            raise ValueError(
                f"t_end = {t_end:g} is not an integer number of steps of "
                f"dt = {dt:g}")
        return cls(dt=dt, n_steps=n)


@dataclass
class StepReport:
    n: int
    t: float
    sweeps: int
    max_update: float
    update_history: list = field(default_factory=list)
    clamp_events: int = 0
    ibv_integral: float = 0.0
    eta_ibv_min: float = 0.0
    eta_max: float = 0.0


def predict(backend, history: History, dt: float) -> SimState:
    """Predictor for the new-time state.

    With two history levels both field groups extrapolate linearly; on the
    first step the dynamic fields take an Euler step and the quasi-static
    fields re-solve against that prediction.
    """
    prev = history.prev
    t_new = prev.t + dt
    if history.depth >= 2:
        return extrapolate(prev, history.prev2, t_new)
    rates = backend.d_rate(prev)
    fields = {k: prev[k] + dt * rates[k] for k in backend.D_FIELDS}
    pred = SimState(t_new, {**{k: prev[k].copy() for k in backend.S_FIELDS},
                            **fields})
    if backend.S_FIELDS:
        s_new = backend.stage2(t_new, fields, prev)
        pred.fields.update(s_new)
    return pred


def step(backend, history: History, grid: TimeGrid, n: int,
         extra_iters: int = 4, fp_tol: float = 1e-8) -> tuple[SimState, StepReport]:
    """Advance one step: predict, correct, then extra fixed-point sweeps."""
    prev = history.prev
    dt = grid.dt
    t_new = prev.t + dt
    guard = getattr(backend, "guard", None)
    scales = getattr(backend, "field_scales", None)
    clamp0 = guard.log.events if guard else 0

    iterate = predict(backend, history, dt)
    updates = []
    audit = None
    for sweep in range(1 + max(extra_iters, 0)):
        mid = prev.midpoint(iterate)
        d_new, audit = backend.stage1(prev, mid, dt)
        s_new = backend.stage2(t_new, d_new, iterate) if backend.S_FIELDS else {}
        new_state = SimState(t_new, {**d_new, **s_new})
        delta = new_state.max_rel_diff(iterate, scales)
        updates.append(delta)
        iterate = new_state
        if delta < fp_tol:
            break
    report = StepReport(
        n=n, t=t_new, sweeps=len(updates), max_update=updates[-1],
        update_history=updates,
        clamp_events=(guard.log.events - clamp0) if guard else 0,
        ibv_integral=getattr(audit, "ibv_integral", 0.0),
        eta_ibv_min=getattr(audit, "eta_ibv_min", 0.0),
        eta_max=getattr(audit, "eta_max", 0.0),
    )
    log.info("step %5d  t=%-10.4g sweeps=%d  max_update=%.3e  clamps=%d",
             n, t_new, report.sweeps, report.max_update, report.clamp_events)
    return iterate, report


def warmup(backend, state0: SimState, grid: TimeGrid, n_steps: int = 2,
           extra_iters: int = 4, fp_tol: float = 1e-8) -> tuple[History, list]:
    """Run unloaded steps to fill the history levels at equilibrium.

    The warm-up steps run at negative times so the loaded phase starts at
    t = 0 with a fully populated two-level history.
    """
    reports = []
    if n_steps == 0:
        return History(prev=state0), reports
    start = state0.copy()
    start.t = -n_steps * grid.dt
    saved_load = getattr(backend, "i_app", None)
    if hasattr(backend, "set_load"):
        backend.set_load(0.0)
    try:
        hist = History(prev=start)
        for k in range(1, n_steps + 1):
            state, rep = step(backend, hist, grid, k - n_steps - 1,
                              extra_iters=extra_iters, fp_tol=fp_tol)
            hist.push(state)
            reports.append(rep)
    finally:
        if saved_load is not None:
            backend.set_load(saved_load)
    return hist, reports


class LinearSurrogate:
    """Fixed-coefficient linear system M d' + K d = b for scheme verification.

    Runs through the identical predictor/midpoint code path as the coupled
    problem, with no quasi-static stage.
    """

    D_FIELDS = ("d",)
    S_FIELDS = ()

    def __init__(self, mass, stiffness, load, d0, solver: str = "direct"):
        self.mass = mass
        self.stiffness = stiffness
        self.load = np.asarray(load, dtype=float)
        self.d0 = np.asarray(d0, dtype=float)
        self.solver = solver
        self._m_factor = SpdFactor(mass, method=solver)
        self._dt_ops = None

    def initial_state(self) -> SimState:
        return SimState(0.0, {"d": self.d0.copy()})

    def d_rate(self, state: SimState) -> dict:
        return {"d": self._m_factor.solve(self.load - self.stiffness @ state["d"])}

    def stage1(self, prev: SimState, mid: SimState, dt: float):
        if self._dt_ops is None or self._dt_ops[0] != dt:
            lhs = SpdFactor(self.mass + 0.5 * dt * self.stiffness,
                            method=self.solver)
            self._dt_ops = (dt, lhs)
        _, lhs = self._dt_ops
        # increment form of the midpoint update (see CellProblem.stage1)
        delta = lhs.solve(dt * (self.load - self.stiffness @ prev["d"]))
        return {"d": prev["d"] + delta}, None

    def stage2(self, t, d_new, s_guess):
        return {}


def integrate_linear(surrogate: LinearSurrogate, grid: TimeGrid,
                     extra_iters: int = 0) -> SimState:
    """March the surrogate over the whole grid with the two-stage scheme."""
    hist = History(prev=surrogate.initial_state())
    for n in range(1, grid.n_steps + 1):
        state, _ = step(surrogate, hist, grid, n, extra_iters=extra_iters)
        hist.push(state)
    return hist.prev
