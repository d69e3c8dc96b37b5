"""Discrete operators of the coupled cell model.

Builds the six weak equations on the staggered layout: the parabolic fields
(theta, c_s, c_e) are advanced with the semi-implicit midpoint rule, where
nonlinear coefficients (solid diffusivity, exchange current, open-circuit
potential, overpotential, Ohmic sources) are frozen at a predicted midpoint
and the unknown enters linearly as the old/new average.  The quasi-static
fields (phi_s, phi_e, u) solve elliptic systems; the Butler-Volmer interface
current is linearized in the potential equations, turning into an interface
mass term with coefficient I_c*F/(R*theta) plus load terms, while the full
nonlinear sinh expression feeds the concentration and heat loads.

Sign conventions: the interface normal points from the electrode into the
electrolyte; the reaction current I_BV is positive when lithium leaves the
electrode.  Under the default 'physical' heat convention the bulk Ohmic
source is -i.grad(phi) (nonnegative in each conductor) and the interface
polarization heat enters as +eta*I_BV (nonnegative); the 'reversed'
convention flips both signs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import assemble as asm
from . import spaces as sps
from .geometry import ANODE, CATHODE, ELYTE, CC_PLUS, TAG_NAMES
from .materials import MaterialSet, hooke_plane_strain, hydrostatic_pressure, \
    stress_diffusivity, von_mises, StressState
from .mesh import Mesh
from .solve import SpdFactor
from .state import Guard, SimState

log = logging.getLogger(__name__)

SINH_ARG_LIMIT = 500.0


class DivergenceError(RuntimeError):
    """Raised when the Butler-Volmer argument leaves the representable range."""


def exchange_current(c_s, c_e, electrode, mats: MaterialSet):
    """I_c = k_BV * F * sqrt(c_e) * sqrt(c_max - c_s) * sqrt(c_s)."""
    c_s = np.asarray(c_s, dtype=float)
    c_e = np.asarray(c_e, dtype=float)
    if np.any(c_e < 0.0) or np.any(c_s < 0.0) or np.any(c_s > electrode.c_max):
        raise ValueError("exchange current needs c_e >= 0 and 0 <= c_s <= c_max "
                         "(bound guarding should have prevented this)")
    out = (mats.k_bv * mats.faraday * np.sqrt(c_e)
           * np.sqrt(electrode.c_max - c_s) * np.sqrt(c_s))
    return out if out.ndim else float(out)


def butler_volmer_current(i_c, eta, theta, mats: MaterialSet):
    """I_BV = 2 I_c sinh(F eta / (2 R theta)); odd and monotone in eta."""
    arg = mats.faraday * np.asarray(eta, dtype=float) \
        / (2.0 * mats.gas_constant * np.asarray(theta, dtype=float))
    if np.any(np.abs(arg) > SINH_ARG_LIMIT):
        raise DivergenceError(
            f"Butler-Volmer argument |F*eta/(2*R*theta)| exceeded "
            f"{SINH_ARG_LIMIT:g}; the iteration is diverging")
    out = 2.0 * np.asarray(i_c, dtype=float) * np.sinh(arg)
    return out if out.ndim else float(out)


def current_density(medium: str, grad_phi, mats: MaterialSet, c_e=None,
                    grad_c_e=None, theta=None, kappa_d_factor: float = 1.0):
    """Constitutive current density: Ohmic in the solid, with the
    concentration-driven term in the electrolyte."""
    grad_phi = np.asarray(grad_phi, dtype=float)
    if medium in ("sa", "sc"):
        return -mats.electrode(medium).conductivity * grad_phi
    if medium != "e":
        raise KeyError(f"unknown medium {medium!r}")
    c_e = np.asarray(c_e, dtype=float)
    if np.any(c_e <= 0.0):
        raise ValueError("electrolyte current density needs c_e > 0")
    from .materials import diffusional_conductivity
    kd = diffusional_conductivity(theta, mats) * kappa_d_factor
    return (-mats.electrolyte.conductivity * grad_phi
            - kd * np.asarray(grad_c_e, dtype=float) / c_e)


def ohmic_heat(i, grad_phi, convention: str = "physical"):
    """Volumetric Ohmic source from a current density and potential gradient."""
    dot = (np.asarray(i, dtype=float) * np.asarray(grad_phi, dtype=float)).sum(axis=-1)
    return -dot if convention == "physical" else dot


@dataclass
class InterfaceState:
    """Traces and derived kinetics at every interface quadrature point.

    Arrays are lists aligned with the problem's interface edge list; each
    entry has one value per edge quadrature point.
    """

    tags: list
    theta: list
    c_s: list
    c_e: list
    phi_s: list
    phi_e: list
    c_hat: list
    ocp: list
    eta: list
    i_c: list
    i_bv: list
    coeff: list           # I_c F / (R theta), the linearized-BV coefficient

    def ibv_integral(self, edges) -> float:
        return asm.integrate_edges(edges, self.i_bv)

    def eta_ibv_min(self) -> float:
        return min((float((e * i).min()) for e, i in zip(self.eta, self.i_bv)),
                   default=0.0)

    def eta_max_abs(self) -> float:
        return max((float(np.abs(e).max()) for e in self.eta), default=0.0)


@dataclass
class StageAudit:
    """Per-sweep diagnostics recorded alongside the assembled systems."""

    ibv_integral: float = 0.0
    eta_ibv_min: float = 0.0
    eta_max: float = 0.0
    clamp_events: int = 0


class CellProblem:
    """Spaces, cached operators and system builders for one configured cell.

    All inputs (mesh, materials) must already be expressed in the internal
    unit system.  ``mode`` selects the full thermo-electro-chemo-mechanical
    model or the isothermal strain-free electrochemical reduction.
    """

    D_FIELDS = ("theta", "c_s", "c_e")
    S_FIELDS = ("phi_s", "phi_e", "u")

    def __init__(self, mesh: Mesh, mats: MaterialSet, guard: Guard,
                 mode: str = "full", heat_convention: str = "physical",
                 kappa_d_factor: float = 1.0,
                 soc_init: tuple[float, float] = (0.5, 0.5),
                 solver: str = "direct", rtol: float = 1e-10,
                 threads: int = 1):
        if mode not in ("full", "electrochemical"):
            raise ValueError(f"unknown model mode {mode!r}")
        if heat_convention not in ("physical", "reversed"):
            raise ValueError(f"unknown heat convention {heat_convention!r}")
        self.mesh = mesh
        self.mats = mats
        self.guard = guard
        self.mode = mode
        self.heat_convention = heat_convention
        self.kappa_d_factor = kappa_d_factor
        self.soc_init = soc_init
        self.solver = solver
        self.rtol = rtol
        self.threads = max(int(threads), 1)
        self.i_app = 0.0

        grid = sps.NodeGrid.build(mesh)
        master = sps.build_master_groups(mesh, grid)
        self.grid, self.master = grid, master

        def space(name, sel, arity=1, bcs=()):
            return sps.build_field_space(mesh, sel, arity, bcs, name=name,
                                         grid=grid, master=master)

        self.s_th = space("theta", sps.OMEGA)
        self.s_cs = space("c_s", sps.OMEGA_S)
        self.s_ce = space("c_e", sps.OMEGA_E)
        self.s_ps = space("phi_s", sps.OMEGA_S,
                          bcs=[sps.EssentialBC("cc_minus", 0, 0.0)])
        self.s_pe = space("phi_e", sps.OMEGA_E)
        self.s_u = space("u", sps.OMEGA_S, arity=2, bcs=[
            sps.EssentialBC("cc_minus", 0, 0.0),
            sps.EssentialBC("cc_plus", 0, 0.0),
            sps.EssentialBC("top", 1, 0.0),
            sps.EssentialBC("bottom", 1, 0.0),
        ])
        self.spaces = {"theta": self.s_th, "c_s": self.s_cs, "c_e": self.s_ce,
                       "phi_s": self.s_ps, "phi_e": self.s_pe, "u": self.s_u}

        a, c, e = mats.anode, mats.cathode, mats.electrolyte
        rho_cv = {ANODE: a.rho_cv, CATHODE: c.rho_cv, ELYTE: e.rho_cv}
        lam = {ANODE: a.thermal_k, CATHODE: c.thermal_k, ELYTE: e.thermal_k}
        gam = {ANODE: a.conductivity, CATHODE: c.conductivity}
        self.m_th = asm.assemble_mass(self.s_th, rho_cv)
        self.k_th = asm.assemble_stiffness(self.s_th, lam, "thermal conductivity")
        self.m_cs = asm.assemble_mass(self.s_cs, 1.0)
        self.m_ce = asm.assemble_mass(self.s_ce, 1.0)
        self.k_ce = asm.assemble_stiffness(self.s_ce, e.diffusivity,
                                           "electrolyte diffusivity")
        self.k_ps_bulk = asm.assemble_stiffness(self.s_ps, gam,
                                                "electronic conductivity")
        self.k_pe_bulk = asm.assemble_stiffness(self.s_pe, e.conductivity,
                                                "ionic conductivity")
        ga, ka = a.lame
        gc, kc = c.lame
        self.k_u = asm.assemble_elasticity(
            self.s_u, {ANODE: ga, CATHODE: gc}, {ANODE: ka, CATHODE: kc})
        self.k_u_red = asm.constrain(self.s_u, self.k_u)
        self._u_factor = SpdFactor(self.k_u_red, method=solver, rtol=rtol)

        # Mass factorizations for rate evaluation (Euler predictor).
        self._m_factors = {
            "theta": SpdFactor(self.m_th, method=solver, rtol=rtol),
            "c_s": SpdFactor(self.m_cs, method=solver, rtol=rtol),
            "c_e": SpdFactor(self.m_ce, method=solver, rtol=rtol),
        }

        self.iface_edges = mesh.interface_edges()
        if not self.iface_edges:
            raise ValueError("mesh carries no interface edges")
        self.iface_tags = [int(mesh.cell_tag[e.solid_cell(mesh.cell_tag)])
                           for e in self.iface_edges]
        self.cc_plus_edges = mesh.boundary_edges(CC_PLUS)
        self.cc_plus_len = asm.boundary_measure(mesh, CC_PLUS)
        self.domain_area = asm.region_area(self.s_th)

        # Strain-free reference concentrations (initial state of charge).
        self.c_s_ref = {ANODE: soc_init[0] * a.c_max,
                        CATHODE: soc_init[1] * c.c_max}
        self._dt_ops = None

        # Characteristic magnitudes for relative-update norms; the
        # displacement (zero at rest) is measured against the cell height.
        cell_height = float(mesh.y[-1] - mesh.y[0])
        volt_scale = abs(c.ocp(soc_init[1]) - a.ocp(soc_init[0]))
        self.field_scales = {
            "theta": mats.theta_ref,
            "c_s": max(a.c_max, c.c_max),
            "c_e": mats.c_e_init,
            "phi_s": volt_scale,
            "phi_e": volt_scale,
            "u": cell_height,
        }

    # ------------------------------------------------------------------
    # State handling
    # ------------------------------------------------------------------

    def nodes_of_tag(self, space: sps.FieldSpace, tag: int) -> np.ndarray:
        picks = []
        for g, rows, dofs in zip(space.master, space.member_rows,
                                 space.cell_node_dofs):
            if len(rows) == 0:
                continue
            sel = g.tag[rows] == tag
            if np.any(sel):
                picks.append(np.unique(dofs[sel]))
        return np.unique(np.concatenate(picks)) if picks else np.array([], int)

    def initial_state(self) -> SimState:
        """Uniform equilibrium start: zero strain, reference temperature,
        potentials matching the open-circuit values at the initial SoC."""
        soc_a, soc_c = self.soc_init
        mats = self.mats
        ocp_a = mats.anode.ocp(soc_a)
        ocp_c = mats.cathode.ocp(soc_c)

        c_s = self.s_cs.zeros()
        c_s[self.nodes_of_tag(self.s_cs, ANODE)] = soc_a * mats.anode.c_max
        c_s[self.nodes_of_tag(self.s_cs, CATHODE)] = soc_c * mats.cathode.c_max
        phi_s = self.s_ps.zeros()
        phi_s[self.nodes_of_tag(self.s_ps, CATHODE)] = ocp_c - ocp_a
        fields = {
            "theta": self.s_th.constant(mats.theta_ref),
            "c_s": c_s,
            "c_e": self.s_ce.constant(mats.c_e_init),
            "phi_s": self.s_ps.apply_constraints(phi_s),
            "phi_e": self.s_pe.constant(-ocp_a),
            "u": self.s_u.zeros(),
        }
        return SimState(0.0, fields)

    def set_load(self, i_app: float):
        self.i_app = float(i_app)

    # ------------------------------------------------------------------
    # Interface kinetics
    # ------------------------------------------------------------------

    def interface_state(self, theta_v, cs_v, ce_v, ps_v, pe_v) -> InterfaceState:
        mats = self.mats
        out = InterfaceState(tags=[], theta=[], c_s=[], c_e=[], phi_s=[],
                             phi_e=[], c_hat=[], ocp=[], eta=[], i_c=[],
                             i_bv=[], coeff=[])
        for edge, tag in zip(self.iface_edges, self.iface_tags):
            electrode = mats.electrode(TAG_NAMES[tag])
            th = asm.edge_trace(self.s_th, theta_v, edge)
            cs = self.guard.c_s(asm.edge_trace(self.s_cs, cs_v, edge),
                                electrode.c_max,
                                f"c_s trace ({TAG_NAMES[tag]} interface)")
            ce = self.guard.c_e(asm.edge_trace(self.s_ce, ce_v, edge),
                                "c_e trace (interface)")
            ps = asm.edge_trace(self.s_ps, ps_v, edge)
            pe = asm.edge_trace(self.s_pe, pe_v, edge)
            c_hat = cs / electrode.c_max
            ocp = electrode.ocp(c_hat, clamp=True)
            eta = ps - pe - ocp
            i_c = exchange_current(cs, ce, electrode, mats)
            i_bv = butler_volmer_current(i_c, eta, th, mats)
            out.tags.append(tag)
            out.theta.append(th)
            out.c_s.append(cs)
            out.c_e.append(ce)
            out.phi_s.append(ps)
            out.phi_e.append(pe)
            out.c_hat.append(c_hat)
            out.ocp.append(ocp)
            out.eta.append(eta)
            out.i_c.append(i_c)
            out.i_bv.append(i_bv)
            out.coeff.append(i_c * mats.faraday / (mats.gas_constant * th))
        return out

    def interface_state_of(self, state: SimState) -> InterfaceState:
        return self.interface_state(state["theta"], state["c_s"], state["c_e"],
                                    state["phi_s"], state["phi_e"])

    # ------------------------------------------------------------------
    # Pointwise evaluations on the volume
    # ------------------------------------------------------------------

    def _guarded_cs_qp(self, cs_v) -> list:
        arrays = asm.eval_qp(self.s_cs, cs_v)
        out = []
        for g, arr in zip(self.master, arrays):
            a = arr.copy()
            for tag in (ANODE, CATHODE):
                rows = np.nonzero(g.tag == tag)[0]
                if len(rows):
                    cmax = self.mats.electrode(TAG_NAMES[tag]).c_max
                    a[rows] = self.guard.c_s(a[rows], cmax,
                                             f"c_s volume ({TAG_NAMES[tag]})")
            out.append(a)
        return out

    def solid_pressure_qp(self, u_v, theta_v, cs_qp) -> list:
        """Hydrostatic pressure at solid quadrature points (zeros elsewhere)."""
        if self.mode == "electrochemical":
            return [np.zeros((g.n_elems, len(g.ref.qw))) for g in self.master]
        strains = asm.eval_strain_qp(self.s_u, u_v)
        th_qp = asm.eval_qp(self.s_th, theta_v)
        out = []
        for g, eps, th, cs in zip(self.master, strains, th_qp, cs_qp):
            pi = np.zeros((g.n_elems, len(g.ref.qw)))
            for tag in (ANODE, CATHODE):
                rows = np.nonzero(g.tag == tag)[0]
                if len(rows) == 0:
                    continue
                electrode = self.mats.electrode(TAG_NAMES[tag])
                stress = hooke_plane_strain(
                    eps[rows, :, 0], eps[rows, :, 1], eps[rows, :, 2],
                    th[rows], cs[rows], electrode, self.mats,
                    self.c_s_ref[tag])
                pi[rows] = hydrostatic_pressure(stress)
            out.append(pi)
        return out

    def solid_diffusivity_qp(self, mid: SimState) -> list:
        cs_qp = self._guarded_cs_qp(mid["c_s"])
        pi_qp = self.solid_pressure_qp(mid["u"], mid["theta"], cs_qp)
        out = []
        for g, cs, pi in zip(self.master, cs_qp, pi_qp):
            d = np.ones((g.n_elems, len(g.ref.qw)))
            for tag in (ANODE, CATHODE):
                rows = np.nonzero(g.tag == tag)[0]
                if len(rows):
                    electrode = self.mats.electrode(TAG_NAMES[tag])
                    d[rows] = stress_diffusivity(cs[rows], pi[rows],
                                                 electrode, self.mats)
            out.append(d)
        return out

    def heat_source_qp(self, mid: SimState) -> list:
        """Ohmic volumetric source at quadrature points (master-aligned)."""
        from .materials import diffusional_conductivity
        mats = self.mats
        gps = asm.eval_grad_qp(self.s_ps, mid["phi_s"])
        gpe = asm.eval_grad_qp(self.s_pe, mid["phi_e"])
        gce = asm.eval_grad_qp(self.s_ce, mid["c_e"])
        ce_qp = asm.eval_qp(self.s_ce, mid["c_e"])
        th_qp = asm.eval_qp(self.s_th, mid["theta"])
        sign = 1.0 if self.heat_convention == "physical" else -1.0
        out = []
        for g, gs, ge, gc, ce, th in zip(self.master, gps, gpe, gce,
                                         ce_qp, th_qp):
            q = np.zeros((g.n_elems, len(g.ref.qw)))
            for tag in (ANODE, CATHODE):
                rows = np.nonzero(g.tag == tag)[0]
                if len(rows):
                    gamma = mats.electrode(TAG_NAMES[tag]).conductivity
                    q[rows] = gamma * (gs[rows] ** 2).sum(axis=-1)
            rows = np.nonzero(g.tag == ELYTE)[0]
            if len(rows):
                ce_r = self.guard.c_e(ce[rows], "c_e volume (heat source)")
                kd = diffusional_conductivity(th[rows], mats) \
                    * self.kappa_d_factor
                cross = (gc[rows] * ge[rows]).sum(axis=-1) / ce_r
                q[rows] = mats.electrolyte.conductivity \
                    * (ge[rows] ** 2).sum(axis=-1) + kd * cross
            out.append(sign * q)
        return out

    # ------------------------------------------------------------------
    # Stage 1: parabolic systems at the midpoint
    # ------------------------------------------------------------------

    def _prepare_dt(self, dt: float):
        if self._dt_ops is not None and self._dt_ops[0] == dt:
            return self._dt_ops[1]
        ops = {}
        a_ce = self.m_ce + 0.5 * dt * self.k_ce
        ops["ce_factor"] = SpdFactor(a_ce, method=self.solver, rtol=self.rtol)
        a_th = self.m_th + 0.5 * dt * self.k_th
        ops["th_factor"] = SpdFactor(a_th, method=self.solver, rtol=self.rtol)
        self._dt_ops = (dt, ops)
        return ops

    def iface_loads(self, ist: InterfaceState) -> dict:
        mats = self.mats
        inv_f = 1.0 / mats.faraday
        t_plus = mats.electrolyte.t_plus
        sign = 1.0 if self.heat_convention == "physical" else -1.0
        cs_load = asm.assemble_edge_load(
            self.s_cs, self.iface_edges, [-i * inv_f for i in ist.i_bv])
        ce_load = asm.assemble_edge_load(
            self.s_ce, self.iface_edges,
            [(1.0 - t_plus) * inv_f * i for i in ist.i_bv])
        heat_load = asm.assemble_edge_load(
            self.s_th, self.iface_edges,
            [sign * e * i for e, i in zip(ist.eta, ist.i_bv)])
        return {"c_s": cs_load, "c_e": ce_load, "theta": heat_load}

    def stage1(self, prev: SimState, mid: SimState, dt: float):
        """Solve the three parabolic updates; returns (new d-fields, audit).

        Each midpoint system (M + dt/2 K) d_n = (M - dt/2 K) d_prev + dt b is
        solved in increment form, (M + dt/2 K) delta = dt (b - K d_prev),
        which avoids the cancellation of the large constant background in the
        explicit operator.  Assembly runs serially (it shares the guard's
        clamp log); the independent solves may run concurrently when
        ``threads`` allows.
        """
        ops = self._prepare_dt(dt)
        clamps_before = self.guard.log.events
        ist = self.interface_state_of(mid)
        loads = self.iface_loads(ist)

        d_qp = self.solid_diffusivity_qp(mid)
        k_cs = asm.assemble_stiffness(self.s_cs, d_qp, "solid diffusivity")
        a_cs = self.m_cs + 0.5 * dt * k_cs
        b_cs = dt * (loads["c_s"] - k_cs @ prev["c_s"])
        cs_factor = SpdFactor(a_cs, method=self.solver, rtol=self.rtol)
        b_ce = dt * (loads["c_e"] - self.k_ce @ prev["c_e"])

        solves = {"c_s": (cs_factor, b_cs), "c_e": (ops["ce_factor"], b_ce)}
        if self.mode == "full":
            q_load = asm.assemble_load(self.s_th, self.heat_source_qp(mid))
            b_th = dt * (q_load + loads["theta"] - self.k_th @ prev["theta"])
            solves["theta"] = (ops["th_factor"], b_th)

        if self.threads > 1 and len(solves) > 1:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(
                    max_workers=min(len(solves), self.threads)) as pool:
                futures = {k: pool.submit(f.solve, b)
                           for k, (f, b) in solves.items()}
                deltas = {k: fut.result() for k, fut in futures.items()}
        else:
            deltas = {k: f.solve(b) for k, (f, b) in solves.items()}
        new = {k: prev[k] + d for k, d in deltas.items()}
        if self.mode != "full":
            new["theta"] = prev["theta"].copy()

        audit = StageAudit(
            ibv_integral=ist.ibv_integral(self.iface_edges),
            eta_ibv_min=ist.eta_ibv_min(),
            eta_max=ist.eta_max_abs(),
            clamp_events=self.guard.log.events - clamps_before,
        )
        return new, audit

    def d_rate(self, state: SimState) -> dict:
        """f_d = M^-1 (-K d + b) at the given state (Euler predictor)."""
        ist = self.interface_state_of(state)
        loads = self.iface_loads(ist)
        rates = {}
        d_qp = self.solid_diffusivity_qp(state)
        k_cs = asm.assemble_stiffness(self.s_cs, d_qp, "solid diffusivity")
        rates["c_s"] = self._m_factors["c_s"].solve(
            -(k_cs @ state["c_s"]) + loads["c_s"])
        rates["c_e"] = self._m_factors["c_e"].solve(
            -(self.k_ce @ state["c_e"]) + loads["c_e"])
        if self.mode == "full":
            q_load = asm.assemble_load(self.s_th, self.heat_source_qp(state))
            rates["theta"] = self._m_factors["theta"].solve(
                -(self.k_th @ state["theta"]) + q_load + loads["theta"])
        else:
            rates["theta"] = np.zeros_like(state["theta"])
        return rates

    # ------------------------------------------------------------------
    # Stage 2: quasi-static potentials and displacement
    # ------------------------------------------------------------------

    def _kappa_d_grad_load(self, theta_v, ce_v) -> np.ndarray:
        """(grad psi_e, kappa_D grad ln c_e) load vector (full DOFs)."""
        from .materials import diffusional_conductivity
        th_qp = asm.eval_qp(self.s_th, theta_v)
        ce_qp = asm.eval_qp(self.s_ce, ce_v)
        gce = asm.eval_grad_qp(self.s_ce, ce_v)
        kd_vec = []
        for g, th, ce, gc in zip(self.master, th_qp, ce_qp, gce):
            vec = np.zeros_like(gc)
            rows = np.nonzero(g.tag == ELYTE)[0]
            if len(rows):
                ce_r = self.guard.c_e(ce[rows], "c_e volume (kappa_D load)")
                kd = diffusional_conductivity(th[rows], self.mats) \
                    * self.kappa_d_factor
                vec[rows] = kd[:, :, None] * gc[rows] / ce_r[:, :, None]
            kd_vec.append(vec)
        return asm.assemble_grad_load(self.s_pe, kd_vec)

    def potential_systems(self, theta_v, cs_v, ce_v, ps_guess, pe_guess):
        """Assemble the linearized phi_s and phi_e systems (reduced).

        One lagged assembly: each potential's load uses the other's guessed
        trace (stage 2 iterates this pairing to convergence).
        """
        ist = self.interface_state(theta_v, cs_v, ce_v, ps_guess, pe_guess)
        if max(float(np.max(c)) for c in ist.coeff) <= 0.0:
            raise ValueError(
                "interface coefficient I_c*F/(R*theta) vanishes everywhere: "
                "the phi_e system is singular")

        a_ps = self.k_ps_bulk + asm.assemble_edge_mass(
            self.s_ps, self.iface_edges, ist.coeff)
        b_ps = asm.assemble_edge_load(self.s_ps, self.cc_plus_edges,
                                      -self.i_app)
        b_ps += asm.assemble_edge_load(
            self.s_ps, self.iface_edges,
            [c * (pe + o) for c, pe, o in zip(ist.coeff, ist.phi_e, ist.ocp)])

        a_pe = self.k_pe_bulk + asm.assemble_edge_mass(
            self.s_pe, self.iface_edges, ist.coeff)
        b_pe = -self._kappa_d_grad_load(theta_v, ce_v)
        b_pe += asm.assemble_edge_load(
            self.s_pe, self.iface_edges,
            [c * (ps - o) for c, ps, o in zip(ist.coeff, ist.phi_s, ist.ocp)])

        return (asm.constrain(self.s_ps, a_ps, b_ps),
                asm.constrain(self.s_pe, a_pe, b_pe))

    def elasticity_load(self, theta_v, cs_v) -> np.ndarray:
        """(div v, 3K(alpha dtheta + omega dc)) load on the solid."""
        th_qp = asm.eval_qp(self.s_th, theta_v)
        cs_qp = asm.eval_qp(self.s_cs, cs_v)
        arrays = []
        for g, th, cs in zip(self.master, th_qp, cs_qp):
            arr = np.zeros((g.n_elems, len(g.ref.qw)))
            for tag in (ANODE, CATHODE):
                rows = np.nonzero(g.tag == tag)[0]
                if len(rows) == 0:
                    continue
                electrode = self.mats.electrode(TAG_NAMES[tag])
                _, bulk = electrode.lame
                arr[rows] = 3.0 * bulk * (
                    electrode.alpha * (th[rows] - self.mats.theta_ref)
                    + electrode.omega * (cs[rows] - self.c_s_ref[tag]))
            arrays.append(arr)
        return asm.assemble_div_load(self.s_u, arrays)

    def _correct_solve(self, space, mat, rhs, guess_full, factor=None):
        # Solve for the correction against the guess: the right-hand side is
        # then the actual out-of-balance force, which keeps the solver's
        # relative residual meaningful for solutions riding a large offset.
        guess_f = guess_full[space.free]
        solver = factor or SpdFactor(mat, method=self.solver, rtol=self.rtol)
        delta = solver.solve(rhs - mat @ guess_f)
        return asm.expand(space, guess_f + delta)

    def stage2(self, t: float, d_new: dict, s_guess: SimState,
               pair_tol: float = 1e-12, pair_max: int = 30) -> dict:
        """Solve the quasi-static fields at the new time, then u.

        The linearized interface terms couple phi_s and phi_e through each
        other's traces, so the pair defines an implicit equation.  Its
        matrices depend only on the dynamic fields, so they are factorized
        once and the pair is iterated to ``pair_tol`` with cheap backsolves,
        each potential solved against the other's latest trace.
        """
        theta_v, cs_v, ce_v = d_new["theta"], d_new["c_s"], d_new["c_e"]
        ist = self.interface_state(theta_v, cs_v, ce_v,
                                   s_guess["phi_s"], s_guess["phi_e"])
        if max(float(np.max(c)) for c in ist.coeff) <= 0.0:
            raise ValueError(
                "interface coefficient I_c*F/(R*theta) vanishes everywhere: "
                "the phi_e system is singular")
        a_ps = asm.constrain(self.s_ps, self.k_ps_bulk + asm.assemble_edge_mass(
            self.s_ps, self.iface_edges, ist.coeff))
        a_pe = asm.constrain(self.s_pe, self.k_pe_bulk + asm.assemble_edge_mass(
            self.s_pe, self.iface_edges, ist.coeff))
        f_ps = SpdFactor(a_ps, method=self.solver, rtol=self.rtol)
        f_pe = SpdFactor(a_pe, method=self.solver, rtol=self.rtol)

        b_ps_fixed = asm.assemble_edge_load(self.s_ps, self.cc_plus_edges,
                                            -self.i_app)
        b_pe_fixed = -self._kappa_d_grad_load(theta_v, ce_v)
        volt_scale = max(self.field_scales["phi_s"], 1e-30)

        # Dirichlet values are homogeneous, so reducing a load vector is a
        # plain row selection (no lifting term).
        ps, pe = s_guess["phi_s"], s_guess["phi_e"]
        for _ in range(max(pair_max, 1)):
            pe_tr = [asm.edge_trace(self.s_pe, pe, e)
                     for e in self.iface_edges]
            b_ps = b_ps_fixed + asm.assemble_edge_load(
                self.s_ps, self.iface_edges,
                [c * (tr + o) for c, tr, o in
                 zip(ist.coeff, pe_tr, ist.ocp)])
            ps_new = self._correct_solve(self.s_ps, a_ps, b_ps[self.s_ps.free],
                                         ps, factor=f_ps)
            ps_tr = [asm.edge_trace(self.s_ps, ps_new, e)
                     for e in self.iface_edges]
            b_pe = b_pe_fixed + asm.assemble_edge_load(
                self.s_pe, self.iface_edges,
                [c * (tr - o) for c, tr, o in
                 zip(ist.coeff, ps_tr, ist.ocp)])
            pe_new = self._correct_solve(self.s_pe, a_pe, b_pe[self.s_pe.free],
                                         pe, factor=f_pe)
            delta = max(np.abs(ps_new - ps).max(),
                        np.abs(pe_new - pe).max()) / volt_scale
            ps, pe = ps_new, pe_new
            if delta < pair_tol:
                break

        if self.mode == "full":
            b_u = self.elasticity_load(theta_v, cs_v)
            _, b_u_red = asm.constrain(self.s_u, self.k_u, b_u)
            u = self._correct_solve(self.s_u, self.k_u_red, b_u_red,
                                    s_guess["u"], factor=self._u_factor)
        else:
            u = np.zeros(self.s_u.ndof)
        return {"phi_s": ps, "phi_e": pe, "u": u}

    # ------------------------------------------------------------------
    # Derived fields and summaries
    # ------------------------------------------------------------------

    def boundary_average(self, space: sps.FieldSpace, vec: np.ndarray,
                         part: str) -> float:
        edges = self.mesh.boundary_edges(part)
        total = sum(float((asm.edge_weights(e)
                           * asm.edge_trace(space, vec, e)).sum())
                    for e in edges)
        length = sum(e.length for e in edges)
        if length == 0.0:
            raise ValueError(f"boundary part {part!r} is empty")
        return total / length

    def stress_qp(self, state: SimState) -> list:
        """StressState per master group at quadrature points (solid rows)."""
        strains = asm.eval_strain_qp(self.s_u, state["u"])
        th_qp = asm.eval_qp(self.s_th, state["theta"])
        cs_qp = asm.eval_qp(self.s_cs, state["c_s"])
        out = []
        for g, eps, th, cs in zip(self.master, strains, th_qp, cs_qp):
            shape = (g.n_elems, len(g.ref.qw))
            comp = {k: np.zeros(shape) for k in ("s11", "s22", "s12", "s33")}
            for tag in (ANODE, CATHODE):
                rows = np.nonzero(g.tag == tag)[0]
                if len(rows) == 0:
                    continue
                electrode = self.mats.electrode(TAG_NAMES[tag])
                st = hooke_plane_strain(
                    eps[rows, :, 0], eps[rows, :, 1], eps[rows, :, 2],
                    th[rows], cs[rows], electrode, self.mats,
                    self.c_s_ref[tag])
                for k in comp:
                    comp[k][rows] = getattr(st, k)
            out.append(StressState(**comp))
        return out

    def von_mises_qp(self, state: SimState):
        """Von Mises stress at solid quadrature points; returns
        (master-aligned arrays, max value, location of the max)."""
        stresses = self.stress_qp(state)
        arrays, vmax, loc = [], 0.0, (np.nan, np.nan)
        for g, st in zip(self.master, stresses):
            vm = von_mises(st)
            solid = np.isin(g.tag, (ANODE, CATHODE))
            vm[~solid] = 0.0
            arrays.append(vm)
            if vm.size and vm.max() > vmax:
                e, q = np.unravel_index(int(np.argmax(vm)), vm.shape)
                qx, qy = g.qp_coords()
                vmax, loc = float(vm[e, q]), (float(qx[e, q]), float(qy[e, q]))
        return arrays, vmax, loc
