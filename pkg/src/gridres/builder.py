"""Assembles the resilience-constrained scheduling MILP for one scenario window.

Covers dispatchable-generator commitment (bounds, apparent-power cap,
startup/shutdown epigraphs, ramping), PV and substation injection caps,
the hydrogen block (conversion equalities, mode exclusion, tank recursion,
aggregate reserve signal, inverter cap), the battery baseline block, and
the linearized branch-flow network block (voltage drop, nodal balances,
line caps, shedding). Every quadratic apparent-power cap is replaced by an
inscribed regular polygon, so any feasible point also satisfies the true
quadratic constraint.

Constraint tags are stable "Name[asset,hour]" strings with absolute hours,
so a model built for a sub-window (e.g. the post-event hours) keeps the
scenario's own hour numbering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .devices import BatteryParams, DeviceFleet, DgParams, H2SystemParams, PvParams
from .model import BINARY, CONTINUOUS, EQ, GE, LE, MilpModel
from .network import Network, downstream_sets, validate_radial
from .scenario import OutageWindow, Scenario


class BuildError(ValueError):
    """Model assembly failed; message names the offending tag or asset."""


@dataclass
class InitialState:
    """Boundary conditions at the hour before the model window starts."""
    dg_status: dict[int, int] = field(default_factory=dict)   # node -> 0/1
    dg_power: dict[int, float] = field(default_factory=dict)  # node -> MW
    moh: dict[int, float] = field(default_factory=dict)       # node -> kg
    soc: dict[int, float] = field(default_factory=dict)       # node -> MWh


@dataclass
class BuilderConfig:
    cone_segments: int = 12
    root_voltage_sq: float = 1.0
    # zero-active-load nodes: bound reactive shedding by the reactive load
    # instead of emitting the undefined ratio row
    zero_load_q_fallback: bool = True
    first_hour: int = 1  # absolute hour of the window's first step


def linearize_cone(model: MilpModel, p_terms: list[tuple[int, float]],
                   q_terms: list[tuple[int, float]], s_cap: float,
                   segments: int, tag_base: str) -> None:
    """Inscribed regular-polygon linearization of p^2 + q^2 <= s_cap^2.

    Emits `segments` half-plane rows through consecutive vertices of the
    m-gon inscribed in the circle of radius s_cap; feasible points satisfy
    the quadratic cap exactly (inner approximation). p_terms/q_terms are
    sparse linear expressions, so caps on differences like P_el - P_fc
    need no auxiliary variable.
    """
    m = segments
    if m < 4 or m % 2 != 0:
        raise BuildError(f"{tag_base}: cone segments must be even and >= 4, got {m}")
    if s_cap <= 0:
        raise BuildError(f"{tag_base}: cone radius must be positive, got {s_cap}")
    half_width = s_cap * math.cos(math.pi / m)
    for k in range(m):
        phi = 2.0 * math.pi * (k + 0.5) / m
        cp, sq = math.cos(phi), math.sin(phi)
        coeffs = [(j, cp * v) for j, v in p_terms] + [(j, sq * v) for j, v in q_terms]
        model.add_constraint(coeffs, LE, half_width, _seg_tag(tag_base, k))


def _seg_tag(tag_base: str, k: int) -> str:
    # "Eq27[5,10" -> "Eq27[5,10,3]"
    return f"{tag_base},{k}]"


class ModelBuilder:
    """One-shot builder; construct, call build(), discard."""

    def __init__(self, network: Network, fleet: DeviceFleet, scenario: Scenario,
                 config: BuilderConfig | None = None,
                 initial: InitialState | None = None):
        self.net = network
        self.fleet = fleet
        self.scn = scenario
        self.cfg = config or BuilderConfig()
        self.init = initial or InitialState()
        self.model = MilpModel(horizon=scenario.horizon, dt=scenario.dt)
        self._children = downstream_sets(network)
        self._outage_dg: dict[int, set[int]] = {}   # node -> forced-out hours
        self._validate_inputs()

    # -- public entry ---------------------------------------------------------

    def build(self) -> MilpModel:
        T = self.scn.horizon
        for t in range(1, T + 1):
            self._add_variables(t)
        for t in range(1, T + 1):
            for dg in self.fleet.dg:
                self.add_dg_block(dg, t)
            for pv in self.fleet.pv:
                self.add_pv_block(pv, t)
            self.add_substation_block(t)
            for h2 in self.fleet.h2:
                self.add_h2_block(h2, t)
            if self.fleet.h2:
                self._add_reserve_row(t)
            for bat in self.fleet.battery:
                self.add_battery_block(bat, t)
            self.add_network_block(t)
        apply_outage(self.model, self.scn.outages,
                     first_hour=self.cfg.first_hour,
                     last_hour=self.cfg.first_hour + T - 1)
        return self.model

    # -- helpers --------------------------------------------------------------

    def _validate_inputs(self):
        violations = validate_radial(self.net)
        if violations:
            raise BuildError("network not radial: " + "; ".join(violations))
        node_ids = {nd.id for nd in self.net.nodes}
        for group, devs in (("dg", self.fleet.dg), ("pv", self.fleet.pv),
                            ("h2", self.fleet.h2), ("battery", self.fleet.battery)):
            seen = set()
            for d in devs:
                if d.node not in node_ids:
                    raise BuildError(f"{group}@{d.node}: unknown node")
                if d.node in seen:
                    raise BuildError(f"{group}@{d.node}: duplicate device at node")
                seen.add(d.node)
        for nd in self.net.nodes:
            if nd.id not in self.scn.load_p or nd.id not in self.scn.load_q:
                raise BuildError(f"load profile missing for node {nd.id}")
            if np.any(self.scn.load_p[nd.id] < 0) or np.any(self.scn.load_q[nd.id] < 0):
                raise BuildError(f"negative load at node {nd.id}")
        for pv in self.fleet.pv:
            if pv.node not in self.scn.pv_profile:
                raise BuildError(f"pv profile missing for pv@{pv.node}")
        for h2 in self.fleet.h2:
            if h2.node not in self.scn.h2_demand:
                raise BuildError(f"h2 demand profile missing for h2@{h2.node}")
        if np.any(self.scn.alpha > 1.0):
            raise BuildError("Eq21 structurally infeasible: alpha > 1")
        # mark forced-out hours per DG so trip-transition ramps can be skipped
        for w in self.scn.outages:
            if w.asset.startswith("dg@"):
                node = int(w.asset.split("@", 1)[1])
                self._outage_dg.setdefault(node, set()).update(w.hours())

    def _abs_hour(self, t: int) -> int:
        return self.cfg.first_hour + t - 1

    def _series(self, per_node: dict[int, np.ndarray], node: int, t: int) -> float:
        return float(per_node[node][t - 1])

    # -- variables ------------------------------------------------------------

    def _add_variables(self, t: int):
        m = self.model
        h = self._abs_hour(t)
        dt = self.scn.dt
        for dg in self.fleet.dg:
            n = dg.node
            m.add_variable(f"P_DG[{n},{h}]", 0.0, max(dg.p_max, 0.0))
            m.add_variable(f"Q_DG[{n},{h}]", min(dg.q_min, 0.0), max(dg.q_max, 0.0))
            m.add_variable(f"x_DG[{n},{h}]", 0.0, 1.0, BINARY)
            m.add_variable(f"C_SU[{n},{h}]", 0.0, np.inf)   # Eq7 as a bound
            m.add_variable(f"C_SD[{n},{h}]", 0.0, np.inf)   # Eq9 as a bound
        for pv in self.fleet.pv:
            n = pv.node
            cap = pv.p_max_profile_scale * self._series(self.scn.pv_profile, n, t)
            if cap < 0:
                raise BuildError(f"P_PV[{n},{h}]: negative profile cap")
            m.add_variable(f"P_PV[{n},{h}]", 0.0, cap)      # Eq12 as bounds
            m.add_variable(f"Q_PV[{n},{h}]", -pv.s_rating, pv.s_rating)
        s_st = self.net.substation_s_max
        m.add_variable(f"P_ST[{h}]", 0.0, s_st)             # import only
        m.add_variable(f"Q_ST[{h}]", -s_st, s_st)
        for h2 in self.fleet.h2:
            n = h2.node
            m.add_variable(f"P_EL[{n},{h}]", 0.0, h2.p_el_max)
            m.add_variable(f"P_FC[{n},{h}]", 0.0, h2.p_fc_max)
            m.add_variable(f"QH_EL[{n},{h}]", 0.0, h2.el_q_max)
            m.add_variable(f"QH_FC[{n},{h}]", 0.0, h2.fc_q_max)
            m.add_variable(f"PSI[{n},{h}]", 0.0, 1.0, BINARY)
            m.add_variable(f"Q_HS[{n},{h}]", -h2.s_inverter, h2.s_inverter)
            m.add_variable(f"MOH[{n},{h}]", h2.moh_min, h2.moh_max)  # Eq20 as bounds
        for bat in self.fleet.battery:
            n = bat.node
            m.add_variable(f"B_CH[{n},{h}]", 0.0, bat.p_rating)
            m.add_variable(f"B_DIS[{n},{h}]", 0.0, bat.p_rating)
            m.add_variable(f"B_SOC[{n},{h}]", bat.soc_min, bat.energy_capacity)
        for nd in self.net.nodes:
            n = nd.id
            if nd.is_root:
                v0 = self.cfg.root_voltage_sq
                m.add_variable(f"V[{n},{h}]", v0, v0)
                m.metadata["root_v_bounds_sq"] = (nd.v_min_sq, nd.v_max_sq)
            else:
                m.add_variable(f"V[{n},{h}]", nd.v_min_sq, nd.v_max_sq)  # Eq24
            lp = self._series(self.scn.load_p, n, t)
            lq = self._series(self.scn.load_q, n, t)
            m.add_variable(f"P_SHD[{n},{h}]", 0.0, lp)      # Eq29 as bounds
            m.add_variable(f"Q_SHD[{n},{h}]", 0.0, lq)
        for ln in self.net.lines:
            c = ln.to_node
            m.add_variable(f"FP[{c},{h}]", -ln.s_max, ln.s_max)
            m.add_variable(f"FQ[{c},{h}]", -ln.s_max, ln.s_max)

    # -- device blocks ---------------------------------------------------------

    def add_dg_block(self, dg: DgParams, t: int):
        """Commitment-linked limits, apparent-power cap, transition costs, ramps."""
        m = self.model
        h = self._abs_hour(t)
        n = dg.node
        dt = self.scn.dt
        iP = m.var_index(f"P_DG[{n},{h}]")
        iQ = m.var_index(f"Q_DG[{n},{h}]")
        iX = m.var_index(f"x_DG[{n},{h}]")
        iSU = m.var_index(f"C_SU[{n},{h}]")
        iSD = m.var_index(f"C_SD[{n},{h}]")

        m.add_constraint([(iP, 1.0), (iX, -dg.p_min)], GE, 0.0, f"Eq3lo[{n},{h}]")
        m.add_constraint([(iP, 1.0), (iX, -dg.p_max)], LE, 0.0, f"Eq3up[{n},{h}]")
        m.add_constraint([(iQ, 1.0), (iX, -dg.q_min)], GE, 0.0, f"Eq4lo[{n},{h}]")
        m.add_constraint([(iQ, 1.0), (iX, -dg.q_max)], LE, 0.0, f"Eq4up[{n},{h}]")
        linearize_cone(m, [(iP, 1.0)], [(iQ, 1.0)], dg.s_rating,
                       self.cfg.cone_segments, f"Eq5[{n},{h}")

        if t > 1:
            iXp = m.var_index(f"x_DG[{n},{h - 1}]")
            m.add_constraint([(iSU, 1.0), (iX, -dg.startup_price),
                              (iXp, dg.startup_price)], GE, 0.0, f"Eq6[{n},{h}]")
            m.add_constraint([(iSD, 1.0), (iX, dg.shutdown_price),
                              (iXp, -dg.shutdown_price)], GE, 0.0, f"Eq8[{n},{h}]")
        else:
            x0 = float(self.init.dg_status.get(n, 0))
            m.add_constraint([(iSU, 1.0), (iX, -dg.startup_price)], GE,
                             -dg.startup_price * x0, f"Eq6[{n},{h}]")
            m.add_constraint([(iSD, 1.0), (iX, dg.shutdown_price)], GE,
                             dg.shutdown_price * x0, f"Eq8[{n},{h}]")

        # ramp rows are dropped at a forced-outage trip: the unit falls off
        # regardless of its ramp capability
        forced_now = h in self._outage_dg.get(n, ())
        forced_prev = (h - 1) in self._outage_dg.get(n, ())
        trip = forced_now and not forced_prev
        if not trip:
            if t > 1:
                iPp = m.var_index(f"P_DG[{n},{h - 1}]")
                m.add_constraint([(iP, 1.0), (iPp, -1.0)], LE, dg.ramp_up * dt,
                                 f"Eq10up[{n},{h}]")
                m.add_constraint([(iP, 1.0), (iPp, -1.0)], GE, -dg.ramp_down * dt,
                                 f"Eq10dn[{n},{h}]")
            else:
                p0 = float(self.init.dg_power.get(n, 0.0))
                m.add_constraint([(iP, 1.0)], LE, p0 + dg.ramp_up * dt,
                                 f"Eq10up[{n},{h}]")
                m.add_constraint([(iP, 1.0)], GE, p0 - dg.ramp_down * dt,
                                 f"Eq10dn[{n},{h}]")

        m.add_objective_term(iX, dg.fixed_cost * dt)       # Eq2 fixed part
        m.add_objective_term(iP, dg.marginal_cost * dt)    # Eq2 marginal part
        m.add_objective_term(iSU, 1.0)
        m.add_objective_term(iSD, 1.0)

    def add_pv_block(self, pv: PvParams, t: int):
        m = self.model
        h = self._abs_hour(t)
        n = pv.node
        iP = m.var_index(f"P_PV[{n},{h}]")
        iQ = m.var_index(f"Q_PV[{n},{h}]")
        linearize_cone(m, [(iP, 1.0)], [(iQ, 1.0)], pv.s_rating,
                       self.cfg.cone_segments, f"Eq13[{n},{h}")
        m.add_objective_term(iP, pv.marginal_cost * self.scn.dt)  # Eq11

    def add_substation_block(self, t: int):
        m = self.model
        h = self._abs_hour(t)
        iP = m.var_index(f"P_ST[{h}]")
        iQ = m.var_index(f"Q_ST[{h}]")
        linearize_cone(m, [(iP, 1.0)], [(iQ, 1.0)], self.net.substation_s_max,
                       self.cfg.cone_segments, f"Eq14[{h}")
        m.add_objective_term(iP, float(self.scn.price[t - 1]) * self.scn.dt)

    def add_h2_block(self, h2: H2SystemParams, t: int):
        """Conversion equalities, mode exclusion, tank recursion, inverter cap."""
        m = self.model
        h = self._abs_hour(t)
        n = h2.node
        dt = self.scn.dt
        iPel = m.var_index(f"P_EL[{n},{h}]")
        iPfc = m.var_index(f"P_FC[{n},{h}]")
        iQel = m.var_index(f"QH_EL[{n},{h}]")
        iQfc = m.var_index(f"QH_FC[{n},{h}]")
        iPsi = m.var_index(f"PSI[{n},{h}]")
        iQhs = m.var_index(f"Q_HS[{n},{h}]")
        iMoh = m.var_index(f"MOH[{n},{h}]")

        m.add_constraint([(iQel, 1.0), (iPel, -h2.lambda_el * h2.eta_el)],
                         EQ, 0.0, f"Eq15[{n},{h}]")
        m.add_constraint([(iPfc, 1.0), (iQfc, -h2.lambda_fc * h2.eta_fc)],
                         EQ, 0.0, f"Eq16[{n},{h}]")
        m.add_constraint([(iQel, 1.0), (iPsi, -h2.el_q_min)], GE, 0.0,
                         f"Eq17lo[{n},{h}]")
        m.add_constraint([(iQel, 1.0), (iPsi, -h2.el_q_max)], LE, 0.0,
                         f"Eq17up[{n},{h}]")
        m.add_constraint([(iQfc, 1.0), (iPsi, h2.fc_q_min)], GE, h2.fc_q_min,
                         f"Eq18lo[{n},{h}]")
        m.add_constraint([(iQfc, 1.0), (iPsi, h2.fc_q_max)], LE, h2.fc_q_max,
                         f"Eq18up[{n},{h}]")

        lam = h2.dissipation_rate
        q_dem = self._series(self.scn.h2_demand, n, t)
        coeffs = [(iMoh, 1.0 + lam * dt), (iQel, -dt), (iQfc, dt)]
        rhs = -dt * q_dem
        if t > 1:
            coeffs.append((m.var_index(f"MOH[{n},{h - 1}]"), -1.0))
        else:
            moh0 = float(self.init.moh.get(n, h2.moh_min))
            rhs += moh0
        m.add_constraint(coeffs, EQ, rhs, f"Eq19[{n},{h}]")

        linearize_cone(m, [(iPel, 1.0), (iPfc, -1.0)], [(iQhs, 1.0)],
                       h2.s_inverter, self.cfg.cone_segments, f"Eq22[{n},{h}")

    def _add_reserve_row(self, t: int):
        """Aggregate pre-event reserve signal on stored hydrogen mass."""
        m = self.model
        h = self._abs_hour(t)
        alpha = float(self.scn.alpha[t - 1])
        coeffs = [(m.var_index(f"MOH[{h2.node},{h}]"), 1.0) for h2 in self.fleet.h2]
        rhs = alpha * sum(h2.moh_max for h2 in self.fleet.h2)
        m.add_constraint(coeffs, GE, rhs, f"Eq21[{h}]")

    def add_battery_block(self, bat: BatteryParams, t: int):
        """State-of-charge recursion for the battery baseline."""
        m = self.model
        h = self._abs_hour(t)
        n = bat.node
        dt = self.scn.dt
        iCh = m.var_index(f"B_CH[{n},{h}]")
        iDis = m.var_index(f"B_DIS[{n},{h}]")
        iSoc = m.var_index(f"B_SOC[{n},{h}]")
        coeffs = [(iSoc, 1.0), (iCh, -bat.eta_ch * dt), (iDis, dt / bat.eta_dis)]
        rhs = 0.0
        if t > 1:
            coeffs.append((m.var_index(f"B_SOC[{n},{h - 1}]"), -1.0))
        else:
            rhs = float(self.init.soc.get(n, bat.soc_min))
        m.add_constraint(coeffs, EQ, rhs, f"Bsoc[{n},{h}]")

    # -- network block ----------------------------------------------------------

    def add_network_block(self, t: int):
        """Voltage drops, nodal balances, line caps, proportional shedding."""
        m = self.model
        h = self._abs_hour(t)
        dg_nodes = {d.node: d for d in self.fleet.dg}
        pv_nodes = {d.node: d for d in self.fleet.pv}
        h2_nodes = {d.node: d for d in self.fleet.h2}
        bat_nodes = {d.node: d for d in self.fleet.battery}

        for ln in self.net.lines:
            c = ln.to_node
            iV_c = m.var_index(f"V[{c},{h}]")
            iV_p = m.var_index(f"V[{ln.from_node},{h}]")
            iFP = m.var_index(f"FP[{c},{h}]")
            iFQ = m.var_index(f"FQ[{c},{h}]")
            # V_child = V_parent - 2 (R fp + X fq)
            m.add_constraint([(iV_c, 1.0), (iV_p, -1.0), (iFP, 2.0 * ln.r_pu),
                              (iFQ, 2.0 * ln.x_pu)], EQ, 0.0, f"Eq23[{c},{h}]")
            linearize_cone(m, [(iFP, 1.0)], [(iFQ, 1.0)], ln.s_max,
                           self.cfg.cone_segments, f"Eq27[{c},{h}")

        for nd in self.net.nodes:
            n = nd.id
            lp = self._series(self.scn.load_p, n, t)
            lq = self._series(self.scn.load_q, n, t)
            p_coeffs: list[tuple[int, float]] = []
            q_coeffs: list[tuple[int, float]] = []
            if not nd.is_root:
                p_coeffs.append((m.var_index(f"FP[{n},{h}]"), -1.0))
                q_coeffs.append((m.var_index(f"FQ[{n},{h}]"), -1.0))
            else:
                p_coeffs.append((m.var_index(f"P_ST[{h}]"), -1.0))
                q_coeffs.append((m.var_index(f"Q_ST[{h}]"), -1.0))
            for ln in self._children[n]:
                p_coeffs.append((m.var_index(f"FP[{ln.to_node},{h}]"), 1.0))
                q_coeffs.append((m.var_index(f"FQ[{ln.to_node},{h}]"), 1.0))
            if n in h2_nodes:
                p_coeffs.append((m.var_index(f"P_EL[{n},{h}]"), 1.0))
                p_coeffs.append((m.var_index(f"P_FC[{n},{h}]"), -1.0))
                q_coeffs.append((m.var_index(f"Q_HS[{n},{h}]"), -1.0))
            if n in bat_nodes:
                p_coeffs.append((m.var_index(f"B_CH[{n},{h}]"), 1.0))
                p_coeffs.append((m.var_index(f"B_DIS[{n},{h}]"), -1.0))
            if n in pv_nodes:
                p_coeffs.append((m.var_index(f"P_PV[{n},{h}]"), -1.0))
                q_coeffs.append((m.var_index(f"Q_PV[{n},{h}]"), -1.0))
            if n in dg_nodes:
                p_coeffs.append((m.var_index(f"P_DG[{n},{h}]"), -1.0))
                q_coeffs.append((m.var_index(f"Q_DG[{n},{h}]"), -1.0))
            iShdP = m.var_index(f"P_SHD[{n},{h}]")
            iShdQ = m.var_index(f"Q_SHD[{n},{h}]")
            p_coeffs.append((iShdP, -1.0))
            q_coeffs.append((iShdQ, -1.0))
            m.add_constraint(p_coeffs, EQ, -lp, f"Eq25[{n},{h}]")
            m.add_constraint(q_coeffs, EQ, -lq, f"Eq26[{n},{h}]")

            if lp > 0.0:
                m.add_constraint([(iShdQ, 1.0), (iShdP, -lq / lp)], EQ, 0.0,
                                 f"Eq30[{n},{h}]")
            elif lq > 0.0:
                if not self.cfg.zero_load_q_fallback:
                    raise BuildError(
                        f"Eq30[{n},{h}]: ratio undefined with zero active load; "
                        "enable zero_load_q_fallback to bound Q_SHD by the "
                        "reactive load directly")
                # fallback: Q_SHD keeps its [0, lq] bounds, no ratio row
            m.add_objective_term(iShdP, self.scn.voll * self.scn.dt)  # Eq28


def apply_outage(model: MilpModel, outages: tuple[OutageWindow, ...] | list[OutageWindow],
                 first_hour: int = 1, last_hour: int | None = None) -> None:
    """Force outaged assets to zero by bound fixing.

    DG outages drive the commitment binary to zero, substation outages zero
    both grid injections, line outages zero the line's flows. Hours outside
    [first_hour, last_hour] are ignored. Unknown assets raise BuildError.
    """
    if last_hour is None:
        last_hour = first_hour + model.horizon - 1
    for w in outages:
        for h in w.hours():
            if h < first_hour or h > last_hour:
                continue
            if w.asset == "substation":
                for tag in (f"P_ST[{h}]", f"Q_ST[{h}]"):
                    if not model.has_var(tag):
                        raise BuildError(f"outage asset {w.asset!r}: no {tag}")
                    model.set_bounds(model.var_index(tag), 0.0, 0.0)
                # islanded operation: the root no longer holds the slack
                # voltage, it floats inside the node's own band
                vb = model.metadata.get("root_v_bounds_sq")
                if vb is not None and model.has_var(f"V[0,{h}]"):
                    model.set_bounds(model.var_index(f"V[0,{h}]"), vb[0], vb[1])
            elif w.asset.startswith("dg@"):
                node = w.asset.split("@", 1)[1]
                tag = f"x_DG[{node},{h}]"
                if not model.has_var(tag):
                    raise BuildError(f"outage asset {w.asset!r}: no such generator")
                model.set_bounds(model.var_index(tag), 0.0, 0.0)
            elif w.asset.startswith("line@"):
                child = w.asset.split("@", 1)[1]
                for fam in ("FP", "FQ"):
                    tag = f"{fam}[{child},{h}]"
                    if not model.has_var(tag):
                        raise BuildError(f"outage asset {w.asset!r}: no such line")
                    model.set_bounds(model.var_index(tag), 0.0, 0.0)
            else:
                raise BuildError(f"unknown outage asset {w.asset!r}")


def build_model(network: Network, fleet: DeviceFleet, scenario: Scenario,
                config: BuilderConfig | None = None,
                initial: InitialState | None = None) -> MilpModel:
    """Assemble the full scheduling MILP for one scenario window."""
    return ModelBuilder(network, fleet, scenario, config, initial).build()
