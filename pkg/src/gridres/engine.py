"""Case orchestration: proactive schedule, survivability re-solve, metrics.

Each case runs in two stages that mirror pre-event and post-event analysis:

1. Schedule stage: the full horizon is solved with no outage in the model.
   This is the operating plan of a system that has not observed the event;
   the only pre-event preparedness instrument is the hydrogen reserve
   signal (the alpha series), which is an exogenous input to the schedule.
2. Survivability stage: hours from the event onward are re-solved with the
   outage applied, starting from the stage-1 states (tank masses, battery
   charge, generator commitments) at the hour before the event.

The reported dispatch concatenates stage 1 before the event with stage 2
from the event on. Without outages a single schedule solve is reported.
Storage cases therefore differ only through physics: batteries enter the
event at whatever charge daily operation left them, hydrogen tanks enter
full because the reserve signal forced them full.
"""

from __future__ import annotations

import numpy as np

from .builder import BuilderConfig, InitialState, build_model
from .devices import BatteryParams, DeviceFleet
from .model import MilpModel
from .network import Network
from .scenario import (CaseResult, CaseSpec, Scenario, compute_resilience_index,
                       table2_cases)
from .solver import (INFEASIBLE, OPTIMAL, SolverOptions, Solution,
                     round_and_repair, solve_lp, solve_milp)


class CaseInfeasibleError(RuntimeError):
    def __init__(self, case_id, stage, message):
        super().__init__(f"case {case_id} {stage} solve infeasible: {message}")
        self.case_id = case_id


# Published six-case comparison this engine replicates qualitatively.
# ENS in MWh, RI in percent. The back-solved total load is ~450.4 MWh for
# cases 1-5; the published case-6 row is not consistent with that total
# (its RI implies ~481 MWh), which the report flags rather than hides.
TABLE2_REFERENCE = {
    "ens": (101.9, 91.8, 85.3, 79.8, 75.6, 52.0),
    "ri": (77.4, 79.6, 81.0, 82.3, 83.2, 89.2),
    "back_solved_total_load": 450.4,
}


def reference_consistency_report(tol_pp: float = 0.5) -> dict:
    """Recompute the published RI rows from their ENS and the back-solved total."""
    total = TABLE2_REFERENCE["back_solved_total_load"]
    rows = []
    for k in range(6):
        ens = TABLE2_REFERENCE["ens"][k]
        published = TABLE2_REFERENCE["ri"][k]
        computed = compute_resilience_index(total, ens)
        rows.append({
            "case": k + 1,
            "published_ri": published,
            "ri_from_ens_and_total": round(computed, 3),
            "consistent_within_half_point": bool(abs(computed - published) <= tol_pp),
        })
    return {
        "total_load_mwh": total,
        "rows": rows,
        "note": ("published case-6 row is internally inconsistent with the "
                 "total load implied by cases 1-5"),
    }


def fleet_for_case(fleet: DeviceFleet, case: CaseSpec) -> DeviceFleet:
    """Storage substitution: none, batteries replacing H2 units, or H2 as-is."""
    if case.storage_kind == "none":
        return fleet.without_storage()
    if case.storage_kind == "hydrogen":
        return DeviceFleet(dg=fleet.dg, pv=fleet.pv, h2=fleet.h2, battery=(),
                           shedding=fleet.shedding)
    # battery case: one battery per hydrogen system, equal power rating
    if fleet.h2:
        batteries = tuple(
            BatteryParams(node=h2.node, p_rating=h2.p_el_max,
                          duration_h=float(case.battery_duration_h))
            for h2 in fleet.h2)
    else:
        batteries = tuple(
            BatteryParams(node=b.node, p_rating=b.p_rating,
                          duration_h=float(case.battery_duration_h))
            for b in fleet.battery)
    return DeviceFleet(dg=fleet.dg, pv=fleet.pv, h2=(), battery=batteries,
                       shedding=fleet.shedding)


def _stabilized_rounding(model: MilpModel, fleet: DeviceFleet,
                         values: np.ndarray) -> np.ndarray | None:
    """Replace degenerate mode-exclusion values with their interval midpoint.

    The exclusion binary carries no cost, so the relaxation fixes only the
    interval [q_el/el_max, 1 - q_fc/fc_max] it must lie in; the reported
    vertex value inside that interval is arbitrary. Thresholding the
    midpoint makes the rounding follow the relaxation's physical flows.
    """
    if not fleet.h2:
        return None
    out = values.copy()
    for h2 in fleet.h2:
        n = h2.node
        for v in model.variables:
            if not v.tag.startswith(f"PSI[{n},"):
                continue
            hour = v.tag.split(",")[1].rstrip("]")
            q_el = values[model.var_index(f"QH_EL[{n},{hour}]")]
            q_fc = values[model.var_index(f"QH_FC[{n},{hour}]")]
            out[v.index] = 0.5 + 0.5 * (q_el / h2.el_q_max - q_fc / h2.fc_q_max)
    return out


def _solve_stage(model: MilpModel, fleet: DeviceFleet, options: SolverOptions,
                 exact: bool | None, case_id: int, stage: str) -> Solution:
    if exact is None:
        exact = model.horizon <= 48
    if exact:
        sol = solve_milp(model, options, exact=True)
    else:
        relaxed = solve_lp(model, options)
        if relaxed.status == OPTIMAL:
            rounding = _stabilized_rounding(model, fleet, relaxed.values)
            sol = round_and_repair(model, relaxed, options, rounding)
        else:
            sol = relaxed
    if sol.status == INFEASIBLE:
        raise CaseInfeasibleError(case_id, stage, sol.message or "no feasible point")
    if sol.values is None:
        raise CaseInfeasibleError(case_id, stage, f"solver returned {sol.status}")
    return sol


def _dispatch_from(model: MilpModel, values: np.ndarray, horizon: int,
                   out: dict[str, np.ndarray] | None = None) -> dict[str, np.ndarray]:
    """Variable values keyed by family ("P_DG[8]") over absolute hours."""
    out = out if out is not None else {}
    for v in model.variables:
        name, args = v.tag.split("[", 1)
        args = args.rstrip("]")
        parts = args.split(",")
        hour = int(parts[-1])
        family = name if len(parts) == 1 else f"{name}[{','.join(parts[:-1])}]"
        series = out.setdefault(family, np.zeros(horizon))
        series[hour - 1] = values[v.index]
    return out


def _initial_state_from(dispatch: dict[str, np.ndarray], fleet: DeviceFleet,
                        hour: int) -> InitialState:
    k = hour - 1
    init = InitialState()
    for dg in fleet.dg:
        init.dg_status[dg.node] = int(round(dispatch[f"x_DG[{dg.node}]"][k]))
        init.dg_power[dg.node] = float(dispatch[f"P_DG[{dg.node}]"][k])
    for h2 in fleet.h2:
        init.moh[h2.node] = float(dispatch[f"MOH[{h2.node}]"][k])
    for bat in fleet.battery:
        init.soc[bat.node] = float(dispatch[f"B_SOC[{bat.node}]"][k])
    return init


def _cost_breakdown(dispatch: dict[str, np.ndarray], fleet: DeviceFleet,
                    scenario: Scenario) -> dict[str, float]:
    dt = scenario.dt
    out = {
        "grid_energy": float(np.sum(scenario.price * dispatch["P_ST"]) * dt),
        "dg_fixed": 0.0, "dg_marginal": 0.0,
        "dg_startup": 0.0, "dg_shutdown": 0.0,
        "pv": 0.0, "shedding": 0.0,
    }
    for dg in fleet.dg:
        x = np.round(dispatch[f"x_DG[{dg.node}]"])
        p = dispatch[f"P_DG[{dg.node}]"]
        out["dg_fixed"] += float(x.sum() * dg.fixed_cost * dt)
        out["dg_marginal"] += float(p.sum() * dg.marginal_cost * dt)
        prev = 0.0
        for xt in x:
            out["dg_startup"] += max(0.0, (xt - prev)) * dg.startup_price
            out["dg_shutdown"] += max(0.0, (prev - xt)) * dg.shutdown_price
            prev = xt
    for pv in fleet.pv:
        out["pv"] += float(dispatch[f"P_PV[{pv.node}]"].sum() * pv.marginal_cost * dt)
    shed = sum(float(dispatch[f"P_SHD[{nd}]"].sum())
               for nd in _shed_nodes(dispatch)) * dt
    out["shedding"] = shed * scenario.voll
    out["total"] = float(sum(v for k, v in out.items() if k != "total"))
    return out


def _shed_nodes(dispatch: dict[str, np.ndarray]) -> list[int]:
    nodes = []
    for key in dispatch:
        if key.startswith("P_SHD["):
            nodes.append(int(key[len("P_SHD["):-1]))
    return sorted(nodes)


def run_case(network: Network, fleet: DeviceFleet, scenario: Scenario,
             case: CaseSpec, options: SolverOptions | None = None,
             config: BuilderConfig | None = None,
             exact: bool | None = None) -> CaseResult:
    """Solve one storage case: proactive schedule, then survivability."""
    options = options or SolverOptions()
    base_cfg = config or BuilderConfig()
    fleet_c = fleet_for_case(fleet, case)
    scn = scenario.with_zero_h2_demand() if case.zero_h2_demand else scenario
    T = scn.horizon
    t_event = scn.event_hour()
    stats: dict = {}

    if t_event is None:
        model = build_model(network, fleet_c, scn, base_cfg)
        sol = _solve_stage(model, fleet_c, options, exact, case.id, "schedule")
        dispatch = _dispatch_from(model, sol.values, T)
        stats["schedule"] = sol.stats | {"status": sol.status, "objective": sol.objective}
    elif t_event <= 1:
        model = build_model(network, fleet_c, scn, base_cfg)
        sol = _solve_stage(model, fleet_c, options, exact, case.id, "survivability")
        dispatch = _dispatch_from(model, sol.values, T)
        stats["survivability"] = sol.stats | {"status": sol.status, "objective": sol.objective}
    else:
        cfg_a = BuilderConfig(cone_segments=base_cfg.cone_segments,
                              root_voltage_sq=base_cfg.root_voltage_sq,
                              zero_load_q_fallback=base_cfg.zero_load_q_fallback,
                              first_hour=1)
        model_a = build_model(network, fleet_c, scn.without_outages(), cfg_a)
        sol_a = _solve_stage(model_a, fleet_c, options, exact, case.id, "schedule")
        dispatch = _dispatch_from(model_a, sol_a.values, T)
        stats["schedule"] = sol_a.stats | {"status": sol_a.status,
                                           "objective": sol_a.objective}

        init = _initial_state_from(dispatch, fleet_c, t_event - 1)
        cfg_b = BuilderConfig(cone_segments=base_cfg.cone_segments,
                              root_voltage_sq=base_cfg.root_voltage_sq,
                              zero_load_q_fallback=base_cfg.zero_load_q_fallback,
                              first_hour=t_event)
        scn_b = scn.window(t_event, T)
        model_b = build_model(network, fleet_c, scn_b, cfg_b, initial=init)
        sol_b = _solve_stage(model_b, fleet_c, options, exact, case.id, "survivability")
        dispatch = _dispatch_from(model_b, sol_b.values, T, out=dispatch)
        stats["survivability"] = sol_b.stats | {"status": sol_b.status,
                                                "objective": sol_b.objective}

    shed_nodes = _shed_nodes(dispatch)
    per_node = {n: float(dispatch[f"P_SHD[{n}]"].sum() * scn.dt) for n in shed_nodes}
    ens = float(sum(per_node.values()))
    total_load = scn.total_load_mwh()
    breakdown = _cost_breakdown(dispatch, fleet_c, scn)
    return CaseResult(
        case=case, dispatch=dispatch, ens=ens,
        resilience_index=compute_resilience_index(total_load, min(ens, total_load)),
        cost_breakdown=breakdown, per_node_shed=per_node,
        total_load=total_load, objective=breakdown["total"], solver_stats=stats)


def run_table2_suite(network: Network, fleet: DeviceFleet, scenario: Scenario,
                     options: SolverOptions | None = None,
                     config: BuilderConfig | None = None,
                     strict_ordering: bool = False) -> tuple[list[CaseResult], dict]:
    """All six storage cases plus the comparison report.

    The report records whether the expected orderings (strictly decreasing
    unserved energy, strictly increasing resilience index) hold; with
    strict_ordering=True a violation raises instead. Degenerate fleets
    (e.g. no storage devices at all) legitimately produce equal cases.
    """
    results = []
    for case in table2_cases():
        try:
            results.append(run_case(network, fleet, scenario, case, options, config))
        except CaseInfeasibleError as err:
            raise CaseInfeasibleError(case.id, "suite", str(err)) from err
    ens = [r.ens for r in results]
    ri = [r.resilience_index for r in results]
    report = {
        "ens_mwh": [round(v, 6) for v in ens],
        "resilience_index_pct": [round(v, 6) for v in ri],
        "ens_strictly_decreasing": all(a > b for a, b in zip(ens, ens[1:])),
        "ri_strictly_increasing": all(a < b for a, b in zip(ri, ri[1:])),
        "hydrogen_vs_battery8_ri_margin_pp": round(ri[5] - ri[4], 6),
        "total_load_mwh": round(results[0].total_load, 6),
        "table2_reference": reference_consistency_report(),
    }
    if strict_ordering and not (report["ens_strictly_decreasing"]
                                and report["ri_strictly_increasing"]):
        raise RuntimeError(f"case ordering violated: {report}")
    return results, report
