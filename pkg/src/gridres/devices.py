"""Device parameter records and per-timestep physics/cost functions.

Covers dispatchable generators (DG), utility PV, hydrogen systems
(electrolyzer + storage tank + stationary fuel cell), the battery baseline
used for storage comparisons, and load-shedding penalties. All functions
here are pure; the optimizer enforces bounds, these evaluate physics.

Unit conventions: power in MW, reactive power in MVAr, apparent power in
MVA, hydrogen mass in kg, mass flow in kg/h, money in $.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict


@dataclass(frozen=True)
class DgParams:
    """Dispatchable generator with commitment, startup/shutdown and ramping.

    fixed_cost is $/h while committed; marginal_cost is $/MWh produced.
    startup_price / shutdown_price are charged per transition event.
    """
    node: int
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    s_rating: float
    fixed_cost: float = 12.0        # b: $/h, non-paper default
    marginal_cost: float = 35.0     # k: $/MWh, non-paper default
    startup_price: float = 50.0     # $/event, non-paper default
    shutdown_price: float = 20.0    # $/event, non-paper default
    ramp_up: float = 1.0            # MW/h
    ramp_down: float = 1.0          # MW/h

    def __post_init__(self):
        if self.p_min > self.p_max:
            raise ValueError(f"dg@{self.node}: p_min > p_max")
        if self.ramp_up < 0 or self.ramp_down < 0:
            raise ValueError(f"dg@{self.node}: ramp limits must be >= 0")
        if self.s_rating <= 0:
            raise ValueError(f"dg@{self.node}: s_rating must be > 0")


@dataclass(frozen=True)
class PvParams:
    """Utility PV unit: output follows scale * normalized profile, capped by inverter."""
    node: int
    p_max_profile_scale: float
    s_rating: float
    marginal_cost: float = 0.0      # c_pv: $/MWh, non-paper default

    def __post_init__(self):
        if self.p_max_profile_scale < 0:
            raise ValueError(f"pv@{self.node}: profile scale must be >= 0")
        if self.s_rating <= 0:
            raise ValueError(f"pv@{self.node}: s_rating must be > 0")


# Table-derived conversion: specific energy 56.4 kWh/kg, so 1 MWh of
# electrolyzer input maps to 1000/56.4 kg before efficiency, and 1 kg of
# hydrogen maps to 56.4/1000 MWh before fuel-cell efficiency.
SPECIFIC_ENERGY_KWH_PER_KG = 56.4
LAMBDA_EL_KG_PER_MWH = 1000.0 / SPECIFIC_ENERGY_KWH_PER_KG
LAMBDA_FC_MWH_PER_KG = SPECIFIC_ENERGY_KWH_PER_KG / 1000.0


@dataclass(frozen=True)
class H2SystemParams:
    """Electrolyzer + storage tank + stationary fuel cell at one node.

    el_q_* bound the electrolyzer hydrogen production rate (kg/h), fc_q_*
    bound the fuel-cell hydrogen draw (kg/h). dissipation_rate is the
    fractional tank loss per hour applied to the current mass.
    """
    node: int
    el_q_min: float = 0.0
    el_q_max: float = 31.914893617021278   # 3 MW electrolyzer at 60%
    fc_q_min: float = 0.0
    fc_q_max: float = 75.98784194528875    # 3 MW fuel cell at 70%
    eta_el: float = 0.60
    eta_fc: float = 0.70
    lambda_el: float = LAMBDA_EL_KG_PER_MWH
    lambda_fc: float = LAMBDA_FC_MWH_PER_KG
    moh_min: float = 60.0
    moh_max: float = 600.0
    dissipation_rate: float = 6e-5         # 0.006 %/h of stored mass
    s_inverter: float = 3.3
    p_el_max: float = 3.0
    p_fc_max: float = 3.0

    def __post_init__(self):
        if not (0.0 < self.eta_el <= 1.0 and 0.0 < self.eta_fc <= 1.0):
            raise ValueError(f"h2@{self.node}: efficiencies must be in (0, 1]")
        if self.moh_min >= self.moh_max:
            raise ValueError(f"h2@{self.node}: moh_min must be < moh_max")
        if self.p_el_max <= 0 or self.p_fc_max <= 0:
            raise ValueError(f"h2@{self.node}: converter power limits must be > 0")
        if self.el_q_min < 0 or self.fc_q_min < 0:
            raise ValueError(f"h2@{self.node}: flow minimums must be >= 0")


@dataclass(frozen=True)
class BatteryParams:
    """Battery baseline unit; energy capacity = p_rating * duration_h."""
    node: int
    p_rating: float
    duration_h: float
    eta_ch: float = 0.95
    eta_dis: float = 0.95
    soc_min_frac: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.eta_ch <= 1.0 and 0.0 < self.eta_dis <= 1.0):
            raise ValueError(f"battery@{self.node}: efficiencies must be in (0, 1]")
        if self.p_rating <= 0 or self.duration_h <= 0:
            raise ValueError(f"battery@{self.node}: rating and duration must be > 0")

    @property
    def energy_capacity(self) -> float:
        return self.p_rating * self.duration_h

    @property
    def soc_min(self) -> float:
        return self.soc_min_frac * self.energy_capacity


@dataclass(frozen=True)
class SheddingParams:
    voll: float = 500.0  # $/MWh

    def __post_init__(self):
        if self.voll <= 0:
            raise ValueError("voll must be positive")


@dataclass(frozen=True)
class DeviceFleet:
    """All devices attached to one network, grouped by kind."""
    dg: tuple[DgParams, ...] = ()
    pv: tuple[PvParams, ...] = ()
    h2: tuple[H2SystemParams, ...] = ()
    battery: tuple[BatteryParams, ...] = ()
    shedding: SheddingParams = field(default_factory=SheddingParams)

    def without_storage(self) -> "DeviceFleet":
        return DeviceFleet(dg=self.dg, pv=self.pv, h2=(), battery=(), shedding=self.shedding)


def electrolyzer_h2_rate(p_el: float, params: H2SystemParams) -> float:
    """Hydrogen production rate (kg/h) for electrolyzer input power p_el (MW)."""
    if p_el < 0:
        raise ValueError("electrolyzer power must be >= 0")
    return params.lambda_el * p_el * params.eta_el


def fuel_cell_power(q_fc: float, params: H2SystemParams) -> float:
    """Electric output (MW) for fuel-cell hydrogen draw q_fc (kg/h)."""
    if q_fc < 0:
        raise ValueError("fuel-cell hydrogen flow must be >= 0")
    return params.lambda_fc * q_fc * params.eta_fc


def tank_step(moh_prev: float, q_el: float, q_dem: float, q_fc: float,
              dt: float, params: H2SystemParams) -> float:
    """One implicit tank-mass step.

    Solves MOH_t = MOH_{t-1} + (q_el - q_dem - q_fc - lam * MOH_t) * dt in
    closed form, which keeps the recursion linear for the optimizer:
    MOH_t = (MOH_{t-1} + (q_el - q_dem - q_fc) * dt) / (1 + lam * dt).
    Bound enforcement is the optimizer's job, not this function's.
    """
    if min(q_el, q_dem, q_fc) < 0:
        raise ValueError("hydrogen flows must be >= 0")
    lam = params.dissipation_rate
    return (moh_prev + (q_el - q_dem - q_fc) * dt) / (1.0 + lam * dt)


def dg_cost(x: int, p: float, params: DgParams) -> float:
    """Hourly operating cost: fixed cost while committed plus marginal energy cost."""
    if x not in (0, 1):
        raise ValueError("commitment status must be 0 or 1")
    if x == 0 and p > 0:
        raise ValueError("positive output with unit off")
    return x * params.fixed_cost + params.marginal_cost * p


def startup_shutdown_cost(x_t: int, x_prev: int, params: DgParams) -> tuple[float, float]:
    """Tight (C_SU, C_SD) for a status transition under cost minimization."""
    if x_t not in (0, 1) or x_prev not in (0, 1):
        raise ValueError("statuses must be binary")
    c_su = max(0.0, (x_t - x_prev) * params.startup_price)
    c_sd = max(0.0, (x_prev - x_t) * params.shutdown_price)
    return c_su, c_sd


def battery_soc_step(soc_prev: float, p_ch: float, p_dis: float, dt: float,
                     params: BatteryParams) -> float:
    """State of charge (MWh) after one step of charging/discharging."""
    if p_ch < 0 or p_dis < 0:
        raise ValueError("charge/discharge powers must be >= 0")
    if p_ch > params.p_rating + 1e-12 or p_dis > params.p_rating + 1e-12:
        raise ValueError("power exceeds rating")
    if p_ch > 0 and p_dis > 0:
        raise ValueError("simultaneous charge and discharge")
    return soc_prev + (params.eta_ch * p_ch - p_dis / params.eta_dis) * dt


def fleet_to_json(fleet: DeviceFleet) -> str:
    doc = {
        "dg": [asdict(d) for d in fleet.dg],
        "pv": [asdict(d) for d in fleet.pv],
        "h2": [asdict(d) for d in fleet.h2],
        "battery": [asdict(d) for d in fleet.battery],
        "shedding": asdict(fleet.shedding),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def fleet_from_json(text: str) -> DeviceFleet:
    doc = json.loads(text)
    return DeviceFleet(
        dg=tuple(DgParams(**d) for d in doc.get("dg", [])),
        pv=tuple(PvParams(**d) for d in doc.get("pv", [])),
        h2=tuple(H2SystemParams(**d) for d in doc.get("h2", [])),
        battery=tuple(BatteryParams(**d) for d in doc.get("battery", [])),
        shedding=SheddingParams(**doc.get("shedding", {})),
    )
