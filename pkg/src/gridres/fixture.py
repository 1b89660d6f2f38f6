"""Default study fixture: 33-node feeder, device fleet, week-long scenario.

Feeder impedances are the published 12.66 kV test-feeder values. Everything
time-varying (load shape, PV shape and weather, prices, vehicle hydrogen
demand) is synthetic: shapes are chosen to give a ~3.8 MW evening peak,
450.4 MWh of weekly energy, ~40% solar penetration after the 2.5x scale-up,
day/night price structure, and a storm day inside the outage window. These
series are fixture choices, not published data.
"""

from __future__ import annotations

import numpy as np

from .devices import (DeviceFleet, DgParams, H2SystemParams, PvParams,
                      SheddingParams)
from .network import Network, ieee33_network
from .scenario import OutageWindow, Scenario

# nodal peak loads of the feeder, kW / kVAr, indexed by node id (root = 0)
NODE_LOAD_KW = (
    0, 100, 90, 120, 60, 60, 200, 200, 60, 60, 45, 60, 60, 120, 60, 60, 60,
    90, 90, 90, 90, 90, 90, 420, 420, 60, 60, 60, 120, 200, 150, 210, 60)
NODE_LOAD_KVAR = (
    0, 60, 40, 80, 30, 20, 100, 100, 20, 20, 30, 35, 35, 80, 10, 20, 20,
    40, 40, 40, 40, 40, 50, 200, 200, 25, 25, 20, 70, 600, 70, 100, 40)

DG_NODES = (8, 13, 30)
PV_NODES = (7, 14, 20, 24, 27, 31)
H2_NODES = (2, 3, 22)

OUTAGE_FIRST_HOUR = 79
OUTAGE_LAST_HOUR = 128
WEEK_HOURS = 168
WEEKLY_LOAD_MWH = 450.4

# feeder-total hourly load shape by hour of day (MW, pre-normalization)
_LOAD_SHAPE = np.array([
    1.70, 1.60, 1.55, 1.50, 1.55, 1.70, 2.10, 2.70, 3.10, 3.20, 3.30, 3.35,
    3.40, 3.30, 3.25, 3.30, 3.45, 3.70, 3.95, 4.00, 3.85, 3.40, 2.70, 2.10])
_DAY_FACTOR = np.array([1.00, 1.01, 0.99, 1.02, 1.00, 0.96, 0.94])

# per-day clear-sky factor; day 4 (hours 97-120) is the storm day that
# motivates long-duration storage inside the outage window
_PV_WEATHER = np.array([1.00, 0.95, 0.85, 1.00, 0.15, 0.90, 1.00])

# day-ahead price bands, $/MWh: off-peak 22:00-06:00, shoulder, evening peak
_PRICE_OFFPEAK = 38.0
_PRICE_SHOULDER = 41.0
_PRICE_PEAK = 55.0

# vehicle refueling demand shape per hydrogen station, kg/h
_H2_DEMAND_SHAPE = np.array([
    4, 3, 2, 2, 3, 5, 8, 14, 18, 16, 12, 10, 10, 11, 12, 14, 18, 24, 28, 26,
    20, 14, 9, 6], dtype=float)

PV_BASE_PEAK_MW = 0.32    # single-unit clear-sky peak before scale-up
PV_SCALE_FACTOR = 2.5


def _hod(t: int) -> int:
    return (t - 1) % 24


def _day(t: int) -> int:
    return (t - 1) // 24


def pv_shape_hour(hod: int) -> float:
    """Normalized clear-sky production for an hour of day, peak 1 near midday."""
    if hod < 7 or hod > 16:
        return 0.0
    return float(np.sin(np.pi * (hod - 6) / 11.0) ** 1.3)


def price_hour(hod: int) -> float:
    if hod >= 22 or hod < 6:
        return _PRICE_OFFPEAK
    if hod < 15:
        return _PRICE_SHOULDER
    return _PRICE_PEAK


def default_network(substation_s_max: float = 12.0) -> Network:
    return ieee33_network(substation_s_max=substation_s_max)


def default_fleet() -> DeviceFleet:
    """Three utility generators, six PV units, three hydrogen systems.

    Generator capacities (0.8 / 2.4 / 1.0 MW) and hydrogen parameters follow
    the study setup; cost figures are working defaults. Units 8 and 13 are
    combined-cycle, unit 30 a combustion turbine.
    """
    dg = (
        DgParams(node=8, p_min=0.08, p_max=0.8, q_min=-0.24, q_max=0.48,
                 s_rating=0.92, fixed_cost=12.0, marginal_cost=58.0,
                 startup_price=50.0, shutdown_price=20.0,
                 ramp_up=0.64, ramp_down=0.64),
        DgParams(node=13, p_min=0.24, p_max=2.4, q_min=-0.72, q_max=1.44,
                 s_rating=2.76, fixed_cost=12.0, marginal_cost=58.0,
                 startup_price=50.0, shutdown_price=20.0,
                 ramp_up=1.92, ramp_down=1.92),
        DgParams(node=30, p_min=0.1, p_max=1.0, q_min=-0.3, q_max=0.6,
                 s_rating=1.15, fixed_cost=12.0, marginal_cost=65.0,
                 startup_price=30.0, shutdown_price=10.0,
                 ramp_up=1.0, ramp_down=1.0),
    )
    pv = tuple(
        PvParams(node=n, p_max_profile_scale=PV_BASE_PEAK_MW * PV_SCALE_FACTOR,
                 s_rating=0.75, marginal_cost=0.0)
        for n in PV_NODES)
    h2 = tuple(H2SystemParams(node=n) for n in H2_NODES)
    return DeviceFleet(dg=dg, pv=pv, h2=h2, battery=(),
                       shedding=SheddingParams(voll=500.0))


def default_scenario(horizon: int = WEEK_HOURS, with_outage: bool = True,
                     with_h2_demand: bool = True) -> Scenario:
    """Week-long hourly scenario with the two-day multi-asset outage."""
    T = horizon
    hours = np.arange(1, T + 1)
    hods = (hours - 1) % 24
    days = (hours - 1) // 24

    shape = _LOAD_SHAPE[hods] * _DAY_FACTOR[days % 7]
    if T == WEEK_HOURS:
        shape = shape * (WEEKLY_LOAD_MWH / shape.sum())
    else:
        full = _LOAD_SHAPE[((np.arange(WEEK_HOURS)) % 24)] * \
            _DAY_FACTOR[(np.arange(WEEK_HOURS)) // 24 % 7]
        shape = shape * (WEEKLY_LOAD_MWH / full.sum())

    total_kw = sum(NODE_LOAD_KW)
    load_p = {n: shape * (NODE_LOAD_KW[n] / total_kw) for n in range(33)}
    load_q = {n: shape * (NODE_LOAD_KVAR[n] / total_kw) for n in range(33)}

    pv_series = np.array([pv_shape_hour(int(h)) for h in hods]) * _PV_WEATHER[days % 7]
    pv_profile = {n: pv_series.copy() for n in PV_NODES}

    h2_demand = {n: (_H2_DEMAND_SHAPE[hods] if with_h2_demand else np.zeros(T))
                 for n in H2_NODES}

    price = np.array([price_hour(int(h)) for h in hods])

    alpha = np.full(T, 0.1)
    outages: tuple[OutageWindow, ...] = ()
    if with_outage and OUTAGE_FIRST_HOUR <= T:
        last = min(OUTAGE_LAST_HOUR, T)
        outages = (
            OutageWindow("substation", OUTAGE_FIRST_HOUR, last),
            OutageWindow("dg@8", OUTAGE_FIRST_HOUR, last),
            OutageWindow("dg@13", OUTAGE_FIRST_HOUR, last),
            OutageWindow("dg@30", OUTAGE_FIRST_HOUR, last),
        )
        # reserve signal: tanks full by the hour before the event
        if OUTAGE_FIRST_HOUR - 1 >= 1:
            alpha[OUTAGE_FIRST_HOUR - 2] = 1.0

    return Scenario(horizon=T, dt=1.0, price=price, load_p=load_p,
                    load_q=load_q, pv_profile=pv_profile, h2_demand=h2_demand,
                    alpha=alpha, outages=outages, voll=500.0)


def make_default_fixture(horizon: int = WEEK_HOURS, with_outage: bool = True,
                         with_h2_demand: bool = True
                         ) -> tuple[Network, DeviceFleet, Scenario]:
    """The full study setup used by the case suite and the CLI default."""
    return (default_network(),
            default_fleet(),
            default_scenario(horizon, with_outage, with_h2_demand))
