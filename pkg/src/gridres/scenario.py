"""Scenario data: horizon, profiles, outage windows, reserve signal, cases.

Hours are 1-based over the scheduling horizon (t = 1..T); series arrays are
0-based (entry k holds hour k+1). Outage windows are inclusive on both ends
and expressed in absolute hours of the scenario.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class OutageWindow:
    asset: str          # "substation", "dg@<node>" or "line@<child-node>"
    from_hour: int      # inclusive, 1-based
    to_hour: int        # inclusive

    def __post_init__(self):
        if self.from_hour > self.to_hour:
            raise ValueError(f"outage window for {self.asset} is empty")
        if self.from_hour < 1:
            raise ValueError("outage hours are 1-based")

    def hours(self) -> range:
        return range(self.from_hour, self.to_hour + 1)


@dataclass
class Scenario:
    horizon: int                     # T, hours
    dt: float                        # h per step
    price: np.ndarray                # $/MWh, shape (T,)
    load_p: dict[int, np.ndarray]    # node -> MW series
    load_q: dict[int, np.ndarray]    # node -> MVAr series
    pv_profile: dict[int, np.ndarray]  # pv node -> normalized series (0..1)
    h2_demand: dict[int, np.ndarray]   # h2 node -> kg/h series
    alpha: np.ndarray                # reserve fraction series (0..1)
    outages: tuple[OutageWindow, ...] = ()
    voll: float = 500.0              # $/MWh

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        T = self.horizon
        def _check(name, arr):
            if len(arr) != T:
                raise ValueError(f"{name} series length {len(arr)} != horizon {T}")
        _check("price", self.price)
        _check("alpha", self.alpha)
        for n, s in self.load_p.items():
            _check(f"load_p[{n}]", s)
        for n, s in self.load_q.items():
            _check(f"load_q[{n}]", s)
        for n, s in self.pv_profile.items():
            _check(f"pv_profile[{n}]", s)
        for n, s in self.h2_demand.items():
            _check(f"h2_demand[{n}]", s)
        if np.any(self.alpha < 0) or np.any(self.alpha > 1):
            raise ValueError("alpha must lie in [0, 1]")

    # -- views ---------------------------------------------------------------

    def event_hour(self) -> int | None:
        """First hour of the earliest outage window, None without outages."""
        if not self.outages:
            return None
        return min(w.from_hour for w in self.outages)

    def truncate(self, hours: int) -> "Scenario":
        """First `hours` hours; outage windows outside the range are dropped."""
        if hours > self.horizon:
            raise ValueError("cannot truncate beyond the horizon")
        keep = tuple(w for w in self.outages if w.from_hour <= hours)
        keep = tuple(OutageWindow(w.asset, w.from_hour, min(w.to_hour, hours))
                     for w in keep)
        return Scenario(
            horizon=hours, dt=self.dt, price=self.price[:hours],
            load_p={n: s[:hours] for n, s in self.load_p.items()},
            load_q={n: s[:hours] for n, s in self.load_q.items()},
            pv_profile={n: s[:hours] for n, s in self.pv_profile.items()},
            h2_demand={n: s[:hours] for n, s in self.h2_demand.items()},
            alpha=self.alpha[:hours], outages=keep, voll=self.voll)

    def window(self, first_hour: int, last_hour: int) -> "Scenario":
        """Sub-scenario covering absolute hours [first_hour, last_hour]."""
        a, b = first_hour - 1, last_hour
        keep = []
        for w in self.outages:
            if w.to_hour >= first_hour and w.from_hour <= last_hour:
                keep.append(OutageWindow(w.asset, max(w.from_hour, first_hour),
                                         min(w.to_hour, last_hour)))
        return Scenario(
            horizon=last_hour - first_hour + 1, dt=self.dt, price=self.price[a:b],
            load_p={n: s[a:b] for n, s in self.load_p.items()},
            load_q={n: s[a:b] for n, s in self.load_q.items()},
            pv_profile={n: s[a:b] for n, s in self.pv_profile.items()},
            h2_demand={n: s[a:b] for n, s in self.h2_demand.items()},
            alpha=self.alpha[a:b], outages=tuple(keep), voll=self.voll)

    def without_outages(self) -> "Scenario":
        return replace(self, outages=())

    def with_zero_h2_demand(self) -> "Scenario":
        return replace(self, h2_demand={n: np.zeros(self.horizon)
                                        for n in self.h2_demand})

    def total_load_mwh(self) -> float:
        return float(sum(s.sum() for s in self.load_p.values()) * self.dt)


@dataclass(frozen=True)
class CaseSpec:
    """One column of the six-case storage comparison."""
    id: int
    storage_kind: str                 # "none" | "battery" | "hydrogen"
    battery_duration_h: float | None = None
    zero_h2_demand: bool = False

    def __post_init__(self):
        if self.storage_kind not in ("none", "battery", "hydrogen"):
            raise ValueError(f"unknown storage kind {self.storage_kind!r}")
        if self.storage_kind == "battery":
            if self.battery_duration_h not in (2, 4, 6, 8):
                raise ValueError("battery duration must be one of 2, 4, 6, 8 h")


def table2_cases() -> tuple[CaseSpec, ...]:
    """The six comparison cases: no storage, batteries of 2/4/6/8 h, hydrogen."""
    return (
        CaseSpec(1, "none", zero_h2_demand=True),
        CaseSpec(2, "battery", 2, zero_h2_demand=True),
        CaseSpec(3, "battery", 4, zero_h2_demand=True),
        CaseSpec(4, "battery", 6, zero_h2_demand=True),
        CaseSpec(5, "battery", 8, zero_h2_demand=True),
        CaseSpec(6, "hydrogen", zero_h2_demand=True),
    )


@dataclass
class CaseResult:
    case: CaseSpec
    dispatch: dict[str, np.ndarray]        # variable tag family -> (T,) series
    ens: float                             # MWh
    resilience_index: float                # percent
    cost_breakdown: dict[str, float]       # $ by objective term
    per_node_shed: dict[int, float]        # MWh by node
    total_load: float                      # MWh
    objective: float
    solver_stats: dict = field(default_factory=dict)


def compute_resilience_index(total_load: float, curtailed: float) -> float:
    """Served share of total load, in percent."""
    if total_load <= 0:
        raise ValueError("total load must be positive")
    if curtailed < 0 or curtailed > total_load + 1e-9:
        raise ValueError("curtailed energy must lie in [0, total load]")
    return (total_load - min(curtailed, total_load)) / total_load * 100.0


# -- scenario file I/O --------------------------------------------------------


def _read_profile_csv(path: Path) -> dict[str, np.ndarray]:
    """CSV with a leading `hour` column; returns column name -> series."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = {name: [] for name in header[1:]}
        for row in reader:
            for name, val in zip(header[1:], row[1:]):
                cols[name].append(float(val))
    return {name: np.array(vals) for name, vals in cols.items()}


def load_scenario_json(path) -> Scenario:
    """Scenario document with profile CSV references resolved relative to it."""
    path = Path(path)
    doc = json.loads(path.read_text())
    base = path.parent
    T = int(doc["horizon"])

    price = _read_profile_csv(base / doc["profiles"]["price"])["price"]
    load_p_cols = _read_profile_csv(base / doc["profiles"]["load_p"])
    load_q_cols = _read_profile_csv(base / doc["profiles"]["load_q"])
    pv_cols = _read_profile_csv(base / doc["profiles"]["pv"]) if "pv" in doc["profiles"] else {}
    h2_cols = (_read_profile_csv(base / doc["profiles"]["h2_demand"])
               if "h2_demand" in doc["profiles"] else {})

    alpha_spec = doc.get("alpha", {"normal": 0.1})
    alpha = np.full(T, float(alpha_spec.get("normal", 0.1)))
    prep = alpha_spec.get("preparation")
    if prep:
        deadline = int(prep["deadline_hour"])
        hold = int(prep.get("hold_hours", 1))
        value = float(prep["value"])
        for t in range(max(1, deadline - hold + 1), deadline + 1):
            if t <= T:
                alpha[t - 1] = value

    outages = tuple(OutageWindow(o["asset"], int(o["from_hour"]), int(o["to_hour"]))
                    for o in doc.get("outages", ()))
    return Scenario(
        horizon=T, dt=float(doc.get("dt", 1.0)), price=price,
        load_p={int(k): v for k, v in load_p_cols.items()},
        load_q={int(k): v for k, v in load_q_cols.items()},
        pv_profile={int(k): v for k, v in pv_cols.items()},
        h2_demand={int(k): v for k, v in h2_cols.items()},
        alpha=alpha, outages=outages, voll=float(doc.get("voll", 500.0)))


def save_scenario_json(scenario: Scenario, out_dir, name: str = "scenario") -> Path:
    """Write the scenario as a JSON document plus profile CSVs; returns JSON path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    T = scenario.horizon

    def _write(fname: str, cols: dict[str, np.ndarray]) -> str:
        with open(out_dir / fname, "w", newline="") as fh:
            w = csv.writer(fh)
            names = sorted(cols)
            w.writerow(["hour"] + names)
            for k in range(T):
                w.writerow([k + 1] + [f"{cols[n][k]:.10g}" for n in names])
        return fname

    profiles = {
        "price": _write(f"{name}_price.csv", {"price": scenario.price}),
        "load_p": _write(f"{name}_load_p.csv", {str(n): s for n, s in scenario.load_p.items()}),
        "load_q": _write(f"{name}_load_q.csv", {str(n): s for n, s in scenario.load_q.items()}),
    }
    if scenario.pv_profile:
        profiles["pv"] = _write(f"{name}_pv.csv", {str(n): s for n, s in scenario.pv_profile.items()})
    if scenario.h2_demand:
        profiles["h2_demand"] = _write(f"{name}_h2_demand.csv",
                                       {str(n): s for n, s in scenario.h2_demand.items()})

    normal = float(np.min(scenario.alpha))
    doc = {
        "horizon": T,
        "dt": scenario.dt,
        "voll": scenario.voll,
        "profiles": profiles,
        "alpha": {"normal": normal},
        "outages": [{"asset": w.asset, "from_hour": w.from_hour, "to_hour": w.to_hour}
                    for w in scenario.outages],
    }
    peak = np.where(scenario.alpha > normal + 1e-12)[0]
    if peak.size:
        doc["alpha"]["preparation"] = {
            "deadline_hour": int(peak[-1] + 1),
            "hold_hours": int(peak.size),
            "value": float(scenario.alpha[peak[0]]),
        }
    path = out_dir / f"{name}.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True))
    return path
