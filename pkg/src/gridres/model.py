"""Canonical sparse MILP container: variables, linear constraints, objective.

Constraint tags are part of the public contract: stable strings of the
form "Name[asset,t]" that parse back to (name, indices). Consumers (solver,
MPS export, reporting) rely only on this container, never on the builder.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

CONTINUOUS = "continuous"
BINARY = "binary"

LE = "<="
EQ = "=="
GE = ">="

_TAG_RE = re.compile(r"^([A-Za-z0-9_]+)\[([^\]]*)\]$")


def parse_tag(tag: str) -> tuple[str, tuple[str, ...]]:
    """Split "Eq25[12,100]" into ("Eq25", ("12", "100"))."""
    m = _TAG_RE.match(tag)
    if not m:
        raise ValueError(f"malformed tag: {tag!r}")
    name, args = m.groups()
    parts = tuple(a.strip() for a in args.split(",")) if args else ()
    return name, parts


@dataclass
class VariableHandle:
    index: int
    kind: str
    lower: float
    upper: float
    tag: str

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"{self.tag}: lower bound {self.lower} > upper {self.upper}")
        if self.kind == BINARY and not (self.lower >= 0.0 and self.upper <= 1.0):
            raise ValueError(f"{self.tag}: binary bounds must lie in [0, 1]")


@dataclass
class LinearConstraint:
    coefficients: list[tuple[int, float]]  # (variable index, value), sparse
    sense: str
    rhs: float
    tag: str

    def __post_init__(self):
        if not any(v != 0.0 for _, v in self.coefficients):
            raise ValueError(f"{self.tag}: constraint has no nonzero coefficient")
        if not np.isfinite(self.rhs):
            raise ValueError(f"{self.tag}: rhs must be finite")
        if self.sense not in (LE, EQ, GE):
            raise ValueError(f"{self.tag}: unknown sense {self.sense!r}")


class MilpModel:
    """Mutable while being assembled; treated as immutable once handed to a solver."""

    def __init__(self, horizon: int = 0, dt: float = 1.0):
        self.variables: list[VariableHandle] = []
        self.constraints: list[LinearConstraint] = []
        self.objective: dict[int, float] = {}
        self.horizon = horizon
        self.dt = dt
        self.metadata: dict = {}
        self._tag_to_index: dict[str, int] = {}

    # -- construction -------------------------------------------------------

    def add_variable(self, tag: str, lower: float, upper: float,
                     kind: str = CONTINUOUS) -> int:
        if tag in self._tag_to_index:
            raise ValueError(f"duplicate variable tag {tag!r}")
        idx = len(self.variables)
        self.variables.append(VariableHandle(idx, kind, lower, upper, tag))
        self._tag_to_index[tag] = idx
        return idx

    def add_constraint(self, coeffs: list[tuple[int, float]], sense: str,
                       rhs: float, tag: str) -> None:
        nvar = len(self.variables)
        for j, _ in coeffs:
            if not (0 <= j < nvar):
                raise ValueError(f"{tag}: references unknown variable index {j}")
        merged: dict[int, float] = {}
        for j, v in coeffs:
            merged[j] = merged.get(j, 0.0) + v
        pairs = [(j, v) for j, v in merged.items() if v != 0.0]
        self.constraints.append(LinearConstraint(pairs, sense, rhs, tag))

    def add_objective_term(self, var_index: int, coeff: float) -> None:
        if not (0 <= var_index < len(self.variables)):
            raise ValueError(f"objective references unknown variable index {var_index}")
        self.objective[var_index] = self.objective.get(var_index, 0.0) + coeff

    def set_bounds(self, var_index: int, lower: float | None = None,
                   upper: float | None = None) -> None:
        v = self.variables[var_index]
        lo = v.lower if lower is None else lower
        up = v.upper if upper is None else upper
        if lo > up:
            raise ValueError(f"{v.tag}: bound update crosses ({lo} > {up})")
        v.lower, v.upper = lo, up

    # -- lookups ------------------------------------------------------------

    def var_index(self, tag: str) -> int:
        return self._tag_to_index[tag]

    def has_var(self, tag: str) -> bool:
        return tag in self._tag_to_index

    def binary_indices(self) -> list[int]:
        return [v.index for v in self.variables if v.kind == BINARY]

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_cons(self) -> int:
        return len(self.constraints)

    # -- dense/sparse views for solvers --------------------------------------

    def bounds_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([v.lower for v in self.variables], dtype=float)
        up = np.array([v.upper for v in self.variables], dtype=float)
        return lo, up

    def objective_array(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for j, v in self.objective.items():
            c[j] = v
        return c

    def constraint_matrix(self) -> tuple[sp.csr_matrix, np.ndarray, list[str]]:
        """Rows in insertion order; returns (A, rhs, senses)."""
        rows, cols, vals = [], [], []
        rhs = np.zeros(self.n_cons)
        senses: list[str] = []
        for i, con in enumerate(self.constraints):
            for j, v in con.coefficients:
                rows.append(i)
                cols.append(j)
                vals.append(v)
            rhs[i] = con.rhs
            senses.append(con.sense)
        A = sp.csr_matrix((vals, (rows, cols)), shape=(self.n_cons, self.n_vars))
        return A, rhs, senses

    def nnz(self) -> int:
        return sum(len(c.coefficients) for c in self.constraints)

    def evaluate_constraints(self, x: np.ndarray) -> np.ndarray:
        """Signed violation of each constraint at x (positive = violated)."""
        A, rhs, senses = self.constraint_matrix()
        act = A @ x
        out = np.zeros(self.n_cons)
        for i, s in enumerate(senses):
            if s == LE:
                out[i] = act[i] - rhs[i]
            elif s == GE:
                out[i] = rhs[i] - act[i]
            else:
                out[i] = abs(act[i] - rhs[i])
        return out

    def objective_value(self, x: np.ndarray) -> float:
        return float(sum(v * x[j] for j, v in self.objective.items()))
