"""Radial distribution network model: topology, validation, per-unit conversion.

Node ids are contiguous integers starting at 0; node 0 is the substation
(root). Lines are oriented parent -> child, away from the root. Squared
per-unit voltage magnitudes are used throughout, matching the linearized
branch-flow formulation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources


@dataclass(frozen=True)
class Node:
    id: int
    is_root: bool = False
    v_min_sq: float = 0.95**2
    v_max_sq: float = 1.05**2

    def __post_init__(self):
        if self.v_min_sq >= self.v_max_sq:
            raise ValueError(f"node {self.id}: v_min_sq must be < v_max_sq")


@dataclass(frozen=True)
class Line:
    from_node: int  # parent (nearer to root)
    to_node: int    # child
    r_pu: float
    x_pu: float
    s_max: float    # apparent-power rating, per-unit MVA

    def __post_init__(self):
        if self.r_pu < 0 or self.x_pu < 0:
            raise ValueError(f"line {self.from_node}->{self.to_node}: negative impedance")
        if self.s_max <= 0:
            raise ValueError(f"line {self.from_node}->{self.to_node}: s_max must be > 0")


@dataclass(frozen=True)
class Network:
    nodes: tuple[Node, ...]
    lines: tuple[Line, ...]
    s_base_mva: float = 1.0
    v_base_kv: float = 12.66
    substation_s_max: float = 12.0  # S^ST: not published for this feeder, config input

    def __post_init__(self):
        if self.s_base_mva <= 0 or self.v_base_kv <= 0:
            raise ValueError("per-unit bases must be positive")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def node(self, node_id: int) -> Node:
        return self.nodes[node_id]

    def parent_line_of(self, node_id: int) -> Line | None:
        """Line whose to_node is node_id (None for the root)."""
        for ln in self.lines:
            if ln.to_node == node_id:
                return ln
        return None


def to_per_unit(value: float, s_base_mva: float) -> float:
    """Convert MW or MVAr to per-unit on the given MVA base."""
    if s_base_mva <= 0:
        raise ValueError("s_base_mva must be positive")
    return value / s_base_mva


def to_physical(value_pu: float, s_base_mva: float) -> float:
    """Inverse of to_per_unit."""
    if s_base_mva <= 0:
        raise ValueError("s_base_mva must be positive")
    return value_pu * s_base_mva


def impedance_to_per_unit(ohm: float, v_base_kv: float, s_base_mva: float = 1.0) -> float:
    """Ohmic line impedance to per-unit via Z_base = kV^2 / MVA."""
    z_base = v_base_kv**2 / s_base_mva
    return ohm / z_base


def validate_radial(network: Network) -> list[str]:
    """Check that the graph is a tree rooted at node 0, lines oriented parent->child.

    Returns a list of human-readable violations; empty means valid.
    """
    violations: list[str] = []
    n = network.n_nodes
    if n == 0:
        return ["network has no nodes"]

    ids = [nd.id for nd in network.nodes]
    if ids != list(range(n)):
        violations.append("node ids not contiguous from 0")
    roots = [nd.id for nd in network.nodes if nd.is_root]
    if roots != [0]:
        violations.append(f"expected exactly one root at node 0, got {roots}")

    if len(network.lines) != n - 1:
        violations.append(f"line count {len(network.lines)} != node count - 1 ({n - 1})")

    parent_count = {i: 0 for i in range(n)}
    for ln in network.lines:
        if ln.from_node not in parent_count or ln.to_node not in parent_count:
            violations.append(f"line {ln.from_node}->{ln.to_node} references unknown node")
            continue
        parent_count[ln.to_node] += 1
    for i in range(1, n):
        if parent_count.get(i, 0) > 1:
            violations.append(f"node {i} has {parent_count[i]} parent lines")
    if parent_count.get(0, 0) > 0:
        violations.append("root node 0 appears as a line to_node")

    # reachability from the root along parent->child orientation
    children: dict[int, list[int]] = {i: [] for i in range(n)}
    for ln in network.lines:
        if ln.from_node in children and ln.to_node in children:
            children[ln.from_node].append(ln.to_node)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in children[u]:
            if v in seen:
                violations.append("cycle detected")
                return violations
            seen.add(v)
            stack.append(v)
    for i in range(n):
        if i not in seen:
            violations.append(f"node {i} unreachable")
    return violations


def downstream_sets(network: Network) -> dict[int, list[Line]]:
    """Child lines of each node; the per-node sets partition the line set.

    Used to assemble the sum-over-children flow terms of the nodal balance
    rows. Raises ValueError on non-radial input.
    """
    violations = validate_radial(network)
    if violations:
        raise ValueError("non-radial network: " + "; ".join(violations))
    out: dict[int, list[Line]] = {nd.id: [] for nd in network.nodes}
    for ln in network.lines:
        out[ln.from_node].append(ln)
    return out


def load_network_csv(branch_path, node_path, s_base_mva: float = 1.0,
                     v_base_kv: float = 12.66, substation_s_max: float = 12.0) -> Network:
    """Build a Network from branch and node CSV files.

    Branch CSV header: from,to,r_ohm,x_ohm,s_max_mva (ohmic values are
    converted to per-unit using v_base_kv). Node CSV header:
    node,vmin_pu,vmax_pu.
    """
    nodes = []
    with open(node_path, newline="") as fh:
        for row in csv.DictReader(fh):
            nid = int(row["node"])
            nodes.append(Node(
                id=nid,
                is_root=(nid == 0),
                v_min_sq=float(row["vmin_pu"]) ** 2,
                v_max_sq=float(row["vmax_pu"]) ** 2,
            ))
    nodes.sort(key=lambda nd: nd.id)
    lines = []
    with open(branch_path, newline="") as fh:
        for row in csv.DictReader(fh):
            lines.append(Line(
                from_node=int(row["from"]),
                to_node=int(row["to"]),
                r_pu=impedance_to_per_unit(float(row["r_ohm"]), v_base_kv, s_base_mva),
                x_pu=impedance_to_per_unit(float(row["x_ohm"]), v_base_kv, s_base_mva),
                s_max=float(row["s_max_mva"]) / s_base_mva,
            ))
    return Network(nodes=tuple(nodes), lines=tuple(lines), s_base_mva=s_base_mva,
                   v_base_kv=v_base_kv, substation_s_max=substation_s_max)


def ieee33_network(substation_s_max: float = 12.0) -> Network:
    """The 33-node test feeder shipped with the package (12.66 kV, 1 MVA base)."""
    data = resources.files("gridres").joinpath("data")
    with resources.as_file(data.joinpath("ieee33_branches.csv")) as bp, \
         resources.as_file(data.joinpath("ieee33_nodes.csv")) as np_:
        return load_network_csv(bp, np_, substation_s_max=substation_s_max)
