"""Electrical graph data model and case-file ingestion.

A case directory holds three files::

    branches.csv   id,from,to,r_ohm,x_ohm,is_tie
    loads.csv      node,p_kw,q_kvar
    system.json    {"name", "base_kv", "base_mva", "substation"}

Labels in the files may be arbitrary positive integers. Ingestion re-maps
nodes to 1..V and branches to 1..E (in ascending label order) and keeps the
original labels for reporting.
"""

from __future__ import annotations

import csv
import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

BRANCH_HEADER = ["id", "from", "to", "r_ohm", "x_ohm", "is_tie"]
LOAD_HEADER = ["node", "p_kw", "q_kvar"]
DEFAULT_BASE_KV = 12.66
DEFAULT_BASE_MVA = 100.0

DATA_DIR = Path(__file__).parent / "data"


class CaseError(ValueError):
    """Raised when case files are missing, malformed or describe an invalid network."""


@dataclass(frozen=True)
class Node:
    id: int
    p_load: float  # kW
    q_load: float  # kvar
    is_substation: bool = False
    label: int | None = None

    @property
    def original(self) -> int:
        return self.id if self.label is None else self.label


@dataclass(frozen=True)
class Branch:
    id: int
    from_node: int
    to_node: int
    r: float  # ohm
    x: float  # ohm
    is_tie: bool = False
    label: int | None = None
    r_pu: float = field(default=0.0, compare=False)
    x_pu: float = field(default=0.0, compare=False)

    @property
    def original(self) -> int:
        return self.id if self.label is None else self.label


@dataclass(frozen=True)
class NetworkCase:
    """Immutable network: nodes 1..V, branches 1..E, base quantities.

    Use :func:`build_case` (or :func:`load_case`) rather than the constructor
    so that per-unit impedances are filled in.
    """

    nodes: tuple[Node, ...]
    branches: tuple[Branch, ...]
    base_kv: float
    base_mva: float
    substation_id: int
    name: str = ""

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    @property
    def tree_size(self) -> int:
        """Number of closed branches in any radial configuration (V - 1)."""
        return len(self.nodes) - 1

    @property
    def z_base(self) -> float:
        return self.base_kv**2 / self.base_mva

    @cached_property
    def s_load_pu(self) -> tuple[complex, ...]:
        """Complex load per node (index = node id - 1), per unit."""
        scale = 1.0 / (1000.0 * self.base_mva)
        return tuple(complex(n.p_load, n.q_load) * scale for n in self.nodes)

    @cached_property
    def z_pu(self) -> tuple[complex, ...]:
        """Series impedance per branch (index = branch id - 1), per unit."""
        return tuple(complex(b.r_pu, b.x_pu) for b in self.branches)

    @cached_property
    def adjacency(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """For each node index, the (neighbor index, branch id) pairs of all branches."""
        adj: list[list[tuple[int, int]]] = [[] for _ in self.nodes]
        for b in self.branches:
            adj[b.from_node - 1].append((b.to_node - 1, b.id))
            adj[b.to_node - 1].append((b.from_node - 1, b.id))
        return tuple(tuple(a) for a in adj)

    def branch(self, branch_id: int) -> Branch:
        return self.branches[branch_id - 1]

    def node(self, node_id: int) -> Node:
        return self.nodes[node_id - 1]

    @property
    def tie_ids(self) -> frozenset[int]:
        return frozenset(b.id for b in self.branches if b.is_tie)

    @property
    def base_closed(self) -> frozenset[int]:
        """Closed set of the normally-operated network (every tie open)."""
        return frozenset(b.id for b in self.branches if not b.is_tie)

    def branch_ids_from_labels(self, labels) -> list[int]:
        lookup = {b.original: b.id for b in self.branches}
        try:
            return [lookup[int(lab)] for lab in labels]
        except KeyError as exc:
            raise CaseError(f"unknown branch label {exc.args[0]}") from None

    def branch_labels(self, ids) -> list[int]:
        return [self.branches[i - 1].original for i in ids]


def build_case(nodes, branches, base_kv=DEFAULT_BASE_KV, base_mva=DEFAULT_BASE_MVA, substation_id=1, name=""):
    """Assemble a NetworkCase and compute per-unit impedances once."""
    z_base = base_kv**2 / base_mva
    branches = tuple(
        Branch(
            id=b.id,
            from_node=b.from_node,
            to_node=b.to_node,
            r=b.r,
            x=b.x,
            is_tie=b.is_tie,
            label=b.label,
            r_pu=b.r / z_base,
            x_pu=b.x / z_base,
        )
        for b in branches
    )
    return NetworkCase(
        nodes=tuple(nodes),
        branches=branches,
        base_kv=float(base_kv),
        base_mva=float(base_mva),
        substation_id=substation_id,
        name=name,
    )


def _read_csv(path: Path, header: list[str]) -> list[tuple[int, dict[str, str]]]:
    if not path.is_file():
        raise CaseError(f"{path}: file not found")
    with open(path, newline="", encoding="utf-8-sig") as f:
        reader = csv.DictReader(f)
        found = [h.strip() for h in (reader.fieldnames or [])]
        if found != header:
            raise CaseError(f"{path}: expected header {','.join(header)}, got {','.join(found)}")
        # line 1 is the header
        return [(lineno, row) for lineno, row in enumerate(reader, start=2) if any(v and v.strip() for v in row.values())]


def _field(path, lineno, row, key, conv):
    raw = row.get(key)
    try:
        return conv(raw.strip())
    except (AttributeError, ValueError):
        raise CaseError(f"{path}:{lineno}: bad value {raw!r} for column '{key}'") from None


def _flag(text: str) -> bool:
    if text not in ("0", "1"):
        raise ValueError(text)
    return text == "1"


def load_case(branch_file_path, load_file_path=None, system_file_path=None) -> NetworkCase:
    """Read, re-index and validate a case.

    Either pass the three file paths, or a single case directory containing
    ``branches.csv``, ``loads.csv`` and ``system.json``.
    """
    if load_file_path is None and system_file_path is None:
        case_dir = Path(branch_file_path)
        if not case_dir.is_dir():
            raise CaseError(f"{case_dir}: case directory not found")
        branch_path = case_dir / "branches.csv"
        load_path = case_dir / "loads.csv"
        system_path = case_dir / "system.json"
    else:
        branch_path, load_path, system_path = Path(branch_file_path), Path(load_file_path), Path(system_file_path)

    if not system_path.is_file():
        raise CaseError(f"{system_path}: file not found")
    try:
        system = json.loads(system_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CaseError(f"{system_path}: invalid JSON ({exc})") from None
    if "substation" not in system:
        raise CaseError(f"{system_path}: missing field 'substation'")
    try:
        base_kv = float(system.get("base_kv", DEFAULT_BASE_KV))
        base_mva = float(system.get("base_mva", DEFAULT_BASE_MVA))
        sub_label = int(system["substation"])
    except (TypeError, ValueError):
        raise CaseError(f"{system_path}: base_kv, base_mva and substation must be numeric") from None
    if base_kv <= 0 or base_mva <= 0:
        raise CaseError(f"{system_path}: base quantities must be positive")
    name = str(system.get("name", branch_path.parent.name))

    load_rows = []
    seen_nodes: dict[int, int] = {}
    for lineno, row in _read_csv(load_path, LOAD_HEADER):
        label = _field(load_path, lineno, row, "node", int)
        p = _field(load_path, lineno, row, "p_kw", float)
        q = _field(load_path, lineno, row, "q_kvar", float)
        if label <= 0:
            raise CaseError(f"{load_path}:{lineno}: node label must be a positive integer")
        if label in seen_nodes:
            raise CaseError(f"{load_path}:{lineno}: duplicate node {label} (first on line {seen_nodes[label]})")
        if p < 0:
            raise CaseError(f"{load_path}:{lineno}: negative active load at node {label}")
        seen_nodes[label] = lineno
        load_rows.append((label, p, q))

    branch_rows = []
    seen_branches: dict[int, int] = {}
    for lineno, row in _read_csv(branch_path, BRANCH_HEADER):
        label = _field(branch_path, lineno, row, "id", int)
        a = _field(branch_path, lineno, row, "from", int)
        b = _field(branch_path, lineno, row, "to", int)
        r = _field(branch_path, lineno, row, "r_ohm", float)
        x = _field(branch_path, lineno, row, "x_ohm", float)
        tie = _field(branch_path, lineno, row, "is_tie", _flag)
        if label <= 0:
            raise CaseError(f"{branch_path}:{lineno}: branch label must be a positive integer")
        if label in seen_branches:
            raise CaseError(f"{branch_path}:{lineno}: duplicate branch {label} (first on line {seen_branches[label]})")
        if a == b:
            raise CaseError(f"{branch_path}:{lineno}: branch {label} is a self-loop on node {a}")
        if r < 0 or x < 0 or r + x <= 0:
            raise CaseError(f"{branch_path}:{lineno}: branch {label} needs r >= 0, x >= 0 and r + x > 0")
        for end in (a, b):
            if end not in seen_nodes:
                raise CaseError(f"{branch_path}:{lineno}: branch {label} refers to node {end} absent from {load_path.name}")
        seen_branches[label] = lineno
        branch_rows.append((label, a, b, r, x, tie))

    if sub_label not in seen_nodes:
        raise CaseError(f"{system_path}: substation {sub_label} is not a node in {load_path.name}")

    node_index = {label: i for i, label in enumerate(sorted(seen_nodes), start=1)}
    nodes = sorted(
        (
            Node(id=node_index[label], p_load=p, q_load=q, is_substation=label == sub_label, label=label)
            for label, p, q in load_rows
        ),
        key=lambda n: n.id,
    )
    sub = nodes[node_index[sub_label] - 1]
    if sub.p_load != 0 or sub.q_load != 0:
        raise CaseError(f"{load_path}:{seen_nodes[sub_label]}: substation node {sub_label} must carry zero load")

    branch_index = {label: i for i, label in enumerate(sorted(seen_branches), start=1)}
    branches = sorted(
        (
            Branch(
                id=branch_index[label],
                from_node=node_index[a],
                to_node=node_index[b],
                r=r,
                x=x,
                is_tie=tie,
                label=label,
            )
            for label, a, b, r, x, tie in branch_rows
        ),
        key=lambda br: br.id,
    )
    case = build_case(nodes, branches, base_kv, base_mva, node_index[sub_label], name)
    problems = validate_case(case)
    if problems:
        raise CaseError(f"{branch_path.parent}: " + "; ".join(problems))
    return case


def save_case(case: NetworkCase, directory) -> Path:
    """Write *case* in the on-disk format, using original labels."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "branches.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(BRANCH_HEADER)
        for b in case.branches:
            w.writerow([
                b.original,
                case.node(b.from_node).original,
                case.node(b.to_node).original,
                repr(b.r),
                repr(b.x),
                int(b.is_tie),
            ])
    with open(directory / "loads.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(LOAD_HEADER)
        for n in case.nodes:
            w.writerow([n.original, repr(n.p_load), repr(n.q_load)])
    system = {
        "name": case.name,
        "base_kv": case.base_kv,
        "base_mva": case.base_mva,
        "substation": case.node(case.substation_id).original,
    }
    (directory / "system.json").write_text(json.dumps(system, indent=2) + "\n")
    return directory


def _components(n_nodes: int, edges) -> int:
    adj: dict[int, list[int]] = {i: [] for i in range(1, n_nodes + 1)}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen: set[int] = set()
    count = 0
    for start in adj:
        if start in seen:
            continue
        count += 1
        seen.add(start)
        queue = deque([start])
        while queue:
            for nxt in adj[queue.popleft()]:
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
    return count


def validate_case(case: NetworkCase) -> list[str]:
    """Return one diagnostic string per violated invariant (empty if valid)."""
    problems = []
    node_ids = [n.id for n in case.nodes]
    if sorted(node_ids) != list(range(1, len(node_ids) + 1)):
        problems.append("node ids are not contiguous 1..V or contain duplicates")
    branch_ids = [b.id for b in case.branches]
    if sorted(branch_ids) != list(range(1, len(branch_ids) + 1)):
        problems.append("branch ids are not contiguous 1..E or contain duplicates")

    subs = [n.id for n in case.nodes if n.is_substation]
    if not subs:
        problems.append("no substation node")
    elif len(subs) > 1:
        problems.append(f"multiple substation nodes: {', '.join(map(str, subs))}")
    elif subs[0] != case.substation_id:
        problems.append(f"substation flag on node {subs[0]} but substation_id is {case.substation_id}")

    for n in case.nodes:
        if n.p_load < 0:
            problems.append(f"node {n.original}: negative active load")
        if n.is_substation and (n.p_load != 0 or n.q_load != 0):
            problems.append(f"substation node {n.original}: nonzero load")

    valid_nodes = set(node_ids)
    endpoints_ok = True
    for b in case.branches:
        if b.from_node == b.to_node:
            problems.append(f"branch {b.original}: self-loop")
        if b.from_node not in valid_nodes or b.to_node not in valid_nodes:
            problems.append(f"branch {b.original}: unknown endpoint")
            endpoints_ok = False
        if b.r < 0 or b.x < 0 or b.r + b.x <= 0:
            problems.append(f"branch {b.original}: impedance must satisfy r >= 0, x >= 0, r + x > 0")

    if endpoints_ok and node_ids:
        n_comp = _components(len(case.nodes), [(b.from_node, b.to_node) for b in case.branches])
        if n_comp != 1:
            problems.append(f"network is disconnected ({n_comp} components)")
    return problems


def resolve_case_path(text) -> Path:
    """Map a CLI ``--case`` argument to a directory.

    Existing paths win; otherwise a name such as ``33bus`` or ``data/33bus``
    falls back to the case bundled with the package.
    """
    path = Path(text)
    if path.is_dir():
        return path
    bundled = DATA_DIR / path.name
    if bundled.is_dir():
        return bundled
    return path


def bundled_case(name: str) -> NetworkCase:
    return load_case(DATA_DIR / name)
