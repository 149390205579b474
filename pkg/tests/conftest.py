import json

import pytest

from dnr.cli import main
from dnr.network import Branch, Node, build_case, bundled_case

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture
def record():
    """Log one pass/fail line per acceptance criterion, then assert it."""

    def _record(criterion, ok, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        assert ok, f"{criterion}: {detail}"

    return _record


@pytest.fixture(scope="session")
def case33():
    return bundled_case("33bus")


@pytest.fixture(scope="session")
def case69():
    return bundled_case("69bus")


@pytest.fixture(scope="session")
def ring4():
    return bundled_case("4ring")


def make_graph_case(edges, loads=None, ties=(), r=0.5, x=0.25, substation=1, name="toy"):
    """Small case from (a, b) node pairs; branch k is edges[k-1]."""
    n = max(max(e) for e in edges)
    loads = loads or {}
    nodes = [
        Node(id=i, p_load=loads.get(i, (0.0, 0.0))[0], q_load=loads.get(i, (0.0, 0.0))[1], is_substation=i == substation)
        for i in range(1, n + 1)
    ]
    branches = [Branch(id=k, from_node=a, to_node=b, r=r, x=x, is_tie=k in ties) for k, (a, b) in enumerate(edges, start=1)]
    return build_case(nodes, branches, substation_id=substation, name=name)


@pytest.fixture
def complete4():
    return make_graph_case([(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)])


def run_cli(argv):
    """Run the CLI in-process; returns the exit code."""
    return main([str(a) for a in argv])


def _cli_oracle(tmp_path_factory, name):
    out = tmp_path_factory.mktemp(f"oracle_{name}")
    code = run_cli(["oracle", "--case", name, "--out", out / "report.json", "--profile", out / "profile.csv"])
    assert code == 0
    return json.loads((out / "report.json").read_text()), out / "profile.csv"


@pytest.fixture(scope="session")
def oracle33(tmp_path_factory):
    """`dnr oracle` on the 33-node case (about half a minute)."""
    return _cli_oracle(tmp_path_factory, "33bus")


@pytest.fixture(scope="session")
def oracle69(tmp_path_factory):
    """`dnr oracle` on the 69-node case (several minutes)."""
    return _cli_oracle(tmp_path_factory, "69bus")
