"""Exhaustive ground truth: enumerate every radial configuration and score it."""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Iterator

from .network import NetworkCase
from .powerflow import solve
from .topology import Configuration, TopologyError, fundamental_loops, is_spanning_tree

# losses closer than this (relative) are treated as ties
TIE_RTOL = 1e-9


def search_space_size(n_edges: int, tree_edges: int) -> int:
    """Number of ways to choose the closed branches: C(E, E_s)."""
    if tree_edges < 0 or n_edges < 0:
        raise ValueError("edge counts must be non-negative")
    if tree_edges > n_edges:
        raise ValueError(f"cannot choose {tree_edges} closed branches out of {n_edges}")
    return math.comb(n_edges, tree_edges)


def enumerate_by_loops(case: NetworkCase) -> Iterator[Configuration]:
    """Pick one open branch per fundamental loop; keep the distinct trees."""
    loops = [sorted(loop) for loop in fundamental_loops(case)]
    all_ids = frozenset(range(1, case.n_branches + 1))
    n_open = len(loops)
    seen = set()
    for choice in itertools.product(*loops):
        opened = frozenset(choice)
        if len(opened) != n_open or opened in seen:
            continue
        seen.add(opened)
        closed = all_ids - opened
        if is_spanning_tree(case, closed):
            yield Configuration(closed, opened)


def enumerate_by_combinations(case: NetworkCase) -> Iterator[Configuration]:
    """Scan every size-(V-1) subset of branches."""
    all_ids = frozenset(range(1, case.n_branches + 1))
    for closed in itertools.combinations(range(1, case.n_branches + 1), case.tree_size):
        if is_spanning_tree(case, closed):
            closed = frozenset(closed)
            yield Configuration(closed, all_ids - closed)


def enumerate_valid(case: NetworkCase) -> Iterator[Configuration]:
    """Yield every spanning-tree configuration exactly once."""
    try:
        fundamental_loops(case)
    except TopologyError:
        return enumerate_by_combinations(case)
    return enumerate_by_loops(case)


@dataclass(frozen=True)
class EnumerationReport:
    valid_count: int
    total_combinations: int
    best: Configuration
    best_loss_kw: float
    runtime: float  # seconds
    # every configuration within TIE_RTOL of the optimum, lexicographic order
    ties: tuple[tuple[int, ...], ...] = ()
    nonconverged: int = 0

    def to_dict(self, case: NetworkCase | None = None) -> dict:
        labels = case.branch_labels if case is not None else list
        return {
            "valid_count": self.valid_count,
            "total_combinations": self.total_combinations,
            "best_open": labels(sorted(self.best.open)),
            "best_loss_kw": self.best_loss_kw,
            "equivalent_optima": [labels(t) for t in self.ties],
            "nonconverged": self.nonconverged,
            "runtime_s": self.runtime,
        }


def exhaustive_optimum(case: NetworkCase, progress=None) -> EnumerationReport:
    """Power-flow every valid configuration and return the minimum-loss one.

    Ties within ``TIE_RTOL`` go to the lexicographically smallest open set,
    so the answer does not depend on visit order.
    *progress*, if given, is called with the running count every 10,000 trees.
    """
    start = time.perf_counter()
    scored: list[tuple[float, tuple[int, ...]]] = []
    count = 0
    for count, config in enumerate(enumerate_valid(case), start=1):
        result = solve(case, config.closed, check=False)
        if result.converged:
            scored.append((result.p_loss_kw, config.open_sorted))
        if progress is not None and count % 10_000 == 0:
            progress(count)
    if not scored:
        raise RuntimeError("no configuration converged")

    min_loss = min(loss for loss, _ in scored)
    ties = sorted(key for loss, key in scored if loss - min_loss <= TIE_RTOL * min_loss)
    best_key = ties[0]
    best_loss = next(loss for loss, key in scored if key == best_key)
    return EnumerationReport(
        valid_count=count,
        total_combinations=search_space_size(case.n_branches, case.tree_size),
        best=Configuration.from_open(case, best_key),
        best_loss_kw=best_loss,
        runtime=time.perf_counter() - start,
        ties=tuple(ties),
        nonconverged=count - len(scored),
    )
