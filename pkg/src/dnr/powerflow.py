"""Backward/forward sweep power flow for radial configurations.

Loads are constant power, the substation is an ideal slack source, and
all electrical quantities are carried in per unit internally.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .network import NetworkCase
from .topology import Configuration, TopologyError, tree_defect

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 100
VOLTAGE_BAND = (0.95, 1.05)


@dataclass(frozen=True)
class PowerFlowResult:
    v: np.ndarray  # complex node voltages, pu, index = node id - 1
    i_branch: dict[int, complex]  # closed branch id -> current (pu), positive away from the substation
    p_loss_kw: float
    converged: bool
    iterations: int
    max_mismatch: float  # last max |dV|, pu
    v_source: complex = 1.0 + 0j

    @property
    def v_mag(self) -> np.ndarray:
        return np.abs(self.v)


@dataclass(frozen=True)
class RadialTree:
    """A configuration rooted at the substation, in breadth-first order."""

    order: tuple[int, ...]  # node indices (0-based), root first
    parent: tuple[int, ...]  # parent node index, -1 for the root
    parent_branch: tuple[int, ...]  # branch id feeding each node, 0 for the root


def orient(case: NetworkCase, closed) -> RadialTree:
    n = case.n_nodes
    adjacency = case.adjacency
    root = case.substation_id - 1
    parent = [-2] * n
    parent_branch = [0] * n
    parent[root] = -1
    order = [root]
    for k in order:  # the list grows while we walk it: breadth-first
        for m, bid in adjacency[k]:
            if parent[m] == -2 and bid in closed:
                parent[m] = k
                parent_branch[m] = bid
                order.append(m)
    return RadialTree(tuple(order), tuple(parent), tuple(parent_branch))


def solve(
    case: NetworkCase,
    config: Configuration | frozenset | set,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    v_source: complex = 1.0 + 0j,
    check: bool = True,
) -> PowerFlowResult:
    """Solve a radial configuration.

    *config* is a :class:`Configuration` or a closed branch set. With
    ``check=False`` the caller guarantees the set is a spanning tree.
    """
    closed = config.closed if isinstance(config, Configuration) else config
    if check:
        defect = tree_defect(case, closed)
        if defect is not None:
            raise TopologyError(f"configuration is not radial: {defect}")

    if not isinstance(closed, (set, frozenset)):
        closed = frozenset(closed)
    tree = orient(case, closed)
    n = case.n_nodes
    s_load = case.s_load_pu
    z_branch = case.z_pu
    z = [0j] * n
    for k in tree.order[1:]:
        z[k] = z_branch[tree.parent_branch[k] - 1]

    down = tree.order[1:]
    up = down[::-1]
    parent = tree.parent
    loaded = [(k, s_load[k]) for k in range(n) if s_load[k] != 0]

    v = [complex(v_source)] * n
    current = [0j] * n
    converged = False
    mismatch = float("inf")
    iterations = 0
    while iterations < max_iter:
        iterations += 1
        current = [0j] * n
        for k, s in loaded:
            current[k] = (s / v[k]).conjugate()
        for k in up:
            current[parent[k]] += current[k]
        new_v = v[:]
        for k in down:
            new_v[k] = new_v[parent[k]] - z[k] * current[k]
        mismatch = max((abs(a - b) for a, b in zip(new_v, v)), default=0.0)
        v = new_v
        if not np.isfinite(mismatch):
            break
        if mismatch < tol:
            converged = True
            break

    i_branch = {tree.parent_branch[k]: current[k] for k in down}
    loss_pu = 0.0
    for k in down:
        loss_pu += abs(current[k]) ** 2 * z[k].real
    if not converged:
        log.debug("power flow did not converge after %d iterations (max |dV| = %.3g)", iterations, mismatch)
    return PowerFlowResult(
        v=np.array(v),
        i_branch=i_branch,
        p_loss_kw=loss_pu * case.base_mva * 1000.0,
        converged=converged,
        iterations=iterations,
        max_mismatch=mismatch,
        v_source=complex(v_source),
    )


def branch_loss_kw(case: NetworkCase, result: PowerFlowResult) -> float:
    """Sum of I^2 R over closed branches, recomputed from the branch currents."""
    total = sum(abs(i) ** 2 * case.branches[bid - 1].r_pu for bid, i in result.i_branch.items())
    return total * case.base_mva * 1000.0


def injection_pu(case: NetworkCase, result: PowerFlowResult) -> complex:
    """Complex power delivered by the substation."""
    sub = case.substation_id
    total = 0j
    for bid, i in result.i_branch.items():
        b = case.branches[bid - 1]
        if sub in (b.from_node, b.to_node):
            total += result.v[sub - 1] * i.conjugate()
    return total


def power_balance_residual(case: NetworkCase, config, result: PowerFlowResult) -> float:
    """|substation injection - total load - losses| in active power, pu.

    Voltages come from *result*; branch currents are re-derived from them by
    Ohm's law on every closed branch, so a perturbed voltage shows up here.
    """
    closed = config.closed if isinstance(config, Configuration) else config
    tree = orient(case, closed)
    v = result.v
    scale = 1.0 / (1000.0 * case.base_mva)
    p_load = sum(nd.p_load for nd in case.nodes) * scale
    injection = 0.0
    loss = 0.0
    root = case.substation_id - 1
    for k in tree.order[1:]:
        b = case.branches[tree.parent_branch[k] - 1]
        zk = complex(b.r_pu, b.x_pu)
        i = (v[tree.parent[k]] - v[k]) / zk
        loss += abs(i) ** 2 * b.r_pu
        if tree.parent[k] == root:
            injection += (v[root] * i.conjugate()).real
    return abs(injection - p_load - loss)


def voltage_extremes(result: PowerFlowResult) -> tuple[float, float, int]:
    """(min |V|, max |V|, node id at the minimum)."""
    mag = np.abs(result.v)
    k = int(np.argmin(mag))
    return float(mag[k]), float(mag.max()), k + 1


def voltage_violation(result: PowerFlowResult, band=VOLTAGE_BAND) -> float:
    """Total per-unit excursion of node voltages outside *band*."""
    lo, hi = band
    mag = np.abs(result.v)
    return float(np.sum(np.clip(lo - mag, 0, None)) + np.sum(np.clip(mag - hi, 0, None)))
