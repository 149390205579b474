"""Run reports: console tables, JSON documents and voltage-profile CSVs."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ga import GAResult
from .network import NetworkCase
from .oracle import EnumerationReport
from .powerflow import PowerFlowResult, voltage_extremes
from .topology import Configuration

SCHEMA_VERSION = 1
MODES = ("baseline", "ga", "oracle", "pf")


@dataclass
class RunReport:
    case: str
    mode: str
    open: list[int]  # original branch labels
    closed: list[int]
    loss_kw: float
    v_min_pu: float
    v_max_pu: float
    v_min_node: int  # original node label
    seed: int | None = None
    wall_time_s: float = 0.0
    baseline_loss_kw: float | None = None
    baseline_v_min_pu: float | None = None
    ga: dict | None = None
    oracle: dict | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "schema": SCHEMA_VERSION,
            "case": self.case,
            "mode": self.mode,
            "open": self.open,
            "closed": self.closed,
            "loss_kw": self.loss_kw,
            "v_min_pu": self.v_min_pu,
            "v_max_pu": self.v_max_pu,
            "v_min_node": self.v_min_node,
            "seed": self.seed,
            "wall_time_s": self.wall_time_s,
            "baseline_loss_kw": self.baseline_loss_kw,
            "baseline_v_min_pu": self.baseline_v_min_pu,
            "ga": self.ga,
            "oracle": self.oracle,
        }
        out.update(self.extra)
        return out


def make_report(case: NetworkCase, mode: str, config: Configuration, result: PowerFlowResult, **kwargs) -> RunReport:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    v_min, v_max, node = voltage_extremes(result)
    return RunReport(
        case=case.name,
        mode=mode,
        open=case.branch_labels(sorted(config.open)),
        closed=case.branch_labels(sorted(config.closed)),
        loss_kw=result.p_loss_kw,
        v_min_pu=v_min,
        v_max_pu=v_max,
        v_min_node=case.node(node).original,
        **kwargs,
    )


def ga_section(result: GAResult) -> dict:
    return {
        "best_fitness": result.best_fitness,
        "generations_run": result.generations_run,
        "evaluations": result.evaluations,
        "history": [
            {"generation": g, "best_fitness": h.best_fitness, "mean_fitness": h.mean_fitness, "valid_fraction": h.valid_fraction}
            for g, h in enumerate(result.history)
        ],
    }


def oracle_section(report: EnumerationReport, case: NetworkCase) -> dict:
    return report.to_dict(case)


def write_json(payload: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return path


def write_profile(case: NetworkCase, path, after: PowerFlowResult, before: PowerFlowResult | None = None) -> Path:
    """Node voltage magnitudes: ``node,v_pu`` or ``node,v_pu_before,v_pu_after``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mag_after = np.abs(after.v)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        if before is None:
            w.writerow(["node", "v_pu"])
            for n, v in zip(case.nodes, mag_after):
                w.writerow([n.original, f"{v:.10f}"])
        else:
            mag_before = np.abs(before.v)
            w.writerow(["node", "v_pu_before", "v_pu_after"])
            for n, vb, va in zip(case.nodes, mag_before, mag_after):
                w.writerow([n.original, f"{vb:.10f}", f"{va:.10f}"])
    return path


def read_profile(path) -> dict[str, list[float]]:
    """Columns of a profile CSV as float lists, keyed by header."""
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    return {key: [float(r[key]) for r in rows] for key in rows[0]} if rows else {}


def write_history(result: GAResult, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["generation", "best_fitness", "mean_fitness", "valid_fraction"])
        for g, h in enumerate(result.history):
            w.writerow([g, repr(h.best_fitness), repr(h.mean_fitness), repr(h.valid_fraction)])
    return path


def format_report(report: RunReport) -> str:
    lines = [
        f"case             {report.case}",
        f"mode             {report.mode}",
        f"open branches    {', '.join(map(str, report.open))}",
        f"active loss      {report.loss_kw:.2f} kW",
    ]
    if report.baseline_loss_kw is not None:
        saved = report.baseline_loss_kw - report.loss_kw
        pct = 100.0 * saved / report.baseline_loss_kw if report.baseline_loss_kw else 0.0
        lines.append(f"base-case loss   {report.baseline_loss_kw:.2f} kW  (reduction {saved:.2f} kW, {pct:.1f}%)")
    lines.append(f"min voltage      {report.v_min_pu:.4f} pu at node {report.v_min_node}")
    lines.append(f"max voltage      {report.v_max_pu:.4f} pu")
    if report.seed is not None:
        lines.append(f"seed             {report.seed}")
    if report.ga is not None:
        lines.append(f"generations      {report.ga['generations_run']}  ({report.ga['evaluations']} power flows)")
    if report.oracle is not None:
        o = report.oracle
        lines.append(f"spanning trees   {o['valid_count']} of {o['total_combinations']} branch combinations")
        if o["nonconverged"]:
            lines.append(f"no solution      {o['nonconverged']} trees (power flow diverged; excluded)")
        if len(o["equivalent_optima"]) > 1:
            alts = "; ".join(",".join(map(str, t)) for t in o["equivalent_optima"])
            lines.append(f"equal-loss sets  {alts}")
    lines.append(f"wall time        {report.wall_time_s:.2f} s")
    return "\n".join(lines)


def format_sweep(rows: list[dict]) -> str:
    """Per-seed summary table for multi-seed GA runs."""
    head = f"{'seed':>6}  {'loss kW':>10}  {'gens':>5}  {'pf':>6}  open branches"
    out = [head, "-" * len(head)]
    for r in rows:
        out.append(
            f"{r['seed']:>6}  {r['loss_kw']:>10.3f}  {r['generations_run']:>5}  {r['evaluations']:>6}  {','.join(map(str, r['open']))}"
        )
    return "\n".join(out)
