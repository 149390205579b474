"""``dnr`` command line: baseline, solve, oracle, pf and validate.

Exit codes: 0 success, 1 usage error, 2 data/validation error,
3 numeric failure (power flow did not converge).
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import fields

from . import ga
from .network import CaseError, load_case, resolve_case_path, validate_case
from .oracle import TIE_RTOL, exhaustive_optimum
from .powerflow import solve
from .report import (
    format_report,
    format_sweep,
    ga_section,
    make_report,
    oracle_section,
    write_history,
    write_json,
    write_profile,
)
from .topology import Configuration, TopologyError, base_configuration, tree_defect

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

log = logging.getLogger("dnr")


class UsageError(Exception):
    pass


class NumericError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_seeds(text: str) -> list[int]:
    """``1..20``, ``3,5,8`` or a mix such as ``1..5,9``."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError(f"empty seed range {part}")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(int(part))
    if not seeds or any(s < 0 for s in seeds):
        raise ValueError(f"bad seed list {text!r}")
    return seeds


def parse_branch_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise UsageError(f"--open expects comma-separated branch numbers, got {text!r}") from None


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--case", required=True, help="case directory (branches.csv, loads.csv, system.json) or a bundled name: 4ring, 33bus, 69bus")
    g.add_argument("--out", help="write the run report as JSON")
    g.add_argument("--profile", help="write node voltage magnitudes as CSV")
    g.add_argument("--seed", type=int, help="GA random seed")
    g.add_argument("--config", help="GA settings file (JSON object or key = value lines)")
    g.add_argument("-v", "--verbose", action="count", default=0)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="dnr", description="Loss-minimizing reconfiguration of radial distribution networks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("baseline", parents=[common], help="power flow with every tie branch open")

    p = sub.add_parser("solve", parents=[common], help="run the spanning-tree genetic algorithm")
    defaults = ga.GAConfig()
    p.add_argument("--population-size", type=int, help=f"default {defaults.population_size}")
    p.add_argument("--crossover-rate", type=float, help=f"default {defaults.crossover_rate}")
    p.add_argument("--mutation-rate", type=float, help=f"per-offspring probability, default {defaults.mutation_rate}")
    p.add_argument("--elite-count", type=int, help=f"default {defaults.elite_count}")
    p.add_argument("--generations", "--max-generations", dest="max_generations", type=int, help=f"default {defaults.max_generations}")
    p.add_argument("--stagnation-limit", type=int, help=f"default {defaults.stagnation_limit}")
    p.add_argument("--penalty-mode", choices=ga.PENALTY_MODES, help="default off; voltage-penalty adds a kW penalty for nodes outside the voltage band")
    p.add_argument("--penalty-kw-per-pu", type=float, help=f"default {defaults.penalty_kw_per_pu}")
    p.add_argument("--seeds", help="run several seeds, e.g. 1..20 or 1,4,9; prints a per-seed table")
    p.add_argument("--history", help="write the per-generation fitness history as CSV")
    p.add_argument("--certify", action="store_true", help="also run the exhaustive oracle and report which runs reached its optimum")

    sub.add_parser("oracle", parents=[common], help="enumerate every radial configuration (exhaustive optimum)")

    p = sub.add_parser("pf", parents=[common], help="power flow for a given set of open branches")
    p.add_argument("--open", required=True, help="comma-separated open branch numbers, e.g. 7,9,14,32,37")
    p.add_argument("--compare-base", action="store_true", help="include base-case voltages in --profile")

    sub.add_parser("validate", parents=[common], help="check case files and report every problem")
    return parser


def _ga_config(args) -> ga.GAConfig:
    cfg = ga.GAConfig.from_file(args.config) if args.config else ga.GAConfig()
    overrides = {}
    for f in fields(ga.GAConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            overrides[f.name] = value
    return cfg.replace(**overrides) if overrides else cfg


def _solve_checked(case, config):
    result = solve(case, config)
    if not result.converged:
        raise NumericError(f"power flow did not converge after {result.iterations} iterations (max |dV| = {result.max_mismatch:.3g} pu)")
    return result


def _emit(args, report, payload=None):
    print(format_report(report))
    if args.out:
        write_json(payload if payload is not None else report.to_dict(), args.out)


def cmd_baseline(args, case):
    start = time.perf_counter()
    config = base_configuration(case)
    result = _solve_checked(case, config)
    report = make_report(case, "baseline", config, result)
    report.wall_time_s = time.perf_counter() - start
    _emit(args, report)
    if args.profile:
        write_profile(case, args.profile, result)
    return report


def cmd_pf(args, case):
    start = time.perf_counter()
    labels = parse_branch_list(args.open)
    ids = case.branch_ids_from_labels(labels)
    if len(set(ids)) != len(ids):
        raise UsageError("--open lists a branch twice")
    n_open = case.n_branches - case.tree_size
    if len(ids) != n_open:
        raise TopologyError(f"a radial configuration of {case.name} opens exactly {n_open} branches, got {len(ids)}")
    closed = frozenset(range(1, case.n_branches + 1)) - frozenset(ids)
    defect = tree_defect(case, closed)
    if defect is not None:
        raise TopologyError(f"open set {','.join(map(str, labels))} is not radial: {defect}")
    config = Configuration.from_closed(case, closed)
    result = _solve_checked(case, config)
    base = _solve_checked(case, base_configuration(case))
    report = make_report(case, "pf", config, result, baseline_loss_kw=base.p_loss_kw, baseline_v_min_pu=float(abs(base.v).min()))
    report.wall_time_s = time.perf_counter() - start
    _emit(args, report)
    if args.profile:
        write_profile(case, args.profile, result, before=base if args.compare_base else None)
    return report


def cmd_oracle(args, case):
    start = time.perf_counter()
    progress = (lambda n: log.info("%d trees scored", n)) if args.verbose else None
    enum = exhaustive_optimum(case, progress=progress)
    result = _solve_checked(case, enum.best)
    base = _solve_checked(case, base_configuration(case))
    report = make_report(
        case,
        "oracle",
        enum.best,
        result,
        baseline_loss_kw=base.p_loss_kw,
        baseline_v_min_pu=float(abs(base.v).min()),
        oracle=oracle_section(enum, case),
    )
    report.wall_time_s = time.perf_counter() - start
    _emit(args, report)
    if args.profile:
        write_profile(case, args.profile, result, before=base)
    return report


def _run_ga(case, cfg):
    outcome = ga.run(case, cfg)
    result = _solve_checked(case, outcome.best)
    return outcome, result


def cmd_solve(args, case):
    if args.seeds and args.seed is not None:
        raise UsageError("use either --seed or --seeds, not both")
    if args.seeds and args.history:
        raise UsageError("--history records a single run; drop it or use --seed")
    try:
        seeds = parse_seeds(args.seeds) if args.seeds else None
        cfg = _ga_config(args)
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from None

    start = time.perf_counter()
    base = _solve_checked(case, base_configuration(case))
    certificate = exhaustive_optimum(case) if args.certify else None

    def hit(loss):
        return abs(loss - certificate.best_loss_kw) <= TIE_RTOL * certificate.best_loss_kw

    if seeds is None:
        outcome, result = _run_ga(case, cfg)
        report = make_report(
            case,
            "ga",
            outcome.best,
            result,
            seed=cfg.seed,
            baseline_loss_kw=base.p_loss_kw,
            baseline_v_min_pu=float(abs(base.v).min()),
            ga=ga_section(outcome),
        )
        if certificate is not None:
            report.oracle = oracle_section(certificate, case)
            report.extra["reached_optimum"] = hit(outcome.best_loss_kw)
        report.wall_time_s = time.perf_counter() - start
        _emit(args, report)
        if args.profile:
            write_profile(case, args.profile, result, before=base)
        if args.history:
            write_history(outcome, args.history)
        return report

    rows = []
    runs = []
    for seed in seeds:
        outcome, result = _run_ga(case, cfg.replace(seed=seed))
        rep = make_report(case, "ga", outcome.best, result, seed=seed, baseline_loss_kw=base.p_loss_kw, ga=ga_section(outcome))
        row = {
            "seed": seed,
            "loss_kw": outcome.best_loss_kw,
            "open": rep.open,
            "generations_run": outcome.generations_run,
            "evaluations": outcome.evaluations,
            "runtime_s": outcome.runtime,
        }
        if certificate is not None:
            row["reached_optimum"] = hit(outcome.best_loss_kw)
            row["gap_pct"] = 100.0 * (outcome.best_loss_kw - certificate.best_loss_kw) / certificate.best_loss_kw
        rows.append(row)
        runs.append(rep.to_dict())
    print(format_sweep(rows))
    losses = [r["loss_kw"] for r in rows]
    summary = {"runs": len(rows), "best_loss_kw": min(losses), "worst_loss_kw": max(losses)}
    if certificate is not None:
        summary["oracle_loss_kw"] = certificate.best_loss_kw
        summary["success_rate"] = sum(r["reached_optimum"] for r in rows) / len(rows)
        print(f"reached the exhaustive optimum ({certificate.best_loss_kw:.3f} kW) in {sum(r['reached_optimum'] for r in rows)} of {len(rows)} runs")
    summary["wall_time_s"] = time.perf_counter() - start
    print(f"wall time {summary['wall_time_s']:.1f} s")
    if args.out:
        write_json({"case": case.name, "mode": "ga-sweep", "summary": summary, "seeds": rows, "reports": runs}, args.out)
    return summary


def cmd_validate(args):
    path = resolve_case_path(args.case)
    case = load_case(path)  # raises CaseError with every problem found at ingestion
    problems = validate_case(case)
    for p in problems:
        print(p)
    print(f"{case.name}: {case.n_nodes} nodes, {case.n_branches} branches ({len(case.tie_ids)} tie), substation {case.node(case.substation_id).original}")
    if problems:
        raise CaseError(f"{len(problems)} problem(s)")
    print("ok")


COMMANDS = {"baseline": cmd_baseline, "solve": cmd_solve, "oracle": cmd_oracle, "pf": cmd_pf}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            cmd_validate(args)
        else:
            if args.command != "solve" and (args.seed is not None or args.config):
                raise UsageError("--seed/--config only apply to 'solve'")
            case = load_case(resolve_case_path(args.case))
            COMMANDS[args.command](args, case)
    except UsageError as exc:
        print(f"dnr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CaseError, TopologyError) as exc:
        print(f"dnr: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"dnr: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
