"""Command-line front end: ``driftlab {oracle,analyze,simulate,compare,export-graph}``.

Each run writes one output directory holding ``config.json`` (the resolved
arguments plus SHA-256 hashes of the inputs) next to its CSV/JSON/DOT
artifacts. Nothing time-dependent is written, so rerunning a command gives
byte-identical files. Exit status is 0 when the run succeeded and every
verdict passed, 1 when a verdict failed, 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Sequence

from . import __version__
from .bounds import UNBOUNDED, compare_algorithms, render, time_bound, typed_bounds, verify_drift_inequality
from .chain import (
    LevelPartition,
    StateChain,
    build_level_graph,
    build_level_partition,
    chain_to_json,
    level_stats,
    load_chain,
)
from .coeffs import LOWER, UPPER, VACUOUS, ZERO, coefficient_table, default_paths, random_init_coeffs
from .errors import DriftLabError
from .knapsack import (
    FULL_MAX_N,
    KnapsackInstance,
    build_full_chain,
    build_lumped_chain,
    empty_state,
    load_instance,
    make_instance,
    normalize_variant,
)
from .numeric import FLOAT, RATIONAL, format_number
from .oracle import hitting_profiles, mean_exit_time, mean_hitting_time, decompose_hitting_time
from .sim import estimate_hitting_time, estimates_csv

COEFF_CHOICES = ("forward", "reverse", "allpath", "path", "type_c", "type_cl", "random_init")
ORACLE_MAX_STATES = 5000


class UsageError(Exception):
    pass


@dataclass
class Problem:
    """Resolved input: a chain plus where it came from."""

    chain: StateChain
    label: str
    start: str
    inputs: dict
    instance: KnapsackInstance | None = None
    variant: str | None = None


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def _resolve_instance(args) -> KnapsackInstance:
    if args.instance is None:
        raise UsageError("give --instance (with --n) or --chain")
    source = args.instance
    if os.path.exists(source):
        return load_instance(source)
    if args.n is None:
        raise UsageError(f"--instance {source} needs --n")
    return make_instance(source, args.n)


def _load_problem(args, variant: str | None = None) -> Problem:
    if args.chain is not None and args.instance is not None:
        raise UsageError("give either --chain or --instance, not both")
    if args.chain is not None:
        raw = FsPath(args.chain).read_bytes()
        chain = load_chain(args.chain)
        if args.mode == FLOAT:
            chain = chain.to_float()
        part = build_level_partition(chain)
        start = args.start or part.levels[part.K][0]
        return Problem(chain, FsPath(args.chain).name, start, {"chain": {"path": args.chain, "sha256": _sha256(raw)}})
    inst = _resolve_instance(args)
    variant = normalize_variant(variant or args.variant or "")
    full = getattr(args, "full", False)
    if full and inst.n > FULL_MAX_N:
        raise UsageError(f"--full needs n <= {FULL_MAX_N}")
    use_full = full or not inst.exchangeable
    chain = build_full_chain(inst, variant) if use_full else build_lumped_chain(inst, variant)
    if args.mode == FLOAT:
        chain = chain.to_float()
    start = args.start or empty_state(inst, lumped=not use_full)
    if start not in chain.rows:
        raise UsageError(f"start state {start!r} is not a state of the chain")
    inputs = {"instance": {"json": inst.to_json(), "sha256": _sha256(_canonical(inst.to_json()))}}
    label = f"{inst.id}_n{inst.n}_{variant}"
    return Problem(chain, label, start, inputs, inst, variant)


def _out_dir(args, config: dict) -> FsPath:
    env = os.environ.get("DRIFTLAB_OUT")
    if env:
        base = FsPath(env)
    elif args.out:
        base = FsPath(args.out)
    else:
        base = FsPath("driftlab_runs") / f"{args.command}-{_sha256(_canonical(config))[:12]}"
    base.mkdir(parents=True, exist_ok=True)
    return base


def _config(args, inputs: dict) -> dict:
    echo = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}
    return {"tool": "driftlab", "version": __version__, "args": echo, "inputs": inputs}


def _write(path: FsPath, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="")


def _write_json(path: FsPath, obj) -> None:
    _write(path, json.dumps(obj, indent=2, sort_keys=False) + "\n")


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _start_run(args, inputs: dict) -> FsPath:
    config = _config(args, inputs)
    out = _out_dir(args, config)
    _write_json(out / "config.json", config)
    return out


def _show(value) -> str:
    """Exact value for the terminal, with a decimal approximation when it is a long fraction."""
    text = str(render(value))
    if "/" in text and len(text) > 12:
        return f"{text} (~{float(value):.6g})"
    return text


def _check_oracle_size(chain: StateChain) -> bool:
    return len(chain) <= ORACLE_MAX_STATES


# oracle -------------------------------------------------------------------


def cmd_oracle(args) -> int:
    prob = _load_problem(args)
    chain = prob.chain
    if not _check_oracle_size(chain):
        raise UsageError(f"chain has {len(chain)} states; the exact oracle is limited to {ORACLE_MAX_STATES}")
    out = _start_run(args, prob.inputs)
    part = build_level_partition(chain)
    m = mean_hitting_time(chain)
    exits = {}
    for k in range(1, part.K + 1):
        exits.update(mean_exit_time(chain, part, k))
    profiles = hitting_profiles(chain, part)
    _write(
        out / "hitting_times.csv",
        _csv(
            ["state", "level", "fitness", "m", "exit_time"],
            (
                [x, part.level_of[x], format_number(chain.fitness[x]), format_number(m[x]), format_number(exits[x]) if x in exits else ""]
                for x in chain.states
            ),
        ),
    )
    _write(
        out / "hitting_probabilities.csv",
        _csv(
            ["state", "target_level", "h"],
            ([x, prof.target, format_number(prof.h[x])] for prof in profiles for x in chain.states if part.level_of[x] >= prof.target),
        ),
    )
    _write(
        out / "first_entry.csv",
        _csv(
            ["state", "target_level", "entry_state", "probability"],
            (
                [x, prof.target, y, format_number(p)]
                for prof in profiles
                for x in chain.states
                if part.level_of[x] > prof.target
                for y, p in prof.entry[x].items()
                if p != 0
            ),
        ),
    )
    report = {"label": prob.label, "mode": chain.mode, "start": prob.start, "m_start": format_number(m[prob.start])}
    if part.level_of[prob.start] > 0:
        dec = decompose_hitting_time(chain, part, prob.start, profiles=profiles, exits=exits, exact=m)
        report["decomposition"] = {
            "terms": {str(k): format_number(v) for k, v in sorted(dec.terms.items())},
            "total": format_number(dec.total),
            "matches_mean_hitting_time": dec.matches,
        }
        ok = dec.matches
    else:
        ok = True
    report["verdict"] = "PASS" if ok else "FAIL"
    _write_json(out / "oracle.json", report)
    print(f"m({prob.start}) = {_show(m[prob.start])}")
    print(f"decomposition: {report['verdict']}")
    print(f"output: {out}")
    return 0 if ok else 1


# analyze ------------------------------------------------------------------


def _parse_path(text: str | None) -> list[int] | None:
    if not text:
        return None
    try:
        verts = [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError as exc:
        raise UsageError(f"--path must be a comma-separated list of level indices, got {text!r}") from exc
    if len(verts) < 2:
        raise UsageError("--path needs at least two levels")
    return verts


def _bounds_for(chain: StateChain, part: LevelPartition, start: str, method: str, args) -> dict:
    stats = level_stats(chain, part)
    k = part.level_of[start]
    result: dict = {"start": start, "start_level": k, "K": part.K, "method": method}
    if k == 0:
        zero = stats.zero
        result.update(lower=zero, upper=zero, tables={}, reports={}, drift_ok=True)
        return result
    tables, reports = {}, {}
    explicit = _parse_path(getattr(args, "path", None))
    if method == "random_init":
        init = {k: stats.one}
        cl = random_init_coeffs(stats, init, args.empty_prefix)
        tables[LOWER] = coefficient_table(stats, "random_init", LOWER, init=init, empty_prefix=args.empty_prefix)
        reports[LOWER] = typed_bounds(stats, cl, init=init, form="dk", method="random_init")
        tables[UPPER] = coefficient_table(stats, "type_cl", UPPER) if part.K >= 2 else coefficient_table(stats, "forward", UPPER)
        reports[UPPER] = time_bound(stats, tables[UPPER], k)
    else:
        opts = {}
        if method == "path":
            strategy = getattr(args, "path_strategy", "shortest")
            opts["paths"] = default_paths(stats, build_level_graph(stats), strategy, explicit)
        for direction in (LOWER, UPPER):
            tables[direction] = coefficient_table(stats, method, direction, **opts)
            reports[direction] = time_bound(stats, tables[direction], k)
    drift_ok = all(verify_drift_inequality(chain, stats, t).ok for t in tables.values())
    result.update(lower=reports[LOWER].value, upper=reports[UPPER].value, tables=tables, reports=reports, drift_ok=drift_ok)
    return result


def cmd_analyze(args) -> int:
    prob = _load_problem(args)
    chain, part = prob.chain, build_level_partition(prob.chain)
    out = _start_run(args, prob.inputs)
    res = _bounds_for(chain, part, prob.start, args.coeffs, args)
    for direction, table in res["tables"].items():
        _write(out / f"coeffs_{direction}.csv", table.to_csv())
    for direction, rep in res["reports"].items():
        _write_json(out / f"bound_{direction}.json", rep.to_json())
        _write(out / f"bound_{direction}.csv", rep.to_csv())
    stats = level_stats(chain, part)
    _write(
        out / "level_stats.csv",
        _csv(
            ["k", "ell", "p_min", "p_max", "p_prefix_min", "p_prefix_max", "r_min", "r_max"],
            ([r["k"], r["ell"]] + [format_number(r[c]) for c in ("p_min", "p_max", "p_prefix_min", "p_prefix_max", "r_min", "r_max")] for r in stats.extrema_rows()),
        ),
    )
    lower, upper = res["lower"], res["upper"]
    verdict = {"label": prob.label, "start": prob.start, "method": args.coeffs, "mode": chain.mode,
               "lower": render(lower), "upper": render(upper), "drift_conditions": "PASS" if res["drift_ok"] else "FAIL"}
    ok = res["drift_ok"] and lower <= upper
    if _check_oracle_size(chain):
        exact = mean_hitting_time(chain)[prob.start]
        sandwich = lower <= exact <= upper
        verdict["exact"] = format_number(exact)
        verdict["sandwich"] = "PASS" if sandwich else "FAIL"
        ok = ok and sandwich
    verdict["verdict"] = "PASS" if ok else "FAIL"
    _write_json(out / "verdict.json", verdict)
    print(f"lower bound: {_show(lower)}")
    print(f"upper bound: {_show(upper)}")
    if upper is UNBOUNDED:
        print("upper bound is unbounded: some level has a state that cannot climb")
    if "exact" in verdict:
        print(f"exact: {_show(exact)}  sandwich: {verdict['sandwich']}")
    print(f"verdict: {verdict['verdict']}")
    print(f"output: {out}")
    return 0 if ok else 1


# simulate -----------------------------------------------------------------


def cmd_simulate(args) -> int:
    if args.chain is not None:
        raise UsageError("simulate runs knapsack instances only; give --instance and --n")
    inst = _resolve_instance(args)
    variants = [normalize_variant(v) for v in (args.variant or ["feasibility", "greedy"])]
    inputs = {"instance": {"json": inst.to_json(), "sha256": _sha256(_canonical(inst.to_json()))}}
    out = _start_run(args, inputs)
    ests = []
    for v in variants:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            est = estimate_hitting_time(inst, v, args.trials, args.cap, args.seed, args.workers)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        ests.append(est)
        print(f"{inst.id} n={inst.n} {v}: mean {est.mean:.6g} se {est.se:.3g} censored {est.censored}/{est.trials}")
    _write(out / "results.csv", estimates_csv(ests))
    print(f"output: {out}")
    return 0


# compare ------------------------------------------------------------------


def cmd_compare(args) -> int:
    if args.chain is not None:
        raise UsageError("compare needs --instance and --n")
    variants = args.variant or ["greedy", "feasibility"]
    if len(variants) != 2:
        raise UsageError("compare takes exactly two --variant values (A then B); the ratio is m_A / m_B")
    a = _load_problem(args, variants[0])
    b = _load_problem(args, variants[1])
    out = _start_run(args, {"A": a.inputs, "B": b.inputs})
    ra = _bounds_for(a.chain, build_level_partition(a.chain), a.start, args.coeffs, args)
    rb = _bounds_for(b.chain, build_level_partition(b.chain), b.start, args.coeffs, args)
    exact_a = exact_b = None
    if _check_oracle_size(a.chain) and _check_oracle_size(b.chain):
        exact_a = mean_hitting_time(a.chain)[a.start]
        exact_b = mean_hitting_time(b.chain)[b.start]
    cmp = compare_algorithms(ra["lower"], ra["upper"], rb["lower"], rb["upper"], exact_a, exact_b)
    report = {
        "instance": a.instance.id,
        "n": a.instance.n,
        "A": a.variant,
        "B": b.variant,
        "method": args.coeffs,
        "A_bounds": [render(ra["lower"]), render(ra["upper"])],
        "B_bounds": [render(rb["lower"]), render(rb["upper"])],
        **cmp.to_json(),
    }
    ok = True
    if cmp.exact is not None:
        report["A_exact"] = format_number(exact_a)
        report["B_exact"] = format_number(exact_b)
        inside = cmp.contains(cmp.exact)
        report["interval_contains_exact"] = "PASS" if inside else "FAIL"
        ok = inside
    _write_json(out / "comparison.json", report)
    print(f"m_{a.variant} / m_{b.variant} in [{_show(cmp.low)}, {_show(cmp.high)}]")
    if cmp.exact is not None:
        print(f"exact ratio: {_show(cmp.exact)}")
    print(f"output: {out}")
    return 0 if ok else 1


# export-graph -------------------------------------------------------------


def level_graph_dot(chain: StateChain, name: str = "levels", max_listed: int = 4) -> str:
    """DOT digraph with one vertex per fitness level and one edge per arc."""
    part = build_level_partition(chain)
    graph = build_level_graph(level_stats(chain, part))
    lines = [f'digraph "{name}" {{', "  rankdir=TB;", "  node [shape=box];"]
    for k, lv in enumerate(part.levels):
        members = " ".join(lv) if len(lv) <= max_listed else f"{len(lv)} states"
        label = f"S{k}\\n{members}\\nf={format_number(part.fitness[k])}"
        lines.append(f'  L{k} [label="{label}"];')
    for src, dst in sorted(graph.arcs, key=lambda a: (-a[0], -a[1])):
        lines.append(f"  L{src} -> L{dst};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def cmd_export_graph(args) -> int:
    prob = _load_problem(args)
    out = _start_run(args, prob.inputs)
    dot = level_graph_dot(prob.chain, prob.label)
    _write(out / "level_graph.dot", dot)
    _write_json(out / "chain.json", chain_to_json(prob.chain))
    print(f"output: {out / 'level_graph.dot'}")
    return 0


# parser -------------------------------------------------------------------


def _add_input(p: argparse.ArgumentParser, multi_variant: bool = False) -> None:
    p.add_argument("--instance", help="built-in id KP1..KP6 or an instance JSON file")
    p.add_argument("--n", type=int, help="item count for a built-in instance")
    if multi_variant:
        p.add_argument("--variant", action="append", choices=["feasibility", "greedy"], help="repeatable")
    else:
        p.add_argument("--variant", choices=["feasibility", "greedy"], default="feasibility")
    p.add_argument("--chain", help="chain JSON file")
    p.add_argument("--mode", choices=[RATIONAL, FLOAT], default=RATIONAL)
    p.add_argument("--start", help="start state id (default: empty knapsack, or first state of the lowest level)")
    p.add_argument("--full", action="store_true", help="use the 2^n solution chain instead of the class chain")
    p.add_argument("--out", help="output directory (overridden by DRIFTLAB_OUT)")


def _add_coeffs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--coeffs", choices=COEFF_CHOICES, default="forward")
    p.add_argument("--path", help="comma-separated level path for --coeffs path, e.g. 12,8,1")
    p.add_argument("--path-strategy", choices=["shortest", "consecutive"], default="shortest")
    p.add_argument("--empty-prefix", choices=[VACUOUS, ZERO], default=VACUOUS,
                   help="random_init: treatment of levels the start can never be at or above")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="driftlab", description="Hitting-time analysis of elitist EAs on fitness levels.")
    parser.add_argument("--version", action="version", version=f"driftlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("oracle", help="exact hitting times, hitting probabilities and decomposition")
    _add_input(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("analyze", help="coefficient tables and linear time bounds")
    _add_input(p)
    _add_coeffs(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="Monte Carlo hitting-time estimates")
    _add_input(p, multi_variant=True)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--cap", type=int, default=10**6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="bound the ratio m_A / m_B of two variants")
    _add_input(p, multi_variant=True)
    _add_coeffs(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-graph", help="DOT file of the level graph")
    _add_input(p)
    p.set_defaults(func=cmd_export_graph)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (DriftLabError, ValueError, OSError, KeyError) as exc:
        print(f"driftlab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
