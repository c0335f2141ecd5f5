"""Command line interface: simulate, sweep, verify, replay.

simulate runs one protocol instance, writes a JSONL transcript plus a
one-row metrics CSV, and exits 0 only if the gradient was exact and all
bounds held. sweep runs a parameter grid and aggregates a CSV. verify runs
the exhaustive checks. replay re-executes a recorded transcript.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .assignment import assignment_to_text
from .checks import CHECKS
from .errors import InvalidParamsError, TranscriptReplayError
from .field import DEFAULT_MODULUS
from .harness import (
    METRICS_HEADER,
    SimulationConfig,
    build_assignment,
    grid_configs,
    replay_transcript,
    run_simulation,
    run_sweep,
    write_transcript,
)


def _parse_int_list(text: str) -> list[int]:
    """"1,4,9" or "4-8" or a mix of both."""
    out: list[int] = []
    for tok in text.split(","):
        tok = tok.strip()
        if "-" in tok[1:]:
            lo, hi = tok.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif tok:
            out.append(int(tok))
    return out


def _default_seed() -> int:
    return int(os.environ.get("BYZGRAD_SEED", "0"))


def _add_instance_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--n", type=int, help="number of workers")
    sp.add_argument("--s", type=int, help="malicious worker budget")
    sp.add_argument("--u", type=int, help="redundancy parameter, 1 <= u <= s+1")
    sp.add_argument("--p", type=int, help="number of samples")
    sp.add_argument("--d", type=int, help="gradient dimension")
    sp.add_argument("--q", type=int, help="prime field modulus")
    sp.add_argument("--assignment", help="cyclic | fractional | random | file")
    sp.add_argument("--assignment-path", help="assignment text file when --assignment file")
    sp.add_argument(
        "--adversary",
        help="honest | random-always | random-initial-only | random-coin | "
        "tournament-liar | symmetrization",
    )
    sp.add_argument("--seed", type=int, help="run seed (default $BYZGRAD_SEED or 0)")
    sp.add_argument("--grouping", help="lowest | shuffled")
    sp.add_argument("--controlled", help="random | first | last | 1-based ids like 2;5")
    sp.add_argument("--lie-plan", help="consistent | inconsistent | '' | lie,honest,...")
    sp.add_argument("--out", help="output directory (default .)")


def _build_config(args: argparse.Namespace) -> SimulationConfig:
    values: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            values.update(json.load(fh))
    overrides = {
        "n": args.n, "s": args.s, "u": args.u, "p": args.p, "d": args.d,
        "q": args.q, "assignment": args.assignment,
        "assignment_path": args.assignment_path,
        "adversary": args.adversary, "seed": args.seed,
        "grouping": args.grouping, "controlled": args.controlled,
        "lie_plan": args.lie_plan,
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    values.setdefault("seed", _default_seed())
    missing = [k for k in ("n", "s", "u", "p") if k not in values]
    if missing:
        raise InvalidParamsError(f"missing required parameters: {missing}")
    return SimulationConfig.from_dict(values)


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        config = _build_config(args)
        config.validate()
        out = run_simulation(config)
    except InvalidParamsError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    outdir = args.out or "."
    os.makedirs(outdir, exist_ok=True)
    stem = (
        f"run_n{config.n}_s{config.s}_u{config.u}_p{config.p}_d{config.d}"
        f"_{config.assignment}_{config.adversary}_seed{config.seed}"
    )
    transcript_path = args.transcript or os.path.join(outdir, stem + ".jsonl")
    metrics_path = args.metrics or os.path.join(outdir, stem + ".csv")
    write_transcript(out.result, transcript_path)
    with open(metrics_path, "w", encoding="ascii") as fh:
        fh.write(METRICS_HEADER + "\n")
        fh.write(out.metrics.csv_row() + "\n")
    if args.save_assignment:
        with open(args.save_assignment, "w", encoding="ascii") as fh:
            fh.write(assignment_to_text(build_assignment(config), config.rho))
    print(METRICS_HEADER)
    print(out.metrics.csv_row())
    print(f"transcript: {transcript_path}")
    violations = out.metrics.bound_violations()
    for v in violations:
        print(f"bound violation: {v}", file=sys.stderr)
    if not out.metrics.correct:
        print("gradient mismatch against ground truth", file=sys.stderr)
    return 0 if out.metrics.correct and not violations else 1


def cmd_sweep(args: argparse.Namespace) -> int:
    us: object = "auto"
    if args.u and args.u != "auto":
        us = _parse_int_list(args.u)
    items = list(
        grid_configs(
            ns=_parse_int_list(args.n),
            ss=_parse_int_list(args.s),
            us=us,
            ps=_parse_int_list(args.p),
            ds=_parse_int_list(args.d),
            assignments=[a.strip() for a in args.assignments.split(",")],
            adversaries=[a.strip() for a in args.adversaries.split(",")],
            seeds=args.seeds,
            q=args.q,
            grouping=args.grouping or "lowest",
        )
    )
    report = run_sweep(items, jobs=args.jobs)
    outdir = args.out or "."
    os.makedirs(outdir, exist_ok=True)
    csv_path = os.path.join(outdir, "sweep.csv")
    with open(csv_path, "w", encoding="ascii") as fh:
        fh.write(METRICS_HEADER + "\n")
        for m in report.rows:
            fh.write(m.csv_row() + "\n")
    for sk in report.skipped:
        print(f"skipped {sk.params}: {sk.reason}")
    print(report.summary())
    print(f"metrics: {csv_path}")
    bad = report.violations()
    for m, v in bad[:20]:
        print(f"violation: {m.csv_row()}: {v}", file=sys.stderr)
    return 0 if not bad else 1


def cmd_verify(args: argparse.Namespace) -> int:
    names = list(CHECKS) if args.which == "all" else [args.which]
    ok = True
    for name in names:
        result = CHECKS[name]()
        print(result.report())
        ok = ok and result.passed
    return 0 if ok else 1


def cmd_replay(args: argparse.Namespace) -> int:
    try:
        gradient = replay_transcript(args.transcript)
    except TranscriptReplayError as e:
        print(f"replay failed: {e}", file=sys.stderr)
        return 1
    print(f"replayed gradient: {gradient}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="byzgrad",
        description="Byzantine-resilient gradient coding simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="run one protocol instance")
    _add_instance_flags(sp)
    sp.add_argument("--config", help="JSON config file; flags override its keys")
    sp.add_argument("--transcript", help="transcript path (default derived from params)")
    sp.add_argument("--metrics", help="metrics CSV path (default derived from params)")
    sp.add_argument("--save-assignment", help="also write the assignment text file here")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="run a parameter grid")
    sp.add_argument("--n", required=True, help="worker counts, e.g. 4-8 or 4,6")
    sp.add_argument("--s", required=True, help="malicious budgets, e.g. 1-3")
    sp.add_argument("--u", default="auto", help="redundancy values or 'auto' (1..min(s+1, n-s))")
    sp.add_argument("--p", required=True, help="sample counts, e.g. 1,4,9,16")
    sp.add_argument("--d", default="1", help="gradient dimensions")
    sp.add_argument(
        "--assignments", default="cyclic,fractional,random", help="comma list of kinds"
    )
    sp.add_argument(
        "--adversaries",
        default="honest,random-always,random-initial-only,tournament-liar",
        help="comma list of strategies",
    )
    sp.add_argument("--seeds", type=int, default=20, help="seeds 0..N-1 per combo")
    sp.add_argument("--q", type=int, default=DEFAULT_MODULUS)
    sp.add_argument("--grouping", help="lowest | shuffled")
    sp.add_argument("--jobs", type=int, default=os.cpu_count(), help="parallel processes")
    sp.add_argument("--out", help="output directory (default .)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("verify", help="run exhaustive correctness checks")
    sp.add_argument(
        "which",
        choices=["all", *CHECKS.keys()],
        help="which guarantee to check",
    )
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("replay", help="re-execute a recorded transcript")
    sp.add_argument("transcript", help="JSONL transcript path")
    sp.set_defaults(func=cmd_replay)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
