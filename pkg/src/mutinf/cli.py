"""Command-line entry point: ``mutinf {simulate,detect,learn,layout,report}``.

Exit codes: 0 on success, 2 for usage or spec errors, 1 for runtime errors.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import harness
from .env.camera import dump_layout, load_layout, overlap_graph
from .errors import UsageError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_run_flags(p, steps=True):
    p.add_argument("--spec", required=True, help="experiment spec file (key = value lines)")
    p.add_argument("--seed", type=int, help="seed base (overrides the experiment file)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--runs", type=int, help="number of runs (overrides the experiment file)")
    if steps:
        p.add_argument("--steps", type=int, help="steps per run (overrides the experiment file)")
    p.add_argument("--jobs", type=int, help="parallel worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mutinf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="one seeded learning run with a JSON-lines trace")
    p.add_argument("--spec", required=True)
    p.add_argument("--seed", type=int, help="run seed (default: the experiment's seed_base)")
    p.add_argument("--out", default=".")
    p.add_argument("--steps", type=int)
    p.add_argument("--no-trace", action="store_true", help="skip trace.jsonl")

    _add_run_flags(sub.add_parser("detect", help="detection-rate experiment -> detection.csv"))
    _add_run_flags(sub.add_parser("learn", help="reward experiment -> reward.csv, network.csv, events.csv"))

    p = sub.add_parser("layout", help="print the overlap graph of a camera layout or dump its JSON")
    p.add_argument("layout", help="SCN1, SCN2, SCN3 or a layout JSON file")
    p.add_argument("--dump", "--dump-layout", dest="dump", action="store_true", help="write the layout JSON")
    p.add_argument("--out", help="file for --dump (default: stdout)")

    p = sub.add_parser("report", help="summarise detection.csv / reward.csv files -> summary.csv")
    p.add_argument("inputs", nargs="+", help="CSV files or directories holding them")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--threshold", type=float, default=0.95, help="detection rate counted as reached")
    p.add_argument("--fraction", type=float, default=0.1, help="final fraction of steps forming the plateau")
    return parser


def _spec(args, **extra):
    overrides = dict(seed_base=args.seed, n_runs=getattr(args, "runs", None),
                     n_steps=getattr(args, "steps", None), jobs=getattr(args, "jobs", None))
    overrides.update(extra)
    return harness.load_spec(args.spec, **overrides)


def _out(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    spec = _spec(args)
    seed = spec.seed_base if args.seed is None else args.seed
    system = harness.simulate(spec, seed, _out(args.out), trace=not args.no_trace)
    edges = ", ".join(f"{a}->{b}" for a, b in system.graph.edge_list()) or "none"
    print(f"{spec.name}: {spec.n_steps} steps, seed {seed}, integrations: {edges}")
    return 0


def cmd_detect(args) -> int:
    spec = _spec(args)
    curve = harness.run_detection_experiment(spec)
    path = _out(args.out) / "detection.csv"
    harness.emit_csv(path, harness.DETECTION_COLUMNS, curve.rows())
    print(f"{spec.name}: {spec.n_runs} runs -> {path}")
    return 0


def cmd_learn(args) -> int:
    spec = _spec(args)
    curve = harness.run_reward_experiment(spec)
    out = _out(args.out)
    harness.emit_csv(out / "reward.csv", harness.REWARD_COLUMNS, curve.rows())
    harness.emit_csv(out / "network.csv", harness.NETWORK_COLUMNS, curve.network_rows())
    harness.emit_csv(out / "events.csv", harness.EVENT_COLUMNS, curve.events)
    print(f"{spec.name}: {spec.n_runs} runs x {spec.n_steps} steps, plateau {curve.plateau():.4f} -> {out}")
    return 0


def cmd_layout(args) -> int:
    layout = load_layout(args.layout)
    if args.dump:
        text = dump_layout(layout)
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return 0
    for a, b in sorted(overlap_graph(layout)):
        print(f"{a} {b}")
    return 0


def _csv_files(inputs):
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            yield from sorted(q for q in p.glob("*.csv") if q.name in ("detection.csv", "reward.csv"))
        elif p.is_file():
            yield p
        else:
            raise UsageError(f"no such file or directory: {p}")


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def cmd_report(args) -> int:
    rows = []
    for path in _csv_files(args.inputs):
        data = _read(path)
        cols = set(data[0]) if data else set()
        if {"samples", "measure", "detection_rate"} <= cols:
            groups = {}
            for r in data:
                groups.setdefault((r.get("component", ""), r["measure"]), []).append(r)
            for (comp, measure), rs in groups.items():
                reached = next((r["step"] or r["samples"] for r in rs
                                if float(r["detection_rate"]) >= args.threshold), "")
                rows.append((str(path), "detection", comp, measure, "first_step_at_threshold", reached))
                rows.append((str(path), "detection", comp, measure, "final_rate", rs[-1]["detection_rate"]))
        elif {"step", "mean_reward"} <= cols:
            values = [float(r["mean_reward"]) for r in data]
            rows.append((str(path), "reward", "", "", "plateau", repr(harness.plateau(values, args.fraction))))
            rows.append((str(path), "reward", "", "", "n_runs", data[-1]["n_runs"]))
        else:
            raise UsageError(f"{path}: not a detection or reward CSV")
    out = _out(args.out) / "summary.csv"
    harness.emit_csv(out, ("file", "kind", "component", "measure", "statistic", "value"), rows)
    for row in rows:
        print(",".join(row))
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "detect": cmd_detect,
    "learn": cmd_learn,
    "layout": cmd_layout,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            raise UsageError("a subcommand is required")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"mutinf: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any runtime failure maps to exit 1
        print(f"mutinf: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
