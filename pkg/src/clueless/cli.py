"""Command line front end.

    clueless run      program.s ...   assemble, execute and analyze
    clueless analyze  trace.txt ...   analyze an existing record stream
    clueless oracle   trace.txt       unbounded reference result for a trace

Exit codes: 0 clean, 1 usage error, 2 input/IO error, 3 leaks found in
track mode. Output paths accept "-" for standard output. With several
inputs, per-input artifacts land in --out-dir and --jobs runs the
sessions in parallel.
"""

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

from . import interp
from .engine import EngineConfig, UnwatchUnknownRegion
from .isa import MalformedLine, iter_trace
from .metrics import DEFAULT_SAMPLE_INTERVAL, write_csv, write_summary
from .oracle import TraceTooLarge, run_oracle
from .session import Session
from .tracer import DEFAULT_LOG_CAPACITY, render

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_LEAKS = 3

_INPUT_ERRORS = (MalformedLine, interp.AsmError, interp.Trap,
                 interp.StepLimitExceeded, TraceTooLarge,
                 UnwatchUnknownRegion, OSError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _watch_flag(text: str) -> tuple[int, int]:
    base, sep, length = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError("expected ADDR:LEN")
    try:
        return int(base, 0), int(length, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad watch spec {text!r}") from None


def _build_parser() -> _Parser:
    p = _Parser(prog="clueless",
                description="track data values that leak as memory addresses")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mode", choices=("track", "aggregate"), default="track")
    common.add_argument("--watch", action="append", type=_watch_flag, default=[],
                        metavar="ADDR:LEN", help="watch a memory region")
    common.add_argument("--taints", type=int, default=128)
    common.add_argument("--cache-sets", type=int, default=256)
    common.add_argument("--cache-ways", type=int, default=8)
    common.add_argument("--granularity", type=int, default=1)
    common.add_argument("--count-a-starts", action="store_true",
                        help="count accesses by start address, not byte footprint")
    common.add_argument("--sample-interval", type=int,
                        default=DEFAULT_SAMPLE_INTERVAL)
    common.add_argument("--csv", metavar="PATH")
    common.add_argument("--summary", metavar="PATH")
    common.add_argument("--trace-out", metavar="PATH")
    common.add_argument("--report", metavar="PATH")
    common.add_argument("--out-dir", metavar="DIR",
                        help="artifact directory (required for several inputs)")
    common.add_argument("--jobs", type=int, default=1)

    pr = sub.add_parser("run", parents=[common],
                        help="assemble and execute programs")
    pr.add_argument("inputs", nargs="+", metavar="PROGRAM")
    pr.add_argument("--step-limit", type=int, default=interp.DEFAULT_STEP_LIMIT)
    pr.add_argument("--mem-bound", type=lambda s: int(s, 0), default=None)

    pa = sub.add_parser("analyze", parents=[common],
                        help="analyze trace files")
    pa.add_argument("inputs", nargs="+", metavar="TRACE")

    po = sub.add_parser("oracle", parents=[common],
                        help="reference result for one trace")
    po.add_argument("inputs", nargs=1, metavar="TRACE")
    return p


def _engine_config(ns) -> EngineConfig:
    cfg = EngineConfig(mode=ns.mode, taint_budget=ns.taints,
                       cache_sets=ns.cache_sets, cache_ways=ns.cache_ways,
                       granularity=ns.granularity,
                       count_access_starts=ns.count_a_starts)
    cfg.validate()
    return cfg


def _check_watch_sources(ns, path: str):
    """Track mode needs at least one watched region, from a flag or in-band."""
    if ns.mode == "aggregate":
        if ns.watch:
            print("warning: --watch is ignored in aggregate mode", file=sys.stderr)
        return
    if ns.watch:
        return
    text = Path(path).read_text()
    if ns.command == "run":
        if ".watch" in text:
            return
    elif any(line.lstrip().startswith("watch ")
             or line.strip() == "watch" for line in text.splitlines()):
        return
    raise UsageError(f"{path}: track mode needs --watch or an in-band watch")


def _artifact_paths(ns, path: str, multi: bool) -> dict:
    if not multi and not ns.out_dir:
        return {"csv": ns.csv, "summary": ns.summary,
                "trace": ns.trace_out, "report": ns.report}
    out = Path(ns.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(path).stem
    return {"csv": str(out / f"{stem}.csv"),
            "summary": str(out / f"{stem}.summary.json"),
            "trace": str(out / f"{stem}.trace.txt"),
            "report": str(out / f"{stem}.report.json")}


def _write_json(doc: dict, path: str):
    if path == "-":
        json.dump(doc, sys.stdout, indent=2)
        sys.stdout.write("\n")
        return
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def _process_one(ns, path: str, multi: bool) -> int:
    """Run one session over one input; returns its exit code."""
    _check_watch_sources(ns, path)
    session = Session(_engine_config(ns), sample_interval=ns.sample_interval,
                      log_capacity=DEFAULT_LOG_CAPACITY)
    if ns.mode == "track":
        for base, length in ns.watch:
            session.engine.register_watch(base, length)

    if ns.command == "run":
        program = interp.assemble(Path(path).read_text())
        interp.run(program, session.feed, step_limit=ns.step_limit,
                   mem_bound=ns.mem_bound)
    else:
        with open(path) as f:
            for _, item in iter_trace(f):
                session.feed(item)
    session.finish()

    paths = _artifact_paths(ns, path, multi)
    if paths["csv"]:
        write_csv(session.metrics, paths["csv"])
    if paths["summary"]:
        write_summary(session.metrics, paths["summary"], session.config_dict())
    if paths["trace"]:
        text = "".join(render(ev) + "\n" for ev in session.log.events)
        if paths["trace"] == "-":
            sys.stdout.write(text)
        else:
            Path(paths["trace"]).write_text(text)
    if paths["report"]:
        _write_json(session.report(), paths["report"])
    if not any(paths.values()):
        lam = session.metrics.lambda_()
        print(f"{path}: instructions={session.metrics.instructions} "
              f"lambda={lam.numerator}/{lam.denominator} "
              f"leaks={session.engine.leak_count}")

    if ns.mode == "track" and session.leaks:
        return EXIT_LEAKS
    return EXIT_OK


def _worker(ns_dict: dict, path: str) -> tuple[str, int, str]:
    ns = argparse.Namespace(**ns_dict)
    try:
        return path, _process_one(ns, path, multi=True), ""
    except UsageError as e:
        return path, EXIT_USAGE, str(e)
    except _INPUT_ERRORS as e:
        return path, EXIT_INPUT, str(e)


def _cmd_oracle(ns) -> int:
    path = ns.inputs[0]
    _check_watch_sources(ns, path)
    with open(path) as f:
        stream = (item for _, item in iter_trace(f))
        tracker = run_oracle(stream, mode=ns.mode, granularity=ns.granularity,
                             count_access_starts=ns.count_a_starts,
                             watches=ns.watch if ns.mode == "track" else ())
    lam = tracker.lambda_()
    doc = {
        "lambda": float(f"{float(lam):.6g}"),
        "lambda_num": lam.numerator,
        "lambda_den": lam.denominator,
        "instructions": tracker.instructions,
        "sum_A": tracker.sum_a,
        "sum_L": tracker.sum_l,
        "leaks": [[f"{o:#x}", f"{ea:#x}"]
                  for o, ea in sorted(tracker.leak_pairs)],
    }
    _write_json(doc, ns.summary or "-")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command == "oracle":
            return _cmd_oracle(ns)
        multi = len(ns.inputs) > 1
        if multi and not ns.out_dir:
            raise UsageError("several inputs need --out-dir")
        if ns.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        if ns.jobs > 1 and multi:
            ns_dict = vars(ns).copy()
            ns_dict["inputs"] = []
            with ProcessPoolExecutor(max_workers=ns.jobs) as pool:
                results = list(pool.map(_worker, [ns_dict] * len(ns.inputs),
                                        ns.inputs))
            codes = set()
            for path, code, msg in results:
                if msg:
                    print(f"{path}: {msg}", file=sys.stderr)
                codes.add(code)
            for severe in (EXIT_USAGE, EXIT_INPUT, EXIT_LEAKS):
                if severe in codes:
                    return severe
            return EXIT_OK
        codes = {_process_one(ns, path, multi) for path in ns.inputs}
        for severe in (EXIT_INPUT, EXIT_LEAKS):
            if severe in codes:
                return severe
        return EXIT_OK
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except _INPUT_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
