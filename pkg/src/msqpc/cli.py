"""Command-line front end: ``msqpc {run,attack,sweep,example}``.

Exit status: 0 on completion, 2 on usage errors, and 3/4/5 when a ``run``
is aborted at Step 4, for insufficient Case-8 particles, or at Step 5.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time

from . import streams
from .adversary import parse_attack
from .analysis import RunReport, example_chain, format_chain
from .detection import monte_carlo_detection
from .protocol import ProtocolConfig, RunStatus, run_protocol
from .qudit import DomainError, check_dimension

SEED_ENV = "MSQPC_SEED"

EXIT_CODES = {
    RunStatus.COMPLETED: 0,
    RunStatus.ABORTED_STEP4_EAVESDROP: 3,
    RunStatus.ABORTED_INSUFFICIENT_CASE8: 4,
    RunStatus.ABORTED_STEP5_ERROR_RATE: 5,
}

CSV_COLUMNS = ["d", "attack", "case", "step", "attacked", "detected", "rate", "stderr", "reference"]


def _dimension(text: str) -> int:
    try:
        return check_dimension(int(text))
    except (ValueError, DomainError) as exc:
        raise argparse.ArgumentTypeError(
            f"invalid d {text!r}: d must be an odd integer >= 3 so that h = (d-1)/2 is an integer"
        ) from exc


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _digits(text: str) -> list[list[int]]:
    # "5,3;2,2" -> one comma-separated sequence per user
    return [[int(x) for x in part.split(",")] for part in text.split(";")]


def _default_seed() -> int:
    return int(os.environ.get(SEED_ENV, "0"))


def _add_protocol_args(p: argparse.ArgumentParser, users: int = 2, single_d: bool = True) -> None:
    if single_d:
        p.add_argument("--d", type=_dimension, default=19, help="odd dimension >= 3 (default 19)")
    p.add_argument("--users", type=int, default=users, help="number of classical users N >= 2")
    p.add_argument("--length", type=_positive, default=1, help="comparison length L")
    p.add_argument("--seed", type=int, default=None, help=f"64-bit seed (default ${SEED_ENV} or 0)")
    p.add_argument("--multiplier", type=_positive, default=16, help="sequence length = multiplier * L")
    p.add_argument("--retries", type=int, default=0, help="reruns on a Case-8 shortfall")
    p.add_argument("--output", "-o", help="write the report here instead of stdout")
    p.add_argument("--timing", action="store_true", help="add wall-clock timing to the report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msqpc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one seeded protocol run")
    _add_protocol_args(run)
    run.add_argument("--inputs", type=_digits, help='private digits, e.g. "5,1;3,4" (random if omitted)')
    run.add_argument("--key", type=lambda s: [int(x) for x in s.split(",")], help="shared key digits")
    run.add_argument("--events", help="write the line-delimited event log here")

    attack = sub.add_parser("attack", help="Monte Carlo detection statistics for one attack")
    _add_protocol_args(attack, users=4)
    attack.add_argument("--attack", default="none",
                        help="none, ir-v1, ir-v2, ir-v3, mr:<segment>, probe:<family>")
    attack.add_argument("--trials", type=_positive, default=1000)

    sweep = sub.add_parser("sweep", help="detection table over several d and attacks")
    _add_protocol_args(sweep, users=4, single_d=False)
    sweep.add_argument("--d", dest="d_list", type=lambda s: [_dimension(x) for x in s.split(",")],
                       default=[3, 5, 19], help="comma-separated dimensions")
    sweep.add_argument("--attack", dest="attacks", default="ir-v1,ir-v2,ir-v3",
                       help="comma-separated attack specs")
    sweep.add_argument("--trials", type=_positive, default=1000)
    sweep.add_argument("--format", choices=("csv", "json"), default="csv")

    example = sub.add_parser("example", help="replay the worked d=19 four-user instance")
    example.add_argument("--json", action="store_true", help="emit the report instead of the derivation text")
    example.add_argument("--output", "-o")
    return parser


def _config(args, d: int | None = None) -> ProtocolConfig:
    seed = args.seed if args.seed is not None else _default_seed()
    return ProtocolConfig(d=d if d is not None else args.d, n_users=args.users, length=args.length,
                          seq_multiplier=args.multiplier, seed=seed, max_retries=args.retries)


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_run(args) -> int:
    cfg = _config(args)
    rng = streams.substream(cfg.seed, streams.INPUTS)
    inputs = args.inputs if args.inputs is not None else rng.integers(0, cfg.h + 1, (cfg.n_users, cfg.length)).tolist()
    key = args.key if args.key is not None else rng.integers(0, cfg.d, cfg.length).tolist()
    start = time.perf_counter()
    transcript = run_protocol(cfg, inputs, key)
    report = RunReport.from_transcript("run", transcript)
    if args.timing:
        report.timing = {"seconds": time.perf_counter() - start}
    if args.events:
        with open(args.events, "w", encoding="utf-8") as fh:
            for event in transcript.events_as_dicts():
                fh.write(json.dumps(event, sort_keys=True) + "\n")
    _emit(report.to_json(), args.output)
    return EXIT_CODES[transcript.outcome.status]


def _cmd_attack(args) -> int:
    cfg = _config(args)
    strategy = parse_attack(args.attack, cfg.d)
    start = time.perf_counter()
    stats = monte_carlo_detection(cfg, strategy, args.trials)
    report = RunReport("attack", {**cfg.to_dict(), "attack": strategy.name, "trials": args.trials},
                       detection=[stats.to_dict()])
    if args.timing:
        report.timing = {"seconds": time.perf_counter() - start}
    _emit(report.to_json(), args.output)
    return 0


def _cmd_sweep(args) -> int:
    attacks = [a for a in args.attacks.split(",") if a]
    start = time.perf_counter()
    results = []
    for d in args.d_list:
        cfg = _config(args, d=d)
        for spec in attacks:
            results.append(monte_carlo_detection(cfg, parse_attack(spec, d), args.trials))
    if args.format == "json":
        report = RunReport("sweep", {**_config(args, d=args.d_list[0]).to_dict(), "d": args.d_list,
                                     "attacks": attacks, "trials": args.trials},
                           detection=[s.to_dict() for s in results])
        if args.timing:
            report.timing = {"seconds": time.perf_counter() - start}
        _emit(report.to_json(), args.output)
        return 0
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for stats in results:
        for row in stats.rows():
            writer.writerow({**row, "reference": "" if row["reference"] is None else row["reference"]})
    _emit(buf.getvalue(), args.output)
    return 0


def _cmd_example(args) -> int:
    chain = example_chain()
    if args.json:
        text = RunReport("example", {"d": chain["d"], "users": len(chain["p"]), "length": 1},
                         status=chain["status"], relations=[chain["relations"]], example=chain).to_json()
    else:
        text = format_chain(chain) + "\n"
    _emit(text, args.output)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"run": _cmd_run, "attack": _cmd_attack, "sweep": _cmd_sweep, "example": _cmd_example}
    try:
        return handler[args.command](args)
    except (DomainError, ValueError) as exc:
        parser.error(str(exc))


if __name__ == "__main__":
    sys.exit(main())
