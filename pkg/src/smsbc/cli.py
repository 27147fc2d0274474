"""Command-line entry point: run scenarios or fuzz campaigns, emit the event log.

Exit codes: 0 all assertions passed, 1 a scenario or property failed,
2 configuration or usage error. The event log goes to --log (or stdout) as
one JSON object per line; human-readable progress goes to stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import audit
from .config import InvalidConfig, WorldConfig, parse_config
from .rng import Splitmix64
from .scenarios import SCENARIO_NUMBERS, run_twice
from .site import CONFIRMED, LINK
from .wire import Alert, Txn
from .world import Timeout, build_world

FUZZ_SETTLE_BUDGET = 3000


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smsbc",
        description="Two-site ledger replication with a standby SMS channel, simulated.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, plots: bool) -> None:
        p.add_argument("--config", metavar="F", help="config file (key = value lines)")
        p.add_argument("--seed", type=int, metavar="N", help="override the config seed")
        p.add_argument("--log", metavar="F", help="write the event log here instead of stdout")
        if plots:
            p.add_argument("--plots", metavar="DIR",
                           help="render run figures (PNG) into this directory")

    p_scenario = sub.add_parser("scenario", help="run one scenario twice")
    p_scenario.add_argument("number", type=int, choices=SCENARIO_NUMBERS)
    common(p_scenario, plots=True)

    p_all = sub.add_parser("all", help="run every scenario twice")
    common(p_all, plots=True)

    p_fuzz = sub.add_parser("fuzz", help="randomized failover campaigns")
    p_fuzz.add_argument("--iterations", type=_positive_int, required=True, metavar="N")
    common(p_fuzz, plots=False)

    return parser


def _load_config(args: argparse.Namespace) -> WorldConfig:
    if args.config:
        config = parse_config(Path(args.config).read_text())
    else:
        config = WorldConfig()
    if args.seed is not None:
        config = config.with_overrides(seed=args.seed)
    config.validate()
    return config


def _run_scenarios(numbers, config: WorldConfig, sink, plots_dir) -> int:
    all_ok = True
    for number in numbers:
        first, second, identical = run_twice(number, config, sink)
        ok = first.passed and second.passed and identical
        all_ok = all_ok and ok
        verdict = "PASS" if ok else "FAIL"
        retest = "identical" if identical else "NOT identical"
        print(f"scenario {number}: {verdict} (two runs, logs {retest})", file=sys.stderr)
        for step in first.steps:
            mark = "ok" if step.passed else "FAILED"
            note = "" if step.passed else f" -- {step.detail}"
            print(f"  [{mark}] {step.label}{note}", file=sys.stderr)
        if plots_dir is not None:
            from .plots import render_figures

            for path in render_figures(first.events, Path(plots_dir), f"scenario{number}"):
                print(f"  wrote {path}", file=sys.stderr)
    return 0 if all_ok else 1


def _fuzz_once(config: WorldConfig, rng: Splitmix64, sink) -> list[str]:
    cfg = config.with_overrides(
        seed=rng.next_u64(),
        loss_prob=rng.randint(0, 40) / 100,
        dup_prob=rng.randint(0, 30) / 100,
        delay_min=1,
        delay_max=rng.randint(1, 5),
    )
    world = build_world(cfg, sink)
    world.set_link(False)
    world.set_sms_model(True)

    accounts = sorted(cfg.accounts)
    expected = {acct: world.site2.read_balance(acct) for acct in accounts}
    txn_ids = []
    for _ in range(rng.randint(5, 25)):
        account = accounts[rng.randint(0, len(accounts) - 1)]
        delta = rng.randint(-50000, 50000)
        txn_ids.append(world.site1.remote_update(account, delta, world.clock))
        expected[account] += delta

    records = [world.site1.records_by_id[i] for i in txn_ids]
    problems = []
    try:
        world.run_until(lambda w: all(r.status == CONFIRMED for r in records),
                        FUZZ_SETTLE_BUDGET)
    except Timeout:
        stuck = [str(r.id) for r in records if r.status != CONFIRMED]
        problems.append(f"transactions never confirmed: {stuck}")

    for account in accounts:
        got = world.site2.read_balance(account)
        if got != expected[account]:
            problems.append(f"account {account}: balance {got}, expected {expected[account]}")
    replayed = audit.replayed_balances(world.log.records, "site2")
    live = {acct: world.site2.read_balance(acct) for acct in accounts}
    if replayed != live:
        problems.append(f"log replay {replayed} disagrees with ledger {live}")
    doubles = audit.double_applied(world.log.records, "site2")
    if doubles:
        problems.append(f"double-applied transaction ids: {doubles}")
    link_alerts = [r for r in world.site1.outbox
                   if isinstance(r.message, Alert) and r.message.code == LINK]
    txn_rows = [r for r in world.site1.outbox if isinstance(r.message, Txn)]
    if not (len(link_alerts) == len(txn_rows) == len(txn_ids)):
        problems.append(
            f"two-row rule broken: {len(txn_rows)} txn rows, "
            f"{len(link_alerts)} link alerts, {len(txn_ids)} failovers")
    return problems


def _run_fuzz(iterations: int, config: WorldConfig, sink) -> int:
    rng = Splitmix64(config.seed)
    failures = 0
    for i in range(1, iterations + 1):
        problems = _fuzz_once(config, rng, sink)
        if problems:
            failures += 1
            print(f"fuzz iteration {i}: FAIL", file=sys.stderr)
            for problem in problems:
                print(f"  {problem}", file=sys.stderr)
        else:
            print(f"fuzz iteration {i}: ok", file=sys.stderr)
    print(f"fuzz: {iterations - failures}/{iterations} iterations clean", file=sys.stderr)
    return 0 if failures == 0 else 1


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        config = _load_config(args)
    except (InvalidConfig, OSError, ValueError) as exc:
        print(f"smsbc: configuration error: {exc}", file=sys.stderr)
        return 2

    log_file = None
    try:
        if args.log:
            log_file = open(args.log, "w")

            def sink(line: str) -> None:
                log_file.write(line + "\n")
                log_file.flush()
        else:

            def sink(line: str) -> None:
                sys.stdout.write(line + "\n")

        if args.command == "scenario":
            return _run_scenarios([args.number], config, sink, args.plots)
        if args.command == "all":
            return _run_scenarios(SCENARIO_NUMBERS, config, sink, args.plots)
        return _run_fuzz(args.iterations, config, sink)
    except OSError as exc:
        print(f"smsbc: {exc}", file=sys.stderr)
        return 2
    finally:
        if log_file is not None:
            log_file.close()


if __name__ == "__main__":
    sys.exit(main())
