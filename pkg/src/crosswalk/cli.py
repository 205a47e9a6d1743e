"""Command-line entry point.

Subcommands: serve (live WebSocket sessions), run (headless scripted
session), report (rubric metrics from logs), replay (bit-exact log
verification), scenarios (list/validate/show configs).

Exit codes are part of the scripting contract: 0 success (a session
ending in a hit is still a successful run), 2 configuration or malformed
input, 3 storage failure, 4 replay divergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import uuid
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .engine import init_world, step
from .policy import POLICY_KINDS, make_observation, make_policy, policy_step
from .scenario import (
    ScenarioConfig,
    ScenarioParseError,
    ScenarioValidationError,
    builtin_scenario,
    builtin_scenarios,
    load_scenario,
    serialize_scenario,
    validate,
    with_overrides,
)
from .telemetry import (
    MalformedLogError,
    RubricReport,
    SessionMeta,
    TelemetryWriter,
    VersionMismatchError,
    compute_rubrics,
    event_record,
    final_record,
    input_record,
    read_log,
    replay,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STORAGE = 3
EXIT_DIVERGED = 4

LOG_DIR_ENV = "CROSSWALK_LOG_DIR"


def default_log_dir() -> Path:
    return Path(os.environ.get(LOG_DIR_ENV, "logs"))


def _resolve_scenario(ref: str) -> ScenarioConfig:
    """Builtin id ('1'..'3') or a scenario file path."""
    if ref.isdigit():
        return builtin_scenario(int(ref))  # KeyError for unknown ids
    path = Path(ref)
    if not path.is_file():
        raise FileNotFoundError(ref)
    return load_scenario(path.read_text(encoding="utf-8"))


def run_headless_session(
    config: ScenarioConfig,
    seed: int,
    policy_kind: str,
    policy_seed: int,
    out_path: str | Path,
) -> tuple[SessionMeta, RubricReport]:
    """Execute one scripted session end to end, writing its log."""
    world = init_world(config, seed)
    policy = make_policy(policy_kind, policy_seed, config)
    meta = SessionMeta(
        session_id=uuid.uuid4().hex,
        scenario_id=config.id,
        scenario_name=config.name,
        seed=seed,
        policy=policy_kind,
        started_at=datetime.now(timezone.utc).isoformat(),
        engine_version=__version__,
        config=config,
    )
    writer = TelemetryWriter(out_path, meta)
    records: list[dict] = []
    while not world.ended:
        obs = make_observation(world)
        policy, cmd = policy_step(policy, obs)
        rec = input_record(world.clock.tick + 1, cmd)
        writer.append(rec)
        records.append(rec)
        world, events = step(world, cmd)
        for event in events:
            rec = event_record(world.clock.tick, event.to_payload())
            writer.append(rec)
            records.append(rec)
    rec = final_record(world.clock.tick, world)
    writer.append(rec)
    records.append(rec)
    writer.close()
    return meta, compute_rubrics(meta, records)


def _print_report(report: RubricReport, file=None) -> None:
    file = file if file is not None else sys.stdout
    print(f"session      {report.session_id}", file=file)
    print(f"scenario     {report.scenario_id} ({report.policy})", file=file)
    print(f"attempts     {report.attempts}", file=file)
    print(f"safe         {report.safe_crossings}", file=file)
    print(f"provoked     {report.provoked_tests}", file=file)
    print(f"walked/ran   {report.walked}/{report.ran}", file=file)
    print(f"collisions   {report.collisions}", file=file)
    print(f"final score  {report.final_score}", file=file)
    print(f"duration     {report.duration_s:.1f} s", file=file)


# --------------------------------------------------------------------------
# subcommand handlers


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .session import create_app

    try:
        app = create_app(args.log_dir, args.scenario_dir, args.ui_dir)
    except (ScenarioParseError, ScenarioValidationError) as exc:
        print(f"scenario dir error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        config = _resolve_scenario(args.scenario)
    except (FileNotFoundError, KeyError) as exc:
        print(f"scenario not found: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ScenarioParseError, ScenarioValidationError) as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.duration is not None:
        if args.duration <= 0:
            print("duration must be > 0", file=sys.stderr)
            return EXIT_CONFIG
        config = with_overrides(config, duration_s=args.duration)

    out = Path(args.out) if args.out else default_log_dir() / f"run-{uuid.uuid4().hex}.log"
    try:
        meta, report = run_headless_session(
            config, args.seed, args.policy, args.policy_seed, out
        )
    except OSError as exc:
        print(f"storage error: {exc}", file=sys.stderr)
        return EXIT_STORAGE
    print(f"log written  {out}")
    _print_report(report)
    return EXIT_OK


def _iter_report_rows(target: Path) -> list[RubricReport]:
    paths = sorted(target.glob("*.log")) if target.is_dir() else [target]
    if not paths:
        raise MalformedLogError(f"no .log files in {target}")
    reports = []
    for path in paths:
        meta, records = read_log(path)
        reports.append(compute_rubrics(meta, records))
    reports.sort(key=lambda r: r.session_id)
    return reports


_REPORT_COLUMNS = (
    "session_id",
    "scenario_id",
    "policy",
    "attempts",
    "safe_crossings",
    "provoked_tests",
    "walked",
    "ran",
    "collisions",
    "final_score",
    "duration_s",
)


def _cmd_report(args: argparse.Namespace) -> int:
    target = Path(args.path)
    if not target.exists():
        print(f"no such path: {target}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        reports = _iter_report_rows(target)
    except (MalformedLogError, OSError) as exc:
        print(f"malformed log: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    rows = [[str(getattr(r, c)) for c in _REPORT_COLUMNS] for r in reports]
    if args.format == "json":
        print(json.dumps([r.as_dict() for r in reports], indent=2))
    elif args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(_REPORT_COLUMNS)
        writer.writerows(rows)
        print(buf.getvalue(), end="")
    else:
        widths = [
            max(len(_REPORT_COLUMNS[i]), *(len(row[i]) for row in rows)) if rows else len(_REPORT_COLUMNS[i])
            for i in range(len(_REPORT_COLUMNS))
        ]
        header = "  ".join(c.ljust(widths[i]) for i, c in enumerate(_REPORT_COLUMNS))
        print(header)
        print("-" * len(header))
        for row in rows:
            print("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return EXIT_OK


def _cmd_replay(args: argparse.Namespace) -> int:
    path = Path(args.path)
    if not path.is_file():
        print(f"no such log: {path}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        meta, records = read_log(path)
        result = replay(meta, records)
    except VersionMismatchError as exc:
        print(f"version mismatch: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MalformedLogError, ScenarioValidationError) as exc:
        print(f"malformed log: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if result.ok:
        print(f"replay OK: {path} ({meta.session_id})")
        return EXIT_OK
    print(f"replay DIVERGED at tick {result.divergence_tick}", file=sys.stderr)
    print(result.detail, file=sys.stderr)
    return EXIT_DIVERGED


def _cmd_scenarios(args: argparse.Namespace) -> int:
    if args.action == "list":
        print("id  name            av_fraction  yielding_fraction  indicator")
        for cfg in builtin_scenarios():
            print(
                f"{cfg.id:<3d} {cfg.name:<15s} {cfg.av_fraction:<12.2f} "
                f"{cfg.yielding_fraction:<18.2f} {'on' if cfg.indicator_enabled else 'off'}"
            )
        return EXIT_OK
    if args.action == "validate":
        try:
            text = Path(args.target).read_text(encoding="utf-8")
        except OSError as exc:
            print(f"cannot read {args.target}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        try:
            config = load_scenario(text)
        except ScenarioParseError as exc:
            print(f"parse error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except ScenarioValidationError as exc:
            for violation in exc.violations:
                print(f"invalid: {violation}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"OK: {args.target} ({config.name})")
        return EXIT_OK
    # show
    try:
        config = _resolve_scenario(args.target)
    except (FileNotFoundError, KeyError):
        print(f"no such scenario: {args.target}", file=sys.stderr)
        return EXIT_CONFIG
    except (ScenarioParseError, ScenarioValidationError) as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(serialize_scenario(config), end="")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crosswalk",
        description="Deterministic pedestrian/AV intersection simulator.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the live session server")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--log-dir", type=Path, default=default_log_dir())
    p_serve.add_argument("--scenario-dir", type=Path, default=None,
                         help="directory of *.scenario files to offer alongside builtins")
    p_serve.add_argument("--ui-dir", type=Path, default=None,
                         help="static directory to serve at / (browser client build)")
    p_serve.set_defaults(func=_cmd_serve)

    p_run = sub.add_parser("run", help="run one headless scripted session")
    p_run.add_argument("--scenario", required=True, help="builtin id (1|2|3) or scenario file path")
    p_run.add_argument("--policy", choices=POLICY_KINDS, default="cautious")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--policy-seed", type=int, default=0)
    p_run.add_argument("--duration", type=float, default=None, help="override duration_s")
    p_run.add_argument("--out", type=Path, default=None, help="log path (default: log dir)")
    p_run.set_defaults(func=_cmd_run)

    p_report = sub.add_parser("report", help="rubric metrics from a log file or directory")
    p_report.add_argument("path")
    p_report.add_argument("--format", choices=("table", "csv", "json"), default="table")
    p_report.set_defaults(func=_cmd_report)

    p_replay = sub.add_parser("replay", help="verify a log replays bit-exactly")
    p_replay.add_argument("path")
    p_replay.set_defaults(func=_cmd_replay)

    p_sc = sub.add_parser("scenarios", help="list, validate, or show scenario configs")
    sc_sub = p_sc.add_subparsers(dest="action", required=True)
    sc_list = sc_sub.add_parser("list", help="list builtin scenarios")
    sc_list.set_defaults(func=_cmd_scenarios)
    sc_val = sc_sub.add_parser("validate", help="validate a scenario file")
    sc_val.add_argument("target")
    sc_val.set_defaults(func=_cmd_scenarios)
    sc_show = sc_sub.add_parser("show", help="print a scenario as a config document")
    sc_show.add_argument("target")
    sc_show.set_defaults(func=_cmd_scenarios)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
