"""Command-line front end: run sessions, serve the gateway, code transcripts,
compute agreement, aggregate reports, and score rubric cards.

Exit codes: 0 success, 2 usage/config problem, 3 provider problem,
4 environment problem (e.g. occupied port).
"""

import argparse
import io
import json
import socket
import sys
from pathlib import Path

from . import assets
from .checklist import (ChecklistError, DEFAULT_RUBRIC, compare, load_card,
                        read_marks_csv, score)
from .coding import (CodingError, classify_transcript, cohens_kappa,
                     read_codes_csv, write_codes_csv)
from .provider import ProviderError, ProviderUnavailable
from .report import aggregate, diff_vs_control, sequence_strip
from .session import (ConfigError, Deadlock, Session, build_provider,
                      build_providers, export_artifacts, load_config)
from .transcript import parse_markdown_verbose

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PROVIDER = 3
EXIT_ENV = 4


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _read_text(path_or_ref: str) -> str:
    if path_or_ref.startswith(assets.ASSET_PREFIX):
        return assets.resolve(path_or_ref)
    return Path(path_or_ref).read_text(encoding="utf-8")


# -- run / serve ---------------------------------------------------------------


def _load_run_config(args):
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.scripted:
        offenders = [name for name, d in config.providers.items()
                     if d.get("type") != "scripted"]
        if offenders:
            raise ConfigError(
                f"--scripted requires scripted providers, got non-scripted: "
                f"{', '.join(sorted(offenders))}")
    return config


def cmd_run(args) -> int:
    try:
        config = _load_run_config(args)
        providers = build_providers(config)
    except ConfigError as err:
        return _fail(EXIT_USAGE, str(err))
    try:
        for provider in providers.values():
            check = getattr(provider, "check_ready", None)
            if check:
                check()
    except ProviderUnavailable as err:
        return _fail(EXIT_PROVIDER, str(err))

    session = Session(config, providers=providers)
    try:
        artifacts = session.run()
    except Deadlock as err:
        return _fail(1, f"deadlock: {err}")
    except ProviderError as err:
        return _fail(EXIT_PROVIDER, str(err))
    export_artifacts(artifacts, args.out)
    print(f"run complete: {artifacts.meta['events']} events, "
          f"end_reason={artifacts.meta['end_reason']}, artifacts in {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .gateway import SessionManager, create_app

    try:
        host, _, port_text = args.bind.rpartition(":")
        host = host or "127.0.0.1"
        port = int(port_text)
    except ValueError:
        return _fail(EXIT_USAGE, f"bad --bind value {args.bind!r}, want host:port")

    try:
        config = _load_run_config(args)
        providers = build_providers(config)
    except ConfigError as err:
        return _fail(EXIT_USAGE, str(err))

    # probe the port first so an occupied port is a clean environment error
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as err:
        return _fail(EXIT_ENV, f"cannot bind {host}:{port}: {err}")
    finally:
        probe.close()

    config.clock_mode = "real"
    session = Session(config, providers=providers)
    manager = SessionManager()
    session_id = manager.adopt(session)
    session.start_background()
    app = create_app(manager)
    print(f"serving session {session_id} on http://{host}:{port}")
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        session.request_stop("server shutdown")
        export_artifacts(session.artifacts(), args.out)
        print(f"artifacts exported to {args.out}")
    return EXIT_OK


# -- analysis ------------------------------------------------------------------


def _provider_from_ref(ref: str):
    try:
        definition = json.loads(_read_text(ref))
    except (OSError, assets.UnknownAsset) as err:
        raise ConfigError(f"cannot read provider definition {ref!r}: {err}")
    except json.JSONDecodeError as err:
        raise ConfigError(f"provider definition is not valid JSON: {err}")
    return build_provider(definition)


def cmd_code(args) -> int:
    try:
        doc = _read_text(args.transcript)
    except (OSError, assets.UnknownAsset) as err:
        return _fail(EXIT_USAGE, f"cannot read transcript: {err}")
    turns, warnings = parse_markdown_verbose(doc)
    if warnings:
        print(f"note: skipped {warnings} unparseable leading line(s)", file=sys.stderr)
    try:
        provider = _provider_from_ref(args.provider)
    except ConfigError as err:
        return _fail(EXIT_USAGE, str(err))
    try:
        codes = classify_transcript(turns, provider)
    except ProviderError as err:
        return _fail(EXIT_PROVIDER, str(err))
    csv_text = write_codes_csv(codes, args.out)
    if args.out:
        print(f"wrote {len(codes)} coded turn(s) to {args.out}")
    else:
        print(csv_text, end="")
    return EXIT_OK


def cmd_agree(args) -> int:
    try:
        codes_a = read_codes_csv(io.StringIO(_read_text(args.codes_a)))
        codes_b = read_codes_csv(io.StringIO(_read_text(args.codes_b)))
        report = cohens_kappa(codes_a, codes_b)
    except (OSError, CodingError, ValueError) as err:
        return _fail(EXIT_USAGE, str(err))
    if args.json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        print(report.to_text())
    return EXIT_OK


def cmd_report(args) -> int:
    runs = []
    condition_names = []
    for item in args.codes:
        name, sep, path = item.partition("=")
        if not sep or not name or not path:
            return _fail(EXIT_USAGE, f"bad codes argument {item!r}, want NAME=PATH")
        try:
            codes = read_codes_csv(io.StringIO(_read_text(path)))
        except (OSError, CodingError, ValueError) as err:
            return _fail(EXIT_USAGE, f"{path}: {err}")
        runs.append((name, codes))
        if name not in condition_names:
            condition_names.append(name)
    if not runs:
        return _fail(EXIT_USAGE, "no codes given")
    if args.control not in condition_names:
        return _fail(EXIT_USAGE, f"unknown control condition {args.control!r}")

    reports = aggregate(runs, include_catch_all=args.include_catch_all)
    by_name = {r.condition_name: r for r in reports}
    control = by_name[args.control]

    if args.json:
        payload = {
            "conditions": [r.to_dict() for r in reports],
            "diffs": [diff_vs_control(r, control).to_dict()
                      for r in reports if r.condition_name != args.control],
            "strips": [{"condition": name, **sequence_strip(codes).to_dict()}
                       for name, codes in runs],
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
        return EXIT_OK

    for condition_report in reports:
        print(condition_report.to_text())
        print()
    for condition_report in reports:
        if condition_report.condition_name == args.control:
            continue
        print(diff_vs_control(condition_report, control).to_text())
        print()
    return EXIT_OK


def cmd_score(args) -> int:
    try:
        marks, notes = read_marks_csv(io.StringIO(_read_text(args.marks)), DEFAULT_RUBRIC)
        card = score(marks, notes, DEFAULT_RUBRIC,
                     system_name=args.system, run_id=args.run_id)
    except (OSError, ChecklistError, ValueError) as err:
        return _fail(EXIT_USAGE, str(err))
    if args.out:
        card.save(args.out)
        print(f"scorecard written to {args.out}")
    functionality, quality = card.split_pass_total(DEFAULT_RUBRIC)
    print(f"{card.system_name or 'scorecard'}: functionality {functionality}/17, "
          f"quality {quality}/3")
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        cards = [load_card(path) for path in args.cards]
        table = compare(cards, DEFAULT_RUBRIC)
    except (OSError, ChecklistError, ValueError, KeyError) as err:
        return _fail(EXIT_USAGE, str(err))
    if args.csv:
        Path(args.csv).write_text(table.to_csv(), encoding="utf-8")
        print(f"comparison CSV written to {args.csv}")
    else:
        print(table.to_text())
    return EXIT_OK


def cmd_assets(args) -> int:
    if args.name:
        try:
            print(assets.load_asset(args.name), end="")
        except assets.UnknownAsset:
            return _fail(EXIT_USAGE, f"unknown asset {args.name!r}")
        return EXIT_OK
    for name in assets.list_assets():
        print(name)
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="teamline",
        description="Shared-timeline engine for mixed human/AI teams, with "
                    "interaction coding and reporting tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured session to termination")
    p_run.add_argument("--config", default="asset:config_golden",
                       help="config file path or asset:<name> reference")
    p_run.add_argument("--out", default="run_artifacts", help="artifact directory")
    p_run.add_argument("--seed", type=int, default=None, help="override config seed")
    p_run.add_argument("--scripted", action="store_true",
                       help="require fully scripted providers (offline run)")
    p_run.set_defaults(func=cmd_run)

    p_serve = sub.add_parser("serve", help="serve a live session over HTTP")
    p_serve.add_argument("--config", default="asset:config_golden")
    p_serve.add_argument("--bind", default="127.0.0.1:8000", help="host:port")
    p_serve.add_argument("--out", default="run_artifacts")
    p_serve.add_argument("--seed", type=int, default=None)
    p_serve.add_argument("--scripted", action="store_true")
    p_serve.set_defaults(func=cmd_serve)

    p_code = sub.add_parser("code", help="classify transcript turns into categories")
    p_code.add_argument("transcript", help="markdown transcript path or asset ref")
    p_code.add_argument("--provider", required=True,
                        help="JSON provider definition (path or asset ref)")
    p_code.add_argument("--out", default=None, help="codes CSV output path")
    p_code.set_defaults(func=cmd_code)

    p_agree = sub.add_parser("agree", help="agreement metrics between two codings")
    p_agree.add_argument("codes_a")
    p_agree.add_argument("codes_b")
    p_agree.add_argument("--json", action="store_true")
    p_agree.set_defaults(func=cmd_agree)

    p_report = sub.add_parser("report", help="aggregate coded runs by condition")
    p_report.add_argument("codes", nargs="+", metavar="NAME=PATH",
                          help="condition name and codes CSV, repeatable")
    p_report.add_argument("--control", required=True, help="control condition name")
    p_report.add_argument("--include-catch-all", action="store_true",
                          help="keep category 13 in proportions")
    p_report.add_argument("--json", action="store_true")
    p_report.set_defaults(func=cmd_report)

    p_score = sub.add_parser("score", help="validate a marks CSV into a scorecard")
    p_score.add_argument("marks", help="CSV of criterion,mark[,note] rows")
    p_score.add_argument("--system", default="", help="system name for the card")
    p_score.add_argument("--run-id", default="", help="run identifier")
    p_score.add_argument("--out", default=None, help="scorecard JSON output path")
    p_score.set_defaults(func=cmd_score)

    p_compare = sub.add_parser("compare", help="compare scorecards side by side")
    p_compare.add_argument("cards", nargs="+", help="scorecard JSON paths")
    p_compare.add_argument("--csv", default=None, help="write CSV instead of text")
    p_compare.set_defaults(func=cmd_compare)

    p_assets = sub.add_parser("assets", help="list or print bundled assets")
    p_assets.add_argument("name", nargs="?", default=None)
    p_assets.set_defaults(func=cmd_assets)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
