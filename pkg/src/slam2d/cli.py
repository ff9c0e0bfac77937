"""Command line driver.

Subcommands: ``map`` runs a scripted mapping session, ``localize`` runs
particle localization against a saved map, ``eval`` prints a session's
metrics as JSON, ``export`` rewrites a session's map files, ``serve``
starts the teleop bridge.  Exit codes: 0 success, 1 configuration error,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .pipeline import ConfigError, SessionConfig, run_localization, run_mapping
from .session import load_session


class _Parser(argparse.ArgumentParser):
    """Reports usage problems as configuration errors (exit code 1)."""

    def error(self, message: str) -> None:
        raise ConfigError(message)


def _load_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return data


def _print_metrics(metrics) -> None:
    print(json.dumps(metrics.to_dict(), sort_keys=True, indent=2))


def _cmd_map(args: argparse.Namespace) -> int:
    data = _load_config_file(args.config)
    if args.world is not None:
        data["world"] = args.world
    if args.mode is not None:
        data["mode"] = args.mode
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out is not None:
        data["out"] = args.out
    config = SessionConfig.from_dict(data)
    _, _, _, metrics = run_mapping(config)
    _print_metrics(metrics)
    return 0


def _cmd_localize(args: argparse.Namespace) -> int:
    data = _load_config_file(args.config)
    data["mode"] = "localization"
    data["map_dir"] = args.map
    config = SessionConfig.from_dict(data)
    _, _, metrics = run_localization(config)
    _print_metrics(metrics)
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    session = load_session(args.session)
    _print_metrics(session.metrics)
    return 0


def _cmd_export(args: argparse.Namespace) -> int:
    if args.format != "pgm":
        raise ConfigError(f"unsupported export format {args.format!r}")
    from .mapio import save_map

    session = load_session(args.session)
    out = Path(args.out) if args.out else session.path
    pgm, sidecar = save_map(out, session.grid)
    print(pgm)
    print(sidecar)
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .bridge import create_app

    config = SessionConfig(mode=args.mode, seed=args.seed, world=args.world)
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="slam", description="2d SLAM workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p_map = sub.add_parser("map", help="run a scripted mapping session")
    p_map.add_argument("--config", required=True, help="session config JSON")
    p_map.add_argument("--world", help="override world name or path")
    p_map.add_argument("--mode", choices=["fastslam", "graphslam"], help="override mode")
    p_map.add_argument("--seed", type=int, help="override seed")
    p_map.add_argument("--out", help="override session output directory")
    p_map.set_defaults(func=_cmd_map)

    p_loc = sub.add_parser("localize", help="localize against a saved map")
    p_loc.add_argument("--map", required=True, help="directory holding map.pgm/map.yaml")
    p_loc.add_argument("--config", required=True, help="session config JSON")
    p_loc.set_defaults(func=_cmd_localize)

    p_eval = sub.add_parser("eval", help="print a session's metrics as JSON")
    p_eval.add_argument("--session", required=True, help="session directory")
    p_eval.set_defaults(func=_cmd_eval)

    p_exp = sub.add_parser("export", help="rewrite a session's map files")
    p_exp.add_argument("--session", required=True, help="session directory")
    p_exp.add_argument("--format", default="pgm", help="export format (pgm)")
    p_exp.add_argument("--out", help="destination directory (default: session dir)")
    p_exp.set_defaults(func=_cmd_export)

    p_srv = sub.add_parser("serve", help="start the teleop bridge")
    p_srv.add_argument("--port", type=int, default=8000)
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--world", required=True, help="world name or path")
    p_srv.add_argument(
        "--mode", choices=["fastslam", "graphslam"], default="graphslam"
    )
    p_srv.add_argument("--seed", type=int, default=0)
    p_srv.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
