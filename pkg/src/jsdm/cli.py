"""Command-line client for the simulator.

Thin by design: every subcommand reads its input files, builds the same
request models the HTTP service accepts, and dispatches either to the
in-process handlers (default) or to a running server (``--server URL``).
Rendering the response is all that happens here.

Exit status: 0 on success, 1 on usage errors, 2 on data errors (bad
scenario, malformed CSV, unreachable server).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

import yaml
from fastapi import HTTPException
from pydantic import ValidationError

from . import service
from .scenario import (
    BUILTIN_SCENARIOS,
    RESULTS_CSV_HEADER,
    ScenarioError,
    builtin_scenario_text,
    format_result_row,
)

USAGE_ERROR = 1
DATA_ERROR = 2


class _DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; usage errors are 1
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


class RemoteClient:
    """HTTP transport to a running service instance."""

    def __init__(self, base_url: str, transport=None):
        import httpx

        self._client = httpx.Client(base_url=base_url, timeout=3600.0, transport=transport)

    def post(self, path: str, payload) -> dict:
        import httpx

        try:
            response = self._client.post(path, json=payload.model_dump(mode="json"))
        except httpx.HTTPError as err:
            raise _DataError(f"server request failed: {err}") from err
        if response.status_code >= 400:
            try:
                detail = response.json().get("detail", response.text)
            except ValueError:
                detail = response.text
            raise _DataError(f"server rejected the request: {detail}")
        return response.json()


def _dispatch(args, path: str, payload, response_model, handler):
    if args.server:
        data = RemoteClient(args.server).post(path, payload)
        return response_model.model_validate(data)
    try:
        return handler(payload)
    except HTTPException as err:
        raise _DataError(str(err.detail)) from err


def _read_scenario_document(target: str) -> dict:
    p = Path(target)
    if p.exists():
        text = p.read_text()
    elif target in BUILTIN_SCENARIOS:
        text = builtin_scenario_text(target)
    else:
        raise _DataError(f"scenario file not found: {target}")
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise _DataError(f"parse error in {target}: {err}") from err
    if not isinstance(raw, dict):
        raise _DataError(f"{target}: scenario document must be a mapping")
    return raw


def _scenario_request(args) -> service.ScenarioRequest:
    raw = _read_scenario_document(args.scenario)
    overrides = service.ConfigOverrides(
        mode=getattr(args, "mode", None),
        algorithm=getattr(args, "algorithm", None),
        trials=args.trials,
        seed=args.seed,
        epsilon=args.epsilon,
        objective=getattr(args, "objective", None),
    )
    try:
        return service.ScenarioRequest(scenario=raw, overrides=overrides)
    except ValidationError as err:
        details = "; ".join(
            ".".join(str(p) for p in item["loc"][1:]) + f": {item['msg']}"
            for item in err.errors()
        )
        raise _DataError(f"{args.scenario}: {details}") from err


def _write_results_csv(responses: Sequence[service.SweepResponse], path: str) -> int:
    rows = [
        (p.grid_db, r.mode, r.algorithm, p.sum_rate_bps_hz, p.sum_rate_stderr, p.users_served_mean)
        for r in responses
        for p in r.points
    ]
    rows.sort(key=lambda row: (row[0], row[1], row[2]))
    lines = [RESULTS_CSV_HEADER] + [format_result_row(row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")
    return len(rows)


def _format_intervals(intervals) -> str:
    if not intervals:
        return "(empty)"
    return " u ".join(f"[{lo:.6g}, {hi:.6g})" for lo, hi in intervals)


def _cmd_validate(args) -> int:
    request = _scenario_request(args)
    echo = _dispatch(args, "/scenario/validate", request, service.ValidateResponse,
                     service.validate_scenario)
    if not args.quiet:
        print(f"scenario: {echo.name or args.scenario}")
        print(f"geometry: M={echo.antennas} D={echo.spacing:g}")
        print(f"groups: {echo.groups} ({echo.users} users)")
        print(f"mode: {echo.mode}  algorithm: {echo.algorithm}")
        print(f"grid: {echo.grid_points} points ({echo.grid_kind})  "
              f"trials: {echo.trials}  seed: {echo.seed}")
    return 0


def _cmd_select(args) -> int:
    request = _scenario_request(args)
    result = _dispatch(args, "/selection", request, service.SelectResponse,
                       service.run_selection)
    if args.quiet:
        print(" ".join(node.id for node in result.selected))
        return 0
    print(f"algorithm: {result.algorithm}")
    for node in result.selected:
        print(
            f"user {node.id}: retained {_format_intervals(node.intervals)} "
            f"(measure {node.measure:.6g})"
        )
    print(f"selected: {len(result.selected)} of {len(request.scenario.users)}")
    print(f"objective: {result.objective_value:.6g}")
    return 0


def _cmd_sweep(args) -> int:
    request = _scenario_request(args)
    result = _dispatch(args, "/sweep", request, service.SweepResponse,
                       service.run_sweep_request)
    rows = _write_results_csv([result], args.output)
    if not args.quiet:
        print(f"{result.mode}/{result.algorithm}: wrote {rows} rows to {args.output}")
    return 0


def _cmd_compare(args) -> int:
    request = _scenario_request(args)
    result = _dispatch(args, "/compare", request, service.CompareResponse,
                       service.run_compare)
    rows = _write_results_csv(result.results, args.output)
    if not args.quiet:
        print(f"compared {len(result.results)} mode/algorithm pairs; "
              f"wrote {rows} rows to {args.output}")
    return 0


def _cmd_import_mpc(args) -> int:
    p = Path(args.csv)
    if not p.exists():
        raise _DataError(f"MPC file not found: {args.csv}")
    request = service.MpcImportRequest(csv_text=p.read_text())
    result = _dispatch(args, "/mpc-import", request, service.MpcImportResponse,
                       service.import_mpcs)
    Path(args.output).write_text(result.fragment_yaml)
    if not args.quiet:
        print(f"imported {result.users} users ({result.mpcs} MPCs) to {args.output}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("jsdm.service:app", host=args.host, port=args.port)
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="jsdm", description=__doc__.splitlines()[0])
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the master seed")
    common.add_argument("--trials", type=int, default=None, help="override the trial count")
    common.add_argument("--epsilon", type=float, default=None,
                        help="override the selection threshold")
    common.add_argument("--quiet", action="store_true", help="suppress informational output")
    common.add_argument("--server", default=None, metavar="URL",
                        help="send the request to a running service instead of in-process")

    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", parents=[common], help="check a scenario file and echo it")
    p.add_argument("scenario")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("select", parents=[common], help="run user selection only")
    p.add_argument("scenario")
    p.add_argument("--algorithm", choices=("none", "greedy1", "greedy2", "es-q1", "es-q2"))
    p.add_argument("--objective", choices=("power", "measure"))
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("sweep", parents=[common], help="evaluate one mode over the grid")
    p.add_argument("scenario")
    p.add_argument("-o", "--output", required=True, help="results CSV path")
    p.add_argument("--mode", choices=("multiplexing", "orthogonalization", "covariance", "zf"))
    p.add_argument("--algorithm", choices=("none", "greedy1", "greedy2", "es-q1", "es-q2"))
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("compare", parents=[common],
                       help="evaluate all mode/algorithm pairs over the grid")
    p.add_argument("scenario")
    p.add_argument("-o", "--output", required=True, help="results CSV path")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("import-mpc", parents=[common],
                       help="convert a multi-path CSV into a scenario users fragment")
    p.add_argument("csv")
    p.add_argument("-o", "--output", required=True, help="fragment YAML path")
    p.set_defaults(func=_cmd_import_mpc)

    p = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits for usage errors and --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (_DataError, ScenarioError) as err:
        print(f"jsdm: {err}", file=sys.stderr)
        return DATA_ERROR
    except OSError as err:
        print(f"jsdm: {err}", file=sys.stderr)
        return DATA_ERROR


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
