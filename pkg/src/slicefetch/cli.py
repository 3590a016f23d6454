"""Thin-client CLI: builds service requests and dispatches them either to the
in-process handlers (default) or to a remote service via --server.

Exit codes: 0 success, 1 simulation/transport fault, 2 config error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional

from .config import ConfigError
from .isa import SimulationFault
from .report import canonical_json, pie_table_csv
from .service import handlers
from .service.schemas import (CompareRequest, DumpProgramRequest,
                              DumpSlicesRequest, RunRequest)


def _read_config(path: Optional[str]) -> str:
    if not path:
        return ""
    return Path(path).read_text()


def _post(server: str, route: str, payload: dict) -> dict:
    import httpx

    resp = httpx.post(f"{server.rstrip('/')}{route}", json=payload, timeout=600.0)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except Exception:
            detail = resp.text
        raise RuntimeError(f"server returned {resp.status_code}: {detail}")
    return resp.json()


def _write_or_print(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    req = RunRequest(
        config=_read_config(args.config),
        overrides=args.set or [],
        seed=args.seed,
        prefetcher=args.prefetcher,
        workload=args.workload,
    )
    if args.server:
        report = _post(args.server, "/run", req.model_dump())["report"]
    else:
        report = handlers.handle_run(req).report
    _write_or_print(canonical_json(report), args.out)
    if args.pie_csv:
        Path(args.pie_csv).write_text(pie_table_csv(report))
    return 0


def cmd_compare(args) -> int:
    prefetchers = [p.strip() for p in args.prefetchers.split(",") if p.strip()]
    req = CompareRequest(
        config=_read_config(args.config),
        overrides=args.set or [],
        prefetchers=prefetchers,
        seed=args.seed,
        workload=args.workload,
    )
    if args.server:
        payload = _post(args.server, "/compare", req.model_dump())
        reports, ratios = payload["reports"], payload["cycle_ratio_vs_first"]
    else:
        resp = handlers.handle_compare(req)
        reports, ratios = resp.reports, resp.cycle_ratio_vs_first
    summary = {
        "schema_version": 1,
        "cycle_ratio_vs_first": ratios,
        "summary": {
            name: {
                "measured_cycles": rep["measured_cycles"],
                "demand_mpki": rep["demand_mpki"],
                "coverage": rep["prefetch"]["coverage"],
                "accuracy": rep["prefetch"]["accuracy"],
            }
            for name, rep in reports.items()
        },
        "reports": reports,
    }
    _write_or_print(canonical_json(summary), args.out)
    return 0


def cmd_dump_slices(args) -> int:
    req = DumpSlicesRequest(
        config=_read_config(args.config),
        overrides=args.set or [],
        seed=args.seed,
        workload=args.workload,
    )
    if args.server:
        payload = _post(args.server, "/dump-slices", req.model_dump())
        text = payload["text"]
    else:
        text = handlers.handle_dump_slices(req).text
    _write_or_print(text, args.out)
    return 0


def cmd_dump_program(args) -> int:
    req = DumpProgramRequest(
        config=_read_config(args.config),
        overrides=args.set or [],
        seed=args.seed,
        workload=args.workload,
        include_image=args.with_image,
    )
    if args.server:
        text = _post(args.server, "/dump-program", req.model_dump())["text"]
    else:
        text = handlers.handle_dump_program(req).text
    _write_or_print(text, args.out)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="config file (flat key=value text)")
    p.add_argument("--seed", type=int, default=None, help="run seed override")
    p.add_argument("--workload", help="workload kind override")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="config override, repeatable")
    p.add_argument("--out", help="write output to this file instead of stdout")
    p.add_argument("--server", help="remote service URL (default: run in-process)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slicefetch",
        description="Micro-op simulator with a slice-learning forecast prefetcher",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment, emit a JSON report")
    _add_common(p_run)
    p_run.add_argument("--prefetcher", help="none | nextline | stride | semantic")
    p_run.add_argument("--pie-csv", help="also write the per-PIE table as CSV")
    p_run.set_defaults(fn=cmd_run)

    p_cmp = sub.add_parser("compare", help="run the same workload under several prefetchers")
    _add_common(p_cmp)
    p_cmp.add_argument("--prefetchers", default="semantic,none",
                       help="comma-separated list (default: semantic,none)")
    p_cmp.set_defaults(fn=cmd_compare)

    p_dump = sub.add_parser("dump-slices", help="run and print armed slices as ISA text")
    _add_common(p_dump)
    p_dump.set_defaults(fn=cmd_dump_slices)

    p_prog = sub.add_parser("dump-program",
                            help="emit the generated workload as ISA text")
    _add_common(p_prog)
    p_prog.add_argument("--with-image", action="store_true",
                        help="append the initial memory image")
    p_prog.set_defaults(fn=cmd_dump_program)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8734)
    p_serve.set_defaults(fn=cmd_serve)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SimulationFault, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
