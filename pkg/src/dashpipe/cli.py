"""Command line entry point: one binary, five subcommands.

    dashpipe dashcam --port P --catalog DIR     emulated dash-cam file service
    dashpipe master  --config FILE              run a master node
    dashpipe worker  --config FILE              run a worker node
    dashpipe gen     --spec FILE                generate a synthetic catalog
    dashpipe report  CSV [CSV ...]              aggregate metrics reports

Exit code 0 on success; errors print a one-line reason and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import DashPipeError


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except DashPipeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dashpipe", description=__doc__)
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    dashcam = commands.add_parser("dashcam", help="run the emulated dash-cam service")
    dashcam.add_argument("--port", type=int, default=8100)
    dashcam.add_argument("--host", default="127.0.0.1")
    dashcam.add_argument("--catalog", required=True, help="directory of manifest JSON files")
    dashcam.set_defaults(handler=cmd_dashcam)

    master = commands.add_parser("master", help="run a master node")
    master.add_argument("--config", required=True)
    master.add_argument(
        "--override", action="append", default=[], metavar="KEY=VALUE",
        help="override a config value by dotted path, e.g. master.pair_count=5",
    )
    master.set_defaults(handler=cmd_master)

    worker = commands.add_parser("worker", help="run a worker node")
    worker.add_argument("--config", required=True)
    worker.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    worker.set_defaults(handler=cmd_worker)

    gen = commands.add_parser("gen", help="generate a synthetic workload catalog")
    gen.add_argument("--spec", required=True, help="TOML file with a [workloads] table")
    gen.add_argument("--out", default=None, help="output directory (overrides spec)")
    gen.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    gen.set_defaults(handler=cmd_gen)

    report = commands.add_parser("report", help="aggregate one or more metrics CSVs")
    report.add_argument("files", nargs="+", help="metrics CSV files")
    report.add_argument(
        "--granularity-ms", type=int, default=None,
        help="video length used for the near-real-time check",
    )
    report.add_argument("--json", dest="json_out", default=None, help="also write JSON here")
    report.set_defaults(handler=cmd_report)

    return parser


def cmd_dashcam(args) -> int:
    from .dashcam import DashCamCatalog, DashCamService

    catalog = DashCamCatalog.from_dir(args.catalog)
    service = DashCamService(catalog, host=args.host, port=args.port)
    print(f"dash-cam service: {service.url} ({len(catalog.entries)} videos)")
    try:
        service.serve_forever()
    except KeyboardInterrupt:
        service.stop()
    return 0


def cmd_master(args) -> int:
    from .config import load_master_settings
    from .master import run_master

    return run_master(load_master_settings(args.config, args.override))


def cmd_worker(args) -> int:
    from .config import load_worker_settings
    from .worker import run_worker

    return run_worker(load_worker_settings(args.config, args.override))


def cmd_gen(args) -> int:
    from .config import load_workload_spec
    from .workloads import generate_catalog

    spec = load_workload_spec(args.spec, args.override)
    written = generate_catalog(spec, out_dir=args.out)
    print(f"wrote {len(written)} manifests to {written[0].parent}")
    return 0


def cmd_report(args) -> int:
    from .report import aggregate_files, render_table

    summary = aggregate_files(args.files, granularity_ms=args.granularity_ms)
    print(render_table(summary))
    if args.json_out:
        with open(args.json_out, "w") as handle:
            json.dump(summary, handle, indent=2)
            handle.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
