"""Command-line entry points: ``remem-bench`` and ``remem-server``."""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import threading
from pathlib import Path

from . import bench, plotting
from .config import (
    OptionSpec,
    merge_config,
    parse_backends,
    parse_byte_sizes,
    parse_sizes,
    read_config_file,
)
from .errors import RememError
from .pattern import generate_pattern
from .server import WindowServer
from .vfs import ROOT_ENV_VAR, inspect_root
from .wire import DEFAULT_PORT

logger = logging.getLogger(__name__)

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

GLOBAL_SPECS = [
    OptionSpec("config", str, None, help="path to a key=value config file"),
    OptionSpec(
        "deterministic",
        str,
        False,
        is_flag=True,
        help="suppress timestamps in rendered figures",
    ),
    OptionSpec(
        "log_level",
        str,
        "warn",
        help="one of error, warn, info, debug",
    ),
]

RUN_SPECS = [
    OptionSpec("backends", parse_backends, parse_backends("local,vfs,remote"),
               help="comma list of local,vfs,remote"),
    OptionSpec("sizes", parse_sizes, list(bench.DEFAULT_SIZES_MB),
               help="MB sweep: START..STOP:STEP or comma list"),
    OptionSpec("reps", int, bench.DEFAULT_REPETITIONS,
               help="measurements per size"),
    OptionSpec("seed", int, bench.DEFAULT_SEED, help="payload pattern seed"),
    OptionSpec("scale", int, 1, help="divide sizes by this for desk-scale runs"),
    OptionSpec("vfs_root", str, None, env_var=ROOT_ENV_VAR,
               help="store directory (a temp dir when unset)"),
    OptionSpec("endpoint", str, None, env_var="REMEM_ENDPOINT",
               help="window server host:port (spawns one on loopback when unset)"),
    OptionSpec("cache_fraction", float, 0.2,
               help="fraction of pages the vfs backend caches"),
    OptionSpec("cold", str, False, is_flag=True,
               help="drop caches between repetitions where possible"),
    OptionSpec("out", str, "results", help="output directory"),
]

PLOT_SPECS = [
    OptionSpec("in_path", str, "results/summary.csv", help="summary CSV to plot"),
    OptionSpec("out", str, "plot.svg", help="output SVG path"),
    OptionSpec("metric", str, "elapsed", help="elapsed or throughput"),
]

VERIFY_SPECS = [
    OptionSpec("in_path", str, "results/raw.csv", help="raw CSV to verify"),
    OptionSpec("seed", int, None,
               help="pattern seed (falls back to run.json beside the CSV)"),
]

INSPECT_SPECS = [
    OptionSpec("root", str, None, env_var=ROOT_ENV_VAR, help="store directory"),
    OptionSpec("json", str, False, is_flag=True, help="machine-readable output"),
]

SERVER_SPECS = [
    OptionSpec("bind", str, f"127.0.0.1:{DEFAULT_PORT}", help="host:port to bind"),
    OptionSpec("expose", parse_byte_sizes, None,
               help="comma list of window sizes in bytes (suffixes KB/MB/GB/KiB/MiB/GiB)"),
    OptionSpec("fill", int, None,
               help="fill exposed windows with the deterministic pattern of this seed"),
]


def _add_specs(parser: argparse.ArgumentParser, specs: list[OptionSpec]) -> None:
    for spec in specs:
        flag = spec.flag if spec.name != "in_path" else "--in"
        help_text = f"{spec.help} (default: {_default_str(spec.default)})"
        if spec.is_flag:
            parser.add_argument(
                flag,
                dest=spec.name,
                action="store_true",
                default=argparse.SUPPRESS,
                help=help_text,
            )
        else:
            parser.add_argument(
                flag,
                dest=spec.name,
                type=spec.parse,
                default=argparse.SUPPRESS,
                help=help_text,
            )


def _default_str(default) -> str:
    if isinstance(default, list):
        if default and hasattr(default[0], "value"):
            return ",".join(item.value for item in default)
        if len(default) > 4:
            return f"{default[0]}..{default[-1]}"
        return ",".join(str(item) for item in default)
    return str(default)


def _resolve(args: argparse.Namespace, specs: list[OptionSpec]) -> dict:
    flag_values = {
        spec.name: getattr(args, spec.name)
        for spec in specs + GLOBAL_SPECS
        if hasattr(args, spec.name)
    }
    all_specs = specs + GLOBAL_SPECS
    config_path = flag_values.get("config")
    file_values = read_config_file(config_path) if config_path else {}
    return merge_config(all_specs, flag_values, file_values=file_values)


def _setup_logging(level_name: str) -> None:
    level = _LOG_LEVELS.get(level_name)
    if level is None:
        raise RememError(f"unknown log level {level_name!r}")
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s", force=True
    )


# -- remem-bench ----------------------------------------------------------------


def _cmd_run(options: dict) -> int:
    cfg = bench.BenchmarkConfig(
        backends=options["backends"],
        sizes_mb=options["sizes"],
        repetitions=options["reps"],
        pattern_seed=options["seed"],
        scale=options["scale"],
        vfs_root=options["vfs_root"],
        endpoint=options["endpoint"],
        cache_fraction=options["cache_fraction"],
        cold=options["cold"],
    )
    suite = bench.run_suite(cfg)
    problems = bench.verify_records(suite.records, cfg.pattern_seed)
    out_dir = Path(options["out"])
    raw, summary = bench.emit_csv(suite.summaries, suite.records, out_dir)
    bench.write_run_metadata(cfg, out_dir)
    rows = bench.read_summary_csv(summary)
    plot = plotting.plot_summary(
        rows, out_dir / "plot.svg", deterministic=options["deterministic"]
    )
    print(f"wrote {raw}, {summary}, {plot}")
    for stat in suite.summaries:
        print(
            f"  {stat.backend.value:>6} {stat.size_bytes:>12} B  "
            f"mean {stat.mean_ns / 1e6:10.3f} ms  "
            f"[{stat.min_ns / 1e6:.3f}, {stat.max_ns / 1e6:.3f}]  "
            f"{stat.mean_mb_s:10.1f} MB/s"
        )
    if problems:
        for problem in problems:
            print(f"INTEGRITY: {problem}", file=sys.stderr)
        return 1
    print(f"integrity ok: {len(suite.records)} records")
    return 0


def _cmd_plot(options: dict) -> int:
    rows = bench.read_summary_csv(options["in_path"])
    out = plotting.plot_summary(
        rows,
        options["out"],
        metric=options["metric"],
        deterministic=options["deterministic"],
    )
    print(f"wrote {out}")
    return 0


def _cmd_verify(options: dict) -> int:
    raw_path = Path(options["in_path"])
    records = bench.read_raw_csv(raw_path)
    seed = options["seed"]
    if seed is None:
        sidecar = raw_path.parent / "run.json"
        if sidecar.exists():
            seed = json.loads(sidecar.read_text())["pattern_seed"]
            logger.info("using pattern seed %d from %s", seed, sidecar)
    problems = bench.verify_records(records, seed)
    for problem in problems:
        print(f"FAIL: {problem}", file=sys.stderr)
    if problems:
        return 1
    print(f"ok: {len(records)} records verified")
    return 0


def _cmd_vfs_inspect(options: dict) -> int:
    root = options["root"]
    if root is None:
        print(f"error: --root required (or set {ROOT_ENV_VAR})", file=sys.stderr)
        return 2
    entries = inspect_root(root)
    failed = any(entry.error for entry in entries)
    if options["json"]:
        payload = {
            "root": str(root),
            "allocations": [
                {
                    "id": e.alloc_id,
                    "size_bytes": e.size_bytes,
                    "page_size": e.page_size,
                    "page_count": e.page_count,
                    "on_disk_bytes": e.on_disk_bytes,
                    "created_at": e.created_at,
                    "error": e.error,
                }
                for e in entries
            ],
        }
        print(json.dumps(payload, indent=2))
    else:
        if not entries:
            print(f"{root}: empty store")
        for e in entries:
            if e.error:
                print(f"alloc-{e.alloc_id}: ERROR {e.error}")
            else:
                print(
                    f"alloc-{e.alloc_id}: {e.size_bytes} bytes, "
                    f"{e.page_count} pages of {e.page_size}, "
                    f"{e.on_disk_bytes} bytes on disk, created {e.created_at}"
                )
    return 1 if failed else 0


def bench_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="remem-bench",
        description="benchmark and inspect the remem memory backends",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, specs, fn in (
        ("run", RUN_SPECS, _cmd_run),
        ("plot", PLOT_SPECS, _cmd_plot),
        ("verify", VERIFY_SPECS, _cmd_verify),
        ("vfs-inspect", INSPECT_SPECS, _cmd_vfs_inspect),
    ):
        p = sub.add_parser(name)
        _add_specs(p, specs)
        _add_specs(p, GLOBAL_SPECS)
        p.set_defaults(_specs=specs, _fn=fn)
    args = parser.parse_args(argv)
    try:
        options = _resolve(args, args._specs)
        _setup_logging(options["log_level"])
        return args._fn(options)
    except RememError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


# -- remem-server ----------------------------------------------------------------


def server_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="remem-server",
        description="expose byte windows for one-sided remote reads",
    )
    _add_specs(parser, SERVER_SPECS)
    parser.add_argument(
        "--expose-vfs",
        dest="expose_vfs",
        action="append",
        default=[],
        metavar="ALLOC_DIR",
        help="serve a store allocation's bytes (path to an alloc-<id> directory); repeatable",
    )
    _add_specs(parser, GLOBAL_SPECS)
    args = parser.parse_args(argv)
    try:
        options = _resolve(args, SERVER_SPECS)
        _setup_logging(options["log_level"])
        server = WindowServer(options["bind"])
        for size in options["expose"] or []:
            fill = options["fill"]
            data = generate_pattern(fill, size) if fill is not None else bytes(size)
            server.add_window(data)
        for alloc_dir in args.expose_vfs:
            server.add_vfs_window(alloc_dir)
        server.start()
    except RememError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1
    host, port = server.endpoint
    print(f"listening on {host}:{port}", flush=True)
    for window_id, size in sorted(server.windows().items()):
        print(f"window {window_id}: {size} bytes", flush=True)
    stop = threading.Event()
    signal.signal(signal.SIGINT, lambda *_: stop.set())
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    stop.wait()
    print("shutting down", flush=True)
    server.stop()
    return 0


def main(argv: list[str] | None = None) -> int:
    """Multiplexer for ``python -m remem {bench,server} ...``."""
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print("usage: python -m remem {bench,server} ...", file=sys.stderr)
        return 0 if argv else 2
    tool, rest = argv[0], argv[1:]
    if tool == "bench":
        return bench_main(rest)
    if tool == "server":
        return server_main(rest)
    print(f"unknown tool {tool!r} (choose bench or server)", file=sys.stderr)
    return 2
