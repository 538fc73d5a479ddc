"""Command-line entry point.

Subcommands chain the library end to end: ``transcode`` turns sampled
audio into command frames, ``compile`` turns a pattern document into a
timed command stream, ``simulate`` schedules and runs a stream against
the chain simulator, ``report`` emits the evaluation tables, and
``serve`` starts the authoring service.  Data goes to standard output
(or ``-o``), diagnostics to standard error.  Exit codes: 0 success,
1 validation or usage error, 2 I/O or parse error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .errors import (
    EmptyInputError,
    ParseError,
    TruncationError,
    VibraforgeError,
)
from . import pattern, reports, segmentation, simulator
from .scheduler import (
    SimLoopback,
    dispatch,
    read_command_lines,
    schedule_report,
    write_command_lines,
)
from .simulator import BitFlip, Drop, LatencyModel, Topology

ENV_SEED = "VIBRAFORGE_SEED"
DEFAULT_TOPOLOGY_CHAINS = (16,) * 8


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _add_latency_flags(parser):
    parser.add_argument("--ble-one-way-ms", type=float, default=None,
                        help="override the radio one-way latency")
    parser.add_argument("--hop-us", type=float, default=None,
                        help="override the per-unit forwarding time")
    parser.add_argument("--ble-processing-ms", type=float, default=None,
                        help="override the radio processing time")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vibraforge",
                     description="vibrotactile array control plane")
    sub = parser.add_subparsers(dest="subcommand", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("transcode",
                       help="audio CSV to 5 ms command frames")
    p.add_argument("input", help="sample file: rate= header, one per line")
    p.add_argument("-o", "--output", default=None)

    p = sub.add_parser("compile",
                       help="pattern document to a timed command stream")
    p.add_argument("input", help="pattern JSON file")
    p.add_argument("-o", "--output", default=None)

    p = sub.add_parser("simulate",
                       help="run a command stream on the chain simulator")
    p.add_argument("input", help="command stream file")
    p.add_argument("--topology", default=None,
                   help="JSON chain layout (default: 8 chains of 16)")
    p.add_argument("--fault", action="append", default=[],
                   metavar="SPEC",
                   help="drop:CHAIN,HOP or bitflip:CHAIN,HOP,FRAME,BIT; "
                        "repeatable, one-shot each")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-o", "--output", default=None)
    _add_latency_flags(p)

    p = sub.add_parser("report", help="emit an evaluation table")
    p.add_argument("kind",
                   choices=["latency", "voltage", "battery", "bandwidth"])
    p.add_argument("--topology", default=None)
    p.add_argument("-o", "--output", default=None)
    _add_latency_flags(p)

    p = sub.add_parser("serve", help="start the pattern authoring service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")

    return parser


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get(ENV_SEED)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise _UsageError(f"{ENV_SEED} must be an integer, got {env!r}")
    return simulator.DEFAULT_SEED


def _load_setup(args):
    if args.topology:
        topology, latency = simulator.load_topology(args.topology)
    else:
        topology, latency = None, LatencyModel()
    overrides = {}
    if args.ble_one_way_ms is not None:
        overrides["ble_one_way_ms"] = args.ble_one_way_ms
    if args.hop_us is not None:
        overrides["hop_us"] = args.hop_us
    if args.ble_processing_ms is not None:
        overrides["ble_processing_ms"] = args.ble_processing_ms
    if overrides:
        latency = replace(latency, **overrides)
    return topology, latency


def _parse_fault(spec: str):
    kind, _, rest = spec.partition(":")
    fields = rest.split(",") if rest else []
    try:
        if kind == "drop" and len(fields) == 2:
            return Drop(int(fields[0]), int(fields[1]))
        if kind == "bitflip" and len(fields) == 4:
            return BitFlip(*(int(f) for f in fields))
    except ValueError:
        pass
    raise _UsageError(
        f"bad fault {spec!r}: expected drop:CHAIN,HOP or "
        f"bitflip:CHAIN,HOP,FRAME,BIT"
    )


def _emit(text: str, output) -> None:
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_transcode(args) -> int:
    waveform = segmentation.read_waveform_csv(args.input)
    stream = segmentation.segment(waveform)
    _emit(segmentation.format_stream_text(stream), args.output)
    return 0


def cmd_compile(args) -> int:
    with open(args.input, "r", encoding="utf-8") as fh:
        doc = pattern.document_from_json(fh.read())
    commands = pattern.compile(doc)
    if args.output:
        write_command_lines(commands, args.output)
    else:
        write_command_lines(commands, sys.stdout)
    return 0


def cmd_simulate(args) -> int:
    commands = read_command_lines(args.input)
    topology, latency = _load_setup(args)
    if topology is None:
        topology = Topology(DEFAULT_TOPOLOGY_CHAINS)
    sim = simulator.build(topology, latency, seed=_resolve_seed(args))
    for spec in args.fault:
        simulator.inject_fault(sim, _parse_fault(spec))
    result = schedule_report(commands)
    if result.spills:
        print(f"warning: {len(result.spills)} commands spilled to later "
              f"ticks (max backlog {result.max_backlog})", file=sys.stderr)
    dispatch(result.packets, SimLoopback(sim))
    simulator.drain(sim)
    _emit(simulator.format_event_log(sim), args.output)
    return 0


def cmd_report(args) -> int:
    topology, latency = _load_setup(args)
    if args.kind == "latency":
        report = reports.latency_report(topology or Topology((16,)), latency)
    elif args.kind == "voltage":
        report = reports.voltage_sweep_report(topology)
    elif args.kind == "battery":
        report = reports.battery_report()
    else:
        report = reports.bandwidth_report(topology, latency)
    _emit(reports.report_to_text(report), args.output)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "transcode": cmd_transcode,
    "compile": cmd_compile,
    "simulate": cmd_simulate,
    "report": cmd_report,
    "serve": cmd_serve,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.subcommand](args)
    except _UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except (ParseError, EmptyInputError, TruncationError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except VibraforgeError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
