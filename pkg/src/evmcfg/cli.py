"""Command line front end.

Reads bytecode as hex, runs the pipeline (decode, partition, solve, build
graph), and writes the requested artifacts. With --check it also runs the
executable-semantics checkers and reports a verdict.

Exit codes: 0 on success, 1 for analysis errors (bad input, unresolved
jumps) with a JSON report on stderr, 2 when a soundness check does not
pass, with the verdict JSON on stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from .blocks import Block
from .bytecode import decode_bytecode
from .cfg import build_cfg, export_dot, export_json
from .equations import solve
from .errors import AnalysisError
from .oracle import (
    DEFAULT_MAX_STATES,
    DEFAULT_MAX_STEPS,
    check_jumps_to,
    check_walk,
    enumerate_states,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNSOUND = 2


@dataclass(frozen=True)
class RunConfig:
    hex_text: str | None = None
    file: str | None = None
    show_blocks: bool = False
    dot_path: str | None = None
    json_path: str | None = None
    check: bool = False
    max_steps: int = DEFAULT_MAX_STEPS
    max_states: int = DEFAULT_MAX_STATES
    solver: str = "worklist"
    verbose: int = 0

    def wants_something(self) -> bool:
        return bool(self.show_blocks or self.dot_path or self.json_path or self.check)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evmcfg",
        description=(
            "Reconstruct a stack-sensitive control-flow graph from EVM"
            " bytecode and optionally validate it against direct execution."
        ),
    )
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--hex", dest="hex_text", help="bytecode as a hex string")
    source.add_argument("--file", help="path to a file holding the hex string")
    parser.add_argument(
        "--blocks", action="store_true", help="print the basic block listing"
    )
    parser.add_argument("--dot", metavar="PATH", help="write the graph in DOT form")
    parser.add_argument(
        "--json", metavar="PATH", help="write the graph as canonical JSON"
    )
    parser.add_argument(
        "--check",
        action="store_true",
        help="run the executable-semantics soundness checks",
    )
    parser.add_argument(
        "--max-steps",
        type=int,
        default=DEFAULT_MAX_STEPS,
        help="transition budget for the checker (default %(default)s)",
    )
    parser.add_argument(
        "--max-states",
        type=int,
        default=DEFAULT_MAX_STATES,
        help="distinct state budget for the checker (default %(default)s)",
    )
    parser.add_argument(
        "--solver",
        choices=("worklist", "naive"),
        default="worklist",
        help="fixpoint strategy (default %(default)s)",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="log solver progress to stderr",
    )
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        hex_text=args.hex_text,
        file=args.file,
        show_blocks=args.blocks,
        dot_path=args.dot,
        json_path=args.json,
        check=args.check,
        max_steps=args.max_steps,
        max_states=args.max_states,
        solver=args.solver,
        verbose=args.verbose,
    )


def _fail(payload: dict) -> int:
    print(json.dumps({"error": payload}, sort_keys=True), file=sys.stderr)
    return EXIT_ERROR


def _format_block(block: Block) -> str:
    body = "; ".join(ins.render() for ins in block.body)
    return (
        f"block 0x{block.start_pc:02x}..0x{block.end_pc:02x}"
        f"  [{block.terminator.value}]  {body}"
    )


def run(config: RunConfig) -> int:
    """Execute one CLI invocation described by config."""
    if not config.wants_something():
        return _fail(
            {
                "kind": "usage_error",
                "message": "nothing to do: pass --blocks, --dot, --json, or --check",
            }
        )
    try:
        if config.file is not None:
            hex_text = Path(config.file).read_text()
        else:
            hex_text = config.hex_text or ""
    except OSError as err:
        return _fail({"kind": "io_error", "message": str(err)})

    trace = (lambda line: print(line, file=sys.stderr)) if config.verbose else None
    try:
        program = decode_bytecode(hex_text)
        system = solve(program, mode=config.solver, trace=trace)
        cfg = build_cfg(system)
    except AnalysisError as err:
        return _fail(err.report())

    for diagnostic in program.diagnostics:
        print(f"note: {diagnostic}", file=sys.stderr)

    if config.show_blocks:
        for block in system.blocks:
            print(_format_block(block))
        if system.unreached:
            rendered = ", ".join(f"0x{pc:x}" for pc in sorted(system.unreached))
            print(f"unreached: {rendered}")

    try:
        if config.dot_path:
            Path(config.dot_path).write_text(export_dot(cfg, system))
        if config.json_path:
            Path(config.json_path).write_text(export_json(cfg, system))
    except OSError as err:
        return _fail({"kind": "io_error", "message": str(err)})

    if config.check:
        try:
            traces = enumerate_states(
                program, max_steps=config.max_steps, max_states=config.max_states
            )
        except AnalysisError as err:
            return _fail(err.report())
        jumps_verdict = check_jumps_to(program, system, traces)
        walk_verdict = check_walk(program, cfg, system, traces)
        overall = "pass"
        for verdict in (jumps_verdict, walk_verdict):
            if verdict.status == "fail":
                overall = "fail"
            elif verdict.status == "inconclusive" and overall == "pass":
                overall = "inconclusive"
        report = {
            "verdict": overall,
            "vertices": len(cfg.vertices),
            "jumps_to": jumps_verdict.to_json(),
            "walk": walk_verdict.to_json(),
        }
        print(json.dumps(report, sort_keys=True, indent=2))
        if overall != "pass":
            return EXIT_UNSOUND

    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        # argparse exits with 2 on usage errors; 2 is reserved for soundness
        # violations here, so remap.
        return EXIT_ERROR if err.code else EXIT_OK
    return run(_config_from_args(args))


def entry() -> None:
    sys.exit(main())
