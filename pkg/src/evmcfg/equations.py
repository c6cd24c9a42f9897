"""Flow constraints over per-instruction variables and their least solution.

One variable per instruction pc holds an AbstractState describing every way
execution can arrive at that pc. The variable at pc 0 starts with the empty
stack as its single entry context; all others start at bottom. Instructions
contribute to their successors as follows:

  * JUMP routes each entry member to every destination tracked at the top
    of its stack, opening a fresh entry context there.
  * JUMPI does the same and additionally opens a fresh context at the
    fall-through pc.
  * An instruction whose successor is a JUMPDEST opens a fresh context at
    that successor (a new block begins there).
  * Any other non-halting instruction passes its state forward pointwise,
    keeping entry contexts intact.
  * Halting instructions contribute nothing. An instruction whose successor
    pc falls outside the code also contributes nothing: execution running
    off the end simply stops.

Solving joins contributions until nothing changes. The worklist solver
revisits only pcs whose inputs grew; the naive solver re-evaluates every
constraint in rounds and exists to cross-check the worklist result.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from .blocks import Block, partition_blocks
from .bytecode import Instruction, JUMPDEST_BYTE, JUMPI_BYTE, Program
from .domain import AbstractState, StackState, bottom, idmap, join, leq
from .errors import AnalysisError, InvalidTargetError, UnresolvedJumpError
from .transfer import transfer, update_stack

__all__ = [
    "ConstraintVar",
    "EquationSystem",
    "SolveStats",
    "solve",
    "contributions",
    "verify_fixpoint",
    "initial_state",
    "idmap",
]


@dataclass
class ConstraintVar:
    """Value accumulated for one instruction pc. Only ever grows."""

    pc: int
    value: AbstractState


@dataclass
class SolveStats:
    mode: str
    iterations: int = 0
    pops: int = 0
    # (pc, before, after) for every applied update, when recording is on.
    updates: list[tuple[int, AbstractState, AbstractState]] = field(default_factory=list)
    # Full variable snapshots per naive round, when recording is on.
    snapshots: list[dict[int, AbstractState]] = field(default_factory=list)


@dataclass
class EquationSystem:
    """Solved (or solving) constraint system for one program."""

    program: Program
    blocks: tuple[Block, ...]
    unreached: frozenset[int]
    vars: dict[int, ConstraintVar]
    solve_stats: SolveStats

    def state_at(self, pc: int) -> AbstractState:
        return self.vars[pc].value

    def entry_contexts(self, pc: int) -> tuple[StackState, ...]:
        """Entry contexts reaching pc, in canonical order."""
        return tuple(sorted(self.state_at(pc), key=StackState.sort_key))


def initial_state() -> AbstractState:
    return idmap(StackState.make(0))


def _jump_members(
    instr: Instruction, pi: AbstractState
) -> list[tuple[StackState, StackState, tuple[int, ...]]]:
    """(entry context, member, destinations) triples for a jump instruction."""
    out = []
    for key, members in pi.items():
        for member in members:
            dests = member.top_destinations()
            if dests is None:
                raise UnresolvedJumpError(
                    f"jump at pc 0x{instr.pc:x} has no tracked destination on"
                    f" top of stack (height {member.n}, entry context"
                    f" {key.render()})",
                    pc=instr.pc,
                )
            out.append((key, member, dests))
    return out


def contributions(
    program: Program, instr: Instruction, pi: AbstractState
) -> list[tuple[int, AbstractState]]:
    """(target pc, contributed state) pairs for one instruction.

    Raises UnresolvedJumpError for jumps with untracked targets and
    InvalidTargetError for tracked destinations that are not jump landings.
    """
    spec = instr.spec
    if spec.halts or not pi:
        return []
    jumpdests = program.jumpdests
    out: list[tuple[int, AbstractState]] = []

    if spec.is_jump:
        for _key, member, dests in _jump_members(instr, pi):
            landed = update_stack(instr, member, jumpdests)
            for dest in dests:
                if dest not in jumpdests:
                    raise InvalidTargetError(
                        f"jump at pc 0x{instr.pc:x} targets 0x{dest:x},"
                        f" which is not a jump landing",
                        pc=instr.pc,
                        target=dest,
                    )
                out.append((dest, idmap(landed)))
            if spec.byte_value == JUMPI_BYTE and program.has_instruction(instr.next_pc):
                out.append((instr.next_pc, idmap(landed)))
        return out

    if not program.has_instruction(instr.next_pc):
        return []
    successor = program.instruction_at(instr.next_pc)
    if successor.spec.byte_value == JUMPDEST_BYTE:
        for members in pi.values():
            for member in members:
                out.append((instr.next_pc, idmap(update_stack(instr, member, jumpdests))))
        return out
    out.append((instr.next_pc, transfer(instr, pi, jumpdests)))
    return out


def _solve_worklist(
    program: Program,
    vars: dict[int, ConstraintVar],
    stats: SolveStats,
    record: bool,
    trace: Callable[[str], None] | None,
) -> None:
    pending = deque([0])
    queued = {0}
    while pending:
        pc = pending.popleft()
        queued.discard(pc)
        stats.pops += 1
        instr = program.instruction_at(pc)
        for target, contributed in contributions(program, instr, vars[pc].value):
            var = vars[target]
            joined = join(var.value, contributed)
            if joined != var.value:
                if record:
                    stats.updates.append((target, var.value, joined))
                if trace is not None:
                    trace(
                        f"pop pc=0x{pc:x} -> grow 0x{target:x}:"
                        f" {sum(len(v) for v in var.value.values())} ->"
                        f" {sum(len(v) for v in joined.values())} members"
                    )
                var.value = joined
                if target not in queued:
                    pending.append(target)
                    queued.add(target)
    stats.iterations = stats.pops


def _solve_naive(
    program: Program,
    vars: dict[int, ConstraintVar],
    stats: SolveStats,
    record: bool,
    trace: Callable[[str], None] | None,
) -> None:
    while True:
        stats.iterations += 1
        snapshot = {pc: var.value for pc, var in vars.items()}
        accumulated: dict[int, AbstractState] = {}
        for pc in sorted(snapshot):
            instr = program.instruction_at(pc)
            for target, contributed in contributions(program, instr, snapshot[pc]):
                held = accumulated.get(target, snapshot[target])
                accumulated[target] = join(held, contributed)
        changed = False
        for target, value in accumulated.items():
            if value != vars[target].value:
                if record:
                    stats.updates.append((target, vars[target].value, value))
                vars[target].value = value
                changed = True
        if record:
            stats.snapshots.append({pc: var.value for pc, var in vars.items()})
        if trace is not None:
            trace(f"round {stats.iterations}: changed={changed}")
        if not changed:
            return


def solve(
    program: Program,
    mode: str = "worklist",
    record: bool = False,
    trace: Callable[[str], None] | None = None,
) -> EquationSystem:
    """Compute the least solution of the program's flow constraints.

    mode selects the worklist solver or the naive round-based one; both
    reach the same fixpoint. record keeps per-update history in solve_stats
    for monotonicity checks.
    """
    if not program.instructions:
        raise AnalysisError("program has no instructions")
    if mode not in ("worklist", "naive"):
        raise ValueError(f"unknown solver mode {mode!r}")

    blocks, unreached = partition_blocks(program)
    vars = {
        ins.pc: ConstraintVar(ins.pc, bottom()) for ins in program.instructions
    }
    vars[0].value = initial_state()
    stats = SolveStats(mode=mode)
    if record and mode == "naive":
        stats.snapshots.append({pc: var.value for pc, var in vars.items()})

    if mode == "worklist":
        _solve_worklist(program, vars, stats, record, trace)
    else:
        _solve_naive(program, vars, stats, record, trace)

    return EquationSystem(
        program=program,
        blocks=blocks,
        unreached=unreached,
        vars=vars,
        solve_stats=stats,
    )


def verify_fixpoint(system: EquationSystem) -> list[tuple[int, int]]:
    """(source pc, target pc) pairs whose constraint is not satisfied.

    Empty means the stored values are a genuine fixpoint: re-evaluating
    every contribution and joining changes nothing, and the pc 0 variable
    still covers the initial empty-stack context.
    """
    failures: list[tuple[int, int]] = []
    if not leq(initial_state(), system.vars[0].value):
        failures.append((0, 0))
    for pc, var in system.vars.items():
        instr = system.program.instruction_at(pc)
        for target, contributed in contributions(system.program, instr, var.value):
            if not leq(contributed, system.vars[target].value):
                failures.append((pc, target))
    return failures
