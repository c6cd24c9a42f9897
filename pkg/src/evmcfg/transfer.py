"""Per-instruction effect on tracked stack states.

update_stack mirrors what one instruction does to the stack, restricted to
what the analysis models: heights always move by the instruction's arity,
and tracked destination sets are created by PUSHes of jump landing pcs,
copied by DUP, repositioned by SWAP, and dropped when the positions holding
them are consumed. transfer lifts update_stack over every entry context of
an AbstractState, keeping the context keys fixed.
"""

from __future__ import annotations

from .bytecode import Instruction
from .domain import MAX_STACK, AbstractState, StackState
from .errors import StackArityError


def _dup_index(byte_value: int) -> int:
    return byte_value - 0x7F


def _swap_index(byte_value: int) -> int:
    return byte_value - 0x8F


def update_stack(
    instr: Instruction, state: StackState, jumpdests: frozenset[int]
) -> StackState:
    """Apply one instruction to one stack state.

    Raises StackArityError on underflow or overflow, naming the pc.
    """
    spec = instr.spec
    n = state.n
    if n < spec.delta:
        raise StackArityError(
            f"{spec.mnemonic} at pc 0x{instr.pc:x} needs {spec.delta} stack"
            f" items, found {n}",
            pc=instr.pc,
        )
    n_out = n - spec.delta + spec.alpha
    if n_out > MAX_STACK:
        raise StackArityError(
            f"{spec.mnemonic} at pc 0x{instr.pc:x} overflows the stack"
            f" ({n_out} > {MAX_STACK})",
            pc=instr.pc,
        )

    sigma = state.tracked()

    if spec.is_push:
        value = instr.push_value()
        if value in jumpdests:
            sigma[n] = (value,)
        return StackState.make(n_out, sigma)

    if spec.is_dup:
        source = n - _dup_index(spec.byte_value)
        if source in sigma:
            sigma[n] = sigma[source]
        return StackState.make(n_out, sigma)

    if spec.is_swap:
        top = n - 1
        low = n - _swap_index(spec.byte_value) - 1
        top_val = sigma.pop(top, None)
        low_val = sigma.pop(low, None)
        if top_val is not None:
            sigma[low] = top_val
        if low_val is not None:
            sigma[top] = low_val
        return StackState.make(n_out, sigma)

    # Everything else, jumps included, only consumes tracked positions:
    # entries at the delta consumed slots disappear, produced slots are
    # untracked, and entries below the consumed region keep their indices.
    floor = n - spec.delta
    sigma = {pos: dests for pos, dests in sigma.items() if pos < floor}
    return StackState.make(n_out, sigma)


def transfer(
    instr: Instruction, pi: AbstractState, jumpdests: frozenset[int]
) -> AbstractState:
    """Apply update_stack to every member of every entry context."""
    out: AbstractState = {}
    for key, members in pi.items():
        updated = []
        for member in members:
            try:
                updated.append(update_stack(instr, member, jumpdests))
            except StackArityError as err:
                raise StackArityError(
                    f"{err.message} (entry context {key.render()})",
                    pc=err.pc,
                ) from None
        out[key] = frozenset(updated)
    return out
