"""Stack abstraction and its lattice.

A StackState records a stack height together with a partial map from stack
positions to sets of possible jump destinations. Position 0 is the bottom of
the stack; with height n the top of the stack is position n - 1. Positions
absent from the map hold values the analysis does not track.

An AbstractState is a partial map from entry StackStates (the stack shapes a
block can be entered with) to the sets of StackStates those entries have
evolved into at the current instruction. Joining two AbstractStates unions
their domains and, for shared keys, unions the image sets pointwise. The
empty map is the least element. A distinguished TOP marker exists so callers
can represent "every state possible", but the solver never constructs it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

MAX_STACK = 1024


@dataclass(frozen=True)
class StackState:
    """Stack height plus tracked destination sets, in canonical sorted form."""

    n: int
    sigma: tuple[tuple[int, tuple[int, ...]], ...] = ()

    def __post_init__(self):
        if not 0 <= self.n <= MAX_STACK:
            raise ValueError(f"stack height {self.n} out of range")
        last = -1
        for pos, dests in self.sigma:
            if not 0 <= pos < self.n:
                raise ValueError(f"tracked position {pos} outside stack of height {self.n}")
            if pos <= last:
                raise ValueError("tracked positions must be strictly increasing")
            if not dests:
                raise ValueError(f"empty destination set at position {pos}")
            if tuple(sorted(set(dests))) != dests:
                raise ValueError(f"destination set at position {pos} not canonical")
            last = pos

    @staticmethod
    def make(n: int, tracked: Mapping[int, Iterable[int]] | None = None) -> "StackState":
        items = []
        for pos in sorted(tracked or {}):
            dests = tuple(sorted(set(tracked[pos])))
            if dests:
                items.append((pos, dests))
        return StackState(n, tuple(items))

    def tracked(self) -> dict[int, tuple[int, ...]]:
        return dict(self.sigma)

    def get(self, pos: int) -> tuple[int, ...] | None:
        for p, dests in self.sigma:
            if p == pos:
                return dests
        return None

    def top_destinations(self) -> tuple[int, ...] | None:
        """Destination set at the top of the stack, if tracked."""
        return self.get(self.n - 1) if self.n > 0 else None

    def sort_key(self):
        return (self.n, self.sigma)

    def render(self) -> str:
        inner = ", ".join(
            f"s{pos}:{{{', '.join(f'0x{d:x}' for d in dests)}}}"
            for pos, dests in self.sigma
        )
        return f"<{self.n}, {{{inner}}}>"

    def __str__(self) -> str:
        return self.render()


# Partial map from entry stack shapes to the states they have become.
AbstractState = dict[StackState, frozenset[StackState]]


class _TopMarker:
    """Singleton marker for the greatest element. Never built by the solver."""

    def __repr__(self) -> str:
        return "TOP"


TOP = _TopMarker()


def bottom() -> AbstractState:
    return {}


def is_top(value) -> bool:
    return value is TOP


def img(pi: AbstractState | _TopMarker, s: StackState) -> frozenset[StackState]:
    """Image of one entry context; empty when the context is absent."""
    if is_top(pi):
        raise ValueError("TOP has no finite image")
    return pi.get(s, frozenset())


def join(p1, p2):
    if is_top(p1) or is_top(p2):
        return TOP
    out: AbstractState = dict(p1)
    for key, states in p2.items():
        existing = out.get(key)
        out[key] = states if existing is None else existing | states
    return out


def leq(p1, p2) -> bool:
    if is_top(p2):
        return True
    if is_top(p1):
        return False
    for key, states in p1.items():
        if not states <= p2.get(key, frozenset()):
            return False
    return True


def idmap(s: StackState) -> AbstractState:
    """Abstract state opening a fresh entry context for s."""
    return {s: frozenset((s,))}


def render_abstract(pi: AbstractState | _TopMarker) -> str:
    if is_top(pi):
        return "TOP"
    parts = []
    for key in sorted(pi, key=StackState.sort_key):
        members = ", ".join(
            m.render() for m in sorted(pi[key], key=StackState.sort_key)
        )
        parts.append(f"{key.render()} -> {{{members}}}")
    return "{" + "; ".join(parts) + "}"
