"""Shared fixtures: the three reference programs and strategy builders."""

from __future__ import annotations

import random

import pytest
from hypothesis import strategies as st

from evmcfg import (
    StackState,
    build_cfg,
    decode_bytecode,
    enumerate_states,
    solve,
)

LINEAR_HEX = "6003565b00"
BRANCH_HEX = "6001600657005b00"
SHARED_HEX = "60056010565b600b6010565b00fefefe5b56"

# Handcrafted two-site call program where the shared target is entered with
# two different stack heights: site one pushes only a return address, site
# two pushes one junk byte underneath.
TWO_HEIGHT_HEX = "6005600f565b6000600d600f565b005b56"

DEST_POOL = (0x03, 0x05, 0x0B, 0x10, 0x40, 0x7F)


def ss(n: int, tracked: dict[int, list[int]] | None = None) -> StackState:
    return StackState.make(n, tracked or {})


class Pipeline:
    """Decode/solve/build/enumerate bundle for one program."""

    def __init__(self, hex_text: str):
        self.hex_text = hex_text
        self.program = decode_bytecode(hex_text)
        self.system = solve(self.program)
        self.cfg = build_cfg(self.system)
        self.traces = enumerate_states(self.program)


@pytest.fixture(scope="session")
def linear() -> Pipeline:
    return Pipeline(LINEAR_HEX)


@pytest.fixture(scope="session")
def branch() -> Pipeline:
    return Pipeline(BRANCH_HEX)


@pytest.fixture(scope="session")
def shared() -> Pipeline:
    return Pipeline(SHARED_HEX)


@pytest.fixture(scope="session")
def two_height() -> Pipeline:
    return Pipeline(TWO_HEIGHT_HEX)


def dest_sets() -> st.SearchStrategy:
    return st.frozensets(st.sampled_from(DEST_POOL), min_size=1, max_size=3)


@st.composite
def stack_states(draw, max_height: int = 6) -> StackState:
    n = draw(st.integers(min_value=0, max_value=max_height))
    if n == 0:
        return StackState.make(0)
    positions = draw(
        st.lists(st.integers(0, n - 1), unique=True, min_size=0, max_size=n)
    )
    return StackState.make(n, {pos: draw(dest_sets()) for pos in positions})


@st.composite
def abstract_states(draw) -> dict:
    keys = draw(st.lists(stack_states(), min_size=0, max_size=3, unique=True))
    return {
        key: frozenset(draw(st.lists(stack_states(), min_size=1, max_size=3)))
        for key in keys
    }


def random_stack(rng: random.Random, max_height: int = 5) -> StackState:
    n = rng.randint(0, max_height)
    tracked = {}
    for pos in range(n):
        if rng.random() < 0.4:
            tracked[pos] = rng.sample(DEST_POOL, rng.randint(1, 2))
    return StackState.make(n, tracked)


def random_abstract(rng: random.Random) -> dict:
    out = {}
    for _ in range(rng.randint(0, 3)):
        key = random_stack(rng)
        out[key] = frozenset(random_stack(rng) for _ in range(rng.randint(1, 3)))
    return out
