"""Stack-sensitive control-flow graph built from a solved constraint system.

Each block appears once per entry context that reaches it, so a shared
snippet entered with different return addresses on the stack becomes
several graph vertices, one per caller. Replica ids are dense, start at 1,
and follow the canonical order of the entry contexts (height first, then
the tracked map), which makes ids independent of solver visit order.

Jump edges connect a block ending in JUMP or JUMPI to the replicas of the
destinations tracked on top of the stack. Next edges cover the fall-through
of a JUMPI and falling into a JUMPDEST-led block.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .blocks import Block, Terminator, block_at
from .domain import StackState, img
from .equations import EquationSystem
from .errors import AmbiguousHeightError, CfgBuildError, ReplicaLookupError
from .transfer import update_stack


@dataclass(frozen=True, order=True)
class ReplicaId:
    """One vertex: a block start pc plus a 1-based entry context index."""

    block_start: int
    id: int

    def name(self) -> str:
        return f"B_0x{self.block_start:02x}_{self.id}"


@dataclass(frozen=True)
class Cfg:
    vertices: frozenset[ReplicaId]
    jump_edges: frozenset[tuple[ReplicaId, ReplicaId]]
    next_edges: frozenset[tuple[ReplicaId, ReplicaId]]
    entry: ReplicaId

    def unreachable(self) -> frozenset[ReplicaId]:
        """Vertices no edge path reaches from the entry. Reported, not pruned."""
        succ: dict[ReplicaId, list[ReplicaId]] = {}
        for a, b in self.jump_edges | self.next_edges:
            succ.setdefault(a, []).append(b)
        seen = {self.entry}
        frontier = [self.entry]
        while frontier:
            for nxt in succ.get(frontier.pop(), ()):
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return self.vertices - seen


def get_id(block_start: int, s: StackState, system: EquationSystem) -> ReplicaId:
    """Replica id for one entry context of the block starting at block_start."""
    contexts = system.entry_contexts(block_start)
    try:
        return ReplicaId(block_start, contexts.index(s) + 1)
    except ValueError:
        raise ReplicaLookupError(
            f"context {s.render()} does not enter block 0x{block_start:x}",
            pc=block_start,
        ) from None


def get_stack(block_start: int, replica: int, system: EquationSystem) -> StackState:
    """Inverse of get_id: the entry context behind a replica id."""
    contexts = system.entry_contexts(block_start)
    if not 1 <= replica <= len(contexts):
        raise ReplicaLookupError(
            f"block 0x{block_start:x} has {len(contexts)} replicas,"
            f" id {replica} does not exist",
            pc=block_start,
        )
    return contexts[replica - 1]


def get_size(
    pc: int,
    replica: int,
    system: EquationSystem,
    all_heights: bool = False,
) -> int | frozenset[int]:
    """Stack height at pc when the surrounding block was entered as replica.

    With all_heights the full set of possible heights is returned; otherwise
    a unique height is required and ambiguity raises.
    """
    block = block_at(system.blocks, pc)
    context = get_stack(block.start_pc, replica, system)
    members = img(system.state_at(pc), context)
    if not members:
        raise ReplicaLookupError(
            f"entry context {context.render()} never reaches pc 0x{pc:x}",
            pc=pc,
        )
    heights = frozenset(m.n for m in members)
    if all_heights:
        return heights
    if len(heights) > 1:
        raise AmbiguousHeightError(
            f"pc 0x{pc:x} reached with heights {sorted(heights)} under"
            f" entry context {context.render()}",
            pc=pc,
        )
    return next(iter(heights))


def _block_edges(
    block: Block, system: EquationSystem
) -> tuple[list[tuple[ReplicaId, ReplicaId]], list[tuple[ReplicaId, ReplicaId]]]:
    last = block.last
    exit_state = system.state_at(block.end_pc)
    jumpdests = system.program.jumpdests
    jump_edges = []
    next_edges = []
    for context in sorted(exit_state, key=StackState.sort_key):
        source = get_id(block.start_pc, context, system)
        for member in sorted(exit_state[context], key=StackState.sort_key):
            if block.terminator in (Terminator.JUMP, Terminator.JUMPI):
                dests = member.top_destinations()
                if dests is None:
                    raise CfgBuildError(
                        f"jump at pc 0x{last.pc:x} lost its tracked target"
                        f" under context {context.render()}",
                        pc=last.pc,
                    )
                landed = update_stack(last, member, jumpdests)
                for dest in dests:
                    jump_edges.append((source, get_id(dest, landed, system)))
            if block.terminator in (Terminator.JUMPI, Terminator.FALL_TO_JUMPDEST):
                fallthrough = last.next_pc
                if system.program.has_instruction(fallthrough):
                    landed = update_stack(last, member, jumpdests)
                    next_edges.append((source, get_id(fallthrough, landed, system)))
    return jump_edges, next_edges


def build_cfg(system: EquationSystem) -> Cfg:
    """Expand blocks into per-context replicas and wire the edges."""
    vertices: list[ReplicaId] = []
    jump_edges: list[tuple[ReplicaId, ReplicaId]] = []
    next_edges: list[tuple[ReplicaId, ReplicaId]] = []
    for block in system.blocks:
        contexts = system.entry_contexts(block.start_pc)
        vertices.extend(
            ReplicaId(block.start_pc, i + 1) for i in range(len(contexts))
        )
        if not contexts:
            continue  # never entered, no replicas and no edges
        je, ne = _block_edges(block, system)
        jump_edges.extend(je)
        next_edges.extend(ne)

    entry = get_id(0, StackState.make(0), system)
    return Cfg(
        vertices=frozenset(vertices),
        jump_edges=frozenset(jump_edges),
        next_edges=frozenset(next_edges),
        entry=entry,
    )


def _replica_block(system: EquationSystem, replica: ReplicaId) -> Block:
    return block_at(system.blocks, replica.block_start)


def export_dot(cfg: Cfg, system: EquationSystem) -> str:
    """Graphviz rendering: solid jump edges, dashed next edges."""
    lines = ["digraph cfg {"]
    for replica in sorted(cfg.vertices):
        block = _replica_block(system, replica)
        label_parts = [f"0x{block.start_pc:02x}..0x{block.end_pc:02x}"]
        label_parts += [ins.render() for ins in block.body]
        label = "\\n".join(label_parts)
        lines.append(f'  {replica.name()} [label="{label}"];')
    for a, b in sorted(cfg.jump_edges):
        lines.append(f"  {a.name()} -> {b.name()};")
    for a, b in sorted(cfg.next_edges):
        lines.append(f"  {a.name()} -> {b.name()} [style=dashed];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _stack_to_json(s: StackState) -> dict:
    return {
        "n": s.n,
        "sigma": {str(pos): list(dests) for pos, dests in s.sigma},
    }


def _stack_from_json(obj: dict) -> StackState:
    return StackState.make(
        obj["n"], {int(pos): dests for pos, dests in obj["sigma"].items()}
    )


def _edge_to_json(kind: str, edge: tuple[ReplicaId, ReplicaId]) -> dict:
    a, b = edge
    return {
        "kind": kind,
        "from": {"block": a.block_start, "id": a.id},
        "to": {"block": b.block_start, "id": b.id},
    }


def export_json(cfg: Cfg, system: EquationSystem) -> str:
    """Canonical JSON: sorted keys, fixed ordering, stable across runs."""
    program = system.program
    blocks_json = [
        {
            "start": b.start_pc,
            "end": b.end_pc,
            "terminator": b.terminator.value,
            "instructions": [ins.render() for ins in b.body],
        }
        for b in sorted(system.blocks, key=lambda b: b.start_pc)
    ]
    vertices_json = []
    for replica in sorted(cfg.vertices):
        entry_stack = get_stack(replica.block_start, replica.id, system)
        vertices_json.append(
            {
                "block": replica.block_start,
                "id": replica.id,
                "entry": _stack_to_json(entry_stack),
            }
        )
    edges_json = [
        _edge_to_json("jump", e) for e in sorted(cfg.jump_edges)
    ] + [
        _edge_to_json("next", e) for e in sorted(cfg.next_edges)
    ]
    doc = {
        "format_version": 1,
        "program": {
            "code_len": program.code_len,
            "jumpdests": sorted(program.jumpdests),
            "unreached": sorted(system.unreached),
        },
        "blocks": blocks_json,
        "vertices": vertices_json,
        "edges": edges_json,
        "entry": {"block": cfg.entry.block_start, "id": cfg.entry.id},
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def cfg_from_json(text: str) -> Cfg:
    """Rebuild the graph part of an exported document."""
    doc = json.loads(text)
    if doc.get("format_version") != 1:
        raise ValueError("unsupported format_version")
    vertices = frozenset(
        ReplicaId(v["block"], v["id"]) for v in doc["vertices"]
    )
    jump_edges = set()
    next_edges = set()
    for e in doc["edges"]:
        edge = (
            ReplicaId(e["from"]["block"], e["from"]["id"]),
            ReplicaId(e["to"]["block"], e["to"]["id"]),
        )
        if e["kind"] == "jump":
            jump_edges.add(edge)
        elif e["kind"] == "next":
            next_edges.add(edge)
        else:
            raise ValueError(f"unknown edge kind {e['kind']!r}")
    entry = ReplicaId(doc["entry"]["block"], doc["entry"]["id"])
    return Cfg(
        vertices=vertices,
        jump_edges=frozenset(jump_edges),
        next_edges=frozenset(next_edges),
        entry=entry,
    )
