"""Tick-accurate and sequential simulation of a bound pipeline.

Tick-accurate timing: PHV ``i`` enters stage 0 at tick ``i``; within a tick
stages run last-first so each PHV sees the state left by every earlier PHV
at that stage.  PHV ``i`` leaves after stage ``depth - 1`` at tick
``i + depth - 1``.

Each output-trace entry carries the state every stateful ALU held right
after PHV ``i`` passed through it.  This is what the state looks like when
PHV ``i`` exits a pipeline that processes one packet at a time, so it does
not depend on the scheduling mode.  Input-trace entries carry the whole
pipeline state at the entry tick, which does.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from typing import Iterator, Mapping, Sequence

import numpy as np

from rmtsim import kernel
from rmtsim.errors import PhvLengthMismatch, StateCoverageError, UnboundPipeline
from rmtsim.lowering import CompiledPipeline, lower
from rmtsim.pipeline import Pipeline, StateLayout

StateSnapshot = Mapping[str, Sequence[int]]


class Mode(str, enum.Enum):
    TICK_ACCURATE = "tick"
    SEQUENTIAL = "seq"


class TraceRole(str, enum.Enum):
    INPUT = "input"
    OUTPUT = "output"


@dataclass(frozen=True)
class TraceEntry:
    tick: int
    phv: tuple
    state: dict


def format_entry(entry: TraceEntry) -> str:
    phv = ",".join(str(v) for v in entry.phv)
    state = ",".join(
        f"{path}:[{','.join(str(v) for v in values)}]" for path, values in entry.state.items()
    )
    return f"tick={entry.tick} phv=[{phv}] state={{{state}}}"


class Trace:
    """A sequence of (tick, PHV, state snapshot) records backed by arrays."""

    def __init__(self, role: TraceRole, ticks, phvs, states, layout: StateLayout):
        self.role = TraceRole(role)
        self.ticks = np.asarray(ticks, dtype=np.int64)
        self.phvs = np.asarray(phvs, dtype=np.int64)
        self.states = np.asarray(states, dtype=np.int64)
        self.layout = layout

    def __len__(self) -> int:
        return len(self.ticks)

    def __getitem__(self, i: int) -> TraceEntry:
        return TraceEntry(int(self.ticks[i]), tuple(self.phvs[i].tolist()), self.state_at(i))

    def __iter__(self) -> Iterator[TraceEntry]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            self.role == other.role
            and self.layout == other.layout
            and np.array_equal(self.ticks, other.ticks)
            and np.array_equal(self.phvs, other.phvs)
            and np.array_equal(self.states, other.states)
        )

    @property
    def entries(self) -> list[TraceEntry]:
        return list(self)

    def state_at(self, i: int) -> dict:
        row = self.states[i].tolist()
        return {path: tuple(row[off: off + w]) for path, off, w in self.layout.coordinates}

    def same_data(self, other: "Trace") -> bool:
        """PHVs and snapshots equal, ticks ignored."""
        return np.array_equal(self.phvs, other.phvs) and np.array_equal(self.states, other.states)

    def to_text(self) -> str:
        return "".join(format_entry(e) + "\n" for e in self)

    def to_records(self) -> list[dict]:
        return [
            {"tick": e.tick, "phv": list(e.phv), "state": {k: list(v) for k, v in e.state.items()}}
            for e in self
        ]


def snapshot_to_array(layout: StateLayout, snapshot: StateSnapshot) -> np.ndarray:
    expected = set(layout.paths())
    given = set(snapshot)
    if given != expected:
        missing = sorted(expected - given)
        extra = sorted(given - expected)
        raise StateCoverageError(
            f"initial state must cover exactly the stateful ALUs; missing {missing}, unexpected {extra}"
        )
    flat = np.zeros(layout.size, dtype=np.int64)
    for path, offset, width in layout.coordinates:
        values = list(snapshot[path])
        if len(values) != width:
            raise StateCoverageError(f"{path} has {width} state variables, got {len(values)}")
        flat[offset: offset + width] = values
    return flat


def array_to_snapshot(layout: StateLayout, flat) -> dict:
    flat = [int(v) for v in flat]
    return {path: tuple(flat[off: off + w]) for path, off, w in layout.coordinates}


def _phv_array(pipeline: Pipeline, phvs) -> np.ndarray:
    try:
        arr = np.asarray(phvs, dtype=np.int64)
    except ValueError as exc:  # ragged input
        raise PhvLengthMismatch(f"every PHV must have {pipeline.phv_length} containers") from exc
    if arr.size == 0:
        return np.zeros((0, pipeline.phv_length), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != pipeline.phv_length:
        raise PhvLengthMismatch(
            f"every PHV must have {pipeline.phv_length} containers, got shape {arr.shape}"
        )
    return arr


def simulate(
    pipeline: Pipeline,
    phvs,
    initial_state: StateSnapshot | None = None,
    mode: Mode = Mode.TICK_ACCURATE,
    backend: str | None = None,
    compiled: CompiledPipeline | None = None,
) -> tuple[Trace, Trace]:
    """Run ``phvs`` through ``pipeline``; returns (input trace, output trace)."""
    if not pipeline.bound:
        raise UnboundPipeline()
    mode = Mode(mode)
    layout = pipeline.state_layout()
    arr = _phv_array(pipeline, phvs)
    state = snapshot_to_array(layout, pipeline.zero_state() if initial_state is None else initial_state)
    prog = compiled if compiled is not None else lower(pipeline)
    kmode = kernel.MODE_TICK if mode is Mode.TICK_ACCURATE else kernel.MODE_SEQUENTIAL
    out, entry, exit_ = kernel.run(prog, arr, state, kmode, backend)

    n, depth = len(arr), pipeline.depth
    stride = 1 if mode is Mode.TICK_ACCURATE else depth
    in_ticks = np.arange(n, dtype=np.int64) * stride
    out_ticks = in_ticks + depth - 1
    return (
        Trace(TraceRole.INPUT, in_ticks, arr, entry, layout),
        Trace(TraceRole.OUTPUT, out_ticks, out, exit_, layout),
    )


def final_state(output: Trace, initial_state: StateSnapshot) -> dict:
    """Pipeline state after the last PHV has drained."""
    if len(output) == 0:
        return {k: tuple(v) for k, v in initial_state.items()}
    return output.state_at(len(output) - 1)


def traces_to_text(input_trace: Trace, output_trace: Trace) -> str:
    return "# input trace\n" + input_trace.to_text() + "# output trace\n" + output_trace.to_text()


def traces_to_json(input_trace: Trace, output_trace: Trace) -> str:
    return json.dumps(
        {"input": input_trace.to_records(), "output": output_trace.to_records()},
        separators=(",", ":"),
    )


# ---------------------------------------------------------------------------
# Single-tick stepping


@dataclass(frozen=True)
class InFlightPhv:
    index: int
    phv: tuple
    trail: dict  # state each stateful ALU held right after this PHV passed it


@dataclass(frozen=True)
class InFlight:
    """Pipeline occupancy between ticks.

    ``stages[s]`` is the PHV that stage ``s`` executes on the next tick.
    """

    tick: int
    stages: tuple
    pending: tuple
    state: dict
    next_index: int = 0

    @property
    def empty(self) -> bool:
        return not self.pending and all(slot is None for slot in self.stages)


def start(pipeline: Pipeline, initial_state: StateSnapshot | None = None) -> InFlight:
    state = initial_state if initial_state is not None else pipeline.zero_state()
    snapshot_to_array(pipeline.state_layout(), state)
    return InFlight(0, (None,) * pipeline.depth, (), {k: tuple(v) for k, v in state.items()})


def inject(inflight: InFlight, phv: Sequence[int]) -> InFlight:
    item = InFlightPhv(inflight.next_index, tuple(int(v) for v in phv), {})
    return replace(inflight, pending=inflight.pending + (item,), next_index=inflight.next_index + 1)


def step(
    pipeline: Pipeline,
    inflight: InFlight,
    compiled: CompiledPipeline | None = None,
    backend: str | None = None,
) -> tuple[InFlight, TraceEntry | None]:
    """Advance one tick.  Returns the new occupancy and the exiting PHV, if any."""
    if not pipeline.bound:
        raise UnboundPipeline()
    prog = compiled if compiled is not None else lower(pipeline)
    layout = pipeline.state_layout()
    state = snapshot_to_array(layout, inflight.state)
    slots = list(inflight.stages)
    pending = list(inflight.pending)
    if pending:
        head = pending.pop(0)
        if len(head.phv) != pipeline.phv_length:
            raise PhvLengthMismatch(f"PHV {head.index} has {len(head.phv)} containers")
        slots[0] = head
    exited = None
    new_slots: list = [None] * pipeline.depth
    for s in range(pipeline.depth - 1, -1, -1):
        item = slots[s]
        if item is None:
            continue
        out = kernel.run_stage(prog, s, np.array(item.phv, dtype=np.int64), state, backend)
        lo, hi = layout.stage_ranges[s]
        trail = dict(item.trail)
        for path, off, width in layout.coordinates:
            if lo <= off < hi:
                trail[path] = tuple(int(v) for v in state[off: off + width])
        moved = InFlightPhv(item.index, tuple(int(v) for v in out), trail)
        if s == pipeline.depth - 1:
            ordered = {path: trail[path] for path in layout.paths()}
            exited = TraceEntry(inflight.tick, moved.phv, ordered)
        else:
            new_slots[s + 1] = moved
    return (
        replace(
            inflight,
            tick=inflight.tick + 1,
            stages=tuple(new_slots),
            pending=tuple(pending),
            state=array_to_snapshot(layout, state),
        ),
        exited,
    )
