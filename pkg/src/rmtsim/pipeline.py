"""Pipeline generation: hardware spec + ALU programs + machine code -> executable IR."""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from rmtsim.alu import AluProgram, HoleSlot, format_body, parse_alu, slot_names
from rmtsim.errors import (
    BindError,
    HardwareSpecError,
    OperandArityExceedsPhv,
    UnboundPipeline,
    UnknownAlu,
)
from rmtsim.machine_code import (
    CatalogEntry,
    EntryKind,
    MachineCode,
    SlotCatalog,
    check_against_catalog,
)


def alu_path(stage: int, alu: int) -> str:
    return f"stage_{stage}_alu_{alu}"


def input_mux_name(stage: int, alu: int, operand: int) -> str:
    return f"{alu_path(stage, alu)}_input_mux_{operand}_ctrl"


def output_mux_name(stage: int, container: int) -> str:
    return f"stage_{stage}_output_mux_{container}_ctrl"


@dataclass(frozen=True)
class HardwareSpec:
    depth: int
    width: int
    phv_length: int
    stage_assignments: tuple
    state_widths: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for key in ("depth", "width", "phv_length"):
            value = getattr(self, key)
            if not isinstance(value, int) or value < 1:
                raise HardwareSpecError(f"{key} must be a positive integer, got {value!r}")
        stages = tuple(tuple(stage) for stage in self.stage_assignments)
        object.__setattr__(self, "stage_assignments", stages)
        if len(stages) != self.depth:
            raise HardwareSpecError(f"expected {self.depth} stages, got {len(stages)}")
        for index, stage in enumerate(stages):
            if len(stage) != self.width:
                raise HardwareSpecError(
                    f"stage {index} lists {len(stage)} ALUs, width is {self.width}"
                )

    @classmethod
    def uniform(cls, depth: int, width: int, phv_length: int, alu: str) -> "HardwareSpec":
        return cls(depth, width, phv_length, tuple((alu,) * width for _ in range(depth)))

    def alu_names(self) -> set:
        return {name for stage in self.stage_assignments for name in stage}

    def to_toml(self) -> str:
        lines = [f"depth = {self.depth}", f"width = {self.width}", f"phv_length = {self.phv_length}"]
        lines.append("stages = [")
        for stage in self.stage_assignments:
            lines.append("    [" + ", ".join(f'"{n}"' for n in stage) + "],")
        lines.append("]")
        if self.state_widths:
            lines.append("\n[state_widths]")
            lines.extend(f"{k} = {v}" for k, v in self.state_widths.items())
        return "\n".join(lines) + "\n"


def parse_hardware_spec(text: str) -> HardwareSpec:
    """Parse the TOML hardware spec format (see README)."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise HardwareSpecError(f"invalid TOML: {exc}") from exc
    missing = {"depth", "width", "phv_length", "stages"} - data.keys()
    if missing:
        raise HardwareSpecError(f"missing keys: {', '.join(sorted(missing))}")
    unknown = data.keys() - {"depth", "width", "phv_length", "stages", "state_widths"}
    if unknown:
        raise HardwareSpecError(f"unknown keys: {', '.join(sorted(unknown))}")
    stages = data["stages"]
    if not isinstance(stages, list) or not all(
        isinstance(s, list) and all(isinstance(n, str) for n in s) for s in stages
    ):
        raise HardwareSpecError("stages must be a list of lists of ALU names")
    return HardwareSpec(
        depth=data["depth"],
        width=data["width"],
        phv_length=data["phv_length"],
        stage_assignments=tuple(tuple(s) for s in stages),
        state_widths=dict(data.get("state_widths", {})),
    )


def load_hardware_spec(path: str | os.PathLike) -> HardwareSpec:
    return parse_hardware_spec(Path(path).read_text(encoding="utf-8"))


def load_alu_file(path: str | os.PathLike) -> AluProgram:
    path = Path(path)
    return parse_alu(path.read_text(encoding="utf-8"), path.stem)


def load_alus(names: Iterable[str], search_paths: Sequence[str | os.PathLike]) -> dict:
    """Find ``<name>.alu`` for each name in the first search path that has it."""
    alus = {}
    for name in sorted(set(names)):
        for directory in search_paths:
            candidate = Path(directory) / f"{name}.alu"
            if candidate.is_file():
                alus[name] = load_alu_file(candidate)
                break
        else:
            raise UnknownAlu(name, "ALU search path " + os.pathsep.join(map(str, search_paths)))
    return alus


@dataclass(frozen=True)
class InputMux:
    stage: int
    alu: int
    operand: int
    fanin: int
    ctrl: int | None = None

    @property
    def name(self) -> str:
        return input_mux_name(self.stage, self.alu, self.operand)


@dataclass(frozen=True)
class OutputMux:
    stage: int
    container: int
    fanin: int
    ctrl: int | None = None

    @property
    def name(self) -> str:
        return output_mux_name(self.stage, self.container)


@dataclass(frozen=True)
class AluInstance:
    program: AluProgram
    stage: int
    slot: int
    input_muxes: tuple
    bindings: Mapping[HoleSlot, int] | None = None

    @property
    def path(self) -> str:
        return alu_path(self.stage, self.slot)

    @property
    def state_width(self) -> int:
        return len(self.program.state_vars)


@dataclass(frozen=True)
class Stage:
    index: int
    alus: tuple
    output_muxes: tuple


@dataclass(frozen=True)
class StateLayout:
    """Placement of every stateful instance's variables in one flat vector.

    Instances are laid out in stage-major order, so each stage owns a
    contiguous range.
    """

    coordinates: tuple  # (path, offset, width)
    stage_ranges: tuple  # (lo, hi) per stage

    @property
    def size(self) -> int:
        return sum(width for _, _, width in self.coordinates)

    def lookup(self, path: str) -> tuple[int, int]:
        for name, offset, width in self.coordinates:
            if name == path:
                return offset, width
        raise KeyError(path)

    def paths(self) -> list[str]:
        return [name for name, _, _ in self.coordinates]


@dataclass(frozen=True)
class Pipeline:
    spec: HardwareSpec
    stages: tuple
    catalog: SlotCatalog
    machine_code: MachineCode | None = None
    optimized: bool = False

    @property
    def bound(self) -> bool:
        return self.machine_code is not None

    @property
    def depth(self) -> int:
        return self.spec.depth

    @property
    def width(self) -> int:
        return self.spec.width

    @property
    def phv_length(self) -> int:
        return self.spec.phv_length

    def instances(self) -> list[AluInstance]:
        return [alu for stage in self.stages for alu in stage.alus]

    def state_layout(self) -> StateLayout:
        coords = []
        ranges = []
        offset = 0
        for stage in self.stages:
            lo = offset
            for alu in stage.alus:
                if alu.program.is_stateful:
                    coords.append((alu.path, offset, alu.state_width))
                    offset += alu.state_width
            ranges.append((lo, offset))
        return StateLayout(tuple(coords), tuple(ranges))

    def zero_state(self) -> dict:
        return {path: (0,) * width for path, _, width in self.state_layout().coordinates}

    def dataflow_edges(self) -> list[tuple[str, str]]:
        """Edges of the data-flow graph; PHV nodes are ``phv_<k>`` where k is
        the number of stages already applied."""
        edges = []
        for stage in self.stages:
            s = stage.index
            for alu in stage.alus:
                edges.append((f"phv_{s}", alu.path))
                edges.append((alu.path, f"phv_{s + 1}"))
        return edges


def build_pipeline(spec: HardwareSpec, alus: Mapping[str, AluProgram]) -> Pipeline:
    """Lay out an unbound pipeline and its slot catalog."""
    stages = []
    entries = []
    for s, names in enumerate(spec.stage_assignments):
        instances = []
        for a, name in enumerate(names):
            if name not in alus:
                raise UnknownAlu(name, f"stage {s}")
            program = alus[name]
            arity = len(program.packet_operands)
            if arity > spec.phv_length:
                raise OperandArityExceedsPhv(name, s, arity, spec.phv_length)
            path = alu_path(s, a)
            declared_width = spec.state_widths.get(path)
            if declared_width is not None and declared_width != len(program.state_vars):
                raise HardwareSpecError(
                    f"{path}: state width {declared_width} does not match {name!r} "
                    f"({len(program.state_vars)} state variables)"
                )
            muxes = tuple(InputMux(s, a, k, spec.phv_length) for k in range(arity))
            instances.append(AluInstance(program, s, a, muxes))
            for slot, slot_name in zip(program.hole_slots, slot_names(program, path)):
                entries.append(CatalogEntry(slot_name, slot.valid_range, EntryKind.ALU_HOLE))
            for mux in muxes:
                entries.append(CatalogEntry(mux.name, range(mux.fanin), EntryKind.INPUT_MUX))
        outputs = tuple(OutputMux(s, c, spec.width) for c in range(spec.phv_length))
        for mux in outputs:
            entries.append(CatalogEntry(mux.name, range(mux.fanin), EntryKind.OUTPUT_MUX))
        stages.append(Stage(s, tuple(instances), outputs))
    for path in spec.state_widths:
        if not any(alu.path == path for stage in stages for alu in stage.alus):
            raise HardwareSpecError(f"state_widths names unknown ALU {path!r}")
    return Pipeline(spec, tuple(stages), SlotCatalog(tuple(entries)))


def bind(pipeline: Pipeline, mc: MachineCode) -> Pipeline:
    """Apply machine code.  Returns a new pipeline; the input is unchanged."""
    if pipeline.optimized:
        raise ValueError("cannot rebind an optimized pipeline; bind the original")
    diagnostics = check_against_catalog(mc, pipeline.catalog)
    if diagnostics:
        raise BindError(diagnostics)
    stages = []
    for stage in pipeline.stages:
        instances = []
        for alu in stage.alus:
            names = slot_names(alu.program, alu.path)
            bindings = {slot: mc[name] for slot, name in zip(alu.program.hole_slots, names)}
            muxes = tuple(replace(m, ctrl=mc[m.name]) for m in alu.input_muxes)
            instances.append(replace(alu, bindings=bindings, input_muxes=muxes))
        outputs = tuple(replace(m, ctrl=mc[m.name]) for m in stage.output_muxes)
        stages.append(Stage(stage.index, tuple(instances), outputs))
    return replace(pipeline, stages=tuple(stages), machine_code=mc)


def optimize(pipeline: Pipeline) -> Pipeline:
    """Specialize every ALU body against its bound machine code."""
    from rmtsim.optimizer import specialize

    if not pipeline.bound:
        raise UnboundPipeline()
    stages = []
    for stage in pipeline.stages:
        instances = tuple(
            replace(alu, program=specialize(alu.program, alu.bindings), bindings={})
            for alu in stage.alus
        )
        stages.append(replace(stage, alus=instances))
    return replace(pipeline, stages=tuple(stages), optimized=True)


def describe(pipeline: Pipeline) -> str:
    status = "optimized" if pipeline.optimized else "bound" if pipeline.bound else "unbound"
    spec = pipeline.spec
    lines = [f"pipeline depth={spec.depth} width={spec.width} phv_length={spec.phv_length} ({status})"]
    for stage in pipeline.stages:
        lines.append(f"stage {stage.index}:")
        for alu in stage.alus:
            prog = alu.program
            lines.append(f"  {alu.path}: {prog.name} ({prog.kind.value})")
            for mux, operand in zip(alu.input_muxes, prog.packet_operands):
                source = "?" if mux.ctrl is None else f"container {mux.ctrl}"
                lines.append(f"    {operand} <- {source}")
            if prog.state_vars:
                lines.append(f"    state: {', '.join(prog.state_vars)}")
            if alu.bindings:
                for slot, name in zip(prog.hole_slots, slot_names(prog, alu.path)):
                    lines.append(f"    {name} = {alu.bindings[slot]}")
            lines.extend(format_body(prog.body, indent="    | "))
        for mux in stage.output_muxes:
            source = "?" if mux.ctrl is None else alu_path(stage.index, mux.ctrl)
            lines.append(f"  container {mux.container} <- {source}")
    return "\n".join(lines) + "\n"
