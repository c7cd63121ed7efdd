"""Bundled ALU library, pipeline fixtures and machine-code generators."""

from __future__ import annotations

import random
from pathlib import Path

from rmtsim.alu import SlotKind, slot_names
from rmtsim.machine_code import EntryKind, MachineCode, parse_machine_code
from rmtsim.pipeline import Pipeline, bind, build_pipeline, load_alus, load_hardware_spec

DATA_DIR = Path(__file__).parent / "data"
ALU_DIR = DATA_DIR / "alus"
PIPELINE_DIR = DATA_DIR / "pipelines"
MUTATION_DIR = DATA_DIR / "mutations"

# Benchmark fixtures: (depth, width, ALU) of each bundled benchmark shape.
BENCH_SHAPES = {
    "blue_decrease": (4, 2, "sub"),
    "sampling": (2, 1, "if_else_raw"),
    "marple_new_flow": (2, 2, "pred_raw"),
    "marple_tcp_nmo": (3, 2, "pred_raw"),
    "heavy_hitter": (1, 1, "pair"),
    "flowlets": (4, 5, "pred_raw"),
    "learn_filter": (3, 5, "raw"),
    "rcp": (3, 3, "pred_raw"),
    "conga": (1, 5, "pair"),
}


def fixture_names() -> list[str]:
    return sorted(p.stem for p in PIPELINE_DIR.glob("*.toml"))


def fixture_paths(name: str) -> tuple[Path, Path]:
    spec = PIPELINE_DIR / f"{name}.toml"
    if not spec.is_file():
        raise KeyError(f"no fixture named {name!r}; have {fixture_names()}")
    return spec, PIPELINE_DIR / f"{name}.mc"


def load_fixture(name: str, bound: bool = True) -> Pipeline:
    spec_path, mc_path = fixture_paths(name)
    spec = load_hardware_spec(spec_path)
    pipeline = build_pipeline(spec, load_alus(spec.alu_names(), [ALU_DIR]))
    if bound:
        pipeline = bind(pipeline, parse_machine_code(mc_path.read_text()))
    return pipeline


def random_machine_code(pipeline: Pipeline, rng: random.Random, wide_immediates: bool = True) -> MachineCode:
    """Uniformly random in-range values for every catalog slot.

    Immediates are drawn mostly from a small range so comparisons against
    PHV contents go both ways; with ``wide_immediates`` some are drawn from
    the full 32-bit range.
    """
    immediates = set()
    for alu in pipeline.instances():
        for slot, name in zip(alu.program.hole_slots, slot_names(alu.program, alu.path)):
            if slot.kind is SlotKind.IMMEDIATE:
                immediates.add(name)
    pairs = []
    for entry in pipeline.catalog:
        if entry.name in immediates:
            roll = rng.random()
            if wide_immediates and roll < 0.15:
                value = rng.randrange(1 << 32)
            elif roll < 0.3:
                value = rng.choice((0, 1, 0xFFFFFFFF, 0x7FFFFFFF, 0x80000000))
            else:
                value = rng.randrange(0, 10001)
        else:
            value = rng.randrange(entry.valid_range.start, entry.valid_range.stop)
        pairs.append((entry.name, value))
    return MachineCode(tuple(pairs))


def identity_machine_code(pipeline: Pipeline) -> MachineCode:
    """Configure stateless ``raw``/``passthrough`` pipelines as the identity.

    Needs width == phv_length; ALU ``a`` reads and writes container ``a``.
    """
    if pipeline.width != pipeline.phv_length:
        raise ValueError("identity wiring needs width == phv_length")
    pairs = []
    for entry in pipeline.catalog:
        if entry.kind is EntryKind.INPUT_MUX:
            value = int(entry.name.split("_alu_")[1].split("_")[0])
        elif entry.kind is EntryKind.OUTPUT_MUX:
            value = int(entry.name.split("_output_mux_")[1].split("_")[0])
        else:
            value = 0
        pairs.append((entry.name, value))
    return MachineCode(tuple(pairs))
