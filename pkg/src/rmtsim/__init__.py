"""Instruction-level simulator for RMT-style programmable switch pipelines."""

from rmtsim.alu import AluProgram, HoleSlot, SlotKind, eval_alu, format_alu, parse_alu
from rmtsim.errors import RmtsimError
from rmtsim.fuzzer import (
    Mutation,
    SpecOracle,
    TrafficConfig,
    Verdict,
    fuzz_test,
    generate_traffic,
    get_oracle,
    mutation_campaign,
    pipeline_oracle,
    register_oracle,
)
from rmtsim.machine_code import MachineCode, SlotCatalog, check_against_catalog, parse_machine_code
from rmtsim.pipeline import (
    HardwareSpec,
    Pipeline,
    bind,
    build_pipeline,
    describe,
    load_alus,
    load_hardware_spec,
    optimize,
    parse_hardware_spec,
)
from rmtsim.simulator import Mode, Trace, TraceEntry, inject, simulate, start, step

__version__ = "0.1.0"

__all__ = [
    "AluProgram", "HardwareSpec", "HoleSlot", "MachineCode", "Mode", "Mutation", "Pipeline",
    "RmtsimError", "SlotCatalog", "SlotKind", "SpecOracle", "Trace", "TraceEntry",
    "TrafficConfig", "Verdict", "bind", "build_pipeline", "check_against_catalog", "describe",
    "eval_alu", "format_alu", "fuzz_test", "generate_traffic", "get_oracle", "inject",
    "load_alus", "load_hardware_spec", "mutation_campaign", "optimize", "parse_alu",
    "parse_hardware_spec", "parse_machine_code", "pipeline_oracle", "register_oracle",
    "simulate", "start", "step",
]
