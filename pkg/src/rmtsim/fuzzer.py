"""Traffic generation, specification oracles and differential fuzzing.

A specification oracle is a plain Python function that processes one PHV at
a time against its own state.  ``fuzz_test`` feeds the same random traffic
to the oracle and to a tick-accurate simulation and compares every output
PHV plus the state the oracle declares in its schema.
"""

from __future__ import annotations

import enum
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, MutableMapping, Sequence

import numpy as np

from rmtsim.alu import eval_alu, wrap32
from rmtsim.errors import ConfigError
from rmtsim.pipeline import Pipeline, StateLayout, bind, optimize
from rmtsim.simulator import Mode, array_to_snapshot, simulate

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

CONTAINER_MIN = 0
CONTAINER_MAX = 10000


# ---------------------------------------------------------------------------
# Traffic


@dataclass(frozen=True)
class RandomState:
    """Every state variable drawn uniformly from [lo, hi]."""

    lo: int = CONTAINER_MIN
    hi: int = CONTAINER_MAX

    def __post_init__(self):
        if self.lo > self.hi:
            raise ConfigError(f"state bounds reversed: {self.lo} > {self.hi}")


@dataclass(frozen=True)
class ExplicitState:
    """A user-supplied snapshot, ``{alu_path: [values]}``."""

    values: Mapping[str, Sequence[int]]


ZERO_STATE = RandomState(0, 0)


@dataclass(frozen=True)
class TrafficConfig:
    num_phvs: int
    seed: int = 0
    container_min: int = CONTAINER_MIN
    container_max: int = CONTAINER_MAX
    state_init: RandomState | ExplicitState = field(default_factory=RandomState)

    def __post_init__(self):
        if self.num_phvs < 1:
            raise ConfigError("no PHVs requested")
        if self.container_min > self.container_max:
            raise ConfigError(
                f"container bounds reversed: {self.container_min} > {self.container_max}"
            )


def generate_traffic(
    cfg: TrafficConfig, phv_length: int, layout: StateLayout | None = None
) -> tuple[np.ndarray, dict]:
    """Random PHVs and an initial state snapshot, both determined by ``cfg.seed``.

    PHVs and state come from independent streams, so changing ``num_phvs``
    does not change the initial state.
    """
    phv_seq, state_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    phvs = np.random.default_rng(phv_seq).integers(
        cfg.container_min, cfg.container_max, size=(cfg.num_phvs, phv_length),
        endpoint=True, dtype=np.int64,
    )
    if layout is None:
        return phvs, {}
    init = cfg.state_init
    if isinstance(init, ExplicitState):
        return phvs, {path: tuple(int(v) for v in vals) for path, vals in init.values.items()}
    flat = np.random.default_rng(state_seq).integers(
        init.lo, init.hi, size=layout.size, endpoint=True, dtype=np.int64
    )
    return phvs, array_to_snapshot(layout, flat)


# ---------------------------------------------------------------------------
# Oracles

Transfer = Callable[[list, MutableMapping[str, int]], list]


@dataclass(frozen=True)
class SpecOracle:
    """Reference behaviour: ``transfer(phv, state) -> output phv``.

    ``state_schema`` maps each oracle state variable to the pipeline
    coordinate ``(alu_path, index)`` that holds it.
    """

    name: str
    transfer: Transfer
    state_schema: Mapping[str, tuple[str, int]]
    description: str = ""

    def check_schema(self, layout: StateLayout) -> None:
        seen = {}
        for var, (path, index) in self.state_schema.items():
            try:
                _, width = layout.lookup(path)
            except KeyError:
                raise ConfigError(
                    f"oracle {self.name!r}: {var} maps to {path}, which has no state"
                ) from None
            if not 0 <= index < width:
                raise ConfigError(
                    f"oracle {self.name!r}: {var} maps to {path}[{index}], "
                    f"but {path} has {width} state variables"
                )
            if (path, index) in seen:
                raise ConfigError(
                    f"oracle {self.name!r}: {var} and {seen[path, index]} share {path}[{index}]"
                )
            seen[path, index] = var

    def project(self, snapshot: Mapping[str, Sequence[int]]) -> dict:
        """Oracle view of a pipeline snapshot."""
        return {var: int(snapshot[path][i]) for var, (path, i) in self.state_schema.items()}


_REGISTRY: dict[str, SpecOracle] = {}


def register_oracle(oracle: SpecOracle) -> SpecOracle:
    if oracle.name in _REGISTRY:
        raise ValueError(f"oracle {oracle.name!r} already registered")
    _REGISTRY[oracle.name] = oracle
    return oracle


def registered_oracles() -> list[str]:
    return sorted(_REGISTRY)


def get_oracle(name: str) -> SpecOracle:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ConfigError(
            f"unknown oracle {name!r}; registered: {', '.join(registered_oracles())}"
        ) from None


def _identity(phv, state):
    return list(phv)


def _counter(phv, state):
    state["count"] = wrap32(state["count"] + 1)
    return [state["count"]]


def _sampling(phv, state):
    # Stage 0 sums large packets and counts small ones; stage 1 counts the
    # PHVs whose running volume is nonzero.
    x = phv[0]
    state["volume"] = wrap32(state["volume"] + (x if x > 5000 else 1))
    state["seen"] = wrap32(state["seen"] + (state["volume"] != 0))
    return [state["seen"]]


def _heavy_hitter(phv, state):
    # Count packets and bytes of nonempty packets until 500 have been seen.
    size = phv[1]
    if state["count"] < 500 and size != 0:
        state["count"] = wrap32(state["count"] + 1)
        state["bytes"] = wrap32(state["bytes"] + size)
    return [state["bytes"], state["bytes"]]


register_oracle(SpecOracle("identity", _identity, {}, "output PHV equals input PHV"))
register_oracle(SpecOracle(
    "counter", _counter, {"count": ("stage_0_alu_0", 0)},
    "out[0] = ++count",
))
register_oracle(SpecOracle(
    "sampling", _sampling,
    {"volume": ("stage_0_alu_0", 0), "seen": ("stage_1_alu_0", 0)},
    "volume += x if x > 5000 else 1; seen += volume != 0; out[0] = seen",
))
register_oracle(SpecOracle(
    "heavy_hitter", _heavy_hitter,
    {"count": ("stage_0_alu_0", 0), "bytes": ("stage_0_alu_0", 1)},
    "while count < 500 count nonempty packets and their bytes; out = [bytes, bytes]",
))


class _PipelineTransfer:
    """Sequential tree-walk of a specialized pipeline, one PHV at a time."""

    def __init__(self, pipeline: Pipeline):
        self.pipeline = pipeline if pipeline.optimized else optimize(pipeline)

    def __call__(self, phv, state):
        current = list(phv)
        for stage in self.pipeline.stages:
            outputs = []
            for alu in stage.alus:
                operands = [current[m.ctrl] for m in alu.input_muxes]
                names = [f"{alu.path}[{j}]" for j in range(alu.state_width)]
                local = [state[n] for n in names]
                outputs.append(eval_alu(alu.program, alu.bindings, operands, local))
                for n, v in zip(names, local):
                    state[n] = v
            current = [outputs[m.ctrl] for m in stage.output_muxes]
        return current


def pipeline_oracle(pipeline: Pipeline, name: str = "self") -> SpecOracle:
    """An oracle that is the (specialized) pipeline itself, covering all state."""
    layout = pipeline.state_layout()
    schema = {
        f"{path}[{j}]": (path, j) for path, _, width in layout.coordinates for j in range(width)
    }
    return SpecOracle(name, _PipelineTransfer(pipeline), schema, "tree-walk of the pipeline")


# ---------------------------------------------------------------------------
# Fuzzing


class Outcome(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"


@dataclass(frozen=True)
class Counterexample:
    index: int
    tick: int
    input_phv: tuple
    input_state: dict
    expected_phv: tuple
    actual_phv: tuple
    expected_state: dict
    actual_state: dict
    mismatches: tuple

    def describe(self) -> str:
        lines = [
            f"PHV {self.index} exiting at tick {self.tick}",
            f"  input phv:      {list(self.input_phv)}",
            f"  input state:    {self.input_state}",
            f"  expected phv:   {list(self.expected_phv)}",
            f"  actual phv:     {list(self.actual_phv)}",
            f"  expected state: {self.expected_state}",
            f"  actual state:   {self.actual_state}",
            f"  mismatches:     {', '.join(self.mismatches)}",
        ]
        return "\n".join(lines)

    def to_record(self) -> dict:
        return {
            "index": self.index,
            "tick": self.tick,
            "input_phv": list(self.input_phv),
            "input_state": self.input_state,
            "expected_phv": list(self.expected_phv),
            "actual_phv": list(self.actual_phv),
            "expected_state": self.expected_state,
            "actual_state": self.actual_state,
            "mismatches": list(self.mismatches),
        }


@dataclass(frozen=True)
class Verdict:
    outcome: Outcome
    seed: int
    num_phvs: int
    failures: tuple = ()

    @property
    def passed(self) -> bool:
        return self.outcome is Outcome.PASS

    @property
    def counterexample(self) -> Counterexample | None:
        return self.failures[0] if self.failures else None


def fuzz_test(
    pipeline: Pipeline,
    oracle: SpecOracle,
    cfg: TrafficConfig,
    collect_all: bool = False,
    backend: str | None = None,
) -> Verdict:
    """Compare a tick-accurate simulation with ``oracle`` on random traffic."""
    layout = pipeline.state_layout()
    oracle.check_schema(layout)
    phvs, init = generate_traffic(cfg, pipeline.phv_length, layout)
    input_trace, output_trace = simulate(
        pipeline, phvs, init, mode=Mode.TICK_ACCURATE, backend=backend
    )

    coords = [(var, layout.lookup(path)[0] + j) for var, (path, j) in oracle.state_schema.items()]
    state = oracle.project(init)
    actual_phvs = output_trace.phvs.tolist()
    actual_states = output_trace.states
    failures = []
    for i, phv in enumerate(phvs.tolist()):
        expected = [int(v) for v in oracle.transfer(list(phv), state)]
        actual = actual_phvs[i]
        row = actual_states[i]
        actual_state = {var: int(row[k]) for var, k in coords}
        if expected == actual and actual_state == state:
            continue
        bad = [f"phv[{c}]" for c in range(max(len(expected), len(actual)))
               if c >= len(expected) or c >= len(actual) or expected[c] != actual[c]]
        bad += [f"state.{var}" for var in state if state[var] != actual_state[var]]
        failures.append(Counterexample(
            index=i,
            tick=int(output_trace.ticks[i]),
            input_phv=tuple(phv),
            input_state=oracle.project(input_trace.state_at(i)),
            expected_phv=tuple(expected),
            actual_phv=tuple(actual),
            expected_state=dict(state),
            actual_state=actual_state,
            mismatches=tuple(bad),
        ))
        if not collect_all:
            break
        # keep going from the pipeline's state so later reports stay local
        state = dict(actual_state)
    outcome = Outcome.FAIL if failures else Outcome.PASS
    return Verdict(outcome, cfg.seed, cfg.num_phvs, tuple(failures))


# ---------------------------------------------------------------------------
# Mutation campaigns


class Expect(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"


@dataclass(frozen=True)
class Mutation:
    """Set one machine-code slot to a new value."""

    name: str
    slot: str
    value: int
    expect: Expect = Expect.FAIL


@dataclass(frozen=True)
class MutationResult:
    mutation: Mutation
    verdict: Verdict

    @property
    def as_expected(self) -> bool:
        return self.verdict.outcome.value == self.mutation.expect.value

    def to_record(self) -> dict:
        cex = self.verdict.counterexample
        return {
            "name": self.mutation.name,
            "slot": self.mutation.slot,
            "value": self.mutation.value,
            "expect": self.mutation.expect.value,
            "verdict": self.verdict.outcome.value,
            "as_expected": self.as_expected,
            "seed": self.verdict.seed,
            "tick": cex.tick if cex else None,
            "counterexample": cex.to_record() if cex else None,
        }


@dataclass(frozen=True)
class CampaignReport:
    results: tuple

    @property
    def caught(self) -> int:
        return sum(r.verdict.outcome is Outcome.FAIL for r in self.results)

    @property
    def unexpected(self) -> list[MutationResult]:
        return [r for r in self.results if not r.as_expected]

    @property
    def all_as_expected(self) -> bool:
        return not self.unexpected

    def table(self) -> str:
        rows = [("mutation", "slot", "value", "expect", "verdict", "tick", "ok")]
        for r in self.results:
            cex = r.verdict.counterexample
            rows.append((
                r.mutation.name, r.mutation.slot, str(r.mutation.value),
                r.mutation.expect.value, r.verdict.outcome.value,
                str(cex.tick) if cex else "-", "yes" if r.as_expected else "NO",
            ))
        widths = [max(len(row[k]) for row in rows) for k in range(len(rows[0]))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
        lines.append(
            f"{len(self.results)} mutations, {self.caught} failed, "
            f"{len(self.results) - self.caught} passed, {len(self.unexpected)} unexpected"
        )
        return "\n".join(lines)

    def to_json(self) -> str:
        return json.dumps([r.to_record() for r in self.results], indent=2)


def apply_mutation(pipeline: Pipeline, mutation: Mutation) -> Pipeline:
    if pipeline.machine_code is None:
        raise ConfigError("mutations need a bound pipeline")
    if pipeline.optimized:
        raise ConfigError("mutate the bound pipeline, not its optimized form")
    if mutation.slot not in pipeline.machine_code:
        raise ConfigError(f"mutation {mutation.name!r}: no slot named {mutation.slot!r}")
    return bind(pipeline, pipeline.machine_code.with_value(mutation.slot, mutation.value))


def _run_one(args) -> MutationResult:
    pipeline, oracle, cfg, mutation, specialize = args
    mutated = apply_mutation(pipeline, mutation)
    if specialize:
        mutated = optimize(mutated)
    return MutationResult(mutation, fuzz_test(mutated, oracle, cfg))


def mutation_campaign(
    pipeline: Pipeline,
    oracle: SpecOracle,
    cfg: TrafficConfig,
    mutations: Sequence[Mutation],
    jobs: int = 1,
    specialize: bool = False,
) -> CampaignReport:
    """Fuzz one mutated copy of ``pipeline`` per mutation.

    Results are ordered like ``mutations`` whatever ``jobs`` is.
    """
    for m in mutations:  # fail fast on bad edits before any simulation
        apply_mutation(pipeline, m)
    work = [(pipeline, oracle, cfg, m, specialize) for m in mutations]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, work))
    else:
        results = [_run_one(w) for w in work]
    return CampaignReport(tuple(results))


@dataclass(frozen=True)
class MutationSuite:
    fixture: str | None
    oracle: str | None
    traffic: TrafficConfig | None
    mutations: tuple


def _traffic_from_table(table: Mapping) -> TrafficConfig:
    known = {"num_phvs", "seed", "container_min", "container_max", "state_min", "state_max"}
    unknown = set(table) - known
    if unknown:
        raise ConfigError(f"unknown [traffic] keys: {', '.join(sorted(unknown))}")
    state = RandomState(table.get("state_min", CONTAINER_MIN), table.get("state_max", CONTAINER_MAX))
    return TrafficConfig(
        num_phvs=table.get("num_phvs", 50000),
        seed=table.get("seed", 0),
        container_min=table.get("container_min", CONTAINER_MIN),
        container_max=table.get("container_max", CONTAINER_MAX),
        state_init=state,
    )


def parse_mutation_file(text: str) -> MutationSuite:
    """Parse a TOML mutation suite (format in the README)."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid mutation file: {exc}") from exc
    mutations = []
    for k, entry in enumerate(data.get("mutation", [])):
        try:
            mutations.append(Mutation(
                name=entry.get("name", f"mutation_{k}"),
                slot=entry["slot"],
                value=int(entry["value"]),
                expect=Expect(entry.get("expect", "fail")),
            ))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"mutation {k}: {exc}") from exc
    if not mutations:
        raise ConfigError("mutation file lists no [[mutation]] entries")
    traffic = _traffic_from_table(data["traffic"]) if "traffic" in data else None
    return MutationSuite(data.get("fixture"), data.get("oracle"), traffic, tuple(mutations))


__all__ = [
    "CONTAINER_MAX", "CONTAINER_MIN", "CampaignReport", "Counterexample", "Expect",
    "ExplicitState", "Mutation", "MutationResult", "MutationSuite", "Outcome", "RandomState",
    "SpecOracle", "TrafficConfig", "Verdict", "ZERO_STATE", "apply_mutation",
    "fuzz_test", "generate_traffic", "get_oracle", "mutation_campaign", "parse_mutation_file",
    "pipeline_oracle", "register_oracle", "registered_oracles",
]
