import json
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_bound, reference_run, uniform_pipeline
from rmtsim.errors import PhvLengthMismatch, StateCoverageError, UnboundPipeline
from rmtsim.fixtures import fixture_names, identity_machine_code, load_fixture
from rmtsim.kernel import available_backends
from rmtsim.lowering import OP_ADDK, OP_LTK, lower
from rmtsim.machine_code import parse_machine_code
from rmtsim.pipeline import bind, optimize
from rmtsim.simulator import (
    Mode,
    final_state,
    inject,
    simulate,
    start,
    step,
    traces_to_json,
    traces_to_text,
)

BACKENDS = available_backends()
ALUS = ["raw", "sub", "pred_raw", "if_else_raw", "pair", "cmp", "counter", "passthrough"]


def random_phvs(n, length, seed, lo=-50, hi=50):
    rng = random.Random(seed)
    return [[rng.randint(lo, hi) for _ in range(length)] for _ in range(n)]


def random_state(pipeline, seed):
    rng = random.Random(seed)
    return {k: [rng.randint(-20, 20) for _ in v] for k, v in pipeline.zero_state().items()}


def assert_matches_reference(pipeline, phvs, state, backend, mode=Mode.TICK_ACCURATE):
    _, out = simulate(pipeline, phvs, state, mode=mode, backend=backend)
    expected, snaps = reference_run(pipeline, phvs, state)
    assert [e.phv for e in out] == expected
    assert [out.state_at(i) for i in range(len(out))] == snaps


def test_cython_core_is_built():
    assert "cython" in BACKENDS and "python" in BACKENDS


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("alu", ALUS)
@pytest.mark.parametrize("optimized", [False, True])
def test_kernel_matches_reference(backend, alu, optimized):
    for seed in range(6):
        rng = random.Random(seed)
        depth, width = rng.randint(1, 3), rng.randint(1, 3)
        pipeline = random_bound(depth, width, max(2, width), alu, seed)
        if optimized:
            pipeline = optimize(pipeline)
        phvs = random_phvs(40, pipeline.phv_length, seed)
        assert_matches_reference(pipeline, phvs, random_state(pipeline, seed), backend)


@pytest.mark.parametrize("name", fixture_names())
def test_fixtures_match_reference(name):
    pipeline = load_fixture(name)
    phvs = random_phvs(200, pipeline.phv_length, 3, 0, 10000)
    for p in (pipeline, optimize(pipeline)):
        assert_matches_reference(p, phvs, random_state(p, 1), None)


def test_wrapping_arithmetic():
    pipeline = load_fixture("counter")
    big = {"stage_0_alu_0": [2**31 - 1]}
    _, out = simulate(pipeline, [[0]], big)
    assert out[0].phv == (-(2**31),)


def test_counter_outputs():
    _, out = simulate(load_fixture("counter"), [[0], [0], [0]])
    assert [e.phv for e in out] == [(1,), (2,), (3,)]
    assert [e.state["stage_0_alu_0"] for e in out] == [(1,), (2,), (3,)]


def test_identity_raw_2x2():
    pipeline = load_fixture("raw_2x2")
    phvs = random_phvs(100, 2, 9, 0, 10000)
    _, out = simulate(pipeline, phvs)
    assert [list(e.phv) for e in out] == phvs


def test_ticks():
    pipeline = load_fixture("flowlets")
    phvs = random_phvs(5, pipeline.phv_length, 0)
    inp, out = simulate(pipeline, phvs)
    assert [e.tick for e in inp] == [0, 1, 2, 3, 4]
    assert [e.tick for e in out] == [3, 4, 5, 6, 7]
    inp, out = simulate(pipeline, phvs, mode=Mode.SEQUENTIAL)
    assert [e.tick for e in inp] == [0, 4, 8, 12, 16]
    assert [e.tick for e in out] == [3, 7, 11, 15, 19]


@pytest.mark.parametrize("backend", BACKENDS)
def test_mode_equivalence_flowlets(backend):
    pipeline = load_fixture("flowlets")
    phvs = random_phvs(500, pipeline.phv_length, 4, 0, 10000)
    state = random_state(pipeline, 4)
    _, tick = simulate(pipeline, phvs, state, Mode.TICK_ACCURATE, backend)
    _, seq = simulate(pipeline, phvs, state, Mode.SEQUENTIAL, backend)
    assert tick.same_data(seq)
    assert tick != seq  # ticks differ


def test_input_trace_shows_state_at_entry():
    pipeline = uniform_pipeline(2, 1, 1, "counter")
    pipeline = bind(pipeline, parse_machine_code(
        "stage_0_alu_0_immediate_0 = 1\nstage_0_output_mux_0_ctrl = 0\n"
        "stage_1_alu_0_immediate_0 = 10\nstage_1_output_mux_0_ctrl = 0\n"
    ))
    inp, out = simulate(pipeline, [[0]] * 3)
    # At tick 1 stage 0 has seen PHV 0, stage 1 has not.
    assert inp[1].state == {"stage_0_alu_0": (1,), "stage_1_alu_0": (0,)}
    assert out[0].state == {"stage_0_alu_0": (1,), "stage_1_alu_0": (10,)}
    inp, _ = simulate(pipeline, [[0]] * 3, mode=Mode.SEQUENTIAL)
    assert inp[1].state == {"stage_0_alu_0": (1,), "stage_1_alu_0": (10,)}
    assert final_state(out, pipeline.zero_state()) == {"stage_0_alu_0": (3,), "stage_1_alu_0": (30,)}


def test_final_state_without_phvs():
    pipeline = load_fixture("counter")
    _, out = simulate(pipeline, [])
    assert len(out) == 0
    assert final_state(out, {"stage_0_alu_0": [4]}) == {"stage_0_alu_0": (4,)}


def test_trace_text_format():
    inp, out = simulate(load_fixture("counter"), [[5], [6]])
    text = traces_to_text(inp, out)
    assert text == (
        "# input trace\n"
        "tick=0 phv=[5] state={stage_0_alu_0:[0]}\n"
        "tick=1 phv=[6] state={stage_0_alu_0:[1]}\n"
        "# output trace\n"
        "tick=0 phv=[1] state={stage_0_alu_0:[1]}\n"
        "tick=1 phv=[2] state={stage_0_alu_0:[2]}\n"
    )
    record = json.loads(traces_to_json(inp, out))
    assert record["output"][1] == {"tick": 1, "phv": [2], "state": {"stage_0_alu_0": [2]}}


def test_simulation_is_deterministic():
    pipeline = load_fixture("rcp")
    phvs = random_phvs(300, pipeline.phv_length, 2)
    a = traces_to_text(*simulate(pipeline, phvs))
    b = traces_to_text(*simulate(pipeline, phvs))
    assert a == b


def test_unbound_pipeline_is_rejected():
    with pytest.raises(UnboundPipeline):
        simulate(load_fixture("counter", bound=False), [[0]])


def test_phv_length_mismatch():
    with pytest.raises(PhvLengthMismatch):
        simulate(load_fixture("raw_2x2"), [[1, 2, 3]])
    with pytest.raises(PhvLengthMismatch):
        simulate(load_fixture("raw_2x2"), [[1, 2], [3]])


@pytest.mark.parametrize("state", [{}, {"stage_0_alu_0": [1], "stage_9_alu_0": [0]},
                                   {"stage_0_alu_0": [1, 2]}])
def test_state_coverage(state):
    with pytest.raises(StateCoverageError):
        simulate(load_fixture("counter"), [[0]], state)


def test_caller_state_is_not_mutated():
    state = {"stage_0_alu_0": [7]}
    simulate(load_fixture("counter"), [[0]] * 4, state)
    assert state == {"stage_0_alu_0": [7]}


# -- stepping ---------------------------------------------------------------


def two_stage_counter():
    pipeline = uniform_pipeline(2, 1, 1, "counter")
    return bind(pipeline, parse_machine_code(
        "stage_0_alu_0_immediate_0 = 1\nstage_0_output_mux_0_ctrl = 0\n"
        "stage_1_alu_0_immediate_0 = 100\nstage_1_output_mux_0_ctrl = 0\n"
    ))


def test_step_exits_on_depth_th_step():
    pipeline = two_stage_counter()
    fl = inject(start(pipeline), [0])
    fl, exited = step(pipeline, fl)
    assert exited is None and not fl.empty
    fl, exited = step(pipeline, fl)
    assert exited.phv == (100,) and exited.tick == 1
    assert fl.empty


def test_step_on_empty_pipeline_changes_nothing_but_tick():
    pipeline = two_stage_counter()
    fl = start(pipeline, {"stage_0_alu_0": [3], "stage_1_alu_0": [4]})
    after, exited = step(pipeline, fl)
    assert exited is None
    assert after.state == fl.state and after.stages == fl.stages
    assert after.tick == fl.tick + 1


def test_step_depth_one_exits_immediately():
    pipeline = load_fixture("counter")
    fl, exited = step(pipeline, inject(start(pipeline), [0]))
    assert exited.phv == (1,) and exited.tick == 0


@pytest.mark.parametrize("name", ["flowlets", "heavy_hitter", "rcp"])
def test_stepping_matches_batch(name):
    pipeline = load_fixture(name)
    phvs = random_phvs(30, pipeline.phv_length, 6, 0, 10000)
    state = random_state(pipeline, 6)
    _, out = simulate(pipeline, phvs, state)
    fl = start(pipeline, state)
    for phv in phvs:
        fl = inject(fl, phv)
    exits = []
    while not fl.empty:
        fl, exited = step(pipeline, fl)
        if exited:
            exits.append(exited)
    assert exits == out.entries


# -- lowering details -------------------------------------------------------


def test_constant_operands_are_fused():
    pipeline = load_fixture("sampling")
    ops = {op for op, _, _ in lower(optimize(pipeline)).code.reshape(-1, 3).tolist()}
    assert ops & {OP_ADDK, OP_LTK}


def test_unselected_stateless_alus_are_skipped():
    pipeline = uniform_pipeline(1, 3, 3, "raw")
    mc = identity_machine_code(pipeline)
    for c in range(3):
        mc = mc.with_value(f"stage_0_output_mux_{c}_ctrl", 0)
    pipeline = bind(pipeline, mc)
    prog = lower(optimize(pipeline))
    assert prog.alu_entry[0] >= 0 and list(prog.alu_entry[1:]) == [-1, -1]
    assert (lower(pipeline).alu_entry >= 0).all()
    phvs = random_phvs(20, 3, 1)
    _, out = simulate(optimize(pipeline), phvs)
    assert [e.phv for e in out] == [(p[0],) * 3 for p in phvs]


def test_stateful_alus_run_even_when_unselected():
    pipeline = uniform_pipeline(1, 2, 2, "counter")
    pipeline = bind(pipeline, parse_machine_code(
        "stage_0_alu_0_immediate_0 = 1\nstage_0_alu_1_immediate_0 = 2\n"
        "stage_0_output_mux_0_ctrl = 0\nstage_0_output_mux_1_ctrl = 0\n"
    ))
    _, out = simulate(optimize(pipeline), [[0, 0]] * 3)
    assert out[2].state == {"stage_0_alu_0": (3,), "stage_0_alu_1": (6,)}


# -- properties -------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(
    alu=st.sampled_from(ALUS),
    depth=st.integers(1, 3),
    width=st.integers(1, 3),
    seed=st.integers(0, 10**6),
    n=st.integers(0, 30),
)
def test_backends_and_optimization_agree(alu, depth, width, seed, n):
    pipeline = random_bound(depth, width, max(2, width), alu, seed)
    phvs = random_phvs(n, pipeline.phv_length, seed, -(2**31), 2**31 - 1)
    state = random_state(pipeline, seed)
    traces = [
        simulate(p, phvs, state, mode, backend)
        for p in (pipeline, optimize(pipeline))
        for backend in BACKENDS
        for mode in Mode
    ]
    for inp, out in traces[1:]:
        assert out.same_data(traces[0][1])
    assert np.array_equal(traces[0][0].phvs, np.asarray(phvs, dtype=np.int64).reshape(n, pipeline.phv_length))
