import random

import pytest

from rmtsim.alu import eval_alu
from rmtsim.fixtures import ALU_DIR, random_machine_code
from rmtsim.pipeline import HardwareSpec, bind, build_pipeline, load_alu_file, load_alus


@pytest.fixture(scope="session")
def alu_lib():
    return {p.stem: load_alu_file(p) for p in sorted(ALU_DIR.glob("*.alu"))}


def uniform_pipeline(depth, width, phv_length, alu):
    spec = HardwareSpec.uniform(depth, width, phv_length, alu)
    return build_pipeline(spec, load_alus([alu], [ALU_DIR]))


def random_bound(depth, width, phv_length, alu, seed, wide=True):
    pipeline = uniform_pipeline(depth, width, phv_length, alu)
    return bind(pipeline, random_machine_code(pipeline, random.Random(seed), wide))


def reference_run(pipeline, phvs, initial_state=None):
    """One PHV at a time through the AST evaluator: (outputs, per-PHV snapshots)."""
    state = {k: list(v) for k, v in (initial_state or pipeline.zero_state()).items()}
    outputs, snaps = [], []
    for phv in phvs:
        current = [int(v) for v in phv]
        for stage in pipeline.stages:
            results = []
            for alu in stage.alus:
                operands = [current[m.ctrl] for m in alu.input_muxes]
                local = state.get(alu.path, [])
                results.append(eval_alu(alu.program, alu.bindings, operands, local))
            current = [results[m.ctrl] for m in stage.output_muxes]
        outputs.append(tuple(current))
        snaps.append({k: tuple(v) for k, v in state.items()})
    return outputs, snaps


# -- acceptance reporting ------------------------------------------------------

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): an acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when == "teardown":
        return
    number, title = marker.args
    failed = report.failed or (report.when == "call" and report.skipped)
    if failed or (number not in _criteria and report.when == "call"):
        detail = getattr(item, "criterion_detail", "")
        _criteria[number] = (title, "FAIL" if failed else "PASS", detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, verdict, detail = _criteria[number]
        line = f"criterion {number}: {verdict}  {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
