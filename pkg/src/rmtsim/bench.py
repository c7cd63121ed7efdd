"""Timing harness: unoptimized vs optimized simulation over identical traffic."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

from scipy.stats import spearmanr

from rmtsim.errors import BenchDivergence
from rmtsim.fuzzer import TrafficConfig, generate_traffic
from rmtsim.lowering import lower
from rmtsim.pipeline import Pipeline, optimize
from rmtsim.simulator import simulate


@dataclass(frozen=True)
class BenchResult:
    name: str
    depth: int
    width: int
    num_phvs: int
    unoptimized: tuple  # seconds per run
    optimized: tuple

    @property
    def size(self) -> int:
        return self.depth * self.width

    @property
    def unoptimized_ms(self) -> float:
        return 1000 * statistics.median(self.unoptimized)

    @property
    def optimized_ms(self) -> float:
        return 1000 * statistics.median(self.optimized)

    @property
    def saved_ms(self) -> float:
        return self.unoptimized_ms - self.optimized_ms

    @property
    def speedup(self) -> float:
        return self.unoptimized_ms / self.optimized_ms


def _timed(pipeline, compiled, phvs, state, backend) -> tuple[float, tuple]:
    start = time.perf_counter()
    traces = simulate(pipeline, phvs, state, backend=backend, compiled=compiled)
    return time.perf_counter() - start, traces


def bench_pipeline(
    pipeline: Pipeline,
    num_phvs: int = 50000,
    repeat: int = 5,
    seed: int = 0,
    name: str = "",
    backend: str | None = None,
) -> BenchResult:
    """Median-ready timings of both variants; raises BenchDivergence if their traces differ.

    Runs alternate between the variants so drift in machine load affects
    both alike.  Lowering is done once up front and not timed.
    """
    if repeat < 1:
        raise ValueError("repeat must be at least 1")
    cfg = TrafficConfig(num_phvs=num_phvs, seed=seed)
    phvs, state = generate_traffic(cfg, pipeline.phv_length, pipeline.state_layout())
    fast = optimize(pipeline)
    slow_prog, fast_prog = lower(pipeline), lower(fast)

    slow_times, fast_times = [], []
    for k in range(repeat):
        dt_slow, slow_traces = _timed(pipeline, slow_prog, phvs, state, backend)
        dt_fast, fast_traces = _timed(fast, fast_prog, phvs, state, backend)
        if k == 0 and (slow_traces[0] != fast_traces[0] or slow_traces[1] != fast_traces[1]):
            raise BenchDivergence(
                f"{name or 'pipeline'}: optimized and unoptimized traces differ; no timings reported"
            )
        slow_times.append(dt_slow)
        fast_times.append(dt_fast)
    return BenchResult(
        name, pipeline.depth, pipeline.width, num_phvs, tuple(slow_times), tuple(fast_times)
    )


def size_trend(results) -> float:
    """Spearman rank correlation between depth*width and time saved."""
    results = list(results)
    if len(results) < 3:
        raise ValueError("need at least three results for a trend")
    rho = spearmanr([r.size for r in results], [r.saved_ms for r in results])[0]
    return float(rho)


def format_results(results) -> str:
    header = ("pipeline", "depth,width", "phvs", "unoptimized ms", "optimized ms", "speedup")
    rows = [header]
    for r in results:
        rows.append((
            r.name or "-", f"{r.depth},{r.width}", str(r.num_phvs),
            f"{r.unoptimized_ms:.2f}", f"{r.optimized_ms:.2f}", f"{r.speedup:.2f}x",
        ))
    widths = [max(len(row[k]) for row in rows) for k in range(len(header))]
    return "\n".join(
        "  ".join(cell.rjust(w) if k else cell.ljust(w) for k, (cell, w) in enumerate(zip(row, widths)))
        for row in rows
    )


def bench_backends(pipeline: Pipeline, backends, num_phvs: int = 50000, repeat: int = 5,
                   seed: int = 0) -> dict:
    """Median seconds per backend on the optimized pipeline; all backends must agree."""
    cfg = TrafficConfig(num_phvs=num_phvs, seed=seed)
    phvs, state = generate_traffic(cfg, pipeline.phv_length, pipeline.state_layout())
    fast = optimize(pipeline)
    prog = lower(fast)
    medians, reference = {}, None
    for backend in backends:
        times = []
        for _ in range(repeat):
            dt, traces = _timed(fast, prog, phvs, state, backend)
            times.append(dt)
        if reference is None:
            reference = traces
        elif traces[0] != reference[0] or traces[1] != reference[1]:
            raise BenchDivergence(f"backend {backend!r} disagrees with {next(iter(medians))!r}")
        medians[backend] = statistics.median(times)
    return medians
