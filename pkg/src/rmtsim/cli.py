"""rmtsim command line: gen, sim, fuzz and bench.

Exit codes: 0 pass, 1 semantic failure, 2 usage or configuration error,
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from rmtsim.bench import bench_pipeline, format_results, size_trend
from rmtsim.errors import BenchDivergence, ConfigError, RmtsimError
from rmtsim.fixtures import ALU_DIR, BENCH_SHAPES, PIPELINE_DIR, fixture_names
from rmtsim.fuzzer import (
    ExplicitState,
    RandomState,
    TrafficConfig,
    ZERO_STATE,
    fuzz_test,
    generate_traffic,
    get_oracle,
    mutation_campaign,
    parse_mutation_file,
)
from rmtsim.machine_code import parse_machine_code
from rmtsim.pipeline import bind, build_pipeline, describe, load_alus, load_hardware_spec, optimize
from rmtsim.simulator import Mode, simulate, traces_to_json, traces_to_text

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_INTERNAL = 3

ALU_PATH_ENV = "RMTSIM_ALU_PATH"


class _Usage(Exception):
    """Bad command-line input caught after argparse."""


def _alu_search_path(args) -> list[Path]:
    dirs = [Path(p) for p in args.alu_path or []]
    env = os.environ.get(ALU_PATH_ENV)
    if env:
        dirs.extend(Path(p) for p in env.split(os.pathsep) if p)
    dirs.append(ALU_DIR)
    return dirs


def _resolve_spec(arg: str) -> tuple[Path, Path | None]:
    """A hardware spec file, or the name of a bundled fixture (with its machine code)."""
    path = Path(arg)
    if path.is_file():
        return path, None
    if arg in fixture_names():
        return PIPELINE_DIR / f"{arg}.toml", PIPELINE_DIR / f"{arg}.mc"
    raise ConfigError(f"{arg}: no such file or bundled fixture (have {', '.join(fixture_names())})")


def _read_mc(args, default: Path | None):
    if args.mc == "-":
        return parse_machine_code(sys.stdin.read())
    if args.mc:
        return parse_machine_code(Path(args.mc).read_text(encoding="utf-8"))
    if default is not None:
        return parse_machine_code(default.read_text(encoding="utf-8"))
    return None


def _load(args, need_mc: bool = True):
    """Parse everything up front; returns (pipeline, bound pipeline or None)."""
    spec_path, default_mc = _resolve_spec(args.spec)
    spec = load_hardware_spec(spec_path)
    pipeline = build_pipeline(spec, load_alus(spec.alu_names(), _alu_search_path(args)))
    mc = _read_mc(args, default_mc)
    if mc is None:
        if need_mc:
            raise _Usage("this command needs machine code (--mc FILE, or - for stdin)")
        return pipeline, None
    return pipeline, bind(pipeline, mc)


def _state_init(args):
    value = args.state_init
    if value == "random":
        return RandomState(args.container_min, args.container_max)
    if value == "zero":
        return ZERO_STATE
    try:
        data = json.loads(Path(value).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"--state-init: expected random, zero or a JSON file ({exc})") from exc
    return ExplicitState({k: list(v) for k, v in data.items()})


def _traffic(args, num_phvs: int, seed: int) -> TrafficConfig:
    return TrafficConfig(
        num_phvs=num_phvs,
        seed=seed,
        container_min=args.container_min,
        container_max=args.container_max,
        state_init=_state_init(args),
    )


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.optimize and not args.mc and not _resolve_spec(args.spec)[1]:
        raise _Usage("optimization requires machine code")
    pipeline, bound = _load(args, need_mc=False)
    if args.catalog:
        lines = [
            f"{e.name} [{e.valid_range.start}, {e.valid_range.stop})" for e in pipeline.catalog
        ]
        _write("\n".join(lines) + "\n", None)
        return EXIT_OK
    target = bound if bound is not None else pipeline
    if args.optimize:
        target = optimize(bound)
    _write(describe(target), None)
    return EXIT_OK


def cmd_sim(args) -> int:
    _, bound = _load(args)
    if args.optimize:
        bound = optimize(bound)
    cfg = _traffic(args, args.phvs, args.seed)
    phvs, state = generate_traffic(cfg, bound.phv_length, bound.state_layout())
    input_trace, output_trace = simulate(bound, phvs, state, mode=Mode(args.mode))
    text = traces_to_json(input_trace, output_trace) + "\n" if args.json else traces_to_text(
        input_trace, output_trace
    )
    _write(text, args.out)
    return EXIT_OK


def cmd_fuzz(args) -> int:
    _, bound = _load(args)
    if args.mutations:
        suite = parse_mutation_file(Path(args.mutations).read_text(encoding="utf-8"))
        oracle = get_oracle(args.oracle or suite.oracle or "")
        cfg = suite.traffic or _traffic(args, 50000, 0)
        if args.phvs is not None or args.seed is not None:
            cfg = _traffic(
                args,
                args.phvs if args.phvs is not None else cfg.num_phvs,
                args.seed if args.seed is not None else cfg.seed,
            )
        report = mutation_campaign(
            bound, oracle, cfg, suite.mutations, jobs=args.jobs, specialize=args.optimize
        )
        print(report.table())
        if args.results:
            Path(args.results).write_text(report.to_json() + "\n", encoding="utf-8")
        return EXIT_OK if report.all_as_expected else EXIT_FAIL

    if not args.oracle:
        raise _Usage("--oracle is required")
    oracle = get_oracle(args.oracle)
    cfg = _traffic(args, args.phvs if args.phvs is not None else 50000, args.seed or 0)
    target = optimize(bound) if args.optimize else bound
    verdict = fuzz_test(target, oracle, cfg, collect_all=args.all)
    if args.results:
        record = {
            "oracle": oracle.name,
            "verdict": verdict.outcome.value,
            "seed": verdict.seed,
            "num_phvs": verdict.num_phvs,
            "failures": [f.to_record() for f in verdict.failures],
        }
        Path(args.results).write_text(json.dumps(record, indent=2) + "\n", encoding="utf-8")
    if verdict.passed:
        print(f"PASS: {cfg.num_phvs} PHVs matched oracle {oracle.name!r} (seed {cfg.seed})")
        return EXIT_OK
    print(f"FAIL: oracle {oracle.name!r} disagrees (seed {cfg.seed}, {len(verdict.failures)} mismatch(es))")
    for cex in verdict.failures:
        print(cex.describe())
    return EXIT_FAIL


def cmd_bench(args) -> int:
    if args.phvs < 1:
        raise _Usage("--phvs must be at least 1")
    if args.repeat < 1:
        raise _Usage("--repeat must be at least 1")
    if args.shapes:
        names = sorted(BENCH_SHAPES)
    elif args.spec:
        names = [args.spec]
    else:
        raise _Usage("give a SPEC or --shapes")
    results = []
    for name in names:
        args.spec = name
        _, bound = _load(args)
        label = Path(name).stem
        results.append(bench_pipeline(bound, args.phvs, args.repeat, args.seed, label))
    print(format_results(results))
    if len(results) >= 3:
        print(f"spearman(depth*width, ms saved) = {size_trend(results):.2f}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, spec_optional: bool = False) -> None:
    p.add_argument("spec", nargs="?" if spec_optional else None,
                   help="hardware spec (.toml) or bundled fixture name")
    p.add_argument("--alu-path", action="append", metavar="DIR",
                   help=f"directory of .alu files; repeatable; also ${ALU_PATH_ENV}")
    p.add_argument("--mc", metavar="FILE", help="machine code file, - for stdin")
    p.add_argument("--optimize", action="store_true", help="specialize against the machine code")


def _add_traffic(p: argparse.ArgumentParser, phvs_default, seed_default) -> None:
    p.add_argument("--phvs", type=int, default=phvs_default, help="number of PHVs")
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--state-init", default="random", metavar="random|zero|FILE.json")
    p.add_argument("--container-min", type=int, default=0)
    p.add_argument("--container-max", type=int, default=10000)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rmtsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="describe a pipeline or list its slot catalog")
    _add_common(gen)
    gen.add_argument("--catalog", action="store_true", help="list machine-code slots and ranges")
    gen.set_defaults(func=cmd_gen)

    sim = sub.add_parser("sim", help="simulate random traffic and print the traces")
    _add_common(sim)
    _add_traffic(sim, 10, 0)
    sim.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.TICK_ACCURATE.value)
    sim.add_argument("--json", action="store_true", help="structured output")
    sim.add_argument("--out", metavar="FILE")
    sim.set_defaults(func=cmd_sim)

    fuzz = sub.add_parser("fuzz", help="check a pipeline against a specification oracle")
    _add_common(fuzz)
    _add_traffic(fuzz, None, None)
    fuzz.add_argument("--oracle", metavar="NAME")
    fuzz.add_argument("--mutations", metavar="FILE", help="TOML mutation suite")
    fuzz.add_argument("--results", metavar="FILE", help="write JSON results")
    fuzz.add_argument("--all", action="store_true", help="report every mismatch, not just the first")
    fuzz.add_argument("--jobs", type=int, default=1, help="worker processes for mutation suites")
    fuzz.set_defaults(func=cmd_fuzz)

    bench = sub.add_parser("bench", help="time unoptimized vs optimized simulation")
    _add_common(bench, spec_optional=True)
    _add_traffic(bench, 50000, 0)
    bench.add_argument("--repeat", type=int, default=5)
    bench.add_argument("--shapes", action="store_true", help="run every bundled benchmark shape")
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _Usage as exc:
        print(f"rmtsim {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BenchDivergence as exc:
        print(f"rmtsim {args.command}: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (RmtsimError, OSError, ValueError) as exc:
        print(f"rmtsim {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - last-resort contract: exit 3
        print(f"rmtsim {args.command}: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
