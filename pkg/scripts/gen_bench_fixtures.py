"""Regenerate the benchmark pipeline fixtures that use seeded random machine code.

Handcrafted fixtures (sampling, heavy_hitter) are left alone.
"""

import random

from rmtsim.fixtures import ALU_DIR, BENCH_SHAPES, PIPELINE_DIR, random_machine_code
from rmtsim.pipeline import HardwareSpec, build_pipeline, load_alus

HANDCRAFTED = {"sampling", "heavy_hitter"}


def main() -> None:
    for index, (name, (depth, width, alu)) in enumerate(sorted(BENCH_SHAPES.items())):
        if name in HANDCRAFTED:
            continue
        spec = HardwareSpec.uniform(depth, width, max(2, width), alu)
        pipeline = build_pipeline(spec, load_alus(spec.alu_names(), [ALU_DIR]))
        mc = random_machine_code(pipeline, random.Random(1000 + index), wide_immediates=False)
        (PIPELINE_DIR / f"{name}.toml").write_text(spec.to_toml())
        (PIPELINE_DIR / f"{name}.mc").write_text(mc.serialize())
        print(f"wrote {name}: {depth}x{width} {alu}, {len(mc)} slots")


if __name__ == "__main__":
    main()
