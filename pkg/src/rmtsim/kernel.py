"""Backend selection for the simulation kernel.

The compiled ``_ckernel`` extension is used when it imports; otherwise the
pure-Python ``_pykernel``.  ``RMTSIM_BACKEND=python`` forces the fallback.
"""

from __future__ import annotations

import importlib
import os

import numpy as np

from rmtsim.lowering import CompiledPipeline

MODE_TICK = 0
MODE_SEQUENTIAL = 1

_MODULES = {"cython": "rmtsim._ckernel", "python": "rmtsim._pykernel"}


def available_backends() -> list[str]:
    names = []
    for name, module in _MODULES.items():
        try:
            importlib.import_module(module)
        except ImportError:
            continue
        names.append(name)
    return names


def _default_backend() -> str:
    forced = os.environ.get("RMTSIM_BACKEND")
    if forced:
        if forced not in _MODULES:
            raise ValueError(f"RMTSIM_BACKEND must be one of {sorted(_MODULES)}, got {forced!r}")
        return forced
    return "cython" if "cython" in available_backends() else "python"


DEFAULT_BACKEND = _default_backend()


def get_backend(name: str | None = None):
    return importlib.import_module(_MODULES[name or DEFAULT_BACKEND])


def run(
    prog: CompiledPipeline,
    phvs: np.ndarray,
    state: np.ndarray,
    mode: int = MODE_TICK,
    backend: str | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Simulate ``phvs`` through ``prog``; ``state`` is updated in place.

    Returns (output PHVs, state at each PHV's entry, state each PHV left
    behind at every stage).
    """
    impl = get_backend(backend)
    phvs = np.ascontiguousarray(phvs, dtype=np.int64)
    n = phvs.shape[0]
    out = np.zeros((n, prog.phv_length), dtype=np.int64)
    entry = np.zeros((n, prog.state_size), dtype=np.int64)
    exit_ = np.zeros((n, prog.state_size), dtype=np.int64)
    impl.run(
        prog.code, prog.alu_entry, prog.stage_start, prog.omux, prog.omux_dynamic, prog.mc,
        prog.stage_state, prog.max_stack, prog.n_locals, phvs, state, mode, out, entry, exit_,
    )
    return out, entry, exit_


def run_stage(
    prog: CompiledPipeline,
    stage: int,
    phv: np.ndarray,
    state: np.ndarray,
    backend: str | None = None,
) -> np.ndarray:
    impl = get_backend(backend)
    out = np.zeros(prog.phv_length, dtype=np.int64)
    impl.run_stage(
        prog.code, prog.alu_entry, prog.stage_start, prog.omux, prog.omux_dynamic, prog.mc,
        prog.max_stack, prog.n_locals, stage, np.ascontiguousarray(phv, dtype=np.int64), out,
        state,
    )
    return out
