"""Machine code: named unsigned integers that configure a pipeline.

Wire format, one pair per line::

    # comment
    stage_0_alu_0_opcode_0 = 1
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from rmtsim.errors import DuplicateName, McSyntaxError, ValueOverflow

NAME_RE = re.compile(r"[a-z0-9_]+")
_LINE_RE = re.compile(r"([a-z0-9_]+)\s*=\s*([0-9]+)")
MAX_VALUE = (1 << 32) - 1


@dataclass(frozen=True)
class MachineCode:
    pairs: tuple = ()
    index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {}
        for name, value in self.pairs:
            if name in index:
                raise DuplicateName(name, 0, 0)
            if not 0 <= value <= MAX_VALUE:
                raise ValueOverflow(name, value)
            index[name] = value
        object.__setattr__(self, "index", index)

    @classmethod
    def from_mapping(cls, values: Mapping[str, int]) -> "MachineCode":
        return cls(tuple(values.items()))

    def __getitem__(self, name: str) -> int:
        return self.index[name]

    def __contains__(self, name: object) -> bool:
        return name in self.index

    def __len__(self) -> int:
        return len(self.pairs)

    def names(self) -> list[str]:
        return [name for name, _ in self.pairs]

    def with_value(self, name: str, value: int) -> "MachineCode":
        """Copy with one slot changed (or appended if absent)."""
        if name not in self.index:
            return MachineCode(self.pairs + ((name, value),))
        return MachineCode(tuple((n, value if n == name else v) for n, v in self.pairs))

    def without(self, name: str) -> "MachineCode":
        return MachineCode(tuple((n, v) for n, v in self.pairs if n != name))

    def serialize(self) -> str:
        return "".join(f"{name} = {value}\n" for name, value in self.pairs)


def parse_machine_code(source: str) -> MachineCode:
    pairs = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE_RE.fullmatch(line)
        if m is None:
            raise McSyntaxError(lineno, raw)
        name, value = m.group(1), int(m.group(2))
        if name in seen:
            raise DuplicateName(name, seen[name], lineno)
        if value > MAX_VALUE:
            raise ValueOverflow(name, value)
        seen[name] = lineno
        pairs.append((name, value))
    return MachineCode(tuple(pairs))


class EntryKind(str, enum.Enum):
    ALU_HOLE = "alu_hole"
    INPUT_MUX = "input_mux_ctrl"
    OUTPUT_MUX = "output_mux_ctrl"


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    valid_range: range
    kind: EntryKind

    def __str__(self) -> str:
        return f"{self.name} [{self.valid_range.start}, {self.valid_range.stop}) {self.kind.value}"


@dataclass(frozen=True)
class SlotCatalog:
    entries: tuple = ()

    def __post_init__(self):
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("slot catalog names must be unique")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def lookup(self, name: str) -> CatalogEntry:
        for entry in self.entries:
            if entry.name == name:
                return entry
        raise KeyError(name)


class DiagnosticKind(str, enum.Enum):
    MISSING_SLOT = "MissingSlot"
    UNKNOWN_NAME = "UnknownName"
    OUT_OF_RANGE = "OutOfRange"


@dataclass(frozen=True)
class Diagnostic:
    kind: DiagnosticKind
    name: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.kind.value}: {self.name}{' (' + self.detail + ')' if self.detail else ''}"


def check_against_catalog(mc: MachineCode, catalog: Iterable[CatalogEntry]) -> list[Diagnostic]:
    """Diagnostics for every way ``mc`` fails to configure exactly ``catalog``."""
    diagnostics = []
    known = set()
    for entry in catalog:
        known.add(entry.name)
        if entry.name not in mc:
            diagnostics.append(Diagnostic(DiagnosticKind.MISSING_SLOT, entry.name))
        elif mc[entry.name] not in entry.valid_range:
            diagnostics.append(
                Diagnostic(
                    DiagnosticKind.OUT_OF_RANGE,
                    entry.name,
                    f"value {mc[entry.name]} not in "
                    f"[{entry.valid_range.start}, {entry.valid_range.stop})",
                )
            )
    for name in mc.names():
        if name not in known:
            diagnostics.append(Diagnostic(DiagnosticKind.UNKNOWN_NAME, name))
    return diagnostics
