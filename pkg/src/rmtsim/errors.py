"""Exception hierarchy shared by all rmtsim modules."""


class RmtsimError(Exception):
    """Base class for every error raised by this package."""


class AluSyntaxError(RmtsimError):
    def __init__(self, offset: int, expected: str, found: str = ""):
        self.offset = offset
        self.expected = expected
        self.found = found
        where = f" (found {found!r})" if found else ""
        super().__init__(f"offset {offset}: expected {expected}{where}")


class ValidationError(RmtsimError):
    """ALU program is syntactically valid but violates a semantic rule."""


class BindingError(RmtsimError):
    pass


class MissingBinding(BindingError):
    def __init__(self, slot):
        self.slot = slot
        super().__init__(f"no value bound for hole {slot.label}")


class OutOfRangeBinding(BindingError):
    def __init__(self, slot, value, valid_range):
        self.slot = slot
        self.value = value
        self.valid_range = valid_range
        super().__init__(
            f"hole {slot.label} bound to {value}, valid range is "
            f"[{valid_range.start}, {valid_range.stop})"
        )


class McSyntaxError(RmtsimError):
    def __init__(self, line: int, text: str):
        self.line = line
        super().__init__(f"line {line}: cannot parse {text!r} as 'name = value'")


class DuplicateName(RmtsimError):
    def __init__(self, name: str, first: int, second: int):
        self.name = name
        self.first = first
        self.second = second
        super().__init__(f"{name!r} defined on line {first} and again on line {second}")


class ValueOverflow(RmtsimError):
    def __init__(self, name: str, value: int):
        self.name = name
        self.value = value
        super().__init__(f"{name!r} = {value} does not fit in 32 unsigned bits")


class HardwareSpecError(RmtsimError):
    pass


class UnknownAlu(HardwareSpecError):
    def __init__(self, name: str, where: str = ""):
        self.name = name
        super().__init__(f"unknown ALU {name!r}{' in ' + where if where else ''}")


class OperandArityExceedsPhv(HardwareSpecError):
    def __init__(self, alu: str, stage: int, arity: int, phv_length: int):
        self.alu = alu
        self.stage = stage
        super().__init__(
            f"ALU {alu!r} in stage {stage} needs {arity} operands "
            f"but the PHV only has {phv_length} containers"
        )


class BindError(RmtsimError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = "\n".join(f"  {d}" for d in self.diagnostics)
        super().__init__(f"machine code does not match the pipeline:\n{lines}")


class SimulationError(RmtsimError):
    pass


class UnboundPipeline(SimulationError):
    def __init__(self):
        super().__init__("pipeline has no machine code bound; holes have no default values")


class PhvLengthMismatch(SimulationError):
    pass


class StateCoverageError(SimulationError):
    pass


class ConfigError(RmtsimError):
    pass


class BenchDivergence(RmtsimError):
    """Optimized and unoptimized runs disagreed; timings are meaningless."""
