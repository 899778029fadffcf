"""Exception hierarchy shared by the simulator modules."""


class PimSimError(Exception):
    """Base class for every error raised by pimsim."""


class OperandError(PimSimError, ValueError):
    """Operand value or width outside its declared range."""


class ZeroOperand(OperandError):
    """Leading-one detection was asked for on a zero operand."""


class WidthTooLarge(PimSimError, ValueError):
    pass


class AddressOutOfRange(PimSimError, IndexError):
    pass


class WriteDuringCompute(PimSimError, RuntimeError):
    """Storage write attempted while PIM_en is asserted."""


class LengthMismatch(PimSimError, ValueError):
    pass


class PrecisionMismatch(PimSimError, ValueError):
    pass


class OverCapacityFilter(PimSimError, ValueError):
    """A single filter does not fit in one column group of the macro."""


class MaskShapeMismatch(PimSimError, ValueError):
    pass


class PlanGeometryError(PimSimError, ValueError):
    """Mapping plan and macro geometry disagree."""


class UnknownCorner(PimSimError, KeyError):
    pass


class FileFormatError(PimSimError, ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)
