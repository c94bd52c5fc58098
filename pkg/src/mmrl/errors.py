"""Exception hierarchy shared across the workbench."""


class MmrlError(Exception):
    """Base class for all workbench errors."""


# -- ingest ------------------------------------------------------------------

class MalformedRecord(MmrlError):
    def __init__(self, line_no: int, reason: str = ""):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}" if reason else f"line {line_no}")


class NonPositivePrice(MmrlError):
    pass


class NonTradeEvent(MmrlError):
    pass


class BoundaryOutOfRange(MmrlError):
    pass


# -- orderbook ---------------------------------------------------------------

class EmptySide(MmrlError):
    pass


class EmptyFills(MmrlError):
    pass


# -- matchsim ----------------------------------------------------------------

class InsufficientDepth(MmrlError):
    """Opposing side exhausted before the full quantity filled.

    Carries the fills executed before exhaustion.
    """

    def __init__(self, fills, requested: float):
        self.fills = list(fills)
        self.requested = requested
        filled = sum(f.quantity for f in self.fills)
        super().__init__(f"filled {filled} of {requested} before book exhausted")


# -- indicators --------------------------------------------------------------

class WindowTooShort(MmrlError):
    pass


class IndexOutOfRange(MmrlError):
    pass


class EmptySeries(MmrlError):
    pass


class InsufficientHistory(MmrlError):
    pass


# -- neural ------------------------------------------------------------------

class InvalidSpec(MmrlError):
    pass


class DimensionMismatch(MmrlError):
    pass


class NonFiniteInput(MmrlError):
    pass


class ShapeMismatch(MmrlError):
    pass


class CorruptCheckpoint(MmrlError):
    pass


# -- agent / environments ----------------------------------------------------

class EmptyMemory(MmrlError):
    pass


class EpisodeDone(MmrlError):
    pass


class OutOfRange(MmrlError):
    pass


# -- bench / synth -----------------------------------------------------------

class SeriesTooShort(MmrlError):
    pass


class InvalidConfig(MmrlError):
    pass
