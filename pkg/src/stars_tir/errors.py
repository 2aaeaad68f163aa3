"""Exception hierarchy shared by every module of the package."""


class StarsError(Exception):
    """Base class for all errors raised by :mod:`stars_tir`."""


class DimensionTooSmall(StarsError, ValueError):
    pass


class UnsupportedOrder(StarsError, ValueError):
    pass


class NegativeThreshold(StarsError, ValueError):
    pass


class NonPositiveSigma(StarsError, ValueError):
    pass


class ShapeMismatch(StarsError, ValueError):
    pass


class ZeroBeta1(StarsError, ValueError):
    pass


class ZeroBeta2(StarsError, ValueError):
    pass


class NegativeRatio(StarsError, ValueError):
    pass


class EmptyChannelList(StarsError, ValueError):
    pass


class InvalidScale(StarsError, ValueError):
    pass


class DegenerateBox(StarsError, ValueError):
    pass


class IndivisibleDimensions(StarsError, ValueError):
    pass


class EmptyInput(StarsError, ValueError):
    pass


class EmptyFrame(StarsError, ValueError):
    pass


class InvalidConfig(StarsError, ValueError):
    pass


# dataset / config / output errors (cli exit code 2 unless noted)


class SequenceReadError(StarsError):
    pass


class MissingGroundTruth(SequenceReadError):
    pass


class FrameCountMismatch(SequenceReadError):
    pass


class UnparsableLine(SequenceReadError):
    def __init__(self, path, lineno, line):
        self.path = path
        self.lineno = lineno
        self.line = line
        super().__init__(f"{path}:{lineno}: cannot parse box from {line!r}")


class UnknownKey(StarsError, KeyError):
    def __init__(self, key, section, candidates=()):
        self.key = key
        self.section = section
        self.candidates = list(candidates)
        hint = f" (did you mean {', '.join(self.candidates)}?)" if self.candidates else ""
        where = f"key '{key}' in section [{section}]" if section else f"section [{key}]"
        super().__init__(f"unknown {where}{hint}")

    def __str__(self):
        return self.args[0]


class TypeMismatch(StarsError, TypeError):
    pass


class WriteError(StarsError, OSError):
    pass


class ConvergenceWarning(UserWarning):
    """Emitted when an iterative solver stops at its iteration cap."""
