"""Exception hierarchy shared across the package."""


class HamverifyError(Exception):
    """Base class for all errors raised by this package."""


class ExpressionError(HamverifyError):
    pass


class ParseError(ExpressionError):
    """Malformed expression source. Carries the 0-based character offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class ArityError(ParseError):
    """Function called with the wrong number of arguments."""


class VariableIndexError(ParseError):
    """Coordinate index out of range, e.g. q5 in a 2-degree system."""


class EvalError(ExpressionError):
    """Domain violation or non-finite result during evaluation."""


class MissingVariable(EvalError):
    """The point assignment does not cover a variable of the expression."""


class DegenerateSampleBox(HamverifyError):
    """Sampling box plus exclusion predicate rejects (nearly) every point."""


class BlowupDetected(HamverifyError):
    """Trajectory norm exceeded the blowup threshold at parameter value s."""

    def __init__(self, s: float, norm: float):
        super().__init__(f"state norm {norm:.3e} exceeded blowup threshold at s={s:.6g}")
        self.s = s
        self.norm = norm


class StepLimitExceeded(HamverifyError):
    pass


class NotClosedOrbit(HamverifyError):
    """Factor orbit did not return to its section within the horizon."""


class NonConvergedPeriod(HamverifyError):
    pass


class ChartDomainError(HamverifyError):
    """Point lies outside the domain of an action-angle chart."""


class WrongCount(HamverifyError):
    """Operation requires a specific number of integrals (e.g. n = m)."""


class ConfigError(HamverifyError):
    """Malformed run configuration (CLI exit code 2)."""
