"""Exception hierarchy shared by all fidstring modules."""


class FidstringError(Exception):
    """Base class for every error raised by this package."""


class ExpressionError(FidstringError):
    pass


class ParseError(ExpressionError, ValueError):
    """Syntax error in expression text, carrying the character offset."""

    def __init__(self, message: str, position: int, source: str = ""):
        self.message = message
        self.position = position
        self.source = source
        super().__init__(f"{message} at offset {position}")


class UnknownVariableError(ParseError):
    pass


class UnknownFunctionError(ParseError):
    pass


class UnboundVariableError(ExpressionError, KeyError):
    def __str__(self) -> str:
        return f"unbound variable {self.args[0]!r}"


class DomainError(ExpressionError, ArithmeticError):
    """Math domain violation (log of non-positive, division by zero, ...)."""


class CurveError(FidstringError, ValueError):
    pass


class SingularConditionError(FidstringError, ArithmeticError):
    """Coarea weight requested where the condition gradient vanishes."""

    def __init__(self, t: float):
        self.t = t
        super().__init__(f"condition gradient vanishes on the curve at t={t!r}")


class NumericalError(FidstringError, ArithmeticError):
    pass


class UnderflowError(NumericalError):
    pass


class NodeBudgetError(NumericalError):
    pass


class InversionFailure(NumericalError):
    pass


class ConfigError(FidstringError, ValueError):
    """Invalid configuration value, addressed by a dotted path."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")
