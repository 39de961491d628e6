class CubicStringError(Exception):
    """Base class for every failure raised by the toolkit"""


class SchemaError(CubicStringError, ValueError):
    """Malformed input document"""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        if line:
            message = f'{message} (line {line}, column {column})'
        super().__init__(message)
        self.line = line
        self.column = column


class GridError(CubicStringError, ValueError):
    pass


class DomainError(CubicStringError, ValueError):
    """Argument outside the domain of an operation"""


class QuadratureError(CubicStringError, RuntimeError):
    pass


class JostConvergenceError(CubicStringError, RuntimeError):
    pass


class BoundStateCandidate(CubicStringError, ArithmeticError):
    """t_00 vanishes (to tolerance) at lam, coefficients are undefined there"""

    def __init__(self, lam: complex, modulus: float):
        super().__init__(f'|t00({lam:.6g})| = {modulus:.3g}, bound-state candidate')
        self.lam = lam
        self.modulus = modulus


class SingularSystemError(CubicStringError, ArithmeticError):
    def __init__(self, message: str, condition: float):
        super().__init__(f'{message} (condition estimate {condition:.3g})')
        self.condition = condition
