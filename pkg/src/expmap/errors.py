"""Exception hierarchy shared by every module."""


class ExpMapError(Exception):
    """Base class for all library errors."""


class ModelError(ExpMapError, ValueError):
    """Model definition violates an invariant; ``path`` locates the offending field."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class StripViolation(ExpMapError, ValueError):
    """An MGF was queried outside its analyticity strip."""

    def __init__(self, where: str, re_z: float, strip: tuple[float, float]):
        self.where = where
        self.re_z = re_z
        self.strip = strip
        super().__init__(
            f"Re(z)={re_z:.12g} outside strip ({strip[0]:.12g}, {strip[1]:.12g}) of {where}"
        )


class NonFinite(ExpMapError, ArithmeticError):
    """Matrix exponential overflowed."""

    def __init__(self, scale: float):
        self.scale = scale
        super().__init__(f"matrix exponential overflowed (t*max|eig| ~ {scale:.6g})")


class WrongStateCount(ExpMapError, ValueError):
    pass


class NotIntegrable(ExpMapError, ValueError):
    def __init__(self, witness: str):
        self.witness = witness
        super().__init__(f"F(1) does not exist: {witness}")


class NoValidContour(ExpMapError, ValueError):
    pass


class PoleProximity(ExpMapError, ValueError):
    pass


class GridTooCoarse(ExpMapError, ValueError):
    pass


class DegenerateDenominator(ExpMapError, ZeroDivisionError):
    pass


class Truncated(ExpMapError, RuntimeError):
    """A series hit its term cap before reaching the requested tolerance."""

    def __init__(self, max_terms: int, bound: float):
        self.max_terms = max_terms
        self.bound = bound
        super().__init__(f"series cap {max_terms} reached with tail bound {bound:.3g}")


class DivergentParameters(ExpMapError, ValueError):
    pass
