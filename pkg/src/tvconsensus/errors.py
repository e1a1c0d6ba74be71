class DomainError(ValueError):
    """A time outside the domain on which the weights are defined."""


class NumericalFailure(ArithmeticError):
    """The integrated state became non-finite."""


class CapacityError(ValueError):
    """Too many agents for exhaustive cut enumeration."""


class ConnectivityHorizonError(RuntimeError):
    """Some cut never accumulated unit influence before the search horizon."""

    def __init__(self, message: str, cut: tuple[int, ...] = (), horizon: float = float("nan")):
        super().__init__(message)
        self.cut = cut
        self.horizon = horizon
