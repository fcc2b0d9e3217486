"""Exception types shared across the package."""


class NumericFailure(ArithmeticError):
    """Non-finite values, overflow or a degenerate matrix during a computation."""


class NonzeroMeanError(ValueError):
    """Cumulative integration along a periodic axis of a field with nonzero mean."""


class TowerError(RuntimeError):
    """The tower construction could not proceed past ``level``."""

    def __init__(self, level, reason, residual=None):
        self.level = level
        self.reason = reason
        self.residual = residual
        msg = f"tower aborted at level {level}: {reason}"
        if residual is not None:
            msg += f" (residual {residual:.3e})"
        super().__init__(msg)


class SeedNotClosed(TowerError):
    def __init__(self, residual):
        super().__init__(0, "seed is not D_delta-closed", residual)


class PrimitiveFailure(TowerError):
    """The D_delta-primitive solver could not invert a closed current."""


class DerivativeUnavailable(LookupError):
    """A derivation cannot be evaluated on the given coefficient representation."""
