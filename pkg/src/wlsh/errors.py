"""Exception hierarchy shared by the library and the CLI."""


class WlshError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(WlshError, ValueError):
    """Invalid parameters or inputs (CLI exit code 2)."""


class DimensionMismatch(ConfigError):
    pass


class UnassignableError(WlshError):
    """A derived family is unusable: the lifted near bound is not below the far bound."""

    def __init__(self, base_id: int, target_id: int, x_up: float, y_down: float):
        self.base_id = base_id
        self.target_id = target_id
        self.x_up = x_up
        self.y_down = y_down
        super().__init__(
            f"weight vector {target_id} cannot use tables of base {base_id}: "
            f"x_up={x_up:.6g} >= y_down={y_down:.6g}"
        )


class InfeasiblePlanError(WlshError):
    """No partition satisfies the per-group table cap (CLI exit code 3)."""


class IndexFormatError(WlshError, OSError):
    """Corrupt, truncated or mismatched index/dataset file (CLI exit code 4)."""
