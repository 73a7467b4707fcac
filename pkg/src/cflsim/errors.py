"""Exception types shared across the simulator."""


class ConfigError(ValueError):
    """Invalid configuration value; `field` names the offending entry."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class NumericDivergenceError(RuntimeError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, message: str, *, round_idx: int | None = None,
                 epoch: int | None = None, step: int | None = None):
        self.round_idx = round_idx
        self.epoch = epoch
        self.step = step
        ctx = ", ".join(
            f"{k}={v}" for k, v in
            (("round", round_idx), ("epoch", epoch), ("step", step))
            if v is not None
        )
        super().__init__(f"{message} ({ctx})" if ctx else message)

    def with_round(self, round_idx: int) -> "NumericDivergenceError":
        return NumericDivergenceError(
            str(self).split(" (")[0], round_idx=round_idx,
            epoch=self.epoch, step=self.step,
        )


class DegenerateDeltaError(ValueError):
    """A zero-norm update where a direction was required."""
