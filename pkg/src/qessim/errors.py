"""Exception hierarchy shared by all qessim modules.

The CLI maps these onto process exit codes (see cli.py):
config errors -> 2, numerical divergence -> 3, low-entropy abort -> 4.
"""


class QessimError(Exception):
    """Base class for all qessim errors."""


class ConfigError(QessimError):
    """Invalid configuration or parameter set."""


class DivergenceError(QessimError):
    """Integration produced a non-finite state variable."""

    def __init__(self, variable: str, time_ns: float):
        self.variable = variable
        self.time_ns = time_ns
        super().__init__(
            f"non-finite value in {variable} at t = {time_ns:.6f} ns; "
            "reduce dt or check parameters"
        )


class LowEntropyError(QessimError):
    """Measured min-entropy fell below the configured floor."""

    def __init__(self, h_measured: float, h_floor: float):
        self.h_measured = h_measured
        self.h_floor = h_floor
        super().__init__(
            f"measured min-entropy {h_measured:.3f} bits/sample is below the "
            f"floor of {h_floor:.3f} bits/sample; refusing to extract"
        )


class DegenerateInputError(QessimError):
    """Statistical input is degenerate (constant, empty, or too short)."""
