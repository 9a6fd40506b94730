"""Exception types shared across the pipeline; each maps to a CLI exit code."""


class TxPatternError(Exception):
    exit_code = 1


class DataError(TxPatternError):
    """Bad or missing input data, or a missing prerequisite artifact."""

    exit_code = 2


class NumericalError(TxPatternError):
    """Non-finite losses or gradients during training."""

    exit_code = 3
