"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
ConvergenceError -> 4. Plain ValueError is reserved for mathematical domain
violations (e.g. unordered cutpoints, PMC outside [0, 10]).
"""


class PmcLogitError(Exception):
    """Base class for toolkit errors."""


class ConfigError(PmcLogitError):
    """Invalid configuration: scheme files, tokenizer settings, pipeline config."""


class DataError(PmcLogitError):
    """Invalid or insufficient data: missing columns, unobserved categories, coverage gaps."""


class CollinearityError(DataError):
    """Covariate matrix is rank deficient; carries the offending column names."""

    def __init__(self, columns: list[str]):
        self.columns = list(columns)
        super().__init__(
            "covariate matrix is rank deficient; linearly dependent columns: "
            + ", ".join(self.columns)
        )


class ConvergenceError(PmcLogitError):
    """An estimator did not converge and a downstream step refused to proceed."""
