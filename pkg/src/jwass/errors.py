"""Exception taxonomy shared across the package.

Callers distinguish three failure classes: the caller handed us something
invalid (ContractError and its shape-specific child DimensionError), an
external solver fell over (SolverError), and optimization blew up at runtime
(TrainingDiverged). The CLI maps the first class to exit code 1 and the rest
to exit code 2.
"""


class ContractError(ValueError):
    """Input violates a documented precondition."""


class DimensionError(ContractError):
    """Array shapes disagree with what the operation requires."""


class SolverError(RuntimeError):
    """The underlying LP solver failed; message carries the instance summary."""


class TrainingDiverged(RuntimeError):
    """A loss or parameter became non-finite during optimization."""
