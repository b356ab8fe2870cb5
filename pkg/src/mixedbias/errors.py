"""Exception hierarchy.

Every error carries the name of the module that raised it so the command
line front end can report provenance.
"""


class MixedBiasError(Exception):
    module = "mixedbias"


class DataError(MixedBiasError):
    """Malformed input data: ragged rows, non-finite cells, missing columns."""

    module = "core-model"


class EvaluationError(MixedBiasError):
    """A per-row quantity evaluated to a non-finite value."""

    module = "core-model"

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class FunctionalError(MixedBiasError):
    module = "core-model"


class BasisError(MixedBiasError):
    module = "design"


class SingularSystemError(MixedBiasError):
    module = "nuisance"

    def __init__(self, message, pivot_index=None):
        super().__init__(message)
        self.pivot_index = pivot_index


class UnsupportedObjectiveError(MixedBiasError):
    module = "nuisance"


class NoSolutionError(MixedBiasError):
    module = "nuisance"


class CannotRescaleError(MixedBiasError):
    module = "nuisance"


class IllPosedGammaError(MixedBiasError):
    module = "estimators"

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DGPError(MixedBiasError):
    module = "simulation"


class PositivityError(DGPError):
    pass


class ReplicationError(MixedBiasError):
    module = "simulation"

    def __init__(self, message, replication=None):
        super().__init__(message)
        self.replication = replication


class ConfigError(MixedBiasError):
    """Invalid run configuration; ``violations`` lists every problem found."""

    module = "cli"

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
