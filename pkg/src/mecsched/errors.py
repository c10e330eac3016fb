"""Exception hierarchy. Each error carries a short machine-readable ``code``."""


class MecSchedError(Exception):
    code = "error"


class InfeasibleTermError(MecSchedError):
    code = "infeasible-term"


class ScheduleMismatchError(MecSchedError):
    code = "schedule-mismatch"


class InvalidScheduleError(MecSchedError):
    code = "invalid-schedule"


class InsufficientSamplesError(MecSchedError):
    code = "insufficient-samples"


class WorkloadError(MecSchedError):
    code = "workload"


class ModelError(MecSchedError):
    code = "model"


class ConfigError(MecSchedError):
    code = "config"


class MissingCellsError(MecSchedError):
    code = "missing-cells"
