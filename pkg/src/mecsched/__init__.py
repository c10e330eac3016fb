"""Deadline-aware task scheduling on a multi-CPU edge server.

FCFS and STF baselines, a genetic algorithm, and an exact time-indexed
model solved by branch and bound, plus a replicated experiment harness.
"""

from .bnb import BUDGET_EXHAUSTED, OPTIMAL, ExactResult, solve_exact
from .errors import (ConfigError, InfeasibleTermError, InsufficientSamplesError, InvalidScheduleError,
                     MecSchedError, MissingCellsError, ModelError, ScheduleMismatchError, WorkloadError)
from .experiment import (ResultRow, ResultTable, RunRecord, Scenario, emit_plot_data, run_experiment,
                         runtime_benchmark, write_results)
from .ga import GaParams, GaResult, decode, encode, run_ga
from .greedy import schedule_fcfs, schedule_stf
from .milp import MilpModel, build_model, export_lp
from .model import (Assignment, ConfidenceInterval, ObjectiveWeights, RunMetrics, Schedule, Task, TaskSet,
                    Violation, compute_metrics, confidence_interval, evaluate_objective, objective_exact,
                    validate_schedule)
from .workload import (Distribution, WorkloadConfig, generate_workload, read_taskset, transmission_delay,
                       write_taskset)

__version__ = "0.1.0"
