"""revlang: a reversible DSL toolchain.

Parse `.rnl` programs, invert them mechanically, execute them in either
direction with reversibility checks, differentiate them by reverse
computing, and simulate the classic time-space trade-off schedules.
"""

from .autodiff import (GradRequest, HessianResult, finite_difference,
                       gradient, hessian, jacobian)
from .errors import Diagnostic, RevError, RevLangError, SourceSpan
from .interpreter import (CheckReport, ExecOptions, canonical_view_identity,
                          check_reversibility, read_view, run, uncall,
                          write_view)
from .ir import Program, validate
from .parser import parse_program, pretty_print
from .reverser import expand_routines, invert_function, invert_statement
from .tradeoff import (ScheduleCounters, StepProgram, analytic_rev_cost,
                       bennett_counts, bennett_run, eta, treeverse_run)
from .values import Array, Complex, Dual, Fixed, GVar, Record, ULog

__all__ = [
    "Array", "CheckReport", "Complex", "Diagnostic", "Dual", "ExecOptions",
    "Fixed", "GVar", "GradRequest", "HessianResult", "Program", "Record",
    "RevError", "RevLangError", "ScheduleCounters", "SourceSpan",
    "StepProgram", "ULog", "analytic_rev_cost", "bennett_counts",
    "bennett_run", "canonical_view_identity", "check_reversibility", "eta",
    "expand_routines", "finite_difference", "gradient", "hessian",
    "invert_function", "invert_statement", "jacobian", "parse_program",
    "pretty_print", "read_view", "run", "treeverse_run", "uncall",
    "validate", "write_view",
]

__version__ = "0.1.0"
