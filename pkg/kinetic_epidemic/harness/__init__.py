"""Run loop, convergence and diffusion-limit studies, and the CLI commands."""

from .ap import APTable, ap_study
from .convergence import ConvergenceTable, advection_self_test, convergence_study
from .runner import RunResult, run_simulation

__all__ = [
    "APTable",
    "ConvergenceTable",
    "RunResult",
    "advection_self_test",
    "ap_study",
    "convergence_study",
    "run_simulation",
]
