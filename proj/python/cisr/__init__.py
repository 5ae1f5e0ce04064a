"""Curriculum induction for safe reinforcement learning.

Thin wrapper over the compiled core. Configs are JSON strings with the same
schema the command line accepts; results come back as plain dicts.
"""

from ._core import (
    CisrError,
    dual_update,
    gp_posterior,
    optimize_teacher,
    run_experiment,
    solve_exact,
    verify_props,
)

__version__ = "1.0.0"

__all__ = [
    "CisrError",
    "dual_update",
    "gp_posterior",
    "optimize_teacher",
    "run_experiment",
    "solve_exact",
    "verify_props",
    "__version__",
]
