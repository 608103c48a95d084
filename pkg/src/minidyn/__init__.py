"""MiniDyn: a small dynamic-language VM with lazy basic block versioning.

Pipeline: source -> :func:`parser.parse` -> :func:`lower.lower` (SSA IR) ->
:func:`templates.inline_primitives` (type-dispatch templates) -> :class:`vm.VM`
(baseline, analysis, lazy or eager versioning).
"""

from .bbv import INF
from .vm import MODES, VM, Counters, RunResult, build, run

__all__ = ["INF", "MODES", "VM", "Counters", "RunResult", "build", "run"]
__version__ = "0.1.0"
