"""Exception hierarchy shared by every module.

Each class carries the process exit code the CLI maps it to.
"""

from __future__ import annotations


class TsGraphError(Exception):
    """Base class; ``module`` names the subsystem that raised."""

    exit_code = 1

    def __init__(self, message: str, *, module: str | None = None):
        self.module = module
        prefix = f"[{module}] " if module else ""
        super().__init__(prefix + message)


class InputError(TsGraphError, ValueError):
    exit_code = 2


class StructureError(InputError):
    """A graph operation received a graph that is not decomposable."""


class NumericalError(TsGraphError, ArithmeticError):
    exit_code = 3


class SingularMatrixError(NumericalError):
    pass


class RankDeficiencyError(NumericalError):
    pass


class ConfigError(TsGraphError, ValueError):
    exit_code = 4


class GenerationError(TsGraphError, RuntimeError):
    exit_code = 4
