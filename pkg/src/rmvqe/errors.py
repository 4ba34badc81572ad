"""Exception hierarchy shared by every module."""

from __future__ import annotations


class RMVQEError(Exception):
    """Base class for all package errors."""

    #: process exit code used by the command line driver
    exit_code = 1

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "message": str(self)}


class DimensionError(RMVQEError, ValueError):
    """Operands act on different numbers of qubits."""


class DomainError(RMVQEError, ValueError):
    """An argument lies outside the domain of the operation."""


class LayoutError(RMVQEError, ValueError):
    """Register layout is inconsistent (overlaps, missing couplings, ...)."""

    exit_code = 2


class UnsupportedLayoutError(LayoutError):
    """Layout is valid but not handled (e.g. not close-coupling)."""


class ParameterError(RMVQEError, KeyError):
    """A circuit references an unresolved variational parameter."""

    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class ConfigError(RMVQEError, ValueError):
    exit_code = 2


class InputError(RMVQEError, ValueError):
    """Bad or missing input data (integral files, boundary amplitudes)."""

    exit_code = 4


class ParseError(InputError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}".strip())

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["line"] = self.line
        d["path"] = self.path
        return d


class SchemaError(InputError):
    """Integral file header disagrees with its body."""


class ConvergenceError(RMVQEError, RuntimeError):
    exit_code = 3

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class PoleError(RMVQEError, ValueError):
    """Scattering energy falls inside the pole guard of an eigenvalue."""

    def __init__(self, energy: float, pole: float, guard: float):
        self.energy = energy
        self.pole = pole
        self.guard = guard
        super().__init__(
            f"E = {energy!r} Ha lies within {guard:g} Ha of the pole E_k = {pole!r} Ha"
        )
