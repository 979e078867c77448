"""Exception hierarchy for the workbench.

Every error derives from ``WorkbenchError`` so the controller can map it to
an exit code; most also derive from the builtin a caller would naturally
catch (``ValueError`` for bad inputs, ``RuntimeError`` for solver trouble).
"""


class WorkbenchError(Exception):
    """Base class for all workbench failures."""


class DomainError(WorkbenchError, ValueError):
    """Invalid domain parameters, or a point outside the domain."""


class DerivativeOrderError(WorkbenchError, ValueError):
    """Requested derivative order exceeds the field's cap."""


class CatalogError(WorkbenchError, ValueError):
    """Unknown catalog entry or parameter outside its documented range."""


class SpecParseError(WorkbenchError, ValueError):
    """Malformed field specification text."""


class ResolutionError(WorkbenchError, ValueError):
    """Grid too coarse for the requested operation."""


class DecompositionError(WorkbenchError):
    """Critical components do not allow a clean region decomposition."""


class FluxError(WorkbenchError):
    """Flux extraction could not proceed."""


class PuiseuxFitError(FluxError):
    """No Puiseux lattice fits the endpoint window."""


class SolverError(WorkbenchError, RuntimeError):
    """Elliptic or ODE solver failure."""


class ConvergenceError(SolverError):
    """Newton or Picard iteration stagnated."""

    def __init__(self, message, last_residual=None):
        super().__init__(message)
        self.last_residual = last_residual


class SignChangeError(WorkbenchError, ValueError):
    """Field changes sign where a single sign is required."""


class SweepError(WorkbenchError):
    """Moving-plane sweep cannot start or has no admissible states."""


class ChartError(WorkbenchError, ValueError):
    """Fermi chart is not injective, or a point lies outside it."""


class SeriesObstructionError(WorkbenchError):
    """Order-by-order recursion hit a singular step."""


class UsageError(WorkbenchError):
    """Command-line usage error."""
