"""Exception and warning types shared across the package."""


class ConfigError(Exception):
    """Invalid or unknown configuration key/value; message names the path."""


# geometry
class GeometryError(Exception):
    """Cavity does not fit the requested simulation box."""


class ResolutionError(Exception):
    """Grid too coarse for a geometric feature (e.g. a stack layer)."""


class DomainError(Exception):
    """Coordinate outside the valid range of a geometric function."""


# frequency-domain solver
class SingularityError(Exception):
    """Mass matrix has a zero diagonal entry."""


class AssemblyError(Exception):
    """Operator assembly failed (dimension mismatch, non-passive input)."""


class ConvergenceError(Exception):
    """Iterative eigensolver did not converge; message carries diagnostics."""


class FactorizationError(Exception):
    """Shifted matrix is numerically singular; perturb the shift and retry."""


class DimensionError(Exception):
    """Array layout does not match the operator or parameter set."""


# mode analysis
class UndampedError(Exception):
    """Mode has no resolvable decay; Q is only bounded from below."""


class EmptyFieldError(Exception):
    """Field magnitude below the numerical floor everywhere."""


class ClassificationError(Exception):
    """Nodal count along a cut is ambiguous at the noise floor."""


# mirror stack
class ParameterError(Exception):
    """Unphysical mirror-stack parameters (e.g. no index contrast)."""


class NumericalError(Exception):
    """Transfer-matrix product not finite after rescaling."""


# open-system dynamics
class StepFailure(Exception):
    """Adaptive integrator failed or produced an invalid density matrix."""


class SingularLiouvillian(Exception):
    """Steady-state null space is not one-dimensional at tolerance."""


class VacuumError(Exception):
    """Mean photon number too small for a normalized correlation."""


class FitError(Exception):
    """Envelope fit quality below the acceptance threshold."""


class TruncationWarning(UserWarning):
    """Population reached the Fock-space cutoff during evolution."""


class CacheCorruption(UserWarning):
    """Stored result failed its checksum; entry is recomputed."""
