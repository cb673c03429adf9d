"""Exception types shared across the library."""

from __future__ import annotations


class GroupSieveError(Exception):
    """Base class for all library-specific errors."""


class DenominatorDivisibleByP(GroupSieveError):
    """A rational entry cannot be reduced because p divides its denominator."""


class NotDeterminantOne(GroupSieveError):
    """Matrix fails the det = 1 requirement."""


class UnsupportedDimension(GroupSieveError):
    """Operation restricted to d in {2, 3} was called with another dimension."""


class DimensionMismatch(GroupSieveError):
    """Operands have incompatible dimensions or moduli."""


class CapExceeded(GroupSieveError):
    """Enumeration grew past the element cap; carries the partial count."""

    def __init__(self, partial_size: int, cap: int):
        super().__init__(f"enumeration exceeded cap {cap} (saw {partial_size} elements)")
        self.partial_size = partial_size
        self.cap = cap


class NotRegularSemisimple(GroupSieveError):
    """Cycle type requested for an element whose characteristic polynomial is not squarefree."""


class NotSymmetric(GroupSieveError):
    """Set asserted symmetric but some inverse is missing."""


class MissingIdentity(GroupSieveError):
    """Subset operation requires the identity to be a member."""


class TableMismatch(GroupSieveError):
    """Operands live on different group tables."""


class NotASubgroup(GroupSieveError):
    """Id set fails the closure check required of a subgroup."""


class NotConverged(GroupSieveError):
    """Iterative eigenvalue budget exhausted; carries the best estimate."""

    def __init__(self, maxiter: int, best: float):
        super().__init__(f"no convergence within {maxiter} iterations (best {best!r})")
        self.maxiter = maxiter
        self.best = best


class TooLargeForDense(GroupSieveError):
    """Group order exceeds the dense eigensolver cap."""


class SearchBoundExceeded(GroupSieveError):
    """Prime scan hit its ceiling before finding the requested battery."""


class EmptyBattery(GroupSieveError):
    """Sieve invoked with no battery primes."""


class PredicateMissingPrime(GroupSieveError):
    """Target predicate has no excluded set for a battery prime."""


class InsufficientSignal(GroupSieveError):
    """Too few frequency points above the noise floor to fit a decay rate."""


class ConfigError(GroupSieveError):
    """Malformed or contradictory experiment configuration."""


class VerificationFailure(GroupSieveError):
    """A pre-run verification (surjectivity, digest match) failed."""
