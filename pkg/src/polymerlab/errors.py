"""Exception and warning types shared across the package."""

from __future__ import annotations


class PolymerLabError(Exception):
    """Base class for package errors."""


class NonDegenerateViolated(PolymerLabError, ValueError):
    """The disorder law is a point mass or otherwise invalid."""


class NonFinite(PolymerLabError, ArithmeticError):
    """A log moment generating function diverged."""


class AssumptionViolated(PolymerLabError, ValueError):
    """The moment window [-2 beta, 2 beta] is not finite."""

    def __init__(self, alpha: float, message: str | None = None):
        self.alpha = alpha
        super().__init__(message or f"c(alpha) is not finite at alpha={alpha!r}")


class Overflow(PolymerLabError, ArithmeticError):
    """The one-step normalizer vanished after rescaling."""


class BudgetExceeded(PolymerLabError, MemoryError):
    """The requested lattice does not fit in the memory budget."""

    def __init__(self, d: int, requested: int, admissible: int, budget_mb: float):
        self.d = d
        self.requested = requested
        self.admissible = admissible
        self.budget_mb = budget_mb
        super().__init__(
            f"n={requested} in d={d} exceeds the {budget_mb:g} MB budget; "
            f"admissible maximal n is {admissible}"
        )


class Undefined(PolymerLabError, ValueError):
    """A functional is not defined at this argument."""


class TooLarge(PolymerLabError, ValueError):
    """Input is too large for an exact routine; use the scalable bound."""


class NoSnapshots(PolymerLabError, ValueError):
    """A trajectory carries no stored snapshots at the requested stride."""


class ApproximateResult(UserWarning):
    """A result was computed by a bound rather than exactly."""


class Unclassified(UserWarning):
    """A pair of tracked atoms neither stabilized nor separated."""

    def __init__(self, pairs: list[tuple[int, int]]):
        self.pairs = list(pairs)
        super().__init__(
            f"{len(self.pairs)} atom pair(s) unclassified, treated as diverging: "
            + ", ".join(f"({k},{l})" for k, l in self.pairs[:8])
            + (" ..." if len(self.pairs) > 8 else "")
        )
