"""Exception types raised across the toolkit.

Each class marks one failure mode of the solve / learn / verify pipeline so
callers (and the command line front end) can map failures to outcomes without
string matching.
"""

from __future__ import annotations


class TermLqError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(TermLqError):
    """Instance data failed validation (dimensions, symmetry, definiteness)."""


class SingularGamma(TermLqError):
    """An input-weight curvature matrix Gamma(k) failed the positive-definite
    test during the backward pass. Cannot occur for R positive definite and
    P(k+1) positive semi-definite; signals invalid input or numerical
    corruption."""


class NotReachable(TermLqError):
    """The terminal target is not attainable: the multiplier equation has no
    solution within tolerance."""


class StageOutOfRange(TermLqError):
    """A stage index outside 0..N was requested."""


class NonFiniteState(TermLqError):
    """A rollout produced a non-finite state entry (overflow under an
    unstable policy)."""


class InsufficientSamples(TermLqError):
    """Fewer samples requested than the least-squares identifiability
    threshold (2n+m)(2n+m+1)/2."""


class OracleMiss(TermLqError):
    """A replay log was queried for a transition it does not contain."""


class CarryMissing(TermLqError):
    """An interior-stage target was requested without the fitted successor
    stage's carry quantities."""


class RankDeficient(TermLqError):
    """The stage regressor lost column rank: the data is insufficiently
    exciting for a unique least-squares fit."""

    def __init__(self, message: str, rank: int, cond: float):
        super().__init__(message)
        self.rank = rank
        self.cond = cond


class SingularBlock(TermLqError):
    """The learned input-curvature block Lambda_22 failed the
    positive-definite test; extraction would divide by it."""


class InfeasibleConstraint(TermLqError):
    """The stacked terminal equality constraint is inconsistent (the target
    is unreachable)."""


class SingularKkt(TermLqError):
    """The KKT system is numerically singular despite a feasible constraint
    (flags a non-positive-definite R or corrupted data)."""


class ParseError(TermLqError):
    """An instance or replay file failed to parse; the message names the
    offending key or line."""


class IoError(TermLqError):
    """A report or log file could not be written."""
