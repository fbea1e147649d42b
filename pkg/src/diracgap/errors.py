"""Exception types shared across the toolkit."""

from __future__ import annotations


class DiracGapError(Exception):
    """Base class for all toolkit errors."""


class ParameterDomainError(DiracGapError, ValueError):
    """Model or grid parameters outside their admissible domain."""


class ConsistencyError(DiracGapError):
    """Two supposedly identical evaluations disagree beyond tolerance."""


class ReconstructionError(DiracGapError):
    """Spinor reconstruction from scalar invariants produced invalid data."""


class SolverFailure(DiracGapError):
    """An eigenvalue or linear solve did not converge."""


class DegenerateEigenvalueError(DiracGapError):
    """Requested eigenvalue is too close to a neighbor for the operation."""


class CompressionRankError(DiracGapError):
    """Trial vector projects to (numerically) zero; compression basis is rank-deficient."""


class RankDeficiencyError(DiracGapError):
    """Eigendecomposition did not produce a complete orthonormal basis."""


class AssumptionViolationError(DiracGapError):
    """Potential violates the sigma_2-reality assumption required for simplicity claims."""


class BlowUpError(DiracGapError):
    """ODE integration left the bounded branch (solution norm exploded)."""


class MatchingSingularityError(DiracGapError):
    """Both shooting solutions vanish at the matching point."""


class InsufficientDataError(DiracGapError, ValueError):
    """Not enough resolved records for the requested fit."""
