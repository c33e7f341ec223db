"""Exception types raised by qgraph."""

from __future__ import annotations


class QGraphError(Exception):
    """Base class for library errors that signal a domain problem."""


class InvalidArgumentError(QGraphError, ValueError):
    pass


class IllConditionedError(QGraphError):
    """An eigenvalue sits too close to -1 to be classified reliably."""


class SingularEliminationError(QGraphError):
    """Loop resonance: the transfer-matrix elimination is singular at this k."""


class NotInBandError(QGraphError):
    """No unit-modulus transfer eigenvalue is available at this k."""


class UnsupportedReductionError(QGraphError):
    """A closed-form reduction was requested outside the setting it holds in."""


class NotQuasiDeltaError(QGraphError):
    """A conjugated block left the quasi-delta family."""


class InvarianceObstruction(QGraphError):
    """No twisted shift makes the chain extension Z-invariant.

    Attributes
    ----------
    vertex : int
        First vertex whose block cannot be reached from its predecessor.
    reason : str
        ``"delta"`` when the non-trivial eigenvalue changes between cells,
        ``"loop-phase"`` when the loop relative phase changes.
    """

    def __init__(self, vertex: int, reason: str, detail: str = ""):
        self.vertex = vertex
        self.reason = reason
        msg = f"obstruction at vertex {vertex} ({reason})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
