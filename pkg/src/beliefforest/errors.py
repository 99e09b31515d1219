"""Exception types shared across the package."""


class BeliefForestError(Exception):
    """Base class for all errors raised by this package."""


class NetworkFormatError(BeliefForestError):
    """A network or evidence document could not be parsed.

    Carries the line/column of the syntax error when the underlying
    parser provides one.
    """

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class NetworkValidationError(BeliefForestError):
    """A parsed document violates a structural invariant (cycle, bad row
    sum, dimension mismatch, duplicate id, ...). The message names the
    violated invariant."""


class UnknownNodeError(BeliefForestError, KeyError):
    """A referenced node id does not exist."""

    def __init__(self, node_id):
        super().__init__(f"unknown node: {node_id!r}")
        self.node_id = node_id


class UnknownValueError(BeliefForestError, ValueError):
    """A referenced value (label or index) is not valid for its node."""


class EvidenceConflictError(BeliefForestError):
    """A node already observed at one value was re-observed at another."""


class CutsetMemberError(BeliefForestError):
    """Evidence was entered on a conditioning-set member. Conditioned
    instances fix those nodes by construction, so observing them is
    rejected rather than silently absorbed."""


class ImpossibleEvidenceError(BeliefForestError):
    """The entered evidence has probability zero under the model."""


class ObservationNotFoundError(BeliefForestError):
    """A retraction referenced a feature that is not currently observed."""


class NotCalibratedError(BeliefForestError):
    """A posterior was read from a forest with unpropagated evidence."""
