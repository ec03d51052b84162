"""Exception hierarchy shared across the engine."""


class PegError(Exception):
    """Base class for all engine errors."""


# ---- graph construction / ingestion ----

class ParseError(PegError):
    """Input bytes are not valid JSON or do not match the graph schema."""


class ValidationError(PegError):
    """Structurally parsed graph violates an invariant (disconnected,
    duplicate edge, self-loop, id gap)."""


class SizeError(PegError):
    """Requested generator dimensions are too small."""


class GenerationError(PegError):
    """Random generator could not produce a valid graph."""


# ---- solver / tables ----

class BudgetError(PegError):
    """State space exceeds the allowed entry budget."""


class DimensionError(PegError):
    """State, table, or policy dimensions do not agree."""


class HashMismatch(PegError):
    """Serialized table was built for a different graph."""


class FormatError(PegError):
    """Byte stream is not a valid table file."""


# ---- policies ----

class IllegalAnnouncement(PegError):
    """Announced pursuer move is not legal from the current state."""


class EmptyPos(PegError):
    """Feasible-position set is empty where a policy requires it."""


class ZeroMass(PegError):
    """Belief vector has no positive mass."""


# ---- tracker / simulator ----

class TrackerCollapse(PegError):
    """Feasible set or belief mass collapsed to nothing; signals broken
    update sequencing rather than a recoverable game event."""


class ConfigError(PegError):
    """Episode configuration is invalid."""


class NoValidStart(PegError):
    """No joint state satisfies the initial-state constraints."""


class IllegalMove(PegError):
    """A policy returned a move outside the closed neighborhood."""


# ---- wire protocol ----

class ProtocolError(PegError):
    """Malformed request line or command sequencing violation."""


class IllegalAction(PegError):
    """Client action is not legal for the current state."""


class UnknownGraph(PegError):
    """Requested graph id is not registered with the server."""
