"""Exception hierarchy.

Every failure mode raised by the library is a subclass of GstampError,
grouped by the subsystem that raises it.  The CLI maps these onto exit
codes: data errors -> 2, numerical failures -> 3.
"""


class GstampError(Exception):
    """Base class for all gstamp errors."""


class InvariantViolation(GstampError):
    """A value violates its documented range: a catalog field, a frame or
    potential constant, or a configuration entry."""

    def __init__(self, detail, row=None):
        self.row = row
        self.detail = detail
        where = f"row {row}: " if row is not None else ""
        super().__init__(where + detail)


# --- catalog ingestion ------------------------------------------------

class CatalogError(GstampError):
    """Base class for catalog parsing, validation and caching errors."""


class MissingColumn(CatalogError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"missing required column {name!r}")


class BadNumber(CatalogError):
    def __init__(self, row, col, value=None):
        self.row = row
        self.col = col
        super().__init__(f"row {row}: column {col!r} is not a number ({value!r})")


class DuplicateName(CatalogError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"duplicate cluster name {name!r}")


class BadCount(CatalogError):
    def __init__(self, n):
        self.n = n
        super().__init__(f"cannot synthesize a catalog with n={n}")


class NetworkUnavailable(CatalogError):
    pass


class ChecksumMismatch(CatalogError):
    pass


class CacheUnwritable(CatalogError):
    pass


# --- coordinate frames ------------------------------------------------

class FrameError(GstampError):
    pass


class DegenerateDirection(FrameError):
    """Phase-space point coincides with the Sun; sky direction undefined."""


# --- dynamics ---------------------------------------------------------

class DynamicsError(GstampError):
    pass


class BadRadius(DynamicsError):
    def __init__(self, r):
        self.r = r
        super().__init__(f"radius must be positive, got {r}")


class NonFinite(DynamicsError):
    """Integration state left the finite domain."""

    def __init__(self, step):
        self.step = step
        super().__init__(f"non-finite state at step {step}")


class EmptyCatalog(DynamicsError):
    pass


# --- stamp build / codec / recovery -----------------------------------

class StampError(GstampError):
    pass


class BadK(StampError):
    def __init__(self, k, detail=""):
        self.k = k
        super().__init__(f"bad anchor count k={k}" + (f": {detail}" if detail else ""))


class TooFewCandidates(StampError):
    pass


class DegenerateGeometry(StampError):
    pass


class BadMagic(StampError):
    pass


class UnsupportedVersion(StampError):
    def __init__(self, version):
        self.version = version
        super().__init__(f"unsupported stamp version {version}")


class ChecksumFail(StampError):
    pass


class Truncated(StampError):
    pass


class MatchAmbiguous(StampError):
    pass


class NoMatch(StampError):
    pass


class Degenerate(StampError):
    """Anchor geometry cannot constrain a 3-D position (rank deficient)."""


class NoConvergence(StampError):
    pass


# --- epoch model ------------------------------------------------------

class EpochError(GstampError):
    pass


class ZeroVelocity(EpochError):
    pass


class EmptyGrid(EpochError):
    pass


class MatchFailed(EpochError):
    pass


class WindowTooNarrow(EpochError):
    """The objective minimum sits on the search window boundary."""


# --- configuration ----------------------------------------------------

class ConfigError(GstampError):
    pass


class ParseError(ConfigError):
    def __init__(self, line_no, line):
        self.line_no = line_no
        super().__init__(f"line {line_no}: cannot parse {line!r}")


class UnknownKey(ConfigError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"unknown configuration key {key!r}")
