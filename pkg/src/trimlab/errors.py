"""Exception types shared across the package."""


class TrimlabError(Exception):
    """Base class for all package-specific errors."""


class ResolutionError(TrimlabError):
    """A bit stream could not pin down a value within the allowed prefix.

    Raised either because the prefix straddles a constancy-cell boundary
    ("unresolved after max_bits") or because the prefix is all zeros
    ("zero prefix").  Both indicate misuse (a degenerate point), not bad
    luck: for honest random streams the probability of hitting the default
    4096-bit cap is 2**-4096.
    """


class PieceCapError(TrimlabError):
    """A step-function operation would exceed the configured piece cap."""


class CapacityError(TrimlabError):
    """A ledger query asked for more trimmed terms than the tracker keeps."""


class ThresholdError(TrimlabError):
    """An exceedance count was requested for an unregistered threshold."""


class StrideError(TrimlabError):
    """Induced-map joint measures were requested at non-stride lags."""


class CombinatorialCapError(TrimlabError):
    """An exact enumeration would exceed the configured atom budget."""
