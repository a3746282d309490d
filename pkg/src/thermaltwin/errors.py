"""Exception hierarchy shared across the library."""


class TwinError(Exception):
    """Base class for all library errors."""


class MalformedHeader(TwinError):
    pass


class DimensionMismatch(TwinError):
    pass


class NonFinitePixel(TwinError):
    def __init__(self, index: int):
        super().__init__(f"non-finite pixel value at flat index {index}")
        self.index = index


class NonMonotonicTimestamps(TwinError):
    pass


class TooFewFrames(TwinError):
    pass


class RankTooLarge(TwinError):
    pass


class NonFiniteInput(TwinError):
    pass


class SvdFailure(TwinError):
    pass


class WindowTooShort(TwinError):
    pass


class TooFewSamples(TwinError):
    pass


class TooManySamples(TwinError):
    pass


class DegenerateKernel(TwinError):
    pass


class NoData(TwinError):
    pass


class SensorFault(TwinError):
    pass


class MTooLarge(TwinError):
    pass


class InsufficientHistory(TwinError):
    pass


class IndexOutOfRange(TwinError):
    pass


class RegionOutOfBounds(TwinError):
    pass


class BadConfig(TwinError):
    pass


class PortInUse(TwinError):
    pass


class DiskFull(TwinError):
    """Run persistence could not write; the run is kept in memory."""
