"""Exception hierarchy shared by every module."""


class DomainError(ValueError):
    """An input lies outside the domain of an operation."""


class SizeLimitError(DomainError):
    """A state space or kernel would exceed a configured size cap."""

    def __init__(self, what, size, cap):
        self.size = size
        self.cap = cap
        super().__init__(f"{what}: size {size} exceeds cap {cap}")


class ChainStructureError(DomainError):
    """The kernel is reducible or periodic, so mixing is undefined."""


class UnsupportedDimensionError(DomainError):
    pass
