"""Exception types shared by all berglab modules."""


class BerglabError(Exception):
    """Base class for all structured errors raised by this package."""


class ConfigError(BerglabError):
    """Malformed configuration: carries the offending field in the message."""


class ResourceLimitError(BerglabError):
    """A construction would exceed a configured resource cap (node count)."""


class NonFiniteIntegrandError(BerglabError):
    """An integrand evaluated to inf/nan at a quadrature node."""

    def __init__(self, node_index, value):
        self.node_index = int(node_index)
        self.value = value
        super().__init__(
            f"integrand is not finite at node {self.node_index}: {value!r}"
        )


class WeightOverflowError(BerglabError):
    """exp(-weight) overflowed at a node; the weight needs truncation."""

    def __init__(self, node_index, weight_value):
        self.node_index = int(node_index)
        self.weight_value = float(weight_value)
        super().__init__(
            f"exp(-weight) overflows at node {self.node_index} "
            f"(weight value {weight_value})"
        )


class DivergenceError(BerglabError):
    """An integral required to be finite classified as divergent."""

    def __init__(self, message, outcome=None):
        self.outcome = outcome
        super().__init__(message)
