"""Exception hierarchy for the radix-X crossbar simulator.

Every error carries a ``detail`` message and the process ``exit_code`` the
CLI returns for it: 2 for domain errors, 1 for I/O and parse failures.
"""

from typing import Optional


class RadixXbarError(Exception):
    """Base class for all simulator errors."""

    exit_code: int = 2

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code

    def __str__(self) -> str:
        return self.detail


class ConstantTensor(RadixXbarError):
    """Quantization is undefined when every weight is equal."""


class NonFinite(RadixXbarError):
    """A tensor holds NaN or infinity."""


class BadMax(RadixXbarError):
    """The pre-activation maximum is not positive."""


class OutOfAlphabet(RadixXbarError):
    """An integer lies outside the radix alphabet."""


class DimensionMismatch(RadixXbarError):
    """Input vector length does not match the programmed row count."""


class ReadVoltageExceedsThreshold(RadixXbarError):
    """A read voltage would reach the memristor switching threshold."""


class KernelTooLarge(RadixXbarError):
    """Kernel support exceeds the image."""


class ShapeMismatch(RadixXbarError):
    """Batch or parameter shapes do not chain through the network."""


class StaleCache(RadixXbarError):
    """A forward cache was reused after the weights changed."""


class EmptyDataset(RadixXbarError):
    """Training was requested on an empty dataset."""


class CostError(RadixXbarError):
    """A cost report was requested for degenerate dimensions."""


class FormatError(RadixXbarError):
    """A file does not parse in the expected binary or text format."""

    exit_code = 1


class InvalidSetting(RadixXbarError, ValueError):
    """A count or size argument is outside its allowed range."""
