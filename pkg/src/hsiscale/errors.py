"""Exception types shared across the toolkit."""


class HsiScaleError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(HsiScaleError):
    """Data violates a structural invariant (non-finite, negative, out of range)."""


class DimensionError(HsiScaleError):
    """Shapes or sizes are inconsistent with the requested operation."""


class FormatError(HsiScaleError):
    """A file does not conform to the expected on-disk format."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DegenerateDataError(HsiScaleError):
    """The pixel cloud does not span enough independent directions."""


class NearOrthogonalNormalError(HsiScaleError):
    """The normal is (nearly) orthogonal to the anchor point; scale ratios blow up."""


class OptimizationError(HsiScaleError):
    """A search produced no valid iterate."""


class NumericError(HsiScaleError):
    """A numerical evaluation produced non-finite values."""

    def __init__(self, message: str, pixel_index: int | None = None):
        if pixel_index is not None:
            message = f"{message} (pixel {pixel_index})"
        super().__init__(message)
        self.pixel_index = pixel_index


class GenerationError(HsiScaleError):
    """Synthetic data generation could not satisfy its constraints."""
