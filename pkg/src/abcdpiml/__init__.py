"""abcd monthly water-balance model with a physics-informed ML cascade."""

__version__ = "0.1.0"
