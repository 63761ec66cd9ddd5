"""Video compressed sensing with spatially-variant per-pixel compression
ratios, plus a semantic link for transmitting the captured sensor data."""

__version__ = "0.1.0"
