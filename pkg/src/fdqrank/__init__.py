"""Free difference quotient rank, spectral and L2-Betti estimates for group presentations."""

__version__ = "0.1.0"
