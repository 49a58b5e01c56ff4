"""RGB to hyperspectral reconstruction with small networks, plus reconstruction metrics."""

__version__ = "0.1.0"
