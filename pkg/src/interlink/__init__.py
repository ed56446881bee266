"""Numerical laboratory for interlinking of cotangent fibers."""

__version__ = "0.1.0"
