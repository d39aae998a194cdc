"""Exact-arithmetic laboratory for trimmed and truncated digit sums over
the doubling map: bit-stream orbits, step-function transfer operators,
mixing diagnostics, and Monte Carlo experiment harnesses.
"""

__version__ = "0.1.0"
