"""Floquet Hamiltonian engineering for driven harmonic oscillators."""

__version__ = "0.1.0"

# importing these registers their closed-form coefficients
from . import analytic_example, magnus, ncft  # noqa: E402,F401
