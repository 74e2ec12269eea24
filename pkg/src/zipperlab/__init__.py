"""Numerics for SLE/GFF couplings, quantum-gravity measures, and welding zippers."""

__version__ = "0.1.0"

from .accel import HAVE_NUMBA, backend_name  # noqa: F401
