"""Backend façade for the hot kernels.

Imports the numba implementations when available (and not disabled via
``ZIPPERLAB_NO_NUMBA``), the vectorized numpy twins otherwise.  Everything
downstream calls through this module, so the two code paths stay swappable;
``benchmarks/bench_kernels.py`` times them against each other.
"""

import numpy as np

from .accel import HAVE_NUMBA, backend_name  # noqa: F401

if HAVE_NUMBA:
    from ._kernels_numba import (  # noqa: F401
        bessel_logdrift,
        bilinear_gather,
        circle_averages,
        coupling_qv_ensemble,
        extract_curve_points,
        flow_ensemble,
        forward_flow_points,
        reverse_flow_points,
        reverse_sle_driving,
        time_to_zero,
        weld_trace,
        welding_pairs,
    )
else:
    from ._kernels_numpy import (  # noqa: F401
        bessel_logdrift,
        bilinear_gather,
        circle_averages,
        coupling_qv_ensemble,
        extract_curve_points,
        flow_ensemble,
        forward_flow_points,
        reverse_flow_points,
        reverse_sle_driving,
        time_to_zero,
        weld_trace,
        welding_pairs,
    )


def dual_increments(dW: np.ndarray) -> np.ndarray:
    """Increments of the time-reversal dual driving, t -> W(T-t) - W(T).

    The forward flow of the dual increments is the exact inverse of the
    reverse flow of dW (and vice versa) under the package's step conventions.
    """
    return -np.ascontiguousarray(dW[::-1])
