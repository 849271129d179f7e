"""Pure numpy implementations of the hot evaluation kernels.

Same call signatures as the compiled extension ``toruscrit._kernels``;
selected at import time by :mod:`toruscrit.backend` when the extension is
unavailable or explicitly disabled.
"""

import numpy as np

BACKEND_NAME = "python"


def trig_jet(points, freqs, coef_cos, coef_sin, const, order):
    """Value / gradient / Hessian of a real trigonometric sum at many points.

    f(t) = const + sum_l [ coef_cos_l cos(<freqs_l, t>) + coef_sin_l sin(<freqs_l, t>) ]

    Parameters
    ----------
    points : (n, m) float array
    freqs : (nl, m) float array of angular frequencies
    coef_cos, coef_sin : (nl,) float arrays
    const : float
    order : 0, 1 or 2

    Returns
    -------
    (value, gradient, hessian); gradient is None for order < 1, hessian is
    None for order < 2.  Shapes (n,), (n, m), (n, m, m).
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    freqs = np.ascontiguousarray(freqs, dtype=np.float64)
    n, m = points.shape
    phase = points @ freqs.T
    c = np.cos(phase)
    s = np.sin(phase)
    value = const + c @ coef_cos + s @ coef_sin
    grad = hess = None
    if order >= 1:
        # d_j f = sum_l (-coef_cos sin + coef_sin cos) freq_{l j}
        mix = (-s) * coef_cos + c * coef_sin
        grad = mix @ freqs
    if order >= 2:
        neg = -(c * coef_cos + s * coef_sin)
        hess = np.empty((n, m, m))
        for j in range(m):
            for k in range(j, m):
                col = neg @ (freqs[:, j] * freqs[:, k])
                hess[:, j, k] = col
                hess[:, k, j] = col
    return value, grad, hess


def count_sign_changes(values):
    """Number of sign changes around a periodic sequence of nonzero values."""
    values = np.asarray(values, dtype=np.float64)
    sgn = np.sign(values)
    return int(np.count_nonzero(sgn != np.roll(sgn, -1)))
