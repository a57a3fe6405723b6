"""Shared numerical kernels: ordered exact summation and batched adaptive quadrature."""

from __future__ import annotations

import math

import numpy as np


class QuadratureError(RuntimeError):
    pass


def mode_mean(values) -> float:
    """Correctly rounded mean over the last axis (``math.fsum`` per row).

    The result does not depend on summation order, so it is identical for any
    partitioning of the work.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        return math.fsum(values.tolist()) / values.size
    n = values.shape[-1]
    flat = values.reshape(-1, n)
    out = np.array([math.fsum(row.tolist()) / n for row in flat])
    return out.reshape(values.shape[:-1])


# 15-point Kronrod nodes on [-1, 1] (non-negative half) and weights;
# the 7-point Gauss rule uses the odd-indexed nodes.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_W = np.zeros(15)
GAUSS_W[[1, 3, 5]] = _WG[:3]
GAUSS_W[[9, 11, 13]] = _WG[2::-1]
GAUSS_W[7] = _WG[3]


def adaptive_gk15(func, lo, hi, owner, n_owner, tol, rtol=0.0, max_panels=20_000_000):
    """Integrate many independent integrals at once by bisecting GK15 panels.

    ``lo``/``hi``/``owner`` describe the initial panels; panel ``j`` belongs to
    integral ``owner[j]``. ``func(x, owner)`` receives nodes of shape
    ``(n_panels, 15)`` and the owner index of each row. A panel is accepted
    once ``|K15 - G7| <= tol * width / span(owner)``, which keeps each
    integral's summed error estimate below ``tol``; ``rtol`` additionally
    accepts panels whose estimate is below ``rtol * |K15|``.

    Returns ``(integrals, error_estimates)``, both of length ``n_owner``.
    """
    lo = np.asarray(lo, dtype=float).ravel()
    hi = np.asarray(hi, dtype=float).ravel()
    owner = np.asarray(owner, dtype=np.intp).ravel()
    span = np.zeros(n_owner)
    np.add.at(span, owner, hi - lo)
    span[span == 0] = 1.0

    result = np.zeros(n_owner)
    errsum = np.zeros(n_owner)
    evaluated = 0
    while lo.size:
        evaluated += lo.size
        if evaluated > max_panels:
            bad = np.unique(owner)[:5]
            raise QuadratureError(
                f"adaptive quadrature exceeded {max_panels} panels; unresolved integrals {bad.tolist()}"
            )
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        x = mid[:, None] + half[:, None] * NODES[None, :]
        fx = func(x, owner)
        K = half * (fx @ KRONROD_W)
        G = half * (fx @ GAUSS_W)
        err = np.abs(K - G)
        # panels at floating-point resolution cannot be split further
        done = (err <= np.maximum(tol * (2.0 * half) / span[owner], rtol * np.abs(K))) | (half <= 4e-16 * np.maximum(np.abs(mid), 1e-300))
        np.add.at(result, owner[done], K[done])
        np.add.at(errsum, owner[done], err[done])
        keep = ~done
        lo, hi, owner, mid = lo[keep], hi[keep], owner[keep], mid[keep]
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        owner = np.concatenate([owner, owner])
    return result, errsum
