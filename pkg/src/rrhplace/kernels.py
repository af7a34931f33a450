"""Backend selection for the hot numeric kernels.

The numba implementation is used unless ``RRHPLACE_DISABLE_NUMBA`` is set to a
truthy value (or numba cannot be imported), in which case the vectorised numpy
twins are used. Both backends expose the same functions:

``log_i0(z)``
    log of the modified Bessel function I0, elementwise.
``marcum_q1(a, b)``
    ``(Q1, 1 - Q1)`` elementwise, the smaller of the two summed directly.
``ici_coefficients(nodes, w, rrh, M, K, d0, alpha)``
    traffic-weighted interference coefficient of each RRH in one cell.
``interference_field(nodes, src, coeffs, d0, alpha)``
    ``sum_r coeffs[r] * pathloss(node, src[r])`` at every node.
``patch_field(nodes, rrh, owner, ginv, w, d0, alpha, d_min)``
    sums over one RRH-centred patch: the rate weighted by that RRH's share
    ``l_owner / sum l``, the share itself, the plain weight, and the A1
    moments of the owner.
``zf_directions(h)``
    ``H (H^H H)^-1`` for a stack of channel matrices.
"""

import os

from . import _kernels_numpy

_FLAG = "RRHPLACE_DISABLE_NUMBA"


def _numba_requested():
    return os.environ.get(_FLAG, "").strip().lower() not in ("1", "true", "yes", "on")


numpy_impl = _kernels_numpy
numba_impl = None
if _numba_requested():
    try:
        from . import _kernels_numba as numba_impl
    except ImportError:  # pragma: no cover - numba is optional
        numba_impl = None

_impl = numba_impl if numba_impl is not None else numpy_impl
BACKEND = "numba" if _impl is numba_impl else "numpy"

log_i0 = _impl.log_i0
marcum_q1 = _impl.marcum_q1
ici_coefficients = _impl.ici_coefficients
interference_field = _impl.interference_field
patch_field = _impl.patch_field
zf_directions = _impl.zf_directions


def available_backends():
    """Return the kernel modules that can be imported here, keyed by name."""
    out = {"numpy": numpy_impl}
    if numba_impl is not None:
        out["numba"] = numba_impl
    else:
        try:
            from . import _kernels_numba

            out["numba"] = _kernels_numba
        except ImportError:  # pragma: no cover
            pass
    return out
