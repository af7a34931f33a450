"""Special functions, tensor-product quadrature and bisection."""

from dataclasses import dataclass

import numpy as np

from . import kernels


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


class BracketError(ValueError):
    """Bisection endpoints do not bracket a root."""


class ConvergenceError(RuntimeError):
    """An iterative routine hit its iteration cap."""


def _nonneg(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite, got {value!r}")
    if np.any(arr < 0):
        raise DomainError(f"{name} must be nonnegative, got {value!r}")
    return arr


def _unwrap(arr, like):
    return float(arr[0]) if np.ndim(like) == 0 else arr.reshape(np.shape(like))


def log_bessel_i0(z):
    """Natural log of I0(z); finite for every finite z >= 0."""
    arr = _nonneg("z", z)
    return _unwrap(kernels.log_i0(np.atleast_1d(arr).ravel()), z)


def bessel_i0(z):
    """Modified Bessel function of the first kind, order zero.

    Power series below z = 30, asymptotic expansion above. Overflows to
    ``inf`` past z ~ 713; use :func:`log_bessel_i0` there.
    """
    arr = _nonneg("z", z)
    with np.errstate(over="ignore"):
        out = np.exp(kernels.log_i0(np.atleast_1d(arr).ravel()))
    return _unwrap(out, z)


def hyp0f1_reg(z):
    """Regularised 0F1(;1;z), evaluated as I0(2 sqrt(z))."""
    arr = _nonneg("z", z)
    return bessel_i0(2.0 * np.sqrt(arr) if np.ndim(z) else 2.0 * float(np.sqrt(arr)))


def marcum_q1_pair(a, b):
    """Return ``(Q1(a, b), 1 - Q1(a, b))``.

    Evaluated as a Poisson mixture of Poisson tail probabilities in the log
    domain, so neither very large ``a*b`` nor tiny tails overflow. Whichever of
    the two values is below 1/2 is summed directly rather than by subtraction.
    """
    a_arr = _nonneg("a", a)
    b_arr = _nonneg("b", b)
    a_b, b_b = np.broadcast_arrays(np.atleast_1d(a_arr), np.atleast_1d(b_arr))
    q, p = kernels.marcum_q1(np.ascontiguousarray(a_b, dtype=float).ravel(),
                             np.ascontiguousarray(b_b, dtype=float).ravel())
    if np.ndim(a) == 0 and np.ndim(b) == 0:
        return float(q[0]), float(p[0])
    shape = a_b.shape
    return q.reshape(shape), p.reshape(shape)


def marcum_q1(a, b):
    """Generalised Marcum Q-function of order one."""
    return marcum_q1_pair(a, b)[0]


def rician_power_pdf(delta, eta1, eta2):
    """Density of |g|^2 for a LoS amplitude eta1 plus CN(0, eta2^2) scatter."""
    delta = np.asarray(delta, dtype=float)
    z = 2.0 * eta1 * np.sqrt(np.maximum(delta, 0.0)) / eta2**2
    logf = -(eta1**2 + delta) / eta2**2 + log_bessel_i0(z) - 2.0 * np.log(eta2)
    return np.exp(logf)


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor-product Gauss-Legendre rule on an axis-aligned rectangle.

    ``nodes_x``, ``nodes_y`` and ``weights`` are flat arrays of length
    ``order**2``; the weights sum to the rectangle's area.
    """

    nodes_x: np.ndarray
    nodes_y: np.ndarray
    weights: np.ndarray
    order: int
    bounds: tuple

    @property
    def nodes(self):
        return np.column_stack((self.nodes_x, self.nodes_y))

    @property
    def area(self):
        x0, x1, y0, y1 = self.bounds
        return (x1 - x0) * (y1 - y0)

    def shifted(self, dx, dy):
        x0, x1, y0, y1 = self.bounds
        return QuadratureRule(self.nodes_x + dx, self.nodes_y + dy, self.weights,
                              self.order, (x0 + dx, x1 + dx, y0 + dy, y1 + dy))


def gauss_legendre_rule(bounds, order=32):
    """Build an ``order`` x ``order`` Gauss-Legendre rule on ``(x0, x1, y0, y1)``."""
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    x0, x1, y0, y1 = map(float, bounds)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate rectangle {bounds!r}")
    t, w = np.polynomial.legendre.leggauss(order)
    hx, hy = 0.5 * (x1 - x0), 0.5 * (y1 - y0)
    xs = x0 + hx * (t + 1.0)
    ys = y0 + hy * (t + 1.0)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    weights = np.outer(w * hx, w * hy)
    return QuadratureRule(gx.ravel(), gy.ravel(), weights.ravel(), order, (x0, x1, y0, y1))


def polar_patch_rule(bounds, center, n_ang=16, n_rad=16, n_core=4, r_split=1.0, r_scale=1.0):
    """Quadrature rule on a rectangle adapted to a point singularity at ``center``.

    The rectangle is cut into the (up to four) triangles with apex
    ``center`` and one edge each. A triangle is swept by rays from the apex
    at ``n_ang`` Gauss-Legendre angles per angular panel (long edges are cut
    into several panels), and the radius is mapped logarithmically,
    ``s = log(r + r_scale)``, so that integrands behaving like ``1/r**2``
    (times the area element ``r``) become smooth. Radii below ``r_split`` get
    their own ``n_core`` point segment, which keeps a kink at ``r_split`` off
    the interior of a panel.

    Returns ``(nodes, weights)`` with ``nodes`` of shape (P, 2); the weights
    sum to the rectangle's area. ``center`` must lie in the closed rectangle.
    """
    x0, x1, y0, y1 = map(float, bounds)
    px, py = float(center[0]), float(center[1])
    if not (x0 <= px <= x1 and y0 <= py <= y1):
        raise DomainError(f"patch centre ({px}, {py}) outside {bounds!r}")
    tu, wu = np.polynomial.legendre.leggauss(n_ang)
    tu, wu = 0.5 * (tu + 1.0), 0.5 * wu
    tr, wr = np.polynomial.legendre.leggauss(n_rad)
    tr, wr = 0.5 * (tr + 1.0), 0.5 * wr
    tc, wc = np.polynomial.legendre.leggauss(n_core)
    tc, wc = 0.5 * (tc + 1.0), 0.5 * wc
    # (height above the edge, edge start and end measured from the foot point,
    #  unit normal away from the centre, unit tangent)
    edges = (
        (py - y0, px - x1, px - x0, (0.0, -1.0), (-1.0, 0.0)),
        (x1 - px, py - y0, py - y1, (1.0, 0.0), (0.0, -1.0)),
        (y1 - py, x0 - px, x1 - px, (0.0, 1.0), (1.0, 0.0)),
        (px - x0, y1 - py, y0 - py, (-1.0, 0.0), (0.0, 1.0)),
    )
    # a sliver thinner than this carries no area in double precision
    thin = 1e-12 * max(x1 - x0, y1 - y0)
    pts, wts = [], []
    for h, ua, ub, nrm, tan in edges:
        if h <= thin:
            continue
        th_a, th_b = np.arctan2(_panel_breaks(ua, ub, h), h)[:, None]
        theta = (th_a + (th_b - th_a) * tu[:, None]).T.ravel()
        w_theta = (np.abs(th_b - th_a) * wu[:, None]).T.ravel()
        u = h * np.tan(theta)
        rmax = h / np.cos(theta)
        dirs = (h * np.asarray(nrm)[None, :] + u[:, None] * np.asarray(tan)[None, :]) / rmax[:, None]
        segments = [(np.zeros_like(rmax), np.minimum(rmax, r_split), tc, wc)]
        far = rmax > r_split
        if np.any(far):
            segments.append((np.full(far.sum(), r_split), rmax[far], tr, wr))
        for k, (a, b, t, w) in enumerate(segments):
            sel = slice(None) if k == 0 else far
            span = np.log((b + r_scale) / (a + r_scale))
            r = (a + r_scale)[:, None] * np.exp(span[:, None] * t[None, :]) - r_scale
            wt = (r + r_scale) * span[:, None] * w[None, :] * r * w_theta[sel][:, None]
            pts.append(np.array([px, py]) + r[..., None] * dirs[sel][:, None, :])
            wts.append(wt)
    nodes = np.concatenate([p.reshape(-1, 2) for p in pts])
    weights = np.concatenate([w.ravel() for w in wts])
    return nodes, weights


def _panel_breaks(ua, ub, h):
    """Cut the edge span [ua, ub] at u = +-4h, +-16h, ...

    Returns a (2, P) array of panel ends. Beyond the first panel ``tan`` varies
    by at most a factor of four, which keeps the ``1/cos**2`` growth of long,
    thin triangles within reach of a fixed-order angular rule.
    """
    lo, hi = min(ua, ub), max(ua, ub)
    cuts = []
    c = 4.0 * h
    while c < max(-lo, hi):
        cuts += [x for x in (-c, c) if lo < x < hi]
        c *= 4.0
    ends = np.array(sorted({lo, hi, *cuts}))
    return np.vstack((ends[:-1], ends[1:]))


def integrate_2d(f, rule):
    """Integrate ``f`` over ``rule``'s rectangle.

    ``f`` is either a callable ``f(x, y)`` accepting node arrays, or an array
    of values already sampled at the rule's nodes.
    """
    values = f(rule.nodes_x, rule.nodes_y) if callable(f) else f
    values = np.broadcast_to(np.asarray(values, dtype=float), rule.weights.shape)
    if not np.all(np.isfinite(values)):
        bad = int(np.count_nonzero(~np.isfinite(values)))
        raise FloatingPointError(f"integrand is non-finite at {bad} quadrature nodes")
    return float(values @ rule.weights)


def bisect(g, lo, hi, tol, max_iter=200):
    """Root of a monotone scalar function by interval halving.

    Stops as soon as ``|g(mid)| <= tol`` or the bracket is narrower than
    ``tol``.
    """
    glo, ghi = g(lo), g(hi)
    if abs(glo) <= tol:
        return lo
    if abs(ghi) <= tol:
        return hi
    if np.sign(glo) == np.sign(ghi):
        raise BracketError(f"g({lo})={glo:g} and g({hi})={ghi:g} have the same sign")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if abs(gm) <= tol or (hi - lo) <= tol:
            return mid
        if np.sign(gm) == np.sign(glo):
            lo, glo = mid, gm
        else:
            hi = mid
    raise ConvergenceError(f"bisection did not converge in {max_iter} iterations")
