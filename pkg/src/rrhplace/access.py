"""Closed-form lower bound on the ZF access-channel spectral efficiency.

All rates are in nats/s/Hz. Users of cell ``q`` see the other cells through
the wrap-around translation that puts ``q`` at the centre, and the
interference of cell ``q'`` is averaged over the traffic PDF of ``q'``.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import cell_bounds, cell_rules, pathloss, traffic_pdf, wrap_offsets
from .numerics import polar_patch_rule


@dataclass
class _Patch:
    """Quadrature patch of one serving RRH with cached 1/gamma at its nodes."""

    center: np.ndarray
    nodes: np.ndarray
    wf: np.ndarray
    src: np.ndarray = None
    ginv: np.ndarray = None


class AccessModel:
    """Quadrature-backed evaluator of the rate bound for one traffic model.

    The serving-cell integrals have a logarithmic (rate) or ``1/d**2`` (A1
    moments) peak at every serving RRH, which a fixed tensor grid resolves
    poorly: the RRH gets attracted to whichever node it sits on. They are
    therefore evaluated on RRH-centred polar patches (one per RRH, each
    covering the whole cell), and the rate is split between the patches by
    the shares ``l_m / sum_n l_n``, so every piece is singular only at the
    centre of its own patch. Patches are rebuilt when their RRH moves.

    The interference coefficients only involve those shares, which are
    bounded and smooth, and use a fixed tensor Gauss-Legendre rule per cell.
    A cache entry is dropped when that cell's RRHs move (checked on every
    lookup) or explicitly through :meth:`invalidate`.
    """

    def __init__(self, params, traffic, order=None, d_min=1.0):
        self.params = params
        self.traffic = traffic
        self.order = order or traffic.quad_order
        self.d_min = d_min
        self.rules = cell_rules(params, self.order)
        self.nodes = [np.ascontiguousarray(r.nodes) for r in self.rules]
        self.weights = [
            r.weights * traffic_pdf(r.nodes_x, r.nodes_y, q, traffic, params, check=False)
            for q, r in enumerate(self.rules)
        ]
        # a rule of a different order than the one f0 was computed with is renormalised
        self.weights = [w / w.sum() for w in self.weights]
        self._offsets = [wrap_offsets(q, params) for q in range(params.Q)]
        self._ici = {}
        self._patches = {}

    # -- interference ----------------------------------------------------------
    def invalidate(self, q=None):
        if q is None:
            self._ici.clear()
            self._patches.clear()
        else:
            self._ici.pop(q, None)
            for key in [k for k in self._patches if k[0] == q]:
                del self._patches[key]

    def ici_coefficients(self, q, layout):
        """``K * E_j[l_j(x_ql) / xi(q, j)]`` for every RRH ``l`` of cell ``q``."""
        rrh = layout.rrh_xy[q]
        hit = self._ici.get(q)
        if hit is not None and np.array_equal(hit[0], rrh):
            return hit[1]
        p = self.params
        coeffs = kernels.ici_coefficients(self.nodes[q], self.weights[q], np.ascontiguousarray(rrh),
                                          float(p.M), float(p.K), p.d0, p.alpha)
        self._ici[q] = (rrh.copy(), coeffs)
        return coeffs

    def interference_sources(self, q, layout):
        """Wrap-shifted RRH positions of all cells but ``q`` with their coefficients."""
        others = [c for c in range(self.params.Q) if c != q]
        if not others:
            return np.empty((0, 2)), np.empty(0)
        off = self._offsets[q]
        src = np.concatenate([layout.rrh_xy[c] + off[c] for c in others])
        coeffs = np.concatenate([self.ici_coefficients(c, layout) for c in others])
        return np.ascontiguousarray(src), coeffs

    def ici_sum(self, q, layout, points):
        """Sum over interfering cells of the traffic-averaged ICI at ``points``."""
        src, coeffs = self.interference_sources(q, layout)
        p = self.params
        return kernels.interference_field(np.ascontiguousarray(points, dtype=float), src, coeffs,
                                          p.d0, p.alpha)

    def inv_gamma(self, q, layout, points=None):
        """Reciprocal of the interference-plus-noise scaling gamma_k (default: grid nodes)."""
        pts = self.nodes[q] if points is None else points
        return inv_gamma_from_ici(self.ici_sum(q, layout, pts), self.params)

    # -- serving-cell integrals ---------------------------------------------------
    def patch(self, q, m, layout):
        """Polar quadrature patch centred on RRH ``m`` of cell ``q``."""
        pos = layout.rrh_xy[q, m]
        hit = self._patches.get((q, m))
        if hit is not None and np.array_equal(hit.center, pos):
            return hit
        p, n = self.params, self.order
        bounds = cell_bounds(q, p)
        x0, x1, y0, y1 = bounds
        # an RRH outside its cell has no singularity inside it; any centre works
        apex = (min(max(pos[0], x0), x1), min(max(pos[1], y0), y1))
        nodes, w = polar_patch_rule(bounds, apex, n_ang=n, n_rad=n, n_core=max(4, n // 4),
                                    r_split=self.d_min, r_scale=p.d0)
        np.clip(nodes[:, 0], x0, x1, out=nodes[:, 0])
        np.clip(nodes[:, 1], y0, y1, out=nodes[:, 1])
        wf = w * traffic_pdf(nodes[:, 0], nodes[:, 1], q, self.traffic, p, check=False)
        hit = _Patch(pos.copy(), np.ascontiguousarray(nodes), wf)
        self._patches[(q, m)] = hit
        return hit

    def _patch_ginv(self, q, patch, layout):
        src, coeffs = self.interference_sources(q, layout)
        if patch.src is None or not np.array_equal(patch.src, src):
            p = self.params
            ici = kernels.interference_field(patch.nodes, src, coeffs, p.d0, p.alpha)
            patch.ginv = inv_gamma_from_ici(ici, p)
            patch.src = src
        return patch.ginv

    def field(self, q, layout, d_min=None):
        """Mean rate of cell ``q`` and the A1 moments of each of its RRHs.

        Returns ``(rbar, S, Sx, Sy)`` where ``S[m] = E[A1_m]`` over the cell
        traffic and ``Sx``/``Sy`` weight the same average by the user
        coordinates.
        """
        p = self.params
        d_min = self.d_min if d_min is None else d_min
        rrh = np.ascontiguousarray(layout.rrh_xy[q])
        rnum = mass = 0.0
        s, sx, sy = np.empty(p.N), np.empty(p.N), np.empty(p.N)
        for m in range(p.N):
            pt = self.patch(q, m, layout)
            ginv = self._patch_ginv(q, pt, layout)
            r_m, mass_m, pmass, s_m, sx_m, sy_m = kernels.patch_field(
                pt.nodes, rrh, m, ginv, pt.wf, p.d0, p.alpha, d_min)
            rnum += r_m
            mass += mass_m
            s[m], sx[m], sy[m] = s_m / pmass, sx_m / pmass, sy_m / pmass
        return rnum / mass, s, sx, sy

    def rate_at(self, q, layout, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        ginv = self.inv_gamma(q, layout, points)
        ell = pathloss(np.linalg.norm(points[:, None, :] - layout.rrh_xy[q][None], axis=2),
                       self.params)
        return np.log1p(ginv * np.atleast_2d(ell).sum(axis=1))

    def expected_rate(self, q, layout):
        return float(self.field(q, layout)[0])

    def expected_rates(self, layout):
        return np.array([self.expected_rate(q, layout) for q in range(self.params.Q)])


def inv_gamma_from_ici(ici, params):
    n, m, k, rho = params.N, params.M, params.K, params.rho
    return ((n * m - k) * rho / (n * k)) / (m * rho / k * np.asarray(ici) + 1.0)


# --- pointwise helpers ------------------------------------------------------

def xi(q_int, user_xy, layout, params):
    """trace(D) for a user of cell ``q_int``: M * sum of its pathlosses to that cell's RRHs."""
    d = np.linalg.norm(layout.rrh_xy[q_int] - np.asarray(user_xy, dtype=float), axis=1)
    return params.M * float(np.sum(pathloss(d, params)))


def ici_traffic_avg(q_int, user_xy, q, layout, traffic, params, model=None):
    """Traffic-averaged ICI of cell ``q_int`` on a user at ``user_xy`` in cell ``q``."""
    model = model or AccessModel(params, traffic)
    coeffs = model.ici_coefficients(q_int, layout)
    src = layout.rrh_xy[q_int] + wrap_offsets(q, params)[q_int]
    d = np.linalg.norm(src - np.asarray(user_xy, dtype=float), axis=1)
    return float(pathloss(d, params) @ coeffs)


def gamma_k(user_xy, q, layout, traffic, params, model=None):
    model = model or AccessModel(params, traffic)
    return 1.0 / float(model.inv_gamma(q, layout, np.atleast_2d(user_xy))[0])


def rate_access_lb(user_xy, q, layout, traffic, params, model=None):
    """Lower bound on the spectral efficiency of a user at ``user_xy`` in cell ``q``."""
    model = model or AccessModel(params, traffic)
    return float(model.rate_at(q, layout, user_xy)[0])


def expected_rate(q, layout, traffic, params, model=None):
    """Traffic-weighted average of the rate bound over cell ``q``."""
    model = model or AccessModel(params, traffic)
    return model.expected_rate(q, layout)
