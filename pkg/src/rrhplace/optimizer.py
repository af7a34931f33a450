"""Iterative RRH placement under the backhaul outage constraint.

Two update rules are provided. ``direct`` solves the stationarity condition
of the per-cell Lagrangian for each RRH coordinate and moves the multipliers
by projected gradient ascent. ``distance`` replaces the outage constraint by
the equivalent bound on the CU-RRH distance and finds each multiplier by
bisection. Both are driven by the same outer loop: cells are visited one at a
time with the grid wrapped around the active cell, and the loop stops once
the RRHs are estimated to be within ``d_cvg`` of where the iteration is
heading (see :meth:`Optimizer.remaining_travel`). Slowly contracting paths
are shortened by tail extrapolation (:meth:`Optimizer.extrapolate`).
"""

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .access import AccessModel
from .backhaul import Feasibility, backhaul_limit, outage_at
from .model import Layout, cell_bounds
from .numerics import ConvergenceError, bisect, log_bessel_i0
from .report import LN2, RunReport

log = logging.getLogger(__name__)

MODES = ("direct", "distance")


@dataclass
class OptimizerSettings:
    mode: str = "distance"
    d_cvg: float = 1.0
    nu: float = 1.0
    max_iter: int = 500
    d_min: float = 1.0
    no_constraint: bool = False
    # "auto": approximate A4 until the finite-difference audit rejects it
    a4_form: str = "auto"
    a4_rtol: float = 1e-2
    safeguard: bool = True
    safeguard_tol: float = 1e-5
    lambda_tol: float = 1e-3
    feasibility_slack: float = 1e-3
    # smallest relaxation factor for the distance-mode d_out refresh
    d_out_min_step: float = 1.0 / 64.0
    # geometric-tail jumps along slowly contracting RRH paths
    extrapolate: bool = True
    extrapolate_max: float = 50.0
    record_trajectory: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.a4_form not in ("auto", "approx", "exact"):
            raise ValueError(f"unknown a4_form {self.a4_form!r}")
        if self.d_cvg <= 0 or self.nu <= 0 or self.max_iter < 1 or self.d_min <= 0:
            raise ValueError("d_cvg, nu, d_min must be positive and max_iter >= 1")
        if self.extrapolate_max < 1.0:
            raise ValueError("extrapolate_max must be >= 1")


@dataclass
class OptState:
    layout: Layout
    lambdas: np.ndarray
    nu: np.ndarray
    d_cvg: float
    mode: str
    d_out: np.ndarray
    d_out_step: np.ndarray = None
    d_out_delta: np.ndarray = None
    d_out_residual: np.ndarray = None
    d_max_trace: list = field(default_factory=list)
    objective_trace: list = field(default_factory=list)
    iteration: int = 0
    fallbacks: int = 0
    trajectory: list = field(default_factory=list)
    jumps: int = 0
    # index into d_max_trace of the first sweep after the latest jump
    plain_since: int = 0


@dataclass(frozen=True)
class ConstraintTerms:
    A2: float
    A3: float
    A4: float
    outage: np.ndarray


def outage_slope(j1, params):
    """d(outage)/dJ1 = J1 exp(-(eta1^2/eta2^2 + J1^2/2)) I0(sqrt(2) eta1 J1 / eta2)."""
    j1 = np.asarray(j1, dtype=float)
    a = math.sqrt(2.0) * params.eta1 / params.eta2
    finite = np.isfinite(j1) & (j1 > 0)
    jj = np.where(finite, j1, 1.0)
    logv = np.log(jj) - (0.5 * a * a + 0.5 * jj * jj) + log_bessel_i0(a * jj)
    return np.where(finite, np.exp(logv), 0.0)


class Optimizer:
    """State and update rules for one placement run."""

    def __init__(self, params, traffic, settings=None, layout=None, rng=None, access=None):
        self.params = params
        self.traffic = traffic
        self.settings = settings or OptimizerSettings()
        self.access = access or AccessModel(params, traffic, d_min=self.settings.d_min)
        if layout is None:
            layout = Layout.random(params, rng if rng is not None else np.random.default_rng())
        Q, N = params.Q, params.N
        self.state = OptState(layout=layout, lambdas=np.zeros((Q, N)),
                              nu=np.full(Q, self.settings.nu), d_cvg=self.settings.d_cvg,
                              mode=self.settings.mode, d_out=np.full(Q, np.nan),
                              d_out_step=np.ones(Q), d_out_delta=np.zeros(Q),
                              d_out_residual=np.zeros(Q))
        self.a4_check = {}
        self._audit_access = None
        self._a4_use_approx = self.settings.a4_form in ("auto", "approx")

    @property
    def layout(self):
        return self.state.layout

    # -- access-side terms ---------------------------------------------------------
    def a1_values(self, q, m, points, ginv=None):
        """A1 of RRH ``m`` of cell ``q`` for users at ``points``."""
        p = self.params
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if ginv is None:
            ginv = self.access.inv_gamma(q, self.layout, points)
        d = np.linalg.norm(points[:, None, :] - self.layout.rrh_xy[q][None], axis=2)
        tot = ((1.0 + d / p.d0) ** (-p.alpha)).sum(axis=1)
        dm = d[:, m]
        return ginv * (1.0 + dm / p.d0) ** (-1.0 - p.alpha) / (np.maximum(dm, self.settings.d_min)
                                                               * (1.0 + ginv * tot))

    def cell_rate(self, q):
        return self.access.expected_rate(q, self.layout)

    # -- backhaul-side terms ---------------------------------------------------------
    def constraint_terms(self, q, m, rbar, lambdas=None, approx_a4=None):
        """A2, A3, A4 of RRH ``m`` in cell ``q`` given the cell's mean rate ``rbar``."""
        p = self.params
        lam = self.state.lambdas[q] if lambdas is None else np.asarray(lambdas, dtype=float)
        approx_a4 = self._a4_use_approx if approx_a4 is None else approx_a4
        dbar = self.layout.cu_distances()[q]
        outage = np.asarray(outage_at(dbar, rbar, p))
        if not np.any(lam > 0):
            return ConstraintTerms(0.0, 0.0, 0.0, outage)
        c = p.load_ratio
        expo = c * rbar
        em1 = math.expm1(expo) if expo < 700 else math.inf
        if em1 == 0.0 or not math.isfinite(em1):
            return ConstraintTerms(0.0, 0.0, 0.0, outage)
        base = 1.0 + dbar / p.d0
        zeta = em1 / (p.rho_c * base ** (-p.alpha))
        j1 = np.sqrt(2.0 * zeta) / p.eta2
        slope = outage_slope(j1, p)
        # c E / (eta2 sqrt(2 rho_c (E - 1))), in logs
        log_c = (math.log(c) + expo - math.log(p.eta2) - 0.5 * math.log(2.0 * p.rho_c)
                 - 0.5 * math.log(em1))
        per_rrh = lam * slope * base ** (0.5 * p.alpha)
        a2 = math.exp(log_c) * per_rrh[m]
        a3 = (lam[m] * slope[m] * math.sqrt(em1) / (p.eta2 * math.sqrt(2.0 * p.rho_c))
              * base[m] ** (0.5 * p.alpha - 1.0) / max(dbar[m], self.settings.d_min))
        others = per_rrh.sum() - per_rrh[m]
        if approx_a4:
            inner = c * math.exp(-(p.eta1**2 / p.eta2**2 + 0.5 * j1[m] ** 2))
            em1_p = math.expm1(inner)
            a4 = 0.0 if em1_p == 0.0 else (c * math.exp(inner) / (p.eta2 * math.sqrt(2.0 * p.rho_c * em1_p))
                                            * others)
        else:
            a4 = math.exp(log_c) * others
        for name, val in (("A2", a2), ("A3", a3), ("A4", a4)):
            if not math.isfinite(val):
                raise FloatingPointError(f"{name} is non-finite for cell {q}, RRH {m} "
                                         f"(rbar={rbar:g}, lambda={lam[m]:g})")
        return ConstraintTerms(a2, a3, a4, outage)

    # -- single-RRH updates ---------------------------------------------------------------
    def update_xy_direct(self, q, m, moments, terms):
        """Stationary point of the cell Lagrangian in (x_qm, y_qm); None if the denominator is <= 0."""
        s, sx, sy = moments
        b = 1.0 - terms.A2 - terms.A4
        den = b * s[m] + terms.A3
        if not (den > 0.0 and math.isfinite(den)):
            return None
        cu = self.layout.cu_xy[q]
        return np.array([(b * sx[m] + terms.A3 * cu[0]) / den, (b * sy[m] + terms.A3 * cu[1]) / den])

    def update_lambda(self, q, m, outage_m):
        lam = self.state.lambdas[q, m] + self.state.nu[q] * (outage_m - self.params.epsilon)
        return max(lam, 0.0)

    def _distance_point(self, q, m, moments, lam, d_out, d_cur):
        s, sx, sy = moments
        g = self.params.alpha / self.params.d0
        wt = lam / (d_out * max(d_cur, self.settings.d_min))
        cu = self.layout.cu_xy[q]
        den = g * s[m] + wt
        return np.array([(g * sx[m] + wt * cu[0]) / den, (g * sy[m] + wt * cu[1]) / den])

    def lambda_bisect(self, q, m, moments, d_out, max_doublings=60):
        """Smallest multiplier that keeps RRH ``m`` within ``d_out`` (to ``lambda_tol``)."""
        cu = self.layout.cu_xy[q]
        d_cur = float(np.linalg.norm(self.layout.rrh_xy[q, m] - cu))

        def dist(lam):
            return float(np.linalg.norm(self._distance_point(q, m, moments, lam, d_out, d_cur) - cu))

        if dist(0.0) <= d_out:
            return 0.0
        hi = 1.0
        for _ in range(max_doublings):
            if dist(hi) <= d_out:
                break
            hi *= 2.0
        else:
            raise ConvergenceError(f"multiplier doubling exceeded {max_doublings} steps")
        tol = self.settings.lambda_tol
        lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            gap = dist(mid) - d_out
            if abs(gap) <= tol:
                return mid
            if gap > 0:
                lo = mid
            else:
                hi = mid
        return hi

    def update_xy_distance(self, q, m, moments, d_out, lam=None):
        cu = self.layout.cu_xy[q]
        if lam is None:
            lam = self.lambda_bisect(q, m, moments, d_out)
        d_cur = float(np.linalg.norm(self.layout.rrh_xy[q, m] - cu))
        return self._distance_point(q, m, moments, lam, d_out, d_cur), lam

    # -- Lagrangian --------------------------------------------------------------------
    def lagrangian(self, q, layout=None, lambdas=None):
        """-E[R] + sum_n lambda_n (P_qn - eps) of cell ``q``."""
        lay = self.layout if layout is None else layout
        lam = self.state.lambdas[q] if lambdas is None else lambdas
        rbar = self.access.expected_rate(q, lay)
        dbar = lay.cu_distances()[q]
        outage = np.asarray(outage_at(dbar, rbar, self.params))
        return -rbar + float(np.dot(lam, outage - self.params.epsilon))

    def lagrangian_gradient_fd(self, q, step=0.5, lambdas=None):
        """Central finite-difference gradient of the cell Lagrangian, shape (N, 2)."""
        grad = np.zeros((self.params.N, 2))
        for n in range(self.params.N):
            for ax in range(2):
                vals = []
                for sgn in (1.0, -1.0):
                    lay = self.layout.copy()
                    lay.rrh_xy[q, n, ax] += sgn * step
                    vals.append(self.lagrangian(q, lay, lambdas))
                grad[n, ax] = (vals[0] - vals[1]) / (2.0 * step)
        return grad

    def constraint_gradient(self, q, m, approx_a4, lambdas=None, access=None):
        """Analytic d/dx_qm of sum_n lambda_n P_qn, via the A terms."""
        p = self.params
        access = access or self.access
        rbar, s, sx, sy = access.field(q, self.layout, self.settings.d_min)
        t = self.constraint_terms(q, m, rbar, lambdas=lambdas, approx_a4=approx_a4)
        x = self.layout.rrh_xy[q, m, 0]
        drdx = -(p.alpha / p.d0) * (x * s[m] - sx[m])
        return (t.A2 + t.A4) * drdx + (p.alpha / p.d0) * t.A3 * (x - self.layout.cu_xy[q, 0])

    def audit_a4(self, q, m, step=0.05, lambdas=None):
        """Compare the approximate and exact A4 against a finite difference of the constraint sum.

        Unit multipliers are used unless ``lambdas`` is given, so the check
        does not depend on how far the dual iteration has progressed. Both
        sides are evaluated on a finer quadrature rule than the run's (order
        ``max(48, 2 * order)``): the check is about the formula, and at
        coarse orders the quadrature error of the rate derivative alone can
        reach several percent.
        """
        lam = np.ones(self.params.N) if lambdas is None else np.asarray(lambdas, dtype=float)
        if self._audit_access is None:
            self._audit_access = AccessModel(self.params, self.traffic,
                                             order=max(48, 2 * self.access.order),
                                             d_min=self.settings.d_min)
        acc = self._audit_access

        def csum(dx):
            lay = self.layout.copy()
            lay.rrh_xy[q, m, 0] += dx
            rbar = acc.expected_rate(q, lay)
            return float(np.dot(lam, outage_at(lay.cu_distances()[q], rbar, self.params)))

        fd = (csum(step) - csum(-step)) / (2.0 * step)
        out = {"cell": q, "rrh": m, "fd": fd}
        for label, approx in (("approx", True), ("exact", False)):
            an = self.constraint_gradient(q, m, approx, lam, access=acc)
            out[f"{label}"] = an
            out[f"rel_err_{label}"] = abs(an - fd) / max(abs(fd), 1e-300)
        return out

    def _maybe_audit_a4(self, q, lo=1e-3, hi=0.999):
        """Audit once per run, on an RRH whose outage is in its sensitive range."""
        if self.a4_check or self.settings.a4_form != "auto" or self.params.N < 2:
            return
        if not np.any(self.state.lambdas[q] > 0):
            return
        rbar = self.access.expected_rate(q, self.layout)
        outage = np.atleast_1d(outage_at(self.layout.cu_distances()[q], rbar, self.params))
        live = np.flatnonzero((outage > lo) & (outage < hi))
        if live.size < 2:
            return
        m = int(live[np.argmin(np.abs(outage[live] - 0.5))])
        res = self.audit_a4(q, m)
        res["approx_mismatch"] = bool(res["rel_err_approx"] > self.settings.a4_rtol)
        res["exact_ok"] = bool(res["rel_err_exact"] <= self.settings.a4_rtol)
        if res["approx_mismatch"] and not res["exact_ok"]:
            log.debug("A4 audit inconclusive in cell %d: %s", q, res)
            return
        if res["approx_mismatch"]:
            self._a4_use_approx = False
        res["a4_in_use"] = "approx" if self._a4_use_approx else "exact"
        self.a4_check = res
        if res["approx_mismatch"]:
            log.warning("approximate A4 disagrees with the finite-difference gradient "
                        "(rel err %.3g); using %s form", res["rel_err_approx"], res["a4_in_use"])

    # -- cell sweep ---------------------------------------------------------------------------
    def _record(self, q, n):
        if self.settings.record_trajectory:
            x, y = self.layout.rrh_xy[q, n]
            self.state.trajectory.append((self.state.iteration, q, n, float(x), float(y)))

    def _local_objective(self, q):
        rbar = self.access.expected_rate(q, self.layout)
        if self.settings.no_constraint:
            return -rbar
        outage = np.asarray(outage_at(self.layout.cu_distances()[q], rbar, self.params))
        return -rbar + float(np.dot(self.state.lambdas[q], outage - self.params.epsilon))

    def step_cell(self, q):
        """One pass over the RRHs of cell ``q``; returns the largest coordinate change."""
        st, p, cfg = self.state, self.params, self.settings
        lay = st.layout
        before = lay.rrh_xy[q].copy()
        if cfg.mode == "distance":
            if cfg.no_constraint:
                lim_d, status = math.inf, Feasibility.INACTIVE
            else:
                lim_d, status = self._refresh_d_out(q, self.access.expected_rate(q, lay))
        else:
            self._maybe_audit_a4(q)
        for m in range(p.N):
            rbar, s, sx, sy = self.access.field(q, lay, cfg.d_min)
            moments = (s, sx, sy)
            old = lay.rrh_xy[q, m].copy()
            if cfg.mode == "direct":
                if cfg.no_constraint:
                    terms = ConstraintTerms(0.0, 0.0, 0.0, np.zeros(p.N))
                else:
                    terms = self.constraint_terms(q, m, rbar)
                new = self.update_xy_direct(q, m, moments, terms)
                if new is None:
                    st.fallbacks += 1
                    st.nu[q] *= 0.5
                    log.debug("cell %d rrh %d: nonpositive denominator, keeping position", q, m)
                    new = old
                if not cfg.no_constraint:
                    st.lambdas[q, m] = self.update_lambda(q, m, float(terms.outage[m]))
            else:
                if status is Feasibility.INFEASIBLE:
                    new, lam = lay.cu_xy[q].copy(), math.inf
                elif not math.isfinite(lim_d):
                    new, lam = np.array([sx[m] / s[m], sy[m] / s[m]]), 0.0
                else:
                    new, lam = self.update_xy_distance(q, m, moments, lim_d)
                st.lambdas[q, m] = lam if math.isfinite(lam) else 0.0
            lay.rrh_xy[q, m] = new
            lay.clamp(q, p)
            if cfg.safeguard and cfg.mode == "direct" and not np.array_equal(lay.rrh_xy[q, m], old):
                self._safeguard(q, m, old)
            self._record(q, m)
        return float(np.max(np.abs(lay.rrh_xy[q] - before)))

    def _refresh_d_out(self, q, rbar):
        """Move the distance limit of cell ``q`` towards the value implied by ``rbar``.

        The limit depends steeply on the mean rate, so plain substitution can
        cycle. The relaxation factor starts at 1 and is halved every time the
        correction changes sign.
        """
        st, cfg = self.state, self.settings
        lim = backhaul_limit(rbar, self.params)
        if lim.status is Feasibility.INFEASIBLE:
            st.d_out[q] = 0.0
            st.d_out_residual[q] = 0.0
            return 0.0, lim.status
        prev = st.d_out[q]
        if not np.isfinite(prev) or prev <= 0.0:
            st.d_out[q] = lim.d_out
            st.d_out_residual[q] = 0.0
            return lim.d_out, lim.status
        delta = lim.d_out - prev
        if delta * st.d_out_delta[q] < 0.0:
            st.d_out_step[q] = max(0.5 * st.d_out_step[q], cfg.d_out_min_step)
        st.d_out_delta[q] = delta
        # a limit that no RRH of the cell comes near does not shape the iterate,
        # so its remaining drift does not hold up convergence
        reach = float(self.layout.cu_distances()[q].max())
        slack = reach + cfg.d_cvg < min(prev, lim.d_out)
        st.d_out_residual[q] = 0.0 if slack else abs(delta)
        st.d_out[q] = prev + st.d_out_step[q] * delta
        status = lim.status if st.d_out[q] < self.params.diagonal else Feasibility.INACTIVE
        return st.d_out[q], status

    def project_to_limits(self, max_rounds=50, tol=1e-3):
        """Pull every RRH inside the distance limit implied by the current rates.

        Moving an RRH towards its CU changes the cell rate and hence the
        limit, so the projection is repeated until no RRH is more than
        ``tol`` meters outside. Returns the number of rounds used.
        """
        lay, p = self.layout, self.params
        for rnd in range(max_rounds):
            moved = False
            for q in range(p.Q):
                lim = backhaul_limit(self.access.expected_rate(q, lay), p)
                if lim.status is Feasibility.INFEASIBLE:
                    return rnd
                dist = lay.cu_distances()[q]
                out = dist > lim.d_out
                moved |= bool(np.any(dist > lim.d_out + tol))
                if np.any(out):
                    scale = np.where(out, lim.d_out / np.maximum(dist, 1e-300), 1.0)
                    lay.rrh_xy[q] = lay.cu_xy[q] + (lay.rrh_xy[q] - lay.cu_xy[q]) * scale[:, None]
            if not moved:
                return rnd
        return max_rounds

    def _safeguard(self, q, m, old, halvings=4):
        lay = self.layout
        new = lay.rrh_xy[q, m].copy()
        lay.rrh_xy[q, m] = old
        ref = self._local_objective(q)
        lay.rrh_xy[q, m] = new
        for _ in range(halvings):
            if self._local_objective(q) - ref <= self.settings.safeguard_tol:
                return
            lay.rrh_xy[q, m] = 0.5 * (lay.rrh_xy[q, m] + old)

    # -- outer loop ------------------------------------------------------------------------------
    def run(self):
        st, p, cfg = self.state, self.params, self.settings
        best = None
        converged = False
        moves = []
        while st.iteration < cfg.max_iter:
            st.iteration += 1
            fallbacks = st.fallbacks
            before = st.layout.rrh_xy.copy()
            d_max = max(self.step_cell(q) for q in range(p.Q))
            moves = moves[-1:] + [st.layout.rrh_xy - before]
            rates = self.access.expected_rates(st.layout)
            st.d_max_trace.append(d_max)
            st.objective_trace.append(float(rates.mean()))
            ok = cfg.no_constraint or self.max_outage(rates) <= p.epsilon + cfg.feasibility_slack
            if ok and (best is None or rates.mean() > best[0]):
                best = (float(rates.mean()), st.layout.copy(), st.lambdas.copy())
            # a sweep frozen by denominator fallbacks, or a standstill outside the
            # budget, is not a solution even though nothing moved
            if cfg.mode == "distance":
                settled = float(np.max(st.d_out_residual)) < cfg.d_cvg
            else:
                settled = ok and st.fallbacks == fallbacks
            if self.remaining_travel() < cfg.d_cvg and settled:
                converged = True
                break
            if (cfg.extrapolate and len(st.d_max_trace) - st.plain_since >= 2
                    and st.fallbacks == fallbacks and settled_d_out(st, cfg)):
                if self.extrapolate(moves[-2], moves[-1]):
                    st.plain_since = len(st.d_max_trace)
        if not converged and best is not None:
            st.layout, st.lambdas = best[1], best[2]
        if cfg.mode == "distance" and not cfg.no_constraint:
            self.project_to_limits()
        return converged

    def extrapolate(self, prev_move, move, min_cos=0.9):
        """Jump RRHs along their path by the geometric tail of their recent moves.

        Near a fixed point the update contracts slowly along one direction
        per RRH, so successive moves are nearly parallel and shrink by a
        steady ratio ``r``. The remaining moves then sum to ``r / (1 - r)``
        times the last one. Each cell's jump is kept only if the cell-local
        objective does not get worse (tried at full length, then halved
        twice). Returns the number of cells that jumped.
        """
        st, p, cfg = self.state, self.params, self.settings
        n1 = np.linalg.norm(move, axis=2)
        n0 = np.linalg.norm(prev_move, axis=2)
        with np.errstate(invalid="ignore", divide="ignore"):
            cos = np.sum(move * prev_move, axis=2) / (n1 * n0)
            ratio = n1 / n0
        ok = (n0 > 0) & (n1 > 0) & (cos > min_cos) & (ratio < 1.0)
        factor = np.where(ok, np.minimum(ratio / (1.0 - np.where(ok, ratio, 0.0)),
                                         cfg.extrapolate_max), 0.0)
        jumped = 0
        for q in range(p.Q):
            if not np.any(ok[q]):
                continue
            lay = st.layout
            old = lay.rrh_xy[q].copy()
            ref = self._local_objective(q)
            for shrink in (1.0, 0.5, 0.25):
                lay.rrh_xy[q] = old + shrink * factor[q][:, None] * move[q]
                lay.clamp(q, p)
                if cfg.mode == "distance" and np.isfinite(st.d_out[q]) and not cfg.no_constraint:
                    off = lay.rrh_xy[q] - lay.cu_xy[q]
                    dist = np.linalg.norm(off, axis=1)
                    scale = np.where(dist > st.d_out[q], st.d_out[q] / np.maximum(dist, 1e-300), 1.0)
                    lay.rrh_xy[q] = lay.cu_xy[q] + off * scale[:, None]
                if self._local_objective(q) <= ref + cfg.safeguard_tol:
                    jumped += 1
                    break
            else:
                lay.rrh_xy[q] = old
        if jumped:
            st.jumps += jumped
            log.debug("iteration %d: extrapolated %d cells", st.iteration, jumped)
        return jumped

    def remaining_travel(self, window=3):
        """Estimated distance the RRHs still have to travel, from the recent moves.

        The update converges linearly, and near a fixed point it can contract
        slowly (a factor of about ``1 - 1/(2 ln(cell / d0))`` per sweep at high
        SNR), so a sweep that moves less than ``d_cvg`` can still leave the
        RRHs several ``d_cvg`` away. The geometric tail ``d_max / (1 - k)``,
        with ``k`` the mean contraction over the last ``window`` sweeps, is
        used instead; it is capped at the cell diagonal, which no RRH can
        exceed. Moves below 1 % of ``d_cvg`` count as converged outright.
        """
        trace = self.state.d_max_trace[self.state.plain_since:]
        cap = math.hypot(self.params.cell_w, self.params.cell_h)
        if not trace:
            return cap
        d_max = trace[-1]
        if d_max < 0.01 * self.settings.d_cvg:
            return d_max
        if len(trace) < 2:
            return cap
        back = min(window, len(trace) - 1)
        prev = trace[-1 - back]
        if prev <= 0.0:
            return cap
        k = (d_max / prev) ** (1.0 / back)
        return min(d_max / (1.0 - k), cap) if k < 1.0 else cap

    def outages(self, rates=None):
        rates = self.access.expected_rates(self.layout) if rates is None else rates
        dist = self.layout.cu_distances()
        return np.vstack([np.atleast_1d(outage_at(dist[q], rates[q], self.params))
                          for q in range(self.params.Q)])

    def max_outage(self, rates=None):
        return float(self.outages(rates).max())


def settled_d_out(state, settings):
    """True unless a distance-mode limit is still being relaxed towards its target."""
    if settings.mode != "distance" or settings.no_constraint:
        return True
    return bool(np.max(state.d_out_residual) < 10.0 * settings.d_cvg)


def colocated_feasibility(params, traffic, access=None):
    """Backhaul limit of every cell with all RRHs sitting on their CU."""
    access = access or AccessModel(params, traffic)
    rates = access.expected_rates(Layout.colocated(params))
    return [backhaul_limit(r, params) for r in rates]


def optimize(traffic, params, settings=None, seed=0, layout=None, access=None):
    """Run the placement algorithm from a random (or given) layout."""
    settings = settings or OptimizerSettings()
    t0 = time.perf_counter()
    access = access or AccessModel(params, traffic, d_min=settings.d_min)
    rng = np.random.default_rng(seed)
    init = layout.copy() if layout is not None else Layout.random(params, rng)
    opt = Optimizer(params, traffic, settings, layout=init, access=access)
    if not settings.no_constraint:
        limits = colocated_feasibility(params, traffic, access)
        if any(lim.status is Feasibility.INFEASIBLE for lim in limits):
            opt.state.layout = Layout.colocated(params)
            return _build_report(opt, converged=False, status="infeasible", seed=seed,
                                 wall=time.perf_counter() - t0)
    converged = opt.run()
    return _build_report(opt, converged, "converged" if converged else "not_converged",
                         seed, time.perf_counter() - t0)


def optimize_restarts(traffic, params, settings=None, seed=0, restarts=1, access=None):
    """Best of ``restarts`` independent runs (feasible runs first, then objective)."""
    access = access or AccessModel(params, traffic)
    seeds = np.random.SeedSequence(seed).generate_state(restarts) if restarts > 1 else [seed]
    best = None
    for s in seeds:
        rep = optimize(traffic, params, settings, seed=int(s), access=access)
        key = (rep.feasible, rep.network_mean_bits)
        if best is None or key > best[0]:
            best = (key, rep)
    best[1].seed = seed
    return best[1]


def _build_report(opt, converged, status, seed, wall):
    st, p = opt.state, opt.params
    rates = opt.access.expected_rates(st.layout)
    if status != "infeasible":
        lims = [backhaul_limit(r, p) for r in rates]
        d_out = [lim.d_out for lim in lims]
        if not opt.settings.no_constraint and any(lim.status is Feasibility.INFEASIBLE
                                                  for lim in lims):
            status = "infeasible"
    else:
        d_out = [0.0] * p.Q
    return RunReport(
        mode=opt.settings.mode,
        status=status,
        converged=bool(converged),
        iterations=st.iteration,
        rrh_xy=st.layout.rrh_xy.tolist(),
        cu_xy=st.layout.cu_xy.tolist(),
        lambdas=np.where(np.isfinite(st.lambdas), st.lambdas, 0.0).tolist(),
        outage=opt.outages(rates).tolist(),
        cu_dist=st.layout.cu_distances().tolist(),
        d_out=[float(d) for d in d_out],
        expected_rate_bits=(rates / LN2).tolist(),
        network_mean_bits=float(np.mean(rates / LN2)),
        d_max_trace=list(st.d_max_trace),
        objective_trace_bits=[v / LN2 for v in st.objective_trace],
        fallbacks=st.fallbacks,
        extrapolations=st.jumps,
        no_constraint=opt.settings.no_constraint,
        a4_check=dict(opt.a4_check),
        seed=seed,
        wall_time=wall,
        trajectory=[list(t) for t in st.trajectory],
    )
