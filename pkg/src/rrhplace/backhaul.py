"""Rician backhaul outage and the largest CU-RRH distance that meets the budget."""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import pathloss
from .numerics import bisect, marcum_q1_pair

_EXP_LIMIT = 700.0


class InfeasibleError(RuntimeError):
    """The outage budget is violated even with the RRH on top of its CU."""

    def __init__(self, message, outage_at_cu=None):
        super().__init__(message)
        self.outage_at_cu = outage_at_cu


class Feasibility(str, enum.Enum):
    FEASIBLE = "feasible"
    INACTIVE = "inactive"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class OutageQuery:
    rrh_xy: tuple
    cu_xy: tuple
    avg_access_rate: float
    params: object

    def __post_init__(self):
        if self.avg_access_rate < 0:
            raise ValueError("avg_access_rate must be nonnegative")

    @property
    def distance(self):
        return math.dist(self.rrh_xy, self.cu_xy)


def zeta_at(distance, avg_rate, params):
    """Fading-power threshold below which the link is in outage (vectorised).

    ``inf`` when the exponent of the required backhaul SNR exceeds 700.
    """
    expo = params.load_ratio * np.asarray(avg_rate, dtype=float)
    with np.errstate(over="ignore"):
        num = np.where(expo > _EXP_LIMIT, np.inf, np.expm1(np.minimum(expo, _EXP_LIMIT)))
    out = num / (params.rho_c * pathloss(distance, params))
    return float(out) if np.ndim(out) == 0 else out


def outage_at(distance, avg_rate, params):
    """Outage probability 1 - Q1(sqrt(2) eta1/eta2, sqrt(2 zeta)/eta2) (vectorised)."""
    z = np.asarray(zeta_at(distance, avg_rate, params), dtype=float)
    a = math.sqrt(2.0) * params.eta1 / params.eta2
    finite = np.isfinite(z)
    b = np.sqrt(2.0 * np.where(finite, z, 0.0)) / params.eta2
    _, p = marcum_q1_pair(np.full(z.shape, a), b)
    p = np.where(finite, p, 1.0)
    return float(p) if p.ndim == 0 else p


def zeta(query):
    return zeta_at(query.distance, query.avg_access_rate, query.params)


def outage_prob(query):
    return outage_at(query.distance, query.avg_access_rate, query.params)


@dataclass(frozen=True)
class BackhaulLimit:
    status: Feasibility
    d_out: float
    outage_at_cu: float


def backhaul_limit(avg_rate, params, tol=1e-7):
    """Tri-state maximum CU-RRH distance for a cell whose mean access rate is ``avg_rate``.

    ``d_out`` is the network diagonal when even that distance meets the
    budget (``INACTIVE``) and ``0.0`` when the co-located link already fails
    (``INFEASIBLE``).
    """
    eps = params.epsilon
    p0 = outage_at(0.0, avg_rate, params)
    if p0 > eps:
        return BackhaulLimit(Feasibility.INFEASIBLE, 0.0, p0)
    diag = params.diagonal
    if outage_at(diag, avg_rate, params) <= eps:
        return BackhaulLimit(Feasibility.INACTIVE, diag, p0)
    d = bisect(lambda r: outage_at(r, avg_rate, params) - eps, 0.0, diag, tol)
    return BackhaulLimit(Feasibility.FEASIBLE, d, p0)


def max_backhaul_distance(avg_rate, params, tol=1e-7):
    """Distance at which the outage equals the budget; raises when infeasible."""
    lim = backhaul_limit(avg_rate, params, tol)
    if lim.status is Feasibility.INFEASIBLE:
        raise InfeasibleError(
            f"outage {lim.outage_at_cu:.4f} at zero distance exceeds epsilon={params.epsilon}",
            lim.outage_at_cu)
    return lim.d_out
