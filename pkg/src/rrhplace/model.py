"""Network geometry, system parameters, path loss and the hotspot traffic model.

Cells are ``cell_w`` x ``cell_h`` squares on a ``g`` x ``g`` grid (``Q = g**2``)
indexed row-major: cell ``q`` sits in column ``q % g`` and row ``q // g``, with
its CU at the cell centre. The grid wraps around as a torus.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .numerics import gauss_legendre_rule, integrate_2d

BACKHAUL_MODES = ("shared", "divided")


class ConfigError(ValueError):
    """Invalid configuration value; ``field`` names the offending key."""

    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def db_to_lin(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclass(frozen=True)
class NetworkParams:
    """Scalar system parameters. Defaults reproduce the reference deployment.

    Powers are in dBm, bandwidths in Hz / resource blocks, distances in
    meters. ``backhaul_mode="divided"`` splits the backhaul band equally over
    the ``N`` links of a cell.
    """

    Q: int = 9
    cell_w: float = 1000.0
    cell_h: float = 1000.0
    N: int = 10
    M: int = 8
    K: int = 10
    p_dbm: float = 30.0
    pc_dbm: float = 45.0
    rb_bw: float = 180e3
    total_rbs: int = 25
    omega: int = 5
    omega_c: int = 20
    noise_density: float = -174.0
    noise_figure: float = 8.0
    d0: float = 0.392
    alpha: float = 3.76
    eta1: float = 8.0
    eta2: float = math.sqrt(2.0)
    rician_k_db: float | None = 15.0
    epsilon: float = 0.2
    backhaul_mode: str = "shared"

    def __post_init__(self):
        g = math.isqrt(self.Q) if self.Q > 0 else 0
        if self.Q < 1 or g * g != self.Q:
            raise ConfigError("Q", f"cell count must be a perfect square, got {self.Q}")
        for name in ("N", "M", "K"):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be >= 1")
        if self.N * self.M <= self.K:
            raise ConfigError("N", f"N*M = {self.N * self.M} must exceed K = {self.K}")
        if self.omega < 1 or self.omega_c < 1:
            raise ConfigError("omega", "omega and omega_c must both be >= 1 RB")
        if self.omega + self.omega_c > self.total_rbs:
            raise ConfigError("omega_c", f"omega + omega_c = {self.omega + self.omega_c} "
                              f"exceeds total_rbs = {self.total_rbs}")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError("epsilon", "outage budget must lie in (0, 1)")
        if self.alpha <= 2.0:
            raise ConfigError("alpha", "path-loss exponent must exceed 2")
        if self.d0 <= 0.0:
            raise ConfigError("d0", "reference distance must be positive")
        if self.cell_w <= 0.0 or self.cell_h <= 0.0:
            raise ConfigError("cell_w", "cell dimensions must be positive")
        if self.rb_bw <= 0.0:
            raise ConfigError("rb_bw", "must be positive")
        if self.eta1 < 0.0 or self.eta2 <= 0.0:
            raise ConfigError("eta2", "need eta1 >= 0 and eta2 > 0")
        if self.rician_k_db is not None and self.eta1 > 0.0:
            implied = 10.0 * math.log10(self.eta1**2 / self.eta2**2)
            if abs(implied - self.rician_k_db) > 0.1:
                raise ConfigError("rician_k_db", f"eta1/eta2 imply {implied:.3f} dB, "
                                  f"configured {self.rician_k_db} dB")
        if self.backhaul_mode not in BACKHAUL_MODES:
            raise ConfigError("backhaul_mode", f"expected one of {BACKHAUL_MODES}")

    def replace(self, **changes):
        return replace(self, **changes)

    @property
    def grid_side(self):
        return math.isqrt(self.Q)

    @property
    def area(self):
        return self.cell_w * self.cell_h

    @property
    def diagonal(self):
        g = self.grid_side
        return math.hypot(g * self.cell_w, g * self.cell_h)

    @property
    def access_bw(self):
        return self.omega * self.rb_bw

    @property
    def omega_c_eff(self):
        """Backhaul RBs available to one CU-RRH link."""
        return self.omega_c / self.N if self.backhaul_mode == "divided" else float(self.omega_c)

    @property
    def backhaul_bw(self):
        return self.omega_c_eff * self.rb_bw

    @property
    def sigma_z2(self):
        return noise_power(self.access_bw, self)

    @property
    def sigma_b2(self):
        return noise_power(self.backhaul_bw, self)

    @property
    def p_mw(self):
        return float(db_to_lin(self.p_dbm))

    @property
    def pc_mw(self):
        return float(db_to_lin(self.pc_dbm))

    @property
    def rho(self):
        return self.p_mw / self.sigma_z2

    @property
    def rho_c(self):
        return self.pc_mw / self.sigma_b2

    @property
    def load_ratio(self):
        """K * omega / omega_c (per link), the factor multiplying the access rate."""
        return self.K * self.omega / self.omega_c_eff


def noise_power(bw, params):
    """Thermal noise in mW over ``bw`` Hz: density + noise figure, linear in bw."""
    if bw <= 0:
        raise ValueError("bandwidth must be positive")
    return float(db_to_lin(params.noise_density + params.noise_figure)) * bw


def pathloss(d, params):
    """Large-scale gain (1 + d/d0)^-alpha."""
    d = np.maximum(np.asarray(d, dtype=float), 0.0)
    out = (1.0 + d / params.d0) ** (-params.alpha)
    return float(out) if out.ndim == 0 else out


# --- geometry ---------------------------------------------------------------

def cell_bounds(q, params):
    g = params.grid_side
    col, row = q % g, q // g
    return (col * params.cell_w, (col + 1) * params.cell_w,
            row * params.cell_h, (row + 1) * params.cell_h)


def cell_center(q, params):
    x0, x1, y0, y1 = cell_bounds(q, params)
    return np.array([0.5 * (x0 + x1), 0.5 * (y0 + y1)])


def cell_centers(params):
    return np.array([cell_center(q, params) for q in range(params.Q)])


def in_cell(x, y, q, params, tol=1e-9):
    x0, x1, y0, y1 = cell_bounds(q, params)
    x = np.asarray(x)
    y = np.asarray(y)
    return (x >= x0 - tol) & (x <= x1 + tol) & (y >= y0 - tol) & (y <= y1 + tol)


def cell_rules(params, order):
    """One Gauss-Legendre rule per cell, all sharing the same weights."""
    return [gauss_legendre_rule(cell_bounds(q, params), order) for q in range(params.Q)]


@dataclass
class Layout:
    """RRH coordinates ``rrh_xy[q, n] = (x, y)`` and fixed CU positions."""

    rrh_xy: np.ndarray
    cu_xy: np.ndarray

    @classmethod
    def random(cls, params, rng):
        rrh = np.empty((params.Q, params.N, 2))
        for q in range(params.Q):
            x0, x1, y0, y1 = cell_bounds(q, params)
            rrh[q, :, 0] = rng.uniform(x0, x1, params.N)
            rrh[q, :, 1] = rng.uniform(y0, y1, params.N)
        return cls(rrh, cell_centers(params))

    @classmethod
    def colocated(cls, params):
        cu = cell_centers(params)
        return cls(np.repeat(cu[:, None, :], params.N, axis=1).copy(), cu)

    def copy(self):
        return Layout(self.rrh_xy.copy(), self.cu_xy.copy())

    def clamp(self, q, params):
        x0, x1, y0, y1 = cell_bounds(q, params)
        np.clip(self.rrh_xy[q, :, 0], x0, x1, out=self.rrh_xy[q, :, 0])
        np.clip(self.rrh_xy[q, :, 1], y0, y1, out=self.rrh_xy[q, :, 1])

    def cu_distances(self):
        """CU-RRH distance for every RRH, shape (Q, N)."""
        return np.linalg.norm(self.rrh_xy - self.cu_xy[:, None, :], axis=2)


# --- wrap-around --------------------------------------------------------------

def wrap_offsets(q, params):
    """Translation of every cell that puts cell ``q`` at the centre of the torus.

    Column/row differences are folded into ``[-g//2, g - g//2 - 1]``; each
    cell appears exactly once. Returns an array of shape (Q, 2) in meters.
    """
    g = params.grid_side
    idx = np.arange(params.Q)
    dc = idx % g - q % g
    dr = idx // g - q // g
    fold_c = (dc + g // 2) % g - g // 2
    fold_r = (dr + g // 2) % g - g // 2
    return np.column_stack(((fold_c - dc) * params.cell_w, (fold_r - dr) * params.cell_h))


@dataclass(frozen=True)
class WrapView:
    """Read-only view of a layout translated so that ``center`` is central."""

    center: int
    offsets: np.ndarray
    rrh_xy: np.ndarray
    cu_xy: np.ndarray


def wrap_shift(layout, q, params):
    off = wrap_offsets(q, params)
    return WrapView(q, off, layout.rrh_xy + off[:, None, :], layout.cu_xy + off)


# --- traffic ------------------------------------------------------------------

@dataclass
class TrafficModel:
    """Hotspot mixture traffic PDF, normalised separately inside every cell.

    ``hotspot_cell[i]`` is ``-1`` for network-wide hotspots (every cell sees
    all of them) or the owning cell when hotspots were drawn per cell.
    """

    P0: float
    sigma_h: float
    hotspots: np.ndarray
    hotspot_cell: np.ndarray
    nh_min: int
    nh_max: int
    f0: np.ndarray = field(default=None)
    quad_order: int = 32

    def __post_init__(self):
        if not 0.0 <= self.P0 <= 1.0:
            raise ConfigError("P0", "must lie in [0, 1]")
        if self.sigma_h <= 0.0:
            raise ConfigError("sigma_h", "must be positive")
        self.hotspots = np.asarray(self.hotspots, dtype=float).reshape(-1, 2)
        self.hotspot_cell = np.asarray(self.hotspot_cell, dtype=int).reshape(-1)

    def hotspots_for(self, q):
        sel = (self.hotspot_cell == -1) | (self.hotspot_cell == q)
        return self.hotspots[sel]

    def unnormalized(self, x, y, q, params):
        hs = self.hotspots_for(q)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.full(np.broadcast(x, y).shape, self.P0 / params.area)
        if len(hs) and self.P0 < 1.0:
            r2 = (x[..., None] - hs[:, 0]) ** 2 + (y[..., None] - hs[:, 1]) ** 2
            gauss = np.exp(-r2 / (2.0 * self.sigma_h**2)).sum(axis=-1)
            out = out + (1.0 - self.P0) / (len(hs) * 2.0 * np.pi * self.sigma_h**2) * gauss
        return out

    def normalize(self, params, order=None):
        order = order or self.quad_order
        self.quad_order = order
        f0 = np.empty(params.Q)
        for q, rule in enumerate(cell_rules(params, order)):
            mass = integrate_2d(lambda x, y, q=q: self.unnormalized(x, y, q, params), rule)
            if mass <= 0.0:
                raise ConfigError("P0", f"traffic PDF has no mass in cell {q}")
            f0[q] = 1.0 / mass
        self.f0 = f0
        return self


def traffic_pdf(x, y, q, traffic, params, check=True):
    """Normalised traffic density of cell ``q`` at (x, y), in 1/m^2."""
    if check and not np.all(in_cell(x, y, q, params, tol=1e-6)):
        raise ValueError(f"point outside cell {q}")
    return traffic.f0[q] * traffic.unnormalized(x, y, q, params)


def generate_traffic(seed, params, P0=0.1, sigma_h=100.0, nh_min=None, nh_max=None,
                     per_cell=False, quad_order=32, hotspots=None):
    """Draw a hotspot traffic model. Deterministic for a given seed.

    ``N_h ~ U{nh_min, ..., nh_max}`` hotspots (defaults 2Q and 4Q) are placed
    uniformly over the whole network, or, with ``per_cell=True``, each cell
    draws its own count and places them inside itself. An explicit
    ``hotspots`` list of (x, y) centres skips the draw.
    """
    nh_min = 2 * params.Q if nh_min is None else int(nh_min)
    nh_max = 4 * params.Q if nh_max is None else int(nh_max)
    if nh_min < 0 or nh_min > nh_max:
        raise ConfigError("nh_min", f"need 0 <= nh_min <= nh_max, got {nh_min}, {nh_max}")
    rng = np.random.default_rng(seed)
    if hotspots is not None:
        centers = np.asarray(hotspots, dtype=float).reshape(-1, 2)
        owner = np.full(len(centers), -1)
    elif per_cell:
        chunks, owners = [], []
        for q in range(params.Q):
            count = int(rng.integers(nh_min, nh_max + 1))
            x0, x1, y0, y1 = cell_bounds(q, params)
            chunks.append(np.column_stack((rng.uniform(x0, x1, count), rng.uniform(y0, y1, count))))
            owners.append(np.full(count, q))
        centers = np.concatenate(chunks) if chunks else np.empty((0, 2))
        owner = np.concatenate(owners) if owners else np.empty(0, dtype=int)
    else:
        count = int(rng.integers(nh_min, nh_max + 1))
        g = params.grid_side
        centers = np.column_stack((rng.uniform(0.0, g * params.cell_w, count),
                                   rng.uniform(0.0, g * params.cell_h, count)))
        owner = np.full(count, -1)
    model = TrafficModel(P0, sigma_h, centers, owner, nh_min, nh_max, quad_order=quad_order)
    return model.normalize(params)
