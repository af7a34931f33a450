"""Channel-level Monte-Carlo checks of the closed-form rate bound and outage.

Everything runs in noise-normalised units: transmit powers are the SNRs
``rho`` and ``rho_c`` and the receiver noise has unit power.

Reproducibility: drop ``i`` of a run seeded with ``seed`` always draws from
``SeedSequence(seed, spawn_key=(i,))``, so results do not depend on how the
drops are split across worker processes.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .access import AccessModel
from .model import cell_bounds, pathloss, wrap_offsets


@dataclass
class ChannelDraw:
    """Fading draws of one cell's own channel.

    small_scale: (F, N*M, K) CN(0, 1) entries; large_scale: (N*M, K) pathloss
    gains per antenna and user; rician_gain: optional backhaul |g|^2 samples.
    """

    small_scale: np.ndarray
    large_scale: np.ndarray
    rician_gain: np.ndarray = None

    @property
    def channel(self):
        return self.small_scale * np.sqrt(self.large_scale)[None]


@dataclass
class AccessMCResult:
    """Monte-Carlo spectral efficiency (nats/s/Hz) with paired lower-bound values."""

    mean: float
    se: float
    cell_mean: np.ndarray
    cell_se: np.ndarray
    lb_mean: float
    lb_cell_mean: np.ndarray
    gap_se: float
    n_drops: int
    n_fading: int
    power_ratio: float
    drop_rates: np.ndarray = field(repr=False, default=None)
    drop_lb: np.ndarray = field(repr=False, default=None)

    @property
    def n_trials(self):
        return self.n_drops * self.n_fading


@dataclass
class OutageMCResult:
    prob: np.ndarray
    se: np.ndarray
    n_trials: int


def _rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def complex_normal(rng, shape):
    """CN(0, 1) samples: independent real and imaginary parts of variance 1/2."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * math.sqrt(0.5)


# --- backhaul -----------------------------------------------------------------

def sample_rician_power(n, params, rng):
    """|g|^2 for g = eta1 e^{j theta} + NLoS term of per-component variance eta2^2 / 2."""
    theta = rng.uniform(0.0, 2.0 * math.pi, n)
    g = params.eta1 * np.exp(1j * theta) + params.eta2 * complex_normal(rng, n)
    return np.abs(g) ** 2


def mc_backhaul_outage(distance, avg_rate, params, n_trials=1_000_000, seed=0):
    """Empirical outage: fraction of draws with omega_c log(1 + rho_c |g|^2 l) <= K omega R.

    ``distance`` and ``avg_rate`` broadcast against each other; every grid
    point gets an independent stream.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be positive")
    d, r = np.broadcast_arrays(np.asarray(distance, dtype=float), np.asarray(avg_rate, dtype=float))
    prob = np.empty(d.shape)
    need = params.load_ratio * r
    gain = params.rho_c * np.asarray(pathloss(d, params))
    for i, idx in enumerate(np.ndindex(d.shape)):
        delta = sample_rician_power(n_trials, params, _rng(seed, i))
        prob[idx] = np.mean(np.log1p(gain[idx] * delta) <= need[idx])
    se = np.sqrt(prob * (1.0 - prob) / n_trials)
    return OutageMCResult(prob, se, n_trials)


# --- access -------------------------------------------------------------------

def zf_beamformer(h, power, max_ratio=1e12):
    """Zero-forcing precoders with average power normalisation.

    ``h`` is a stack (F, N*M, K) of channel draws. Returns ``(W, mu, V)``
    where ``V = H (H^H H)^-1`` per draw and ``W = V diag(mu)`` with
    ``mu_k = sqrt(power / (K * mean_F ||v_k||^2))``.
    """
    h = np.ascontiguousarray(h, dtype=np.complex128)
    if h.ndim == 2:
        h = h[None]
    _, rows, k = h.shape
    if rows < k:
        raise np.linalg.LinAlgError(f"{rows} antennas cannot zero-force {k} users")
    try:
        v = kernels.zf_directions(h)
    except (ZeroDivisionError, FloatingPointError) as exc:
        raise np.linalg.LinAlgError("rank-deficient channel draw") from exc
    norms = np.sum(np.abs(v) ** 2, axis=1)
    if not np.all(np.isfinite(norms)) or np.any(norms > max_ratio * np.median(norms)):
        raise np.linalg.LinAlgError("rank-deficient channel draw")
    mu = np.sqrt(power / (k * norms.mean(axis=0)))
    return v * mu[None, None, :], mu, v


def sample_users(traffic, params, q, n, rng, batch=4096):
    """``n`` user positions in cell ``q`` drawn from its traffic PDF by rejection."""
    x0, x1, y0, y1 = cell_bounds(q, params)
    hs = traffic.hotspots_for(q)
    bound = traffic.P0 / params.area
    if len(hs) and traffic.P0 < 1.0:
        bound += (1.0 - traffic.P0) / (2.0 * math.pi * traffic.sigma_h**2)
    out = np.empty((0, 2))
    while len(out) < n:
        cand = np.column_stack((rng.uniform(x0, x1, batch), rng.uniform(y0, y1, batch)))
        f = traffic.unnormalized(cand[:, 0], cand[:, 1], q, params)
        keep = rng.uniform(0.0, bound, batch) < f
        out = np.vstack((out, cand[keep]))
    return out[:n]


def _antenna_gains(rrh, users, params):
    """(N*M, n_users) pathloss from every antenna of ``rrh`` to every user."""
    d = np.linalg.norm(rrh[:, None, :] - users[None], axis=2)
    return np.repeat(pathloss(d, params).reshape(len(rrh), len(users)), params.M, axis=0)


def draw_cell_channel(rrh, users, params, n_fading, rng):
    gains = np.atleast_2d(_antenna_gains(rrh, users, params))
    small = complex_normal(rng, (n_fading,) + gains.shape)
    return ChannelDraw(small, gains)


def simulate_drop(layout_xy, traffic, params, n_fading, seed, index, rho=None, max_redraws=10):
    """One user drop: returns (users (Q, K, 2), mean rate per user (Q, K), power ratio)."""
    rng = _rng(seed, index)
    rho = params.rho if rho is None else rho
    Q, K = params.Q, params.K
    users = np.stack([sample_users(traffic, params, q, K, rng) for q in range(Q)])
    own = []
    for q in range(Q):
        for _ in range(max_redraws):
            draw = draw_cell_channel(layout_xy[q], users[q], params, n_fading, rng)
            try:
                w, mu, v = zf_beamformer(draw.channel, rho) if rho > 0 else (None, np.zeros(K), None)
            except np.linalg.LinAlgError:
                continue
            break
        else:
            raise np.linalg.LinAlgError(f"cell {q}: no full-rank channel draw")
        own.append((w, mu))
    if rho <= 0:
        return users, np.zeros((Q, K)), 1.0
    power = np.mean([np.sum(np.abs(w) ** 2, axis=(1, 2)).mean() / rho for w, _ in own])
    rates = np.empty((Q, K))
    for q in range(Q):
        off = wrap_offsets(q, params)
        interf = np.zeros((n_fading, K))
        for c in range(Q):
            if c == q:
                continue
            gains = _antenna_gains(layout_xy[c] + off[c], users[q], params)
            h = complex_normal(rng, (n_fading,) + gains.shape) * np.sqrt(gains)[None]
            proj = np.einsum("frk,frj->fkj", h.conj(), own[c][0])
            interf += np.sum(np.abs(proj) ** 2, axis=2)
        sinr = own[q][1][None, :] ** 2 / (interf + 1.0)
        rates[q] = np.log1p(sinr).mean(axis=0)
    return users, rates, float(power)


def _run_drops(args):
    layout_xy, traffic, params, n_fading, seed, indices, rho = args
    return [simulate_drop(layout_xy, traffic, params, n_fading, seed, i, rho) for i in indices]


def mc_access_rate(layout, traffic, params, n_trials=10_000, n_fading=200, seed=0, workers=1,
                   rho=None, model=None):
    """Monte-Carlo mean spectral efficiency of a typical user, averaged over cells.

    ``n_trials`` joint (user positions, fading) realisations are split into
    ``ceil(n_trials / n_fading)`` user drops of ``n_fading`` fading draws.
    The standard errors are computed across drops. The closed-form bound is
    evaluated at the same user positions (``lb_*`` fields), and ``gap_se`` is
    the standard error of the paired per-drop difference.
    """
    if n_trials < 1 or n_fading < 1:
        raise ValueError("n_trials and n_fading must be positive")
    n_drops = max(2, -(-n_trials // n_fading))
    layout_xy = np.asarray(layout.rrh_xy, dtype=float)
    chunks = [list(c) for c in np.array_split(np.arange(n_drops), max(1, workers)) if len(c)]
    jobs = [(layout_xy, traffic, params, n_fading, seed, c, rho) for c in chunks]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_drops, jobs))
    else:
        parts = [_run_drops(j) for j in jobs]
    drops = [d for part in parts for d in part]
    users = np.stack([d[0] for d in drops])          # (D, Q, K, 2)
    rates = np.stack([d[1] for d in drops])          # (D, Q, K)
    power = float(np.mean([d[2] for d in drops]))
    model = model or AccessModel(params, traffic)
    lb = np.empty(rates.shape)
    for q in range(params.Q):
        pts = users[:, q].reshape(-1, 2)
        lb[:, q] = model.rate_at(q, layout, pts).reshape(n_drops, params.K)
    if rho is not None and rho <= 0:
        lb[:] = 0.0
    cell_drop = rates.mean(axis=2)                    # (D, Q)
    lb_drop = lb.mean(axis=2)
    net = cell_drop.mean(axis=1)
    gap = net - lb_drop.mean(axis=1)
    sd = math.sqrt(n_drops)
    return AccessMCResult(
        mean=float(net.mean()),
        se=float(net.std(ddof=1) / sd),
        cell_mean=cell_drop.mean(axis=0),
        cell_se=cell_drop.std(axis=0, ddof=1) / sd,
        lb_mean=float(lb_drop.mean()),
        lb_cell_mean=lb_drop.mean(axis=0),
        gap_se=float(gap.std(ddof=1) / sd),
        n_drops=n_drops,
        n_fading=n_fading,
        power_ratio=power,
        drop_rates=cell_drop,
        drop_lb=lb_drop,
    )
