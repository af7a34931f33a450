"""Vectorised numpy twins of the numba kernels (same names, same signatures)."""

import math

import numpy as np

_SERIES_SWITCH = 30.0
_LOG_2PI = np.log(2.0 * np.pi)
# Stirling-series coefficients of stirlerr(n) for n > 15
_S0, _S1, _S2, _S3, _S4 = 1.0 / 12, 1.0 / 360, 1.0 / 1260, 1.0 / 1680, 1.0 / 1188
_CHUNK_CELLS = 2_000_000


def log_i0(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z < _SERIES_SWITCH
    if small.any():
        zs = z[small]
        # (z/2)^(2k) / (k!)^2; 60 terms reach 1e-17 relative for z < 30
        k = np.arange(1, 61, dtype=float)
        q = 0.25 * zs[:, None] ** 2
        terms = np.cumprod(q / (k * k)[None, :], axis=1)
        out[small] = np.log1p(terms.sum(axis=1))
    if (~small).any():
        zb = z[~small]
        k = np.arange(1, 80, dtype=float)
        ratio = (2 * k - 1) ** 2 / (8 * k * zb[:, None])
        terms = np.cumprod(ratio, axis=1)
        # optimal truncation: stop at the first increase or below 1e-17
        stop = (ratio > 1.0) | (terms < 1e-17)
        first = np.where(stop.any(axis=1), stop.argmax(axis=1), terms.shape[1])
        keep = np.arange(terms.shape[1])[None, :] < first[:, None]
        s = 1.0 + np.where(keep, terms, 0.0).sum(axis=1)
        out[~small] = zb - 0.5 * (_LOG_2PI + np.log(zb)) + np.log(s)
    return out


def _stirlerr(n):
    """log(n!) - log(sqrt(2 pi n) (n/e)^n) for integers n >= 1."""
    n = np.asarray(n, dtype=float)
    out = np.empty_like(n)
    small = n <= 15.0
    ns = n[small]
    out[small] = [math.lgamma(v + 1.0) for v in ns] - (ns + 0.5) * np.log(ns) + ns - 0.5 * _LOG_2PI
    nb = n[~small]
    nn = nb * nb
    out[~small] = (_S0 - (_S1 - (_S2 - (_S3 - _S4 / nn) / nn) / nn) / nn) / nb
    return out


def _bd0(x, mu):
    """x log(x / mu) + mu - x without cancellation when x is close to mu."""
    x, mu = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(mu, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = x * np.log(x / mu) + mu - x
        near = np.abs(x - mu) < 0.1 * (x + mu)
        v = (x - mu) / (x + mu)
        ser = (x - mu) * v
        ej = 2.0 * x * v
        v2 = v * v
        # |v| < 0.1 there, so 12 terms reach double precision
        for j in range(1, 13):
            ej = ej * v2
            ser = ser + ej / (2 * j + 1)
    return np.where(near, ser, out)


def _log_pmf(lam, kmax):
    """log Poisson(k; lam) for k = 0..kmax, shape (len(lam), kmax + 1).

    Uses the saddle-point form -stirlerr(k) - bd0(k, lam) - log(2 pi k) / 2,
    which avoids the cancellation in k log(lam) - lam - log(k!) for large
    ``lam``.
    """
    lam = np.asarray(lam, dtype=float)[:, None]
    k = np.arange(1, kmax + 1, dtype=float)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        body = -_stirlerr(k) - _bd0(k, lam) - 0.5 * (_LOG_2PI + np.log(k))
    body = np.where(lam > 0.0, body, -np.inf)
    return np.concatenate((np.broadcast_to(-lam, (lam.shape[0], 1)), body), axis=1)


def _marcum_block(x, y):
    kmax = int(np.max(x + 12.0 * np.sqrt(x) + 40.0))
    jmax = max(kmax, int(np.max(y + 12.0 * np.sqrt(y) + 40.0)))
    w = np.exp(_log_pmf(x, kmax))
    pmf = np.exp(_log_pmf(y, jmax))
    cdf = np.cumsum(pmf, axis=1)[:, : kmax + 1]
    # upper tails P(Poisson(y) > k), summed from the far end
    tails = np.cumsum(pmf[:, ::-1], axis=1)[:, ::-1]
    tails = np.concatenate((tails[:, 1:], np.zeros((len(y), 1))), axis=1)[:, : kmax + 1]
    q = np.minimum((w * cdf).sum(axis=1), 1.0)
    p = (w * tails).sum(axis=1)
    small_q = q <= 0.5
    p = np.where(small_q, 1.0 - q, p)
    return q, p


def marcum_q1(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    q = np.empty_like(a)
    p = np.empty_like(a)
    zero_b = b == 0.0
    q[zero_b], p[zero_b] = 1.0, 0.0
    x = 0.5 * a * a
    y = 0.5 * b * b
    rayleigh = (x == 0.0) & ~zero_b
    q[rayleigh] = np.exp(-y[rayleigh])
    p[rayleigh] = -np.expm1(-y[rayleigh])
    idx = np.flatnonzero(~zero_b & ~rayleigh)
    if idx.size:
        width = int(np.max(x[idx] + 12.0 * np.sqrt(x[idx]) + y[idx] + 12.0 * np.sqrt(y[idx]) + 90.0))
        step = max(1, _CHUNK_CELLS // width)
        for start in range(0, idx.size, step):
            sel = idx[start : start + step]
            q[sel], p[sel] = _marcum_block(x[sel], y[sel])
    return q, p


def _pathloss_matrix(a, b, d0, alpha):
    d = np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])
    return d, (1.0 + d / d0) ** (-alpha)


def ici_coefficients(nodes, w, rrh, m_ant, k_users, d0, alpha):
    _, ell = _pathloss_matrix(nodes, rrh, d0, alpha)  # (P, N)
    xi = m_ant * ell.sum(axis=1)
    return k_users * (w[:, None] * ell / xi[:, None]).sum(axis=0)


def interference_field(nodes, src, coeffs, d0, alpha):
    if src.shape[0] == 0:
        return np.zeros(nodes.shape[0])
    _, ell = _pathloss_matrix(nodes, src, d0, alpha)
    return ell @ coeffs


def patch_field(nodes, rrh, owner, ginv, w, d0, alpha, d_min):
    d, ell = _pathloss_matrix(nodes, rrh, d0, alpha)
    tot = ell.sum(axis=1)
    chi = ell[:, owner] / tot
    do = d[:, owner]
    a1 = ginv * ell[:, owner] / (1.0 + do / d0) / (np.maximum(do, d_min) * (1.0 + ginv * tot))
    wa = w * a1
    return (float(w @ (chi * np.log1p(ginv * tot))), float(w @ chi), float(w.sum()),
            float(wa.sum()), float(wa @ nodes[:, 0]), float(wa @ nodes[:, 1]))


def zf_directions(h):
    gram = np.conj(np.swapaxes(h, 1, 2)) @ h
    return h @ np.linalg.inv(gram)
