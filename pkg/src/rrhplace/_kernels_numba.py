"""Loop-style kernels compiled with numba.

Every function here has a twin with the same signature in
``_kernels_numpy``; the two are checked against each other in the test suite.
"""

import math

import numpy as np
from numba import njit

_SERIES_SWITCH = 30.0
_LOG_2PI = math.log(2.0 * math.pi)
_S0, _S1, _S2, _S3, _S4 = 1.0 / 12, 1.0 / 360, 1.0 / 1260, 1.0 / 1680, 1.0 / 1188


@njit(cache=True)
def _log_i0_scalar(z):
    if z < _SERIES_SWITCH:
        q = 0.25 * z * z
        s = 1.0
        t = 1.0
        k = 1.0
        while t > 1e-17 * s:
            t *= q / (k * k)
            s += t
            k += 1.0
        return math.log(s)
    s = 1.0
    t = 1.0
    k = 1.0
    while True:
        nxt = t * (2.0 * k - 1.0) ** 2 / (8.0 * k * z)
        if nxt < 1e-17 or nxt > t:
            break
        s += nxt
        t = nxt
        k += 1.0
    return z - 0.5 * (_LOG_2PI + math.log(z)) + math.log(s)


@njit(cache=True)
def log_i0(z):
    out = np.empty(z.shape[0])
    for i in range(z.shape[0]):
        out[i] = _log_i0_scalar(z[i])
    return out


@njit(cache=True)
def _stirlerr(n):
    if n <= 15.0:
        return math.lgamma(n + 1.0) - (n + 0.5) * math.log(n) + n - 0.5 * _LOG_2PI
    nn = n * n
    return (_S0 - (_S1 - (_S2 - (_S3 - _S4 / nn) / nn) / nn) / nn) / n


@njit(cache=True)
def _bd0(x, mu):
    if abs(x - mu) < 0.1 * (x + mu):
        v = (x - mu) / (x + mu)
        s = (x - mu) * v
        ej = 2.0 * x * v
        v2 = v * v
        for j in range(1, 1000):
            ej *= v2
            s1 = s + ej / (2 * j + 1)
            if s1 == s:
                return s1
            s = s1
        return s
    return x * math.log(x / mu) + mu - x


@njit(cache=True)
def _log_pois(k, lam):
    """log Poisson(k; lam) in saddle-point form, accurate for large lam."""
    if k == 0:
        return -lam
    if lam == 0.0:
        return -math.inf
    kf = float(k)
    return -_stirlerr(kf) - _bd0(kf, lam) - 0.5 * (_LOG_2PI + math.log(kf))


@njit(cache=True)
def _marcum_scalar(a, b):
    if b == 0.0:
        return 1.0, 0.0
    x = 0.5 * a * a
    y = 0.5 * b * b
    if x == 0.0:
        return math.exp(-y), -math.expm1(-y)
    kmax = int(x + 12.0 * math.sqrt(x) + 40.0)
    g = 0.0
    q = 0.0
    for k in range(kmax + 1):
        g += math.exp(_log_pois(k, y))
        q += math.exp(_log_pois(k, x)) * g
    if q > 1.0:
        q = 1.0
    if q <= 0.5:
        return q, 1.0 - q
    # complement summed directly: Poisson(y) upper tails weighted by Poisson(x)
    jmax = max(kmax, int(y + 12.0 * math.sqrt(y) + 40.0))
    pmf = np.empty(jmax + 2)
    for j in range(jmax + 1):
        pmf[j] = math.exp(_log_pois(j, y))
    pmf[jmax + 1] = 0.0
    tail = 0.0
    tails = np.empty(jmax + 1)
    for j in range(jmax, -1, -1):
        tail += pmf[j + 1]
        tails[j] = tail
    p = 0.0
    for k in range(kmax + 1):
        p += math.exp(_log_pois(k, x)) * tails[k]
    return q, p


@njit(cache=True)
def marcum_q1(a, b):
    n = a.shape[0]
    q = np.empty(n)
    p = np.empty(n)
    for i in range(n):
        q[i], p[i] = _marcum_scalar(a[i], b[i])
    return q, p


@njit(cache=True)
def ici_coefficients(nodes, w, rrh, m_ant, k_users, d0, alpha):
    """K * sum_j w_j * l_j(rrh_l) / xi(j) for every RRH l of one cell."""
    n = rrh.shape[0]
    p = nodes.shape[0]
    out = np.zeros(n)
    ell = np.empty(n)
    for j in range(p):
        xi = 0.0
        for l in range(n):
            dx = nodes[j, 0] - rrh[l, 0]
            dy = nodes[j, 1] - rrh[l, 1]
            ell[l] = (1.0 + math.sqrt(dx * dx + dy * dy) / d0) ** (-alpha)
            xi += ell[l]
        xi *= m_ant
        for l in range(n):
            out[l] += w[j] * ell[l] / xi
    for l in range(n):
        out[l] *= k_users
    return out


@njit(cache=True)
def interference_field(nodes, src, coeffs, d0, alpha):
    p = nodes.shape[0]
    out = np.zeros(p)
    for j in range(p):
        acc = 0.0
        for r in range(src.shape[0]):
            dx = nodes[j, 0] - src[r, 0]
            dy = nodes[j, 1] - src[r, 1]
            acc += coeffs[r] * (1.0 + math.sqrt(dx * dx + dy * dy) / d0) ** (-alpha)
        out[j] = acc
    return out


@njit(cache=True)
def patch_field(nodes, rrh, owner, ginv, w, d0, alpha, d_min):
    rnum = 0.0
    mass = 0.0
    pmass = 0.0
    s = 0.0
    sx = 0.0
    sy = 0.0
    n = rrh.shape[0]
    base = np.empty(n)
    dist = np.empty(n)
    for j in range(nodes.shape[0]):
        tot = 0.0
        for m in range(n):
            dx = nodes[j, 0] - rrh[m, 0]
            dy = nodes[j, 1] - rrh[m, 1]
            dist[m] = math.sqrt(dx * dx + dy * dy)
            base[m] = 1.0 + dist[m] / d0
            tot += base[m] ** (-alpha)
        ell = base[owner] ** (-alpha)
        chi = ell / tot
        rnum += w[j] * chi * math.log1p(ginv[j] * tot)
        mass += w[j] * chi
        pmass += w[j]
        a1 = ginv[j] * ell / base[owner] / (max(dist[owner], d_min) * (1.0 + ginv[j] * tot))
        s += w[j] * a1
        sx += w[j] * a1 * nodes[j, 0]
        sy += w[j] * a1 * nodes[j, 1]
    return rnum, mass, pmass, s, sx, sy


@njit(cache=True)
def zf_directions(h):
    """H (H^H H)^-1 for a stack of channel matrices, Gauss-Jordan with partial pivoting."""
    t_count, rows, k = h.shape
    out = np.empty_like(h)
    g = np.empty((k, 2 * k), dtype=np.complex128)
    for t in range(t_count):
        for i in range(k):
            for j in range(k):
                acc = 0.0 + 0.0j
                for r in range(rows):
                    acc += np.conj(h[t, r, i]) * h[t, r, j]
                g[i, j] = acc
                g[i, k + j] = 1.0 if i == j else 0.0
        for c in range(k):
            piv = c
            best = abs(g[c, c])
            for r in range(c + 1, k):
                if abs(g[r, c]) > best:
                    best = abs(g[r, c])
                    piv = r
            if piv != c:
                for j in range(2 * k):
                    tmp = g[c, j]
                    g[c, j] = g[piv, j]
                    g[piv, j] = tmp
            inv_p = 1.0 / g[c, c]
            for j in range(2 * k):
                g[c, j] *= inv_p
            for r in range(k):
                if r != c:
                    f = g[r, c]
                    if f != 0:
                        for j in range(2 * k):
                            g[r, j] -= f * g[c, j]
        for r in range(rows):
            for j in range(k):
                acc = 0.0 + 0.0j
                for i in range(k):
                    acc += h[t, r, i] * g[i, k + j]
                out[t, r, j] = acc
    return out
