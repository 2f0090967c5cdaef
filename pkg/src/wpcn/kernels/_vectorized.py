"""Vectorized numpy kernels; same contracts as the compiled loops."""

import math

import numpy as np

LN2 = math.log(2.0)
_REL = 4e-16


def fbar(z, a):
    z = np.asarray(z, dtype=float)
    small = z < 1e-3
    zs = np.where(small, z, 0.0)
    series = np.zeros_like(zs)
    zk = zs * zs
    sign = 1.0
    for k in range(2, 10):
        series += sign * (k - 1.0) / k * zk
        zk = zk * zs
        sign = -sign
    with np.errstate(invalid="ignore"):
        direct = np.log1p(z) - z / (1.0 + z)
    return np.where(small, series, direct) - a / (1.0 + z)


def invert(c, a):
    c = np.asarray(c, dtype=float)
    a = np.broadcast_to(np.asarray(a, dtype=float), c.shape)
    out = np.full(c.shape, np.nan)
    ok = c >= -a
    out[ok & (c == -a)] = 0.0
    todo = ok & (c > -a)
    if not np.any(todo):
        return out
    cc, aa = c[todo], a[todo]
    lo = np.zeros_like(cc)
    hi = np.ones_like(cc)
    grow = fbar(hi, aa) < cc
    while np.any(grow):
        lo = np.where(grow, hi, lo)
        hi = np.where(grow, 2.0 * hi, hi)
        grow = (fbar(hi, aa) < cc) & (hi <= 1e300)
    z = 0.5 * (lo + hi)
    guess = np.sqrt(2.0 * np.maximum(cc, 0.0))
    use_guess = (aa == 0.0) & (cc < 0.05) & (guess > lo) & (guess < hi)
    z = np.where(use_guess, guess, z)
    active = hi <= 1e300
    result = np.where(active, z, np.inf)
    for _ in range(300):
        if not np.any(active):
            break
        g = fbar(z, aa) - cc
        hi = np.where(active & (g > 0.0), z, hi)
        lo = np.where(active & (g < 0.0), z, lo)
        slope = (z + aa) / ((1.0 + z) ** 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            zn = z - g / slope
        bad = ~((zn > lo) & (zn < hi)) | ~(slope > 0.0)
        zn = np.where(bad, 0.5 * (lo + hi), zn)
        zn = np.where(g == 0.0, z, zn)
        done = (g == 0.0) | (np.abs(zn - z) <= _REL * zn) | (hi - lo <= _REL * hi)
        result = np.where(active, zn, result)
        active = active & ~done
        z = np.where(active, zn, z)
    out[todo] = result
    return out


def _profile_slope(t, lam, mu, a, w, p_avg, p_peak, rhat):
    hi_r = p_avg / t
    lo_r = np.maximum(hi_r - p_peak, 0.0)
    silent = w * fbar(a * hi_r, 0.0) / LN2 - lam
    h = w * np.log1p(a * lo_r) / LN2 - lam - mu * lo_r
    dh = w * a / ((1.0 + a * lo_r) * LN2) - mu
    pinned = h - hi_r * dh
    inner = w * np.log1p(a * rhat) / LN2 - lam - mu * rhat
    return np.where(rhat >= hi_r, silent,
                    np.where((rhat <= lo_r) & (lo_r > 0.0), pinned, inner))


def fd_profile(lam, mu, alpha, w, p_avg, p_peak):
    alpha = np.asarray(alpha, dtype=float)
    w = np.asarray(w, dtype=float)
    rhat = np.maximum(w / (mu * LN2) - 1.0 / alpha, 0.0)
    ones = np.ones_like(alpha)
    at_one = _profile_slope(ones, lam, mu, alpha, w, p_avg, p_peak, rhat) >= 0.0
    lo = np.zeros_like(alpha)
    hi = ones.copy()
    active = ~at_one
    for _ in range(200):
        if not np.any(active):
            break
        mid = 0.5 * (lo + hi)
        up = _profile_slope(mid, lam, mu, alpha, w, p_avg, p_peak, rhat) > 0.0
        lo = np.where(active & up, mid, lo)
        hi = np.where(active & ~up, mid, hi)
        active = active & (hi - lo > _REL * hi)
    t = np.where(at_one, 1.0, 0.5 * (lo + hi))
    hi_r = p_avg / t
    lo_r = np.maximum(hi_r - p_peak, 0.0)
    r = np.minimum(np.maximum(rhat, lo_r), hi_r)
    e = np.clip(p_avg - r * t, 0.0, np.minimum(p_avg, p_peak * t))
    return t, e


def fd2_grid(alpha, w, p_avg, p_peak, t1s, t2s, s1s, s2s):
    """Chunked exhaustive search over the same lattice as the loop kernel."""
    best = -1.0
    arg = (0.0, 0.0, 0.0, 0.0)
    tol = 1e-12 * p_avg
    t2 = t2s[:, None, None]
    s1 = s1s[None, :, None]
    s2 = s2s[None, None, :]
    for t1 in t1s:
        t0 = 1.0 - t1 - t2
        keep_t = t0 >= -1e-15
        t0 = np.maximum(t0, 0.0)
        cap1 = min(p_peak * t1, p_avg)
        cap2 = np.minimum(p_peak * t2, p_avg)
        e1 = s1 * cap1
        e2 = np.concatenate(
            [np.broadcast_to(s2 * cap2, (t2s.size, s1s.size, s2s.size)),
             np.broadcast_to(p_avg - e1, (t2s.size, s1s.size, 1)),
             np.broadcast_to(p_avg - e1 - p_peak * t0, (t2s.size, s1s.size, 1))],
            axis=2)
        e0 = p_avg - e1 - e2
        ok = (keep_t & (e2 >= 0.0) & (e2 <= cap2)
              & (e0 >= -tol) & (e0 <= p_peak * t0 + tol))
        with np.errstate(divide="ignore", invalid="ignore"):
            v1 = t1 * np.log1p(alpha[0] * (p_avg - e1) / t1) if t1 > 0.0 else 0.0 * e1
            v2 = np.where(t2 > 0.0, t2 * np.log1p(alpha[1] * (p_avg - e2) / t2), 0.0)
        v = (w[0] * v1 + w[1] * v2) / LN2
        v = np.where(ok, v, -np.inf)
        flat = int(np.argmax(v))
        if v.flat[flat] > best:
            j, k, m = np.unravel_index(flat, v.shape)
            best = float(v.flat[flat])
            arg = (float(t1), float(t2s[j]), float(np.broadcast_to(e1, v.shape)[j, k, m]),
                   float(e2[j, k, m]))
    return (best,) + arg
