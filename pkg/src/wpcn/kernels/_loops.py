"""Compiled scalar-loop kernels (numba backend)."""

import math

import numpy as np
from numba import njit

LN2 = math.log(2.0)
_REL = 4e-16


@njit(cache=True)
def fbar_scalar(z, a):
    # ln(1+z) - z/(1+z) - a/(1+z); a series keeps f accurate near z = 0
    if z < 1e-3:
        f = 0.0
        zk = z * z
        sign = 1.0
        for k in range(2, 10):
            f += sign * (k - 1.0) / k * zk
            zk *= z
            sign = -sign
    else:
        f = math.log1p(z) - z / (1.0 + z)
    return f - a / (1.0 + z)


@njit(cache=True)
def invert_scalar(c, a):
    """Root of fbar(z, a) = c on [0, inf); nan when c < -a."""
    if c < -a or math.isnan(c):
        return math.nan
    if c == -a:
        return 0.0
    lo = 0.0
    hi = 1.0
    while fbar_scalar(hi, a) < c:
        lo = hi
        hi *= 2.0
        if hi > 1e300:
            return math.inf
    if a == 0.0 and c < 0.05:
        z = math.sqrt(2.0 * c)
        if z <= lo or z >= hi:
            z = 0.5 * (lo + hi)
    else:
        z = 0.5 * (lo + hi)
    for _ in range(300):
        g = fbar_scalar(z, a) - c
        if g == 0.0:
            return z
        if g > 0.0:
            hi = z
        else:
            lo = z
        slope = (z + a) / ((1.0 + z) * (1.0 + z))
        zn = z - g / slope if slope > 0.0 else 0.5 * (lo + hi)
        if not (lo < zn < hi):
            zn = 0.5 * (lo + hi)
        if abs(zn - z) <= _REL * zn or hi - lo <= _REL * hi:
            return zn
        z = zn
    return z


@njit(cache=True)
def invert(c, a):
    out = np.empty(c.shape[0])
    for i in range(c.shape[0]):
        out[i] = invert_scalar(c[i], a[i])
    return out


@njit(cache=True)
def _profile_slope(t, lam, mu, a, w, p_avg, p_peak, rhat):
    hi_r = p_avg / t
    lo_r = hi_r - p_peak
    if lo_r < 0.0:
        lo_r = 0.0
    if rhat >= hi_r:
        # the user slot broadcasts nothing
        return w * fbar_scalar(a * hi_r, 0.0) / LN2 - lam
    if rhat <= lo_r and lo_r > 0.0:
        # the user slot broadcasts at peak power
        h = w * math.log1p(a * lo_r) / LN2 - lam - mu * lo_r
        dh = w * a / ((1.0 + a * lo_r) * LN2) - mu
        return h - hi_r * dh
    return w * math.log1p(a * rhat) / LN2 - lam - mu * rhat


@njit(cache=True)
def fd_profile(lam, mu, alpha, w, p_avg, p_peak):
    k = alpha.shape[0]
    tau = np.empty(k)
    energy = np.empty(k)
    for i in range(k):
        a = alpha[i]
        rhat = w[i] / (mu * LN2) - 1.0 / a
        if rhat < 0.0:
            rhat = 0.0
        if _profile_slope(1.0, lam, mu, a, w[i], p_avg, p_peak, rhat) >= 0.0:
            t = 1.0
        else:
            lo = 0.0
            hi = 1.0
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if _profile_slope(mid, lam, mu, a, w[i], p_avg, p_peak, rhat) > 0.0:
                    lo = mid
                else:
                    hi = mid
                if hi - lo <= _REL * hi:
                    break
            t = 0.5 * (lo + hi)
        hi_r = p_avg / t
        lo_r = max(hi_r - p_peak, 0.0)
        r = min(max(rhat, lo_r), hi_r)
        e = p_avg - r * t
        e = min(max(e, 0.0), min(p_avg, p_peak * t))
        tau[i] = t
        energy[i] = e
    return tau, energy


@njit(cache=True)
def _pair_value(t1, t2, e1, e2, a1, a2, w1, w2, p_avg):
    v = 0.0
    if t1 > 0.0:
        v += w1 * t1 * math.log1p(a1 * (p_avg - e1) / t1)
    if t2 > 0.0:
        v += w2 * t2 * math.log1p(a2 * (p_avg - e2) / t2)
    return v / LN2


@njit(cache=True)
def fd2_grid(alpha, w, p_avg, p_peak, t1s, t2s, s1s, s2s):
    """Exhaustive two-user search; returns (value, t1, t2, e1, e2).

    The last axis holds the ``s2s`` fractions followed by two candidates
    that close the energy budget exactly (slot 0 silent or at peak).
    """
    best = -1.0
    bt1 = bt2 = be1 = be2 = 0.0
    n2 = s2s.shape[0]
    tol = 1e-12 * p_avg
    for i in range(t1s.shape[0]):
        t1 = t1s[i]
        for j in range(t2s.shape[0]):
            t2 = t2s[j]
            t0 = 1.0 - t1 - t2
            if t0 < -1e-15:
                continue
            if t0 < 0.0:
                t0 = 0.0
            cap1 = min(p_peak * t1, p_avg)
            cap2 = min(p_peak * t2, p_avg)
            for k in range(s1s.shape[0]):
                e1 = s1s[k] * cap1
                for m in range(n2 + 2):
                    if m < n2:
                        e2 = s2s[m] * cap2
                    elif m == n2:
                        e2 = p_avg - e1
                    else:
                        e2 = p_avg - e1 - p_peak * t0
                    if e2 < 0.0 or e2 > cap2:
                        continue
                    e0 = p_avg - e1 - e2
                    if e0 < -tol or e0 > p_peak * t0 + tol:
                        continue
                    v = _pair_value(t1, t2, e1, e2, alpha[0], alpha[1], w[0], w[1], p_avg)
                    if v > best:
                        best = v
                        bt1, bt2, be1, be2 = t1, t2, e1, e2
    return best, bt1, bt2, be1, be2
