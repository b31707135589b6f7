"""Closed-form reference spectra and convergence-rate estimation.

Disk eigenvalues are squared zeros of the Bessel functions J_m, computed
here from scratch: an ascending series for small argument, a normalized
downward recurrence for large argument, McMahon-seeded brackets and
bisection for the zeros.  No special-function library is involved, so
these values remain an independent check on everything else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_SERIES_CUTOFF = 12.0
_MAX_ORDER = 120


@dataclass(frozen=True)
class ReferenceSpectrum:
    domain: str
    values: np.ndarray   # ascending, repeated by multiplicity
    note: str


def interval_spectrum(length, count):
    """Dirichlet eigenvalues (k pi / L)^2 of an interval of given length."""
    if length <= 0.0:
        raise ValueError("length must be positive")
    k = np.arange(1, count + 1)
    return ReferenceSpectrum(domain=f"interval[{length:g}]",
                             values=(k * math.pi / length) ** 2,
                             note="separation of variables")


def rectangle_spectrum(a, b, count):
    """Dirichlet eigenvalues pi^2 (p^2/a^2 + q^2/b^2) of an a-by-b rectangle."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError("side lengths must be positive")
    limit = count + 1
    p = np.arange(1, limit + 1)
    vals = (math.pi ** 2 * (p[:, None] ** 2 / a ** 2
                            + p[None, :] ** 2 / b ** 2)).reshape(-1)
    vals.sort()
    return ReferenceSpectrum(domain=f"rectangle[{a:g}x{b:g}]",
                             values=vals[:count],
                             note="separation of variables")


def disk_spectrum(count):
    """Dirichlet eigenvalues of the unit disk: squared Bessel zeros
    j_{m,k}^2, with multiplicity two for m >= 1."""
    if count < 1:
        raise ValueError("count must be >= 1")
    bound = bessel_j_zero(0, count) ** 2
    values = []
    m = 0
    while True:
        if m > 0 and bessel_j_zero(m, 1) ** 2 > bound:
            break
        k = 1
        while True:
            lam = bessel_j_zero(m, k) ** 2
            if lam > bound:
                break
            values.append(lam)
            if m >= 1:
                values.append(lam)
            k += 1
        m += 1
    values.sort()
    return ReferenceSpectrum(domain="disk[1]",
                             values=np.array(values[:count]),
                             note="squared Bessel-function zeros")


def convergence_order(samples):
    """Least-squares slope of log(err) against log(h).

    `samples` is a sequence of (h, err) pairs with h strictly decreasing
    and err positive.
    """
    samples = list(samples)
    if len(samples) < 3:
        raise ValueError("need at least 3 (h, err) samples")
    h = np.array([s[0] for s in samples], dtype=float)
    err = np.array([s[1] for s in samples], dtype=float)
    if np.any(err <= 0.0):
        raise ValueError("errors must be positive")
    if np.any(np.diff(h) >= 0.0):
        raise ValueError("h must be strictly decreasing")
    slope = np.polyfit(np.log(h), np.log(err), 1)[0]
    return float(slope)


# ---------------------------------------------------------------------------
# Bessel functions of the first kind, integer order

def bessel_j(m, x, method="auto"):
    """J_m(x) for integer m >= 0 and real x >= 0.

    method "series" forces the ascending series, "recurrence" the
    normalized downward recurrence; "auto" picks the series for
    x <= 12 and the recurrence beyond.
    """
    if m < 0 or m > _MAX_ORDER:
        raise ValueError(f"order must be in [0, {_MAX_ORDER}]")
    if x < 0.0:
        raise ValueError("argument must be nonnegative")
    if method == "auto":
        method = "series" if x <= _SERIES_CUTOFF else "recurrence"
    if method == "series":
        return _bessel_series(m, x)
    if method == "recurrence":
        return _bessel_downward(m, x)
    raise ValueError(f"unknown method {method!r}")


def _bessel_series(m, x):
    half = 0.5 * x
    term = 1.0
    for i in range(1, m + 1):
        term *= half / i
    total = term
    t = 0
    while True:
        t += 1
        term *= -(half * half) / (t * (m + t))
        total += term
        if abs(term) <= 1e-17 * max(abs(total), 1e-300) or t > 400:
            return total


def _bessel_downward(m, x):
    if x == 0.0:
        return 1.0 if m == 0 else 0.0
    start = int(max(m, x) + 0.5 * math.sqrt(max(m, x)) + 40)
    if start % 2 == 1:
        start += 1
    jp = 0.0
    j = 1e-300
    raw_m = 0.0
    even_sum = 0.0
    j0 = 0.0
    for k in range(start, 0, -1):
        jm = (2.0 * k / x) * j - jp
        jp = j
        j = jm
        # k-1 is the order of `j` now
        order = k - 1
        if order == m:
            raw_m = j
        if order > 0 and order % 2 == 0:
            even_sum += j
        if order == 0:
            j0 = j
        if abs(j) > 1e250:
            j *= 1e-250
            jp *= 1e-250
            raw_m *= 1e-250
            even_sum *= 1e-250
            j0 *= 1e-250
    scale = j0 + 2.0 * even_sum
    return raw_m / scale


_zero_cache = {}


def bessel_j_zero(m, k):
    """k-th positive zero of J_m, to absolute accuracy 1e-12.

    Zeros are located sequentially: consecutive zeros of J_m are more
    than pi apart, so stepping by pi/2 from just past the previous zero
    (or from the order line x = m, below the first zero) cannot skip one.
    """
    if k < 1:
        raise ValueError("zero index must be >= 1")
    zeros = _zero_cache.setdefault(m, [])
    while len(zeros) < k:
        start = zeros[-1] + 0.5 if zeros else max(m + 0.25, 0.25)
        lo, hi = _next_sign_change(m, start)
        zeros.append(_bisect(m, lo, hi))
    return zeros[k - 1]


def _next_sign_change(m, start):
    step = 0.5 * math.pi
    x = start
    f = bessel_j(m, x)
    if f == 0.0:
        x += 1e-9
        f = bessel_j(m, x)
    for _ in range(100000):
        x_next = x + step
        f_next = bessel_j(m, x_next)
        if f * f_next < 0.0:
            return x, x_next
        x, f = x_next, f_next
    raise RuntimeError(f"failed to bracket the next zero of J_{m}")


def _bisect(m, lo, hi):
    f_lo = bessel_j(m, lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= 1e-13 * max(1.0, abs(mid)):
            return mid
        f_mid = bessel_j(m, mid)
        if f_mid == 0.0:
            return mid
        if f_lo * f_mid < 0.0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
    return 0.5 * (lo + hi)
