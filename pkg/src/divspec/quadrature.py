"""Quadrature rules on the reference segment and reference triangle.

Points are stored in barycentric coordinates; weights sum to the
reference-element volume (1 for the segment [0,1], 1/2 for the triangle).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray    # (Q, n+1) barycentric coordinates
    weights: np.ndarray   # (Q,) positive, summing to reference volume
    degree: int           # exact for polynomials up to this total degree


@lru_cache(maxsize=None)
def segment_rule(degree):
    """Gauss-Legendre rule mapped to barycentric coordinates on [0, 1]."""
    npts = (int(degree) + 2) // 2
    x, w = np.polynomial.legendre.leggauss(npts)
    t = 0.5 * (x + 1.0)
    pts = np.column_stack([1.0 - t, t])
    return QuadratureRule(points=pts, weights=0.5 * w, degree=2 * npts - 1)


# Symmetric triangle rules with positive weights.  Weights below are
# area-normalized (sum to 1) and scaled by the reference area 1/2 at
# construction.

def _orbit1():
    return [(1 / 3, 1 / 3, 1 / 3)]


def _orbit3(a):
    b = 1.0 - 2.0 * a
    return [(b, a, a), (a, b, a), (a, a, b)]


_TRI_RULES = {
    1: ([(_orbit1(), 1.0)], 1),
    2: ([(_orbit3(0.5), 1 / 3)], 2),
    4: ([(_orbit3(0.445948490915965), 0.223381589678011),
         (_orbit3(0.091576213509771), 0.109951743655322)], 4),
    5: ([(_orbit1(), 0.225),
         (_orbit3(0.470142064105115), 0.132394152788506),
         (_orbit3(0.101286507323456), 0.125939180544827)], 5),
}


@lru_cache(maxsize=None)
def triangle_rule(degree):
    """Smallest tabulated symmetric rule exact to at least `degree`."""
    for deg in sorted(_TRI_RULES):
        if deg >= degree:
            orbits, exact = _TRI_RULES[deg]
            pts, wts = [], []
            for orbit, w in orbits:
                for p in orbit:
                    pts.append(p)
                    wts.append(w)
            return QuadratureRule(points=np.array(pts),
                                  weights=0.5 * np.array(wts),
                                  degree=exact)
    raise ValueError(f"no tabulated triangle rule of degree {degree}")


def simplex_rule(dim_n, degree):
    if dim_n == 1:
        return segment_rule(degree)
    if dim_n == 2:
        return triangle_rule(degree)
    raise ValueError("only 1-D and 2-D reference elements are supported")
