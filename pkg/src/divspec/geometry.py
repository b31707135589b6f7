"""Charts, tensor and drift fields, and the curvature quantities built
from them.

All fields are backed by expression trees; every derivative that enters a
formula is obtained by symbolic differentiation at construction time and
evaluated numerically afterwards.  Evaluation is batched: a "point" argument
may be a single coordinate vector of shape (n,) or a stack of shape (N, n).

Index conventions for the arrays produced here:

    metric        g[q, i, j]
    metric_d1     dg[q, k, i, j]     = d_k g_ij
    metric_d2     d2g[q, m, k, i, j] = d_m d_k g_ij
    jacobian      J[q, a, i]         = d_i x_a        (ambient index a)
    hessian       H[q, a, i, j]      = d_i d_j x_a
    christoffel   G[q, k, i, j]      = Gamma^k_ij
    tensor comps  A[q, i, j]         = T^i_j  (mixed components)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expressions as ex
from .errors import (EvalDomainError, GeometryDegeneracyError,
                     UnsupportedOperationError)

__all__ = [
    "Chart", "TensorFieldT", "DriftField", "SecondFundamentalForm",
    "identity_chart", "immersion_chart", "metric_chart",
    "identity_tensor", "diagonal_tensor", "symmetric_tensor",
    "drift_field", "zero_drift",
    "eval_metric", "christoffel", "second_fundamental_form",
    "generalized_mean_curvature", "trace_nabla_T", "c0_integrand",
    "drift_gradient_norm", "operator_apply", "volume_density",
]

_RANK_TOL = 1e-10


def _as_expr(e):
    return ex.parse(e) if isinstance(e, str) else e


def _as_batch(p):
    p = np.asarray(p, dtype=float)
    if p.ndim == 1:
        return p[None, :], True
    if p.ndim == 2:
        return p, False
    raise ValueError("point must have shape (n,) or (N, n)")


def _eval_scalar(expr, P):
    env = {ex.VARIABLES[i]: P[:, i] for i in range(P.shape[1])}
    v = ex.evaluate(expr, env)
    if np.ndim(v) == 0:
        return np.full(P.shape[0], float(v))
    return np.asarray(v, dtype=float)


def _eval_grid(exprs, P, shape):
    """Evaluate a nested list of Expr into an array (N, *shape)."""
    flat = np.empty((P.shape[0], int(np.prod(shape))))
    stack = [exprs]
    # walk in row-major order
    def _flatten(node, out):
        if isinstance(node, list):
            for item in node:
                _flatten(item, out)
        else:
            out.append(node)
    leaves = []
    _flatten(exprs, leaves)
    for idx, e in enumerate(leaves):
        flat[:, idx] = _eval_scalar(e, P)
    return flat.reshape((P.shape[0],) + tuple(shape))


def _grid_map(exprs, fn):
    if isinstance(exprs, list):
        return [_grid_map(e, fn) for e in exprs]
    return fn(exprs)


class Chart:
    """Single-patch coordinate description of the domain's geometry.

    kind is "immersed" (geometry induced from an explicit map into
    Euclidean space) or "intrinsic" (metric components given directly).
    """

    def __init__(self, dim_n, kind, metric_exprs, immersion_exprs=None):
        if dim_n < 1:
            raise ValueError("dim_n must be >= 1")
        if kind not in ("immersed", "intrinsic"):
            raise ValueError(f"unknown chart kind {kind!r}")
        self.dim_n = int(dim_n)
        self.kind = kind
        n = self.dim_n
        self._g = [[_as_expr(metric_exprs[i][j]) for j in range(n)] for i in range(n)]
        v = ex.VARIABLES
        self._dg = [[[ex.differentiate(self._g[i][j], v[k]) for j in range(n)]
                     for i in range(n)] for k in range(n)]
        self._d2g = [[[[ex.differentiate(self._dg[k][i][j], v[m]) for j in range(n)]
                       for i in range(n)] for k in range(n)] for m in range(n)]
        if kind == "immersed":
            comps = [_as_expr(c) for c in immersion_exprs]
            if len(comps) < n:
                raise ValueError("ambient dimension below intrinsic dimension")
            self.ambient_m = len(comps)
            self._x = comps
            self._jac = [[ex.differentiate(c, v[i]) for i in range(n)] for c in comps]
            self._hess = [[[ex.differentiate(self._jac[a][i], v[j]) for j in range(n)]
                           for i in range(n)] for a in range(len(comps))]
        else:
            if immersion_exprs is not None:
                raise ValueError("intrinsic charts carry no immersion")
            self.ambient_m = None
            self._x = None

    # -- evaluation ---------------------------------------------------------

    def metric(self, P):
        return _eval_grid(self._g, P, (self.dim_n, self.dim_n))

    def metric_d1(self, P):
        n = self.dim_n
        return _eval_grid(self._dg, P, (n, n, n))

    def metric_d2(self, P):
        n = self.dim_n
        return _eval_grid(self._d2g, P, (n, n, n, n))

    def immersion(self, P):
        self._require_immersed()
        return _eval_grid(self._x, P, (self.ambient_m,))

    def jacobian(self, P):
        self._require_immersed()
        return _eval_grid(self._jac, P, (self.ambient_m, self.dim_n))

    def hessian(self, P):
        self._require_immersed()
        return _eval_grid(self._hess, P, (self.ambient_m, self.dim_n, self.dim_n))

    def _require_immersed(self):
        if self.kind != "immersed":
            raise UnsupportedOperationError(
                "operation needs an immersion; chart is intrinsic")


def identity_chart(dim_n):
    """Flat chart: the identity immersion of a Euclidean domain."""
    comps = [ex.Var(ex.VARIABLES[i]) for i in range(dim_n)]
    metric = [[ex.ONE if i == j else ex.ZERO for j in range(dim_n)]
              for i in range(dim_n)]
    return Chart(dim_n, "immersed", metric, comps)


def immersion_chart(components, dim_n):
    """Chart with geometry induced from an explicit map into R^m.

    The metric components are derived symbolically from the map, so the
    stored metric is the induced one by construction.
    """
    comps = [_as_expr(c) for c in components]
    v = ex.VARIABLES
    jac = [[ex.differentiate(c, v[i]) for i in range(dim_n)] for c in comps]
    metric = [[None] * dim_n for _ in range(dim_n)]
    for i in range(dim_n):
        for j in range(i, dim_n):
            acc = ex.ZERO
            for a in range(len(comps)):
                acc = ex.add(acc, ex.mul(jac[a][i], jac[a][j]))
            metric[i][j] = acc
            metric[j][i] = acc
    return Chart(dim_n, "immersed", metric, comps)


def metric_chart(metric_exprs):
    """Intrinsic chart from an explicit symmetric metric expression grid."""
    n = len(metric_exprs)
    grid = [[_as_expr(metric_exprs[i][j]) for j in range(n)] for i in range(n)]
    for i in range(n):
        for j in range(n):
            if grid[i][j] != grid[j][i]:
                raise ValueError("metric expression grid must be symmetric")
    return Chart(n, "intrinsic", grid)


class TensorFieldT:
    """Symmetric positive definite coefficient tensor.

    Stored as mixed components T^i_j in the coordinate frame; `eval`
    returns the index-lowered bilinear-form matrix g.T, which is the
    symmetric object.
    """

    def __init__(self, chart, comp_exprs):
        n = chart.dim_n
        self.chart = chart
        self._c = [[_as_expr(comp_exprs[i][j]) for j in range(n)] for i in range(n)]
        v = ex.VARIABLES
        self._d1 = [[[ex.differentiate(self._c[i][j], v[k]) for j in range(n)]
                     for i in range(n)] for k in range(n)]
        self._d2 = [[[[ex.differentiate(self._d1[k][i][j], v[m]) for j in range(n)]
                      for i in range(n)] for k in range(n)] for m in range(n)]

    def components(self, P):
        n = self.chart.dim_n
        return _eval_grid(self._c, P, (n, n))

    def components_d1(self, P):
        n = self.chart.dim_n
        return _eval_grid(self._d1, P, (n, n, n))

    def components_d2(self, P):
        n = self.chart.dim_n
        return _eval_grid(self._d2, P, (n, n, n, n))

    def eval(self, p):
        """Index-lowered components <T(.),.> at a point (or batch)."""
        P, single = _as_batch(p)
        low = self.lowered(P)
        return low[0] if single else low

    def lowered(self, P):
        g = _metric_checked(self.chart, P)
        return np.einsum("qik,qkj->qij", g, self.components(P))

    def frame_eigenvalues(self, P):
        """Eigenvalues of T in a metric-orthonormal frame, ascending.

        Uses the Cholesky factor of g: eigs of L^-1 (gT) L^-T.
        """
        g = _metric_checked(self.chart, P)
        low = np.einsum("qik,qkj->qij", g, self.components(P))
        low = 0.5 * (low + np.transpose(low, (0, 2, 1)))
        L = np.linalg.cholesky(g)
        Li = np.linalg.inv(L)
        A = np.einsum("qik,qkl,qjl->qij", Li, low, Li)
        A = 0.5 * (A + np.transpose(A, (0, 2, 1)))
        return np.linalg.eigvalsh(A)


def identity_tensor(chart):
    n = chart.dim_n
    grid = [[ex.ONE if i == j else ex.ZERO for j in range(n)] for i in range(n)]
    return TensorFieldT(chart, grid)


def diagonal_tensor(chart, diagonal_exprs):
    n = chart.dim_n
    if len(diagonal_exprs) != n:
        raise ValueError(f"need {n} diagonal components")
    grid = [[_as_expr(diagonal_exprs[i]) if i == j else ex.ZERO for j in range(n)]
            for i in range(n)]
    return TensorFieldT(chart, grid)


def symmetric_tensor(chart, grid_exprs):
    n = chart.dim_n
    grid = [[_as_expr(grid_exprs[i][j]) for j in range(n)] for i in range(n)]
    return TensorFieldT(chart, grid)


class DriftField:
    """Scalar weight-generating field with exact first and second partials."""

    def __init__(self, dim_n, expr=None):
        self.dim_n = int(dim_n)
        self.expr = _as_expr(expr) if expr is not None else ex.ZERO
        v = ex.VARIABLES
        self._d1 = [ex.differentiate(self.expr, v[k]) for k in range(dim_n)]
        self._d2 = [[ex.differentiate(self._d1[k], v[m]) for m in range(dim_n)]
                    for k in range(dim_n)]

    @property
    def is_zero(self):
        return self.expr == ex.ZERO

    def eval(self, P):
        return _eval_scalar(self.expr, P)

    def grad_components(self, P):
        return _eval_grid(self._d1, P, (self.dim_n,))

    def hess_components(self, P):
        return _eval_grid(self._d2, P, (self.dim_n, self.dim_n))


def drift_field(dim_n, expr):
    return DriftField(dim_n, expr)


def zero_drift(dim_n):
    return DriftField(dim_n, None)


@dataclass
class SecondFundamentalForm:
    """Normal-valued bilinear form at a point.

    alpha[i, j] is the ambient vector alpha(d_i, d_j); tangent holds the
    immersion Jacobian columns at the same point for orthogonality checks.
    """
    alpha: np.ndarray   # (n, n, m)
    tangent: np.ndarray  # (m, n)


# ---------------------------------------------------------------------------
# Metric-level helpers

def _metric_checked(chart, P):
    try:
        g = chart.metric(P)
    except EvalDomainError as err:
        raise GeometryDegeneracyError(f"metric undefined: {err}") from err
    _require_spd(g, P)
    return g


def _require_spd(g, P):
    n = g.shape[-1]
    if n == 1:
        bad = g[:, 0, 0] <= 0.0
    elif n == 2:
        bad = (g[:, 0, 0] <= 0.0) | (g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] ** 2 <= 0.0)
    else:
        bad = np.linalg.eigvalsh(g)[:, 0] <= 0.0
    if np.any(bad):
        q = int(np.argmax(bad))
        raise GeometryDegeneracyError(
            f"metric not positive definite at {tuple(P[q])}")


def _geo(chart, P, order=1):
    """Metric, inverse, Christoffel symbols and (order>=2) their derivatives."""
    g = _metric_checked(chart, P)
    gi = np.linalg.inv(g)
    dg = chart.metric_d1(P)
    # C[q,l,i,j] = d_i g_jl + d_j g_il - d_l g_ij
    C = (np.einsum("qijl->qlij", dg) + np.einsum("qjil->qlij", dg)
         - np.einsum("qlij->qlij", dg))
    G = 0.5 * np.einsum("qkl,qlij->qkij", gi, C)
    out = {"g": g, "gi": gi, "dg": dg, "G": G}
    if order >= 2:
        d2g = chart.metric_d2(P)
        dgi = -np.einsum("qik,qmkl,qlj->qmij", gi, dg, gi)
        # dC[q,m,l,i,j] = d_m C[l,i,j]
        dC = (np.einsum("qmijl->qmlij", d2g) + np.einsum("qmjil->qmlij", d2g)
              - np.einsum("qmlij->qmlij", d2g))
        dG = (0.5 * np.einsum("qmkl,qlij->qmkij", dgi, C)
              + 0.5 * np.einsum("qkl,qmlij->qmkij", gi, dC))
        out["dgi"] = dgi
        out["dG"] = dG
    return out


def eval_metric(chart, p):
    """Metric matrix g(p); raises GeometryDegeneracyError off the chart."""
    P, single = _as_batch(p)
    g = _metric_checked(chart, P)
    return g[0] if single else g


def volume_density(chart, P):
    """sqrt(det g) at a batch of points."""
    g = _metric_checked(chart, P)
    return np.sqrt(np.linalg.det(g))


def christoffel(chart, p):
    """Connection coefficients Gamma^k_ij of the metric at p."""
    P, single = _as_batch(p)
    G = _geo(chart, P)["G"]
    return G[0] if single else G


# ---------------------------------------------------------------------------
# Immersion curvature

def _alpha_batch(chart, P):
    """Second fundamental form alpha[q, a, i, j] (ambient index first)."""
    chart._require_immersed()
    J = chart.jacobian(P)           # (N, m, n)
    H = chart.hessian(P)            # (N, m, n, n)
    Q, R = np.linalg.qr(J)
    diag = np.abs(np.diagonal(R, axis1=1, axis2=2))
    scale = np.maximum(np.max(diag, axis=1), 1.0)
    if np.any(diag < _RANK_TOL * scale[:, None]):
        q = int(np.argmax(np.any(diag < _RANK_TOL * scale[:, None], axis=1)))
        raise GeometryDegeneracyError(
            f"immersion Jacobian is rank deficient at {tuple(P[q])}")
    # complement projection: alpha = (I - Q Q^T) hess
    tang = np.einsum("qab,qbij->qaij", np.einsum("qac,qbc->qab", Q, Q), H)
    return H - tang, J


def second_fundamental_form(chart, p):
    """Second fundamental form at a single point.

    Errors with UnsupportedOperationError on intrinsic charts.
    """
    P, single = _as_batch(p)
    if not single:
        raise ValueError("second_fundamental_form takes a single point")
    alpha, J = _alpha_batch(chart, P)
    return SecondFundamentalForm(alpha=np.einsum("qaij->qija", alpha)[0],
                                 tangent=J[0])


def _mean_curvature_batch(chart, T, P):
    alpha, _ = _alpha_batch(chart, P)
    gi = np.linalg.inv(_metric_checked(chart, P))
    S = np.einsum("qki,qil->qkl", T.components(P), gi)
    return np.einsum("qkl,qakl->qa", S, alpha) / chart.dim_n


def generalized_mean_curvature(chart, T, p):
    """Ambient vector (1/n) tr(alpha o T) at p; frame independent."""
    P, single = _as_batch(p)
    H = _mean_curvature_batch(chart, T, P)
    return H[0] if single else H


# ---------------------------------------------------------------------------
# Tensor divergence quantities

def _trace_nabla_T_batch(chart, T, P, geo=None):
    geo = geo or _geo(chart, P)
    gi, G = geo["gi"], geo["G"]
    Tc = T.components(P)
    dT = T.components_d1(P)
    t = (np.einsum("qij,qikj->qk", gi, dT)
         + np.einsum("qij,qkil,qlj->qk", gi, G, Tc)
         - np.einsum("qij,qlij,qkl->qk", gi, G, Tc))
    return t


def trace_nabla_T(chart, T, p):
    """Contracted covariant derivative of T, a tangent vector field."""
    P, single = _as_batch(p)
    t = _trace_nabla_T_batch(chart, T, P)
    return t[0] if single else t


def _trace_nabla_T_d1(chart, T, P, geo):
    """dt[q, m, k] = d_m (trace_nabla_T)^k."""
    gi, G, dgi, dG = geo["gi"], geo["G"], geo["dgi"], geo["dG"]
    Tc = T.components(P)
    dT = T.components_d1(P)
    d2T = T.components_d2(P)
    dt = (np.einsum("qmij,qikj->qmk", dgi, dT)
          + np.einsum("qij,qmikj->qmk", gi, d2T)
          + np.einsum("qmij,qkil,qlj->qmk", dgi, G, Tc)
          + np.einsum("qij,qmkil,qlj->qmk", gi, dG, Tc)
          + np.einsum("qij,qkil,qmlj->qmk", gi, G, dT)
          - np.einsum("qmij,qlij,qkl->qmk", dgi, G, Tc)
          - np.einsum("qij,qmlij,qkl->qmk", gi, dG, Tc)
          - np.einsum("qij,qlij,qmkl->qmk", gi, G, dT))
    return dt


def _raised_gradient(geo, dphi, d2phi):
    """(grad phi)^j = g^jl d_l phi and its coordinate derivative."""
    gi, dgi = geo["gi"], geo["dgi"]
    grad = np.einsum("qjl,ql->qj", gi, dphi)
    dgrad = (np.einsum("qmjl,ql->qmj", dgi, dphi)
             + np.einsum("qjl,qml->qmj", gi, d2phi))
    return grad, dgrad


def _divergence(geo, V, dV):
    """div V = d_i V^i + Gamma^l_li V^i for dV[q, m, i] = d_m V^i."""
    trG = np.einsum("qlli->qi", geo["G"])
    return np.einsum("qii->q", dV) + np.einsum("qi,qi->q", trG, V)


def _c0_batch(chart, T, eta, P):
    geo = _geo(chart, P, order=2)
    g = geo["g"]
    Tc = T.components(P)
    dT = T.components_d1(P)
    de = eta.grad_components(P)
    d2e = eta.hess_components(P)
    grad_eta, dgrad_eta = _raised_gradient(geo, de, d2e)
    u = np.einsum("qij,qj->qi", Tc, grad_eta)
    du = (np.einsum("qmij,qj->qmi", dT, grad_eta)
          + np.einsum("qij,qmj->qmi", Tc, dgrad_eta))
    t = _trace_nabla_T_batch(chart, T, P, geo)
    dt = _trace_nabla_T_d1(chart, T, P, geo)
    W = u - t
    dW = du - dt
    V = np.einsum("qij,qj->qi", Tc, W)
    dV = np.einsum("qmij,qj->qmi", dT, W) + np.einsum("qij,qmj->qmi", Tc, dW)
    div_V = _divergence(geo, V, dV)
    t_grad_sq = np.einsum("qij,qi,qj->q", g, u, u)
    return 0.5 * div_V - 0.25 * t_grad_sq


def c0_integrand(chart, T, eta, p):
    """Pointwise quantity whose supremum is the drift-curvature constant:
    (1/2) div(T(T(grad eta) - trace_nabla_T)) - (1/4)|T(grad eta)|^2."""
    P, single = _as_batch(p)
    c = _c0_batch(chart, T, eta, P)
    return c[0] if single else c


def drift_gradient_norm(chart, eta, P):
    """|grad eta|_g at a batch of points."""
    geo_gi = np.linalg.inv(_metric_checked(chart, P))
    de = eta.grad_components(P)
    return np.sqrt(np.maximum(np.einsum("qij,qi,qj->q", geo_gi, de, de), 0.0))


def tangent_norm(chart, P, vec):
    """|v|_g for coordinate components vec[q, i]."""
    g = _metric_checked(chart, P)
    return np.sqrt(np.maximum(np.einsum("qij,qi,qj->q", g, vec, vec), 0.0))


def operator_apply(chart, T, eta, f_expr):
    """The weighted divergence-form operator applied to an expression:

        L f = div(T(grad f)) - <grad eta, T(grad f)>

    Returns a batched callable P -> (N,) evaluating L f exactly.
    """
    f = _as_expr(f_expr)
    n = chart.dim_n
    v = ex.VARIABLES
    d1 = [ex.differentiate(f, v[k]) for k in range(n)]
    d2 = [[ex.differentiate(d1[k], v[m]) for m in range(n)] for k in range(n)]

    def apply(P):
        geo = _geo(chart, P, order=2)
        Tc = T.components(P)
        dT = T.components_d1(P)
        df = _eval_grid(d1, P, (n,))
        d2f = _eval_grid(d2, P, (n, n))
        grad, dgrad = _raised_gradient(geo, df, d2f)
        V = np.einsum("qij,qj->qi", Tc, grad)
        dV = (np.einsum("qmij,qj->qmi", dT, grad)
              + np.einsum("qij,qmj->qmi", Tc, dgrad))
        div_V = _divergence(geo, V, dV)
        de = eta.grad_components(P)
        return div_V - np.einsum("qj,qj->q", de, V)

    return apply
