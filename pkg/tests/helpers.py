"""Shared property checks and finite-difference cross-checks.

The acceptance suite re-runs these, so each helper returns normally on
success and raises AssertionError with a diagnostic otherwise.
"""

import numpy as np

from divspec import bounds, geometry

FD_STEP = 1e-5


class PlainSpectrum:
    """Bare eigenvalue list quacking like a solver Spectrum."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)


def flat_constants(n):
    return bounds.BoundConstants(n=n, eps=1.0, delta=1.0, H0=0.0, C0=0.0,
                                 T0=0.0, eta0=0.0, sample_count=0)


# ---------------------------------------------------------------------------
# Finite-difference evaluations of the geometry formulas

def fd_metric_d1(chart, p, h=FD_STEP):
    n = chart.dim_n
    out = np.empty((n, n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        out[k] = (geometry.eval_metric(chart, p + e)
                  - geometry.eval_metric(chart, p - e)) / (2.0 * h)
    return out


def fd_christoffel(chart, p, h=FD_STEP):
    g = geometry.eval_metric(chart, p)
    gi = np.linalg.inv(g)
    dg = fd_metric_d1(chart, p, h)
    C = (np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg)
    return 0.5 * np.einsum("kl,lij->kij", gi, C)


def fd_trace_nabla_T(chart, tensor, p, h=FD_STEP):
    p = np.asarray(p, dtype=float)
    n = chart.dim_n
    g = geometry.eval_metric(chart, p)
    gi = np.linalg.inv(g)
    G = fd_christoffel(chart, p, h)
    Tc = tensor.components(p[None, :])[0]
    dT = np.empty((n, n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        dT[k] = (tensor.components((p + e)[None, :])[0]
                 - tensor.components((p - e)[None, :])[0]) / (2.0 * h)
    return (np.einsum("ij,ikj->k", gi, dT)
            + np.einsum("ij,kil,lj->k", gi, G, Tc)
            - np.einsum("ij,lij,kl->k", gi, G, Tc))


def fd_c0_integrand(chart, tensor, eta, p, h=FD_STEP):
    """Same formula, with the divergence taken by central differences of
    sqrt(det g) V^i; V itself uses only exact first-order data."""
    p = np.asarray(p, dtype=float)
    n = chart.dim_n

    def V_weighted(q):
        q = np.asarray(q, dtype=float)[None, :]
        g = geometry.eval_metric(chart, q)[0]
        gi = np.linalg.inv(g)
        Tc = tensor.components(q)[0]
        grad_eta = gi @ eta.grad_components(q)[0]
        W = Tc @ grad_eta - geometry.trace_nabla_T(chart, tensor, q)[0]
        return np.sqrt(np.linalg.det(g)) * (Tc @ W)

    div = 0.0
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        div += (V_weighted(p + e)[k] - V_weighted(p - e)[k]) / (2.0 * h)
    g = geometry.eval_metric(chart, p)
    div /= np.sqrt(np.linalg.det(g))
    gi = np.linalg.inv(g)
    Tc = tensor.components(p[None, :])[0]
    u = Tc @ (gi @ eta.grad_components(p[None, :])[0])
    return 0.5 * div - 0.25 * float(u @ g @ u)


def check_derivatives_match_fd(chart, tensor, eta, points, rtol=1e-6):
    """Geometry invariant: symbolic-derivative outputs agree with central
    finite differences of the same formulas."""
    for p in np.atleast_2d(points):
        G = geometry.christoffel(chart, p)
        G_fd = fd_christoffel(chart, p)
        _close(G, G_fd, rtol, f"christoffel at {p}")
        t = geometry.trace_nabla_T(chart, tensor, p)
        t_fd = fd_trace_nabla_T(chart, tensor, p)
        _close(t, t_fd, rtol, f"trace_nabla_T at {p}")
        c = geometry.c0_integrand(chart, tensor, eta, p)
        c_fd = fd_c0_integrand(chart, tensor, eta, p)
        _close(np.array([c]), np.array([c_fd]), rtol, f"c0_integrand at {p}")


def _close(a, b, rtol, label):
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1.0)
    err = np.max(np.abs(a - b)) / scale
    assert err <= rtol, f"{label}: relative mismatch {err:.3e}"


# ---------------------------------------------------------------------------
# Property suites shared with the acceptance module

def check_tensor_ellipticity_bounds(chart, tensor, points, draws=1000,
                                    seed=7321):
    """eps <T(Y), Y> <= |T(Y)|^2 <= delta <T(Y), Y> for random tangent
    vectors, with eps/delta the frame eigenvalue extremes at each point."""
    rng = np.random.default_rng(seed)
    points = np.atleast_2d(points)
    idx = rng.integers(0, points.shape[0], size=draws)
    P = points[idx]
    Y = rng.standard_normal((draws, chart.dim_n))
    g = geometry.eval_metric(chart, P)
    Tc = tensor.components(P)
    TY = np.einsum("qij,qj->qi", Tc, Y)
    t_quad = np.einsum("qij,qi,qj->q", g, TY, Y)
    t_norm_sq = np.einsum("qij,qi,qj->q", g, TY, TY)
    eigs = tensor.frame_eigenvalues(P)
    eps, delta = eigs[:, 0], eigs[:, -1]
    tol = 1e-10 * np.maximum(t_norm_sq, 1.0)
    assert np.all(eps * t_quad <= t_norm_sq + tol), "lower ellipticity violated"
    assert np.all(t_norm_sq <= delta * t_quad + tol), "upper ellipticity violated"
    assert np.all(eigs[:, 0] > 0.0), "tensor not positive definite"


def check_frame_independence(chart, tensor, points, rtol=1e-10):
    """Mean-curvature trace computed in two different orthonormal frames."""
    for p in np.atleast_2d(points):
        q = np.asarray(p, dtype=float)[None, :]
        g = geometry.eval_metric(chart, p)
        sff = geometry.second_fundamental_form(chart, p)
        Tc = tensor.components(q)[0]
        n = chart.dim_n
        # frame A: inverse-transpose Cholesky columns; frame B: eigenframe
        L = np.linalg.cholesky(g)
        EA = np.linalg.inv(L).T
        w, V = np.linalg.eigh(g)
        EB = V @ np.diag(1.0 / np.sqrt(w))
        results = []
        for E in (EA, EB):
            H = np.zeros(sff.alpha.shape[-1])
            for i in range(n):
                e = E[:, i]
                H += np.einsum("ija,i,j->a", sff.alpha, Tc @ e, e)
            results.append(H / n)
        direct = geometry.generalized_mean_curvature(chart, tensor, p)
        scale = max(np.linalg.norm(direct), 1.0)
        assert np.linalg.norm(results[0] - results[1]) <= rtol * scale
        assert np.linalg.norm(results[0] - direct) <= rtol * scale


def check_rayleigh_identity(problem, spectrum, rtol=1e-10):
    """lambda_i (u^T M u) = u^T K u for every computed pair."""
    for i in range(spectrum.count):
        u = spectrum.vectors[:, i]
        lhs = spectrum.values[i] * float(u @ (problem.M @ u))
        rhs = float(u @ (problem.K @ u))
        assert abs(lhs - rhs) <= rtol * max(abs(rhs), 1.0), \
            f"Rayleigh identity broken for pair {i}: {lhs} vs {rhs}"


def check_m_orthonormality(problem, spectrum, tol=1e-10):
    U = spectrum.vectors
    gram = U.T @ (problem.M @ U)
    err = np.max(np.abs(gram - np.eye(spectrum.count)))
    assert err <= tol, f"M-orthonormality violated: {err:.3e}"


def check_product_rule_decay(min_order=1.8, levels=4):
    """Weighted integral of f L(l) + 2 T(grad f, grad l) + l L(f) is a
    boundary term, zero when both fields vanish on the boundary; the
    interpolated cross term converges to that at second order."""
    from divspec import assembly, mesh, oracle

    chart = geometry.identity_chart(2)
    tensor = geometry.diagonal_tensor(chart, ["1 + x1^2/2", "1"])
    eta = geometry.drift_field(2, "x1/2")
    f_expr = "x1*(1 - x1)*x2*(1 - x2)*(1 + x2)"
    l_expr = "x1*(1 - x1)*x2*(1 - x2)"
    f = geometry.DriftField(2, f_expr)
    l = geometry.DriftField(2, l_expr)
    Lf = geometry.operator_apply(chart, tensor, eta, f_expr)
    Ll = geometry.operator_apply(chart, tensor, eta, l_expr)
    samples = []
    m = mesh.generate(mesh.DomainSpec("rectangle"), 4)
    for _ in range(levels):
        prob = assembly.assemble(m, chart, tensor, eta)
        fv = f.eval(m.vertices)[prob.dof_map.interior]
        lv = l.eval(m.vertices)[prob.dof_map.interior]
        total = 2.0 * float(fv @ (prob.K @ lv)) \
            + assembly.integrate(m, chart, eta, lambda P: f.eval(P) * Ll(P)) \
            + assembly.integrate(m, chart, eta, lambda P: l.eval(P) * Lf(P))
        samples.append((m.h_max, abs(total)))
        m = mesh.refine(m)
    order = oracle.convergence_order(samples)
    assert order >= min_order, f"product-rule decay order {order:.2f}: {samples}"
    return order


def check_slack_monotonicity(report_inputs):
    """passed is monotone in the relative slack."""
    for lhs, rhs in report_inputs:
        previous = None
        for rel in (0.0, 1e-12, 1e-9, 1e-6, 1e-3, 1.0):
            ok = bounds.SlackPolicy(rel=rel).passes(lhs, rhs)
            if previous is not None:
                assert ok or not previous, \
                    f"slack monotonicity broken at rel={rel} for ({lhs}, {rhs})"
            previous = ok
