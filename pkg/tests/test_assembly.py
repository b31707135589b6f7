import math

import numpy as np
import pytest

import helpers
from divspec import assembly, eigensolve, geometry, mesh, oracle
from divspec.errors import AssemblyError
from conftest import make_problem, solve_setup


def test_interval_p1_matrices():
    m = mesh.generate(mesh.DomainSpec("interval"), 3)
    chart = geometry.identity_chart(1)
    prob = assembly.assemble(m, chart, geometry.identity_tensor(chart),
                             geometry.zero_drift(1))
    h = 1.0 / 3.0
    K_exact = (1.0 / h) * np.array([[2.0, -1.0], [-1.0, 2.0]])
    M_exact = (h / 6.0) * np.array([[4.0, 1.0], [1.0, 4.0]])
    assert np.allclose(prob.K.toarray(), K_exact, rtol=1e-14)
    assert np.allclose(prob.M.toarray(), M_exact, rtol=1e-14)


def test_matrices_exactly_symmetric():
    setup = make_problem("disk", 8, drift="x1*x2/3")
    prob = setup[4]
    assert (prob.K != prob.K.T).nnz == 0
    assert (prob.M != prob.M.T).nnz == 0


def test_matrices_positive_definite():
    chart = geometry.identity_chart(2)
    tensor = geometry.diagonal_tensor(chart, ["1 + x1^2", "1"])
    prob = make_problem("rectangle", 6, chart=chart, tensor=tensor)[4]
    for A in (prob.K, prob.M):
        w = np.linalg.eigvalsh(A.toarray())
        assert w[0] > 0.0


def test_constant_drift_scales_both_matrices():
    base = make_problem("rectangle", 4)[4]
    shifted = make_problem("rectangle", 4, drift="2")[4]
    scale = math.exp(-2.0)
    assert np.allclose(shifted.K.toarray(), scale * base.K.toarray(),
                       rtol=1e-13)
    assert np.allclose(shifted.M.toarray(), scale * base.M.toarray(),
                       rtol=1e-13)


def test_anisotropic_tensor_eigenvalue_limit():
    # div(diag(4,1) grad u) on the unit square: lowest eigenvalue 5 pi^2
    chart = geometry.identity_chart(2)
    tensor = geometry.diagonal_tensor(chart, ["4", "1"])
    errs = []
    for res in (8, 16, 32):
        prob = make_problem("rectangle", res, chart=chart, tensor=tensor)[4]
        lam = eigensolve.solve(prob, 1, method="dense").values[0]
        errs.append((1.0 / res, abs(lam - 5.0 * math.pi ** 2)))
    assert errs[-1][1] / (5.0 * math.pi ** 2) < 3e-3
    assert 1.8 <= oracle.convergence_order(errs) <= 2.2


def test_integrate_volume():
    m = mesh.generate(mesh.DomainSpec("rectangle"), 5)
    chart = geometry.identity_chart(2)
    v = assembly.integrate(m, chart, geometry.zero_drift(2), "1")
    assert v == pytest.approx(1.0, abs=1e-12)


def test_integrate_hyperbolic_area():
    m = mesh.generate(mesh.DomainSpec("hyperbolic_box"), 24)
    chart = geometry.metric_chart([["1/x2^2", "0"], ["0", "1/x2^2"]])
    v = assembly.integrate(m, chart, geometry.zero_drift(2), "1")
    assert v == pytest.approx(0.5, rel=1e-6)


def test_integrate_gaussian_weight():
    m = mesh.generate(mesh.DomainSpec("interval"), 80)
    chart = geometry.identity_chart(1)
    got = assembly.integrate(m, chart, geometry.drift_field(1, "x1^2/2"), "1")
    # high-order 1-D quadrature oracle for int_0^1 exp(-x^2/2) dx
    x, w = np.polynomial.legendre.leggauss(60)
    t = 0.5 * (x + 1.0)
    expected = float(np.sum(0.5 * w * np.exp(-0.5 * t ** 2)))
    assert got == pytest.approx(expected, rel=1e-9)


def test_integrate_callable_field():
    m = mesh.generate(mesh.DomainSpec("rectangle"), 6)
    chart = geometry.identity_chart(2)
    v = assembly.integrate(m, chart, geometry.zero_drift(2),
                           lambda P: P[:, 0])
    assert v == pytest.approx(0.5, rel=1e-12)


def test_assembly_error_names_cell():
    # metric loses positive definiteness inside the domain
    chart = geometry.metric_chart([["x2 - 0.5", "0"], ["0", "1"]])
    m = mesh.generate(mesh.DomainSpec("rectangle"), 4)
    with pytest.raises(AssemblyError) as err:
        assembly.assemble(m, chart, geometry.identity_tensor(chart),
                          geometry.zero_drift(2))
    assert "cell" in str(err.value)


def test_rayleigh_identity(interval_200):
    _, _, _, _, problem, spectrum = interval_200
    helpers.check_rayleigh_identity(problem, spectrum)


def test_rayleigh_identity_weighted(drift_disk):
    _, _, _, _, problem, spectrum = drift_disk
    helpers.check_rayleigh_identity(problem, spectrum)


def test_product_rule_integral_decays_quadratically():
    # both trial fields vanish on the boundary, so the weighted integral
    # of f L(l) + 2 T(grad f, grad l) + l L(f) is a vanishing boundary term
    chart = geometry.identity_chart(2)
    tensor = geometry.diagonal_tensor(chart, ["1 + x1^2/2", "1"])
    eta = geometry.drift_field(2, "x1/2")
    f_expr = "sin(3.14159265358979312*x1)*sin(3.14159265358979312*x2)"
    l_expr = ("x1*(1 - x1)*x2*(1 - x2)")
    f = geometry.DriftField(2, f_expr)
    l = geometry.DriftField(2, l_expr)
    Lf = geometry.operator_apply(chart, tensor, eta, f_expr)
    Ll = geometry.operator_apply(chart, tensor, eta, l_expr)
    samples = []
    m = mesh.generate(mesh.DomainSpec("rectangle"), 4)
    for _ in range(4):
        prob = assembly.assemble(m, chart, tensor, eta)
        fv = f.eval(m.vertices)[prob.dof_map.interior]
        lv = l.eval(m.vertices)[prob.dof_map.interior]
        cross = 2.0 * float(fv @ (prob.K @ lv))
        total = cross \
            + assembly.integrate(m, chart, eta,
                                 lambda P: f.eval(P) * Ll(P)) \
            + assembly.integrate(m, chart, eta,
                                 lambda P: l.eval(P) * Lf(P))
        samples.append((m.h_max, abs(total)))
        m = mesh.refine(m)
    order = oracle.convergence_order(samples)
    assert order >= 1.8, samples


def test_eigenvalue_monotone_under_refinement():
    # conforming spaces nest under red refinement, so each eigenvalue is
    # non-increasing (flat case: quadrature is exact)
    m = mesh.generate(mesh.DomainSpec("rectangle"), 4)
    chart = geometry.identity_chart(2)
    T = geometry.identity_tensor(chart)
    eta = geometry.zero_drift(2)
    previous = None
    for _ in range(3):
        prob = assembly.assemble(m, chart, T, eta)
        vals = eigensolve.solve(prob, 5, method="dense").values
        if previous is not None:
            assert np.all(vals <= previous * (1.0 + 1e-9))
        previous = vals
        m = mesh.refine(m)


def test_convergence_order_interval():
    errs = []
    exact = math.pi ** 2
    for res in (25, 50, 100):
        prob = make_problem("interval", res)[4]
        lam = eigensolve.solve(prob, 1, method="dense").values[0]
        errs.append((1.0 / res, abs(lam - exact)))
    assert 1.8 <= oracle.convergence_order(errs) <= 2.2


def test_disk_quadrature_points_cover_cells():
    m = mesh.generate(mesh.DomainSpec("disk"), 5)
    pts = assembly.quadrature_points(m)
    assert pts.shape == (m.num_cells * 6, 2)
    assert np.max(np.linalg.norm(pts, axis=1)) < 1.0
