import math

import numpy as np
import pytest

from divspec import assembly, eigensolve, geometry, mesh


def make_problem(domain_kind, resolution, chart=None, tensor=None, drift=None,
                 **domain_params):
    spec = mesh.DomainSpec(domain_kind, domain_params)
    m = mesh.generate(spec, resolution)
    n = spec.dim_n
    chart = chart or geometry.identity_chart(n)
    tensor = tensor or geometry.identity_tensor(chart)
    eta = geometry.drift_field(n, drift) if drift else geometry.zero_drift(n)
    problem = assembly.assemble(m, chart, tensor, eta)
    return m, chart, tensor, eta, problem


def solve_setup(setup, count, method="auto", tol=1e-8):
    m, chart, tensor, eta, problem = setup
    spectrum = eigensolve.solve(problem, count, method=method, tol=tol)
    return m, chart, tensor, eta, problem, spectrum


@pytest.fixture(scope="session")
def interval_200():
    return solve_setup(make_problem("interval", 200), 12, method="dense")


@pytest.fixture(scope="session")
def disk_fine():
    # ~20k interior dofs
    return solve_setup(make_problem("disk", 82), 12, method="shift_invert")


@pytest.fixture(scope="session")
def square_fine():
    return solve_setup(make_problem("rectangle", 64), 12,
                       method="shift_invert")


@pytest.fixture(scope="session")
def drift_disk():
    return solve_setup(make_problem("disk", 48, drift="(x1^2 + x2^2)/2"), 12,
                       method="shift_invert")


@pytest.fixture(scope="session")
def tensor_square():
    chart = geometry.identity_chart(2)
    tensor = geometry.diagonal_tensor(chart, ["1 + x1^2", "1"])
    return solve_setup(make_problem("rectangle", 48, chart=chart,
                                    tensor=tensor), 12,
                       method="shift_invert")


@pytest.fixture(scope="session")
def cap_sphere():
    chart = geometry.immersion_chart(
        ["2*x1/(1+x1^2+x2^2)", "2*x2/(1+x1^2+x2^2)",
         "(1-x1^2-x2^2)/(1+x1^2+x2^2)"], 2)
    return solve_setup(make_problem("spherical_cap", 32, chart=chart,
                                    angle=math.pi / 3), 10,
                       method="shift_invert")


@pytest.fixture(scope="session")
def hyperbolic_box():
    chart = geometry.metric_chart([["1/x2^2", "0"], ["0", "1/x2^2"]])
    return solve_setup(make_problem("hyperbolic_box", 32, chart=chart), 10,
                       method="dense")


@pytest.fixture(scope="session")
def warped_strip():
    chart = geometry.metric_chart([["1", "0"], ["0", "exp(2*x1)"]])
    return solve_setup(make_problem("warped_strip", 24, chart=chart), 10,
                       method="dense")
