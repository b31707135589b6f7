"""P1 finite-element assembly of the weighted stiffness and mass matrices.

The bilinear forms are

    K_ij = integral <T(grad phi_i), grad phi_j>_g  exp(-eta) dV_g
    M_ij = integral phi_i phi_j                    exp(-eta) dV_g

with dV_g = sqrt(det g) times the coordinate volume element.  Rows and
columns of boundary vertices are eliminated, so both matrices act on
interior degrees of freedom only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import geometry
from .errors import AssemblyError, EvalDomainError
from .mesh import DofMap, SimplicialMesh, interior_dof_map
from .quadrature import simplex_rule

DEFAULT_DEGREE = {1: 5, 2: 4}


@dataclass(frozen=True)
class SpectralProblem:
    K: sp.csr_matrix
    M: sp.csr_matrix
    dof_map: DofMap
    quadrature_order: int
    mesh: SimplicialMesh

    @property
    def n_dof(self):
        return self.dof_map.n_dof


@dataclass(frozen=True)
class ElementData:
    """Per-cell reference data shared by assembly and quadrature loops."""
    rule: object
    grads: np.ndarray      # (C, n+1, n) coordinate gradients of P1 basis
    points: np.ndarray     # (C, Q, n) physical quadrature points
    weights: np.ndarray    # (C, Q) coordinate-volume quadrature weights
    det: np.ndarray        # (C,) affine-map determinants (positive)


def element_data(mesh, quadrature_order=None):
    degree = quadrature_order or DEFAULT_DEGREE[mesh.dim_n]
    rule = simplex_rule(mesh.dim_n, degree)
    v = mesh.vertices
    c = mesh.cells
    n = mesh.dim_n
    # columns of E are the edge vectors from vertex 0
    E = np.stack([v[c[:, i + 1]] - v[c[:, 0]] for i in range(n)], axis=2)
    det = np.linalg.det(E)
    if np.any(det <= 0.0):
        raise AssemblyError(f"cell {int(np.argmax(det <= 0.0))} is degenerate")
    Einv = np.linalg.inv(E)
    grads = np.empty((c.shape[0], n + 1, n))
    grads[:, 1:, :] = Einv
    grads[:, 0, :] = -np.sum(Einv, axis=1)
    corners = v[c]                                   # (C, n+1, n)
    points = np.einsum("qv,cvx->cqx", rule.points, corners)
    weights = rule.weights[None, :] * det[:, None]
    return ElementData(rule=rule, grads=grads, points=points,
                       weights=weights, det=det)


def quadrature_points(mesh, quadrature_order=None):
    """All physical quadrature points of the mesh, flattened to (C*Q, n)."""
    data = element_data(mesh, quadrature_order)
    return data.points.reshape(-1, mesh.dim_n)


def weighted_measure(chart, eta, data):
    """Metric and quadrature weights carrying sqrt(det g) exp(-eta).

    Returns (flattened physical points, weights (C, Q), metric (C*Q, n, n)).
    A metric degeneracy at a quadrature point raises AssemblyError naming
    the cell.
    """
    C, Q, n = data.points.shape
    flat = data.points.reshape(-1, n)
    try:
        g = chart.metric(flat)
    except EvalDomainError as err:
        raise AssemblyError(f"metric evaluation failed: {err}") from err
    if n == 1:
        det = g[:, 0, 0]
        bad = det <= 0.0
    else:
        det = g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] ** 2
        bad = (det <= 0.0) | (g[:, 0, 0] <= 0.0)
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise AssemblyError(
            f"geometry degeneracy in cell {idx // Q} "
            f"(quadrature point {tuple(flat[idx])})")
    weight = np.sqrt(det) * np.exp(-eta.eval(flat))
    return flat, (data.weights * weight.reshape(C, Q)), g


def assemble(mesh, chart, tensor, eta, quadrature_order=None):
    """Assemble the interior stiffness/mass pair for the given fields."""
    dof_map = interior_dof_map(mesh)
    data = element_data(mesh, quadrature_order)
    C, Q, n = data.points.shape
    flat, w, g = weighted_measure(chart, eta, data)

    gi = np.linalg.inv(g)
    A = np.einsum("pik,pkj->pij", tensor.components(flat), gi)
    A = 0.5 * (A + np.transpose(A, (0, 2, 1)))
    Aw = (A * w.reshape(-1)[:, None, None]).reshape(C, Q, n, n)

    Ke = np.einsum("cvi,cqij,cwj->cvw", data.grads, Aw, data.grads)
    Me = np.einsum("qv,qw,cq->cvw", data.rule.points, data.rule.points, w)
    Ke = 0.5 * (Ke + np.transpose(Ke, (0, 2, 1)))
    Me = 0.5 * (Me + np.transpose(Me, (0, 2, 1)))

    nv = mesh.num_vertices
    rows = np.repeat(mesh.cells, n + 1, axis=1).reshape(-1)
    cols = np.tile(mesh.cells, (1, n + 1)).reshape(-1)
    K_full = sp.coo_matrix((Ke.reshape(-1), (rows, cols)), shape=(nv, nv)).tocsr()
    M_full = sp.coo_matrix((Me.reshape(-1), (rows, cols)), shape=(nv, nv)).tocsr()

    keep = dof_map.interior
    K = K_full[keep][:, keep].tocsr()
    M = M_full[keep][:, keep].tocsr()
    K = (0.5 * (K + K.T)).tocsr()
    M = (0.5 * (M + M.T)).tocsr()
    K.sort_indices()
    M.sort_indices()
    return SpectralProblem(K=K, M=M, dof_map=dof_map,
                           quadrature_order=data.rule.degree, mesh=mesh)


def integrate(mesh, chart, eta, f, quadrature_order=None):
    """Weighted integral of a pointwise scalar field over the mesh.

    `f` may be a batched callable (N, n) -> (N,), an expression tree, or
    expression text.
    """
    data = element_data(mesh, quadrature_order)
    flat, w, _ = weighted_measure(chart, eta, data)
    if callable(f):
        values = np.asarray(f(flat), dtype=float)
    else:
        field = geometry.DriftField(mesh.dim_n, f)
        values = field.eval(flat)
    return float(np.dot(w.reshape(-1), values))
