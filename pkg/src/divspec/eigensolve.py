"""Generalized symmetric eigensolver for the assembled pencil (K, M).

Two paths:

* dense: Cholesky reduction of M to a standard symmetric problem, solved
  by LAPACK's symmetric eigensolver; right for a few thousand dofs.
* shift_invert: Lanczos iteration on (K - sigma*M)^-1 M in the M inner
  product with full reorthogonalization and a deterministic seeded start
  vector, so runs are reproducible bit-for-bit per platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (InternalConsistencyError, MassMatrixError,
                     SolverConvergenceError)

_DENSE_LIMIT = 2000
_LANCZOS_SEED = 845123987
_BREAKDOWN = 1e-13


@dataclass(frozen=True)
class Spectrum:
    values: np.ndarray     # ascending eigenvalues
    vectors: np.ndarray    # (N, k), M-orthonormal columns
    residuals: np.ndarray  # per pair ||K u - lambda M u|| / ||M u||
    method: str            # "dense" or "shift_invert"

    @property
    def count(self):
        return self.values.shape[0]


def _residual_norms(K, M, values, vectors):
    KU = K @ vectors
    MU = M @ vectors
    num = np.linalg.norm(KU - MU * values[None, :], axis=0)
    den = np.linalg.norm(MU, axis=0)
    return num / den


def solve(problem, count, method="auto", tol=1e-8, shift=0.0):
    """Lowest `count` eigenpairs of K u = lambda M u.

    Ties are returned in whatever basis of the eigenspace the path
    produces.  Raises SolverConvergenceError if the residual target is
    not met, MassMatrixError if M fails its Cholesky factorization.
    """
    K, M = problem.K, problem.M
    n = K.shape[0]
    count = int(count)
    if not 1 <= count <= n:
        raise ValueError(f"count must be in [1, {n}], got {count}")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if method == "auto":
        method = "dense" if n <= _DENSE_LIMIT else "shift_invert"
    if method == "dense":
        values, vectors = _solve_dense(K, M, count)
    elif method == "shift_invert":
        values, vectors = _solve_shift_invert(K, M, count, tol, shift)
    else:
        raise ValueError(f"unknown method {method!r}")
    if values[0] <= 0.0:
        raise SolverConvergenceError(
            f"nonpositive eigenvalue {values[0]:.3e}; pencil is not "
            "positive definite")
    residuals = _residual_norms(K, M, values, vectors)
    if np.any(residuals > tol):
        raise SolverConvergenceError(
            f"residuals above tol={tol:g}", residuals=residuals)
    return Spectrum(values=values, vectors=vectors, residuals=residuals,
                    method=method)


def _solve_dense(K, M, count):
    Kd = K.toarray() if sp.issparse(K) else np.asarray(K, dtype=float)
    Md = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    try:
        L = np.linalg.cholesky(Md)
    except np.linalg.LinAlgError as err:
        raise MassMatrixError(f"mass matrix is not SPD: {err}") from err
    # B = L^-1 K L^-T, then a standard symmetric eigenproblem
    X = sla.solve_triangular(L, Kd, lower=True)
    B = sla.solve_triangular(L, X.T, lower=True).T
    B = 0.5 * (B + B.T)
    w, Y = np.linalg.eigh(B)
    U = sla.solve_triangular(L.T, Y[:, :count], lower=False)
    return w[:count], U


def _solve_shift_invert(K, M, count, tol, shift):
    n = K.shape[0]
    A = (K - shift * M).tocsc() if shift != 0.0 else K.tocsc()
    try:
        lu = spla.splu(A)
    except RuntimeError as err:
        raise SolverConvergenceError(
            f"factorization of K - sigma M failed: {err}") from err
    Mc = M.tocsr()
    rng = np.random.default_rng(_LANCZOS_SEED)

    def m_norm(v):
        return np.sqrt(max(float(v @ (Mc @ v)), 0.0))

    max_steps = int(min(n, max(6 * count + 60, 150)))
    Q = np.zeros((n, max_steps))
    alphas = np.zeros(max_steps)
    betas = np.zeros(max_steps)
    q = rng.standard_normal(n)
    q /= m_norm(q)
    Q[:, 0] = q
    last_res = None
    for j in range(max_steps):
        w = lu.solve(Mc @ Q[:, j])
        alphas[j] = float(Q[:, j] @ (Mc @ w))
        # full reorthogonalization: project out every Lanczos vector, twice
        for _ in range(2):
            w -= Q[:, :j + 1] @ (Q[:, :j + 1].T @ (Mc @ w))
        beta = m_norm(w)
        m = j + 1
        breakdown = beta < _BREAKDOWN
        if m >= count + 2 and (m % 4 == 0 or m == max_steps or m == n or breakdown):
            out, last_res = _ritz(K, M, Q[:, :m], alphas[:m], betas[:m - 1],
                                  count, shift, tol)
            if out is not None:
                return out
        if m == max_steps:
            break
        if breakdown:
            # invariant subspace hit: continue with a fresh direction
            w = rng.standard_normal(n)
            for _ in range(2):
                w -= Q[:, :m] @ (Q[:, :m].T @ (Mc @ w))
            beta = m_norm(w)
            if beta < _BREAKDOWN:
                break
            betas[j] = 0.0
        else:
            betas[j] = beta
        Q[:, j + 1] = w / beta
    raise SolverConvergenceError(
        f"Lanczos did not reach tol={tol:g} within {max_steps} steps",
        residuals=last_res)


def _ritz(K, M, Q, alphas, betas, count, shift, tol):
    """Ritz extraction; returns ((values, vectors), residuals) on
    convergence, (None, residuals) otherwise."""
    m = Q.shape[1]
    if m < count:
        return None, None
    theta, S = sla.eigh_tridiagonal(alphas, betas)
    # spectral transform: theta = 1/(lambda - shift); the largest theta
    # correspond to the eigenvalues nearest the shift
    order = np.argsort(theta)[::-1][:count]
    theta_sel = theta[order]
    if np.any(theta_sel <= 0.0):
        return None, None
    lam = shift + 1.0 / theta_sel
    U = Q @ S[:, order]
    res = _residual_norms(K, M, lam, U)
    if np.all(res <= tol):
        idx = np.argsort(lam)
        return (lam[idx], U[:, idx]), res
    return None, res


def verify_residuals(problem, spectrum):
    """Recompute residual norms independently of the solver internals.

    Raises InternalConsistencyError if they drift from the stored
    certificates by more than 1e-12.
    """
    K, M = problem.K, problem.M
    U = np.asarray(spectrum.vectors)
    out = []
    for i in range(spectrum.count):
        r = K @ U[:, i] - float(spectrum.values[i]) * (M @ U[:, i])
        out.append(float(np.linalg.norm(r) / np.linalg.norm(M @ U[:, i])))
    out = np.asarray(out)
    if np.any(np.abs(out - spectrum.residuals) > 1e-12):
        worst = int(np.argmax(np.abs(out - spectrum.residuals)))
        raise InternalConsistencyError(
            f"stored residual {spectrum.residuals[worst]:.3e} does not match "
            f"recomputed {out[worst]:.3e} for pair {worst}")
    return list(out)
