"""Self-expressive structure reconstruction.

Each synthetic node is represented as a linear combination of all synthetic
nodes. The coefficient matrix Z minimizes

    ||X^T - X^T Z||_F^2 + alpha ||Z - prior||_F^2 + beta ||Z - history||_F^2

which is strongly convex for alpha + beta > 0 and has the closed form

    Z = (X X^T + (alpha + beta) I)^{-1} (X X^T + alpha * prior + beta * history).

`solve` factorizes the SPD left-hand side (never forms an inverse);
`solve_iterative` is a deliberately simple fixed-step gradient descent kept
as an independent cross-check. The symmetrized nonnegative matrix
0.5 (|Z| + |Z|^T) is the synthetic adjacency handed downstream.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NonConvergenceError, ShapeError, ValidationError


@dataclass(frozen=True)
class SelfExpressiveProblem:
    features: np.ndarray  # (n, d)
    prior: np.ndarray  # (n, n)
    history: np.ndarray  # (n, n)
    alpha: float
    beta: float

    def __post_init__(self):
        n = self.features.shape[0]
        if self.features.ndim != 2:
            raise ShapeError("features must be 2-D")
        if self.prior.shape != (n, n) or self.history.shape != (n, n):
            raise ShapeError(f"prior and history must be ({n}, {n})")
        if self.alpha < 0 or self.beta < 0:
            raise ValidationError("alpha and beta must be nonnegative")
        if self.alpha + self.beta <= 0:
            raise ValidationError("alpha + beta must be positive (problem is ill-posed)")
        for name, arr in (("features", self.features), ("prior", self.prior), ("history", self.history)):
            if not np.isfinite(arr).all():
                raise ValidationError(f"{name} contains non-finite values")


def objective(problem, z):
    """Value of the regularized self-expression objective at z."""
    x_t = problem.features.T
    fit = x_t - x_t @ z
    return (
        float(np.sum(fit * fit))
        + problem.alpha * float(np.sum((z - problem.prior) ** 2))
        + problem.beta * float(np.sum((z - problem.history) ** 2))
    )


def gradient(problem, z):
    """Gradient of the objective with respect to z."""
    x = problem.features
    return (
        -2.0 * x @ (x.T - x.T @ z)
        + 2.0 * problem.alpha * (z - problem.prior)
        + 2.0 * problem.beta * (z - problem.history)
    )


def solve(problem):
    """Closed-form minimizer via Cholesky factorization of the SPD system.

    Two n x n buffers total: the Gram matrix doubles as the (in-place
    ridge-shifted, in-place factorized) left-hand side once the right-hand
    side has been assembled, and the solve overwrites the right-hand side.
    Inputs were validated at problem construction, so the LAPACK wrappers
    skip their own finiteness checks.
    """
    x = np.ascontiguousarray(problem.features)
    n = x.shape[0]
    gram = x @ x.T
    rhs = np.multiply(problem.prior, problem.alpha)
    rhs += gram
    if problem.beta:
        # BLAS scale-add; in place for contiguous float64, rebound either way
        rhs = sla.blas.daxpy(
            np.ascontiguousarray(problem.history).ravel(), rhs.ravel(), a=problem.beta
        ).reshape(n, n)
    gram.flat[:: n + 1] += problem.alpha + problem.beta
    factor, _ = sla.cho_factor(gram, lower=True, overwrite_a=True, check_finite=False)
    _lower_solve(factor, rhs)
    _lower_t_solve(factor, rhs)
    return rhs


# The vendored BLAS runs plain dtrsm far below dgemm speed at these sizes,
# so the two triangular solves use block-panel substitution: diagonal blocks
# go through dtrsm, everything else through dgemm.
_TRSM_BLOCK = 64


def _lower_solve(l, b):
    """Solve L y = b in place for lower-triangular L (block forward pass)."""
    n = l.shape[0]
    for i0 in range(0, n, _TRSM_BLOCK):
        i1 = min(i0 + _TRSM_BLOCK, n)
        if i0:
            b[i0:i1] -= l[i0:i1, :i0] @ b[:i0]
        b[i0:i1] = sla.solve_triangular(
            l[i0:i1, i0:i1], b[i0:i1], lower=True, check_finite=False
        )


def _lower_t_solve(l, b):
    """Solve L^T z = b in place for lower-triangular L (block backward pass)."""
    n = l.shape[0]
    for i1 in range(n, 0, -_TRSM_BLOCK):
        i0 = max(i1 - _TRSM_BLOCK, 0)
        if i1 < n:
            b[i0:i1] -= l[i1:, i0:i1].T @ b[i1:]
        b[i0:i1] = sla.solve_triangular(
            l[i0:i1, i0:i1], b[i0:i1], lower=True, trans="T", check_finite=False
        )


def solve_iterative(problem, tol=1e-10, max_iters=200_000):
    """Fixed-step gradient descent on the objective.

    The step 1 / (2 (lambda_max(X X^T) + alpha + beta)) is the inverse
    Lipschitz constant of the gradient, so convergence is guaranteed by
    strong convexity. Stops when the gradient Frobenius norm drops below
    `tol`.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    x = problem.features
    gram = x @ x.T
    ridge = problem.alpha + problem.beta
    lam_max = float(np.linalg.eigvalsh(gram)[-1]) if gram.size else 0.0
    step = 1.0 / (2.0 * (lam_max + ridge))
    lhs = gram + ridge * np.eye(gram.shape[0])
    rhs = gram + problem.alpha * problem.prior + problem.beta * problem.history
    z = problem.prior.astype(np.float64, copy=True)
    for _ in range(max_iters):
        grad = 2.0 * (lhs @ z - rhs)
        res = float(np.linalg.norm(grad))
        if res <= tol:
            return z
        z -= step * grad
    raise NonConvergenceError(
        f"gradient norm {res:.3e} above tol {tol:.3e} after {max_iters} iterations",
        residual=res,
    )


def symmetrize(z):
    """Symmetric nonnegative adjacency 0.5 (|Z| + |Z|^T)."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] != z.shape[1]:
        raise ShapeError("coefficient matrix must be square")
    if not np.isfinite(z).all():
        raise ValidationError("coefficient matrix contains non-finite values")
    a = np.abs(z)
    return 0.5 * (a + a.T)
