"""Inner solvers for block subproblems that are not pure prox evaluations,
with reports of the tolerance actually achieved (the inexactness ledger)."""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .errors import NumericalBreakdown

__all__ = [
    "SmoothHandle", "QuadraticHandle", "SubsolveReport",
    "solve_quadratic_block", "smooth_block_descent", "solve_coltv_block",
    "check_gradient",
]


@dataclass(frozen=True)
class SmoothHandle:
    """A differentiable objective given by value and gradient callables plus
    the declared Lipschitz constant of the gradient."""

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    lipschitz_L: Optional[float] = None


class QuadraticHandle:
    """Quadratic objective  u -> u.Q.u/2 + c.u + const  with explicit matrix
    data, enabling exact one-shot block solves."""

    def __init__(self, Q, c, const=0.0):
        self.Q = np.asarray(Q, dtype=np.float64)
        self.c = np.asarray(c, dtype=np.float64).ravel()
        self.const = float(const)
        self.lipschitz_L = float(np.linalg.norm(self.Q, 2)) if self.Q.size else 0.0

    def value(self, u):
        return 0.5 * float(u @ self.Q @ u) + float(self.c @ u) + self.const

    def grad(self, u):
        return self.Q @ u + self.c


@dataclass(frozen=True)
class SubsolveReport:
    achieved_grad_norm: float
    iterations: int
    eta_contribution: float
    converged: bool = True


def check_gradient(handle, points, step=1e-6, rtol=1e-5):
    """Central finite-difference check of a handle's gradient at sample
    points.  Returns the worst relative error."""
    worst = 0.0
    for u in points:
        u = np.asarray(u, dtype=float)
        g = np.asarray(handle.grad(u), dtype=float)
        fd = np.empty_like(g)
        for j in range(u.size):
            e = np.zeros_like(u)
            e[j] = step
            fd[j] = (handle.value(u + e) - handle.value(u - e)) / (2 * step)
        err = np.linalg.norm(fd - g) / max(1.0, np.linalg.norm(g))
        worst = max(worst, err)
    if worst > rtol:
        raise NumericalBreakdown(f"gradient check failed: relative error {worst:.2e}")
    return worst


def solve_quadratic_block(Q, c):
    """Minimizer of  u.Q.u/2 + c.u  for symmetric positive semidefinite Q,
    via a dense least-squares factorization.  On singular Q the minimum-norm
    solution is returned (a least-squares compromise if c is outside the
    image of Q)."""
    Q = np.asarray(Q, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64).ravel()
    scale = np.max(np.abs(Q)) if Q.size else 0.0
    if scale > 0 and np.max(np.abs(Q - Q.T)) > 1e-10 * scale:
        raise NumericalBreakdown("quadratic block matrix is not symmetric")
    u, *_ = np.linalg.lstsq(Q, -c, rcond=None)
    return u


def smooth_block_descent(obj, u0, tol, max_iters=2000):
    """Gradient descent with a halving backtracking line search (sufficient
    decrease constant 1e-4) until the gradient norm drops to ``tol``.

    Returns the iterate and a report whose ``eta_contribution`` is the
    achieved gradient norm times the length of the total move.
    """
    u = np.asarray(u0, dtype=np.float64).copy()
    g = np.asarray(obj.grad(u), dtype=np.float64)
    gn = float(np.linalg.norm(g))
    if gn <= tol:
        return u, SubsolveReport(gn, 0, 0.0, True)
    L = obj.lipschitz_L
    step0 = 1.0 / L if L else 1.0
    norm_cap = 1e12 * (1.0 + float(np.linalg.norm(u)))
    it = 0
    while it < max_iters:
        it += 1
        f0 = obj.value(u)
        step = step0
        u_try = u - step * g
        for _ in range(60):
            if obj.value(u_try) <= f0 - 1e-4 * step * gn * gn:
                break
            step *= 0.5
            u_try = u - step * g
        u = u_try
        g = np.asarray(obj.grad(u), dtype=np.float64)
        gn = float(np.linalg.norm(g))
        if gn <= tol:
            break
        if not np.isfinite(gn) or np.linalg.norm(u) > norm_cap:
            eta = np.inf
            return u, SubsolveReport(gn, it, eta, False)
    move = float(np.linalg.norm(u - np.asarray(u0, dtype=np.float64)))
    return u, SubsolveReport(gn, it, gn * move, gn <= tol)


def solve_coltv_block(Vtarget, beta, tol, max_iter=200_000):
    """Approximately minimize  sum_i ||Y_i - Y_{i+1}|| + (beta/2)||Y - V||_F^2
    over the columns of Y, by an accelerated projected-gradient method on the
    dual of the chained column-difference term, to duality gap ``tol``.

    The achieved gap is the report's ``eta_contribution``.
    """
    V = np.asarray(Vtarget, dtype=np.float64)
    Y, gap, iters = _kernels.coltv_dual(V, beta, tol, max_iter)
    return Y, SubsolveReport(gap, iters, gap, gap <= tol)
