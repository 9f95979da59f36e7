"""Application wirings on top of the splitting engine: consensus regression
with nonconvex regularizers, smooth minimization over compact sets,
complementarity-constrained smooth minimization, and three-way matrix
decomposition with a spectral penalty and a column-smoothness term."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import BlockSpec, State, build_problem, solve
from .diagnostics import ConstantsDecl, beta_threshold
from .prox import (ProxHandle, complementarity_indicator_handle, l1_handle,
                   schatten_q_handle)
from .subsolvers import QuadraticHandle, SmoothHandle, solve_coltv_block

__all__ = [
    "RegressionInstance", "CompactSetInstance", "ComplementarityInstance",
    "DecompositionInstance",
    "solve_regression", "solve_compact", "solve_complementarity",
    "solve_decomposition",
    "regression_objective",
    "make_lasso_instance", "make_lq_regression_instance",
    "make_sphere_instance", "make_sphere_linear_instance",
    "make_stiefel_instance", "make_complementarity_instance",
    "make_scalar_complementarity_instance", "make_decomposition_instance",
]


# ---------------------------------------------------------------------------
# consensus regression:  min r(x) + sum_s 0.5||A_s z_s - b_s||^2,  x = z_s
# ---------------------------------------------------------------------------

@dataclass
class RegressionInstance:
    """Per-block least-squares fits consensus-coupled to one shared
    coefficient vector with a (possibly nonconvex) regularizer."""

    A_list: tuple
    b_list: tuple
    regularizer: ProxHandle
    beta: Optional[float] = None

    def __post_init__(self):
        self.A_list = tuple(np.atleast_2d(np.asarray(A, float)) for A in self.A_list)
        self.b_list = tuple(np.asarray(b, float).ravel() for b in self.b_list)
        n = self.A_list[0].shape[1]
        if any(A.shape[1] != n for A in self.A_list):
            raise ValueError("all design matrices must share the column count")
        if self.beta is None:
            self.beta = 10.0 * beta_threshold(
                np.eye(n * len(self.A_list)), self.constants())

    @property
    def n(self):
        return self.A_list[0].shape[1]

    @property
    def n_fits(self):
        return len(self.A_list)

    def constants(self):
        L_h = max(float(np.linalg.norm(A.T @ A, 2)) for A in self.A_list)
        return ConstantsDecl(L_h=L_h, Mbar=1.0)


def regression_objective(inst, x):
    """r(x) + sum_s 0.5 ||A_s x - b_s||^2 at a shared coefficient vector."""
    x = np.asarray(x, float).ravel()
    val = inst.regularizer.eval(x)
    for A, b in zip(inst.A_list, inst.b_list):
        r = A @ x - b
        val += 0.5 * float(r @ r)
    return val


def regression_problem(inst):
    n, p = inst.n, inst.n_fits
    E = -np.vstack([np.eye(n)] * p)
    Q = np.zeros((n * p, n * p))
    c = np.zeros(n * p)
    const = 0.0
    for s, (A, b) in enumerate(zip(inst.A_list, inst.b_list)):
        sl = slice(s * n, (s + 1) * n)
        Q[sl, sl] = A.T @ A
        c[sl] = -(A.T @ b)
        const += 0.5 * float(b @ b)
    return build_problem(
        blocks_x=[BlockSpec(n, inst.regularizer,
                            class_tag=inst.regularizer.class_tag)],
        block_y=BlockSpec(n * p),
        A=[E],
        B=np.eye(n * p),
        h=QuadraticHandle(Q, c, const=const),
    )


def solve_regression(inst, stop=None, order=None, record_states=True):
    """Consensus solve.  The x step collapses to one prox of the regularizer
    at the average of the shifted fit blocks (step 1/(p*beta)); the fit
    blocks solve their normal equations exactly; all duals update jointly.
    Returns the shared coefficient vector and the trace."""
    P = regression_problem(inst)
    n, p = inst.n, inst.n_fits
    S0 = State(x=[np.zeros(n)], y=np.zeros(n * p), w=np.zeros(n * p),
               beta=inst.beta)
    S, trace = solve(P, S0, order=order, stop=stop, record_states=record_states)
    return S.x[0], trace


# ---------------------------------------------------------------------------
# compact-set minimization:  min J(y)  s.t.  x in S,  x - y = 0
# ---------------------------------------------------------------------------

@dataclass
class CompactSetInstance:
    J: SmoothHandle
    projection: ProxHandle
    dim: int
    beta: Optional[float] = None

    def __post_init__(self):
        if self.beta is None:
            self.beta = 10.0 * beta_threshold(np.eye(self.dim), self.constants())

    def constants(self):
        return ConstantsDecl(L_h=self.J.lipschitz_L or 0.0, Mbar=1.0)


def compact_problem(inst):
    I = np.eye(inst.dim)
    return build_problem(
        blocks_x=[BlockSpec(inst.dim, inst.projection,
                            class_tag=inst.projection.class_tag)],
        block_y=BlockSpec(inst.dim),
        A=[I], B=-I,
        h=SmoothHandle(value=inst.J.value, grad=inst.J.grad,
                       lipschitz_L=inst.J.lipschitz_L),
    )


def solve_compact(inst, stop=None, budget=None, record_states=True):
    """Alternate the set projection of the shifted smooth block, an inner
    gradient-descent solve of the smooth block, and the dual step."""
    P = compact_problem(inst)
    S0 = State(x=[np.zeros(inst.dim)], y=np.zeros(inst.dim),
               w=np.zeros(inst.dim), beta=inst.beta)
    S, trace = solve(P, S0, stop=stop, budget=budget,
                     record_states=record_states)
    return S.x[0], trace


# ---------------------------------------------------------------------------
# complementarity-constrained smooth minimization
# ---------------------------------------------------------------------------

@dataclass
class ComplementarityInstance:
    """min h(x, y)  s.t.  x >= 0, y >= 0, x.y = 0, via an auxiliary pair
    projected onto the complementarity set each iteration."""

    h: SmoothHandle
    n: int
    beta: Optional[float] = None

    def __post_init__(self):
        if self.beta is None:
            self.beta = 10.0 * beta_threshold(np.eye(2 * self.n), self.constants())

    def constants(self):
        return ConstantsDecl(L_h=self.h.lipschitz_L or 0.0, Mbar=1.0)


def complementarity_problem(inst):
    I = np.eye(2 * inst.n)
    return build_problem(
        blocks_x=[BlockSpec(2 * inst.n, complementarity_indicator_handle(inst.n))],
        block_y=BlockSpec(2 * inst.n),
        A=[I], B=-I,
        h=inst.h,
    )


def solve_complementarity(inst, stop=None, budget=None, record_states=True):
    """Returns the complementary pair (x, y) from the projected block (it
    satisfies the sign and orthogonality constraints exactly) and the trace."""
    P = complementarity_problem(inst)
    S0 = State(x=[np.zeros(2 * inst.n)], y=np.zeros(2 * inst.n),
               w=np.zeros(2 * inst.n), beta=inst.beta)
    S, trace = solve(P, S0, stop=stop, budget=budget,
                     record_states=record_states)
    z = S.x[0]
    return (z[:inst.n], z[inst.n:]), trace


# ---------------------------------------------------------------------------
# matrix decomposition:  min p(X) + colTV(Y) + ||Z||_F^2,  X + Y + Z = V
# ---------------------------------------------------------------------------

@dataclass
class DecompositionInstance:
    V: np.ndarray
    p_handle: ProxHandle
    beta: Optional[float] = None
    coltv_tol: float = 1e-10

    def __post_init__(self):
        self.V = np.atleast_2d(np.asarray(self.V, float))
        if self.beta is None:
            self.beta = 10.0 * beta_threshold(np.eye(self.V.size), self.constants())

    @property
    def shape(self):
        return self.V.shape

    def constants(self):
        return ConstantsDecl(L_h=2.0, Mbar=1.0)


def coltv_value(Y):
    Y = np.atleast_2d(np.asarray(Y, float))
    if Y.shape[1] < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(Y[:, :-1] - Y[:, 1:], axis=0)))


def _coltv_handle(shape, tol):
    n, m = shape

    def prox_report(v, t):
        Y, rep = solve_coltv_block(np.asarray(v, float).reshape(n, m),
                                   1.0 / t, tol)
        return Y.ravel(), rep.eta_contribution

    return ProxHandle(
        eval=lambda x: coltv_value(np.asarray(x, float).reshape(n, m)),
        prox=lambda v, t: prox_report(v, t)[0],
        prox_with_report=prox_report,
        tie_rule="dual iterate of the accelerated projected-gradient solve",
        class_tag="lower-semicontinuous",
    )


def decomposition_problem(inst):
    n, m = inst.shape
    nm = n * m
    I = np.eye(nm)
    return build_problem(
        blocks_x=[BlockSpec(nm, inst.p_handle),
                  BlockSpec(nm, _coltv_handle((n, m), inst.coltv_tol))],
        block_y=BlockSpec(nm),
        A=[I, I], B=np.eye(nm), b=inst.V.ravel(),
        h=QuadraticHandle(2.0 * np.eye(nm), np.zeros(nm)),
    )


def solve_decomposition(inst, stop=None, budget=None, record_states=True):
    """Spectral prox on X, inner dual solve on the column-difference block Y
    (inexactness recorded in the ledger), closed-form smooth block
    Z = (beta (V - X - Y) - W) / (2 + beta), then the dual step."""
    n, m = inst.shape
    nm = n * m
    P = decomposition_problem(inst)
    S0 = State(x=[np.zeros(nm), np.zeros(nm)], y=np.zeros(nm),
               w=np.zeros(nm), beta=inst.beta)
    S, trace = solve(P, S0, stop=stop, budget=budget,
                     record_states=record_states)
    X = S.x[0].reshape(n, m)
    Y = S.x[1].reshape(n, m)
    Z = S.y.reshape(n, m)
    return (X, Y, Z), trace


# ---------------------------------------------------------------------------
# seeded synthetic instances
# ---------------------------------------------------------------------------

def make_lasso_instance(n=20, m=10, n_fits=1, lam=0.1, seed=0, noise=0.01,
                        beta=None):
    rng = np.random.default_rng(seed)
    A_list, b_list = [], []
    x_true = np.zeros(n)
    nnz = max(n // 5, 1)
    idx = rng.choice(n, size=nnz, replace=False)
    x_true[idx] = rng.normal(size=nnz)
    for _ in range(n_fits):
        A = rng.normal(size=(m, n))
        b = A @ x_true + noise * rng.normal(size=m)
        A_list.append(A)
        b_list.append(b)
    return RegressionInstance(tuple(A_list), tuple(b_list),
                              l1_handle(lam), beta=beta), x_true


def make_lq_regression_instance(n=8, m=6, q=0.5, lam=0.05, seed=3, beta=None):
    from .prox import lq_handle
    rng = np.random.default_rng(seed)
    x_true = np.zeros(n)
    x_true[rng.choice(n, size=2, replace=False)] = rng.normal(size=2) + 1.0
    A = rng.normal(size=(m, n))
    b = A @ x_true
    return RegressionInstance((A,), (b,), lq_handle(lam, q), beta=beta)


def make_sphere_instance(dim=5, seed=1, beta=None):
    from .prox import sphere_indicator_handle
    rng = np.random.default_rng(seed)
    c = rng.normal(size=dim)
    c *= 2.0 / np.linalg.norm(c)
    J = SmoothHandle(value=lambda y: 0.5 * float(np.sum((y - c) ** 2)),
                     grad=lambda y: y - c, lipschitz_L=1.0)
    inst = CompactSetInstance(J, sphere_indicator_handle(), dim, beta=beta)
    return inst, c / np.linalg.norm(c)


def make_sphere_linear_instance(dim=4, seed=2, beta=None):
    from .prox import sphere_indicator_handle
    rng = np.random.default_rng(seed)
    g = rng.normal(size=dim)
    J = SmoothHandle(value=lambda y: float(g @ y),
                     grad=lambda y: g.copy(), lipschitz_L=0.0)
    inst = CompactSetInstance(J, sphere_indicator_handle(), dim, beta=beta)
    return inst, -g / np.linalg.norm(g)


def make_stiefel_instance(n=4, p=2, seed=4, beta=None):
    from .prox import proj_stiefel, stiefel_indicator_handle
    rng = np.random.default_rng(seed)
    C = rng.normal(size=(n, p))
    c_flat = C.ravel()
    J = SmoothHandle(value=lambda y: 0.5 * float(np.sum((y - c_flat) ** 2)),
                     grad=lambda y: y - c_flat, lipschitz_L=1.0)
    inst = CompactSetInstance(J, stiefel_indicator_handle((n, p)), n * p,
                              beta=beta)
    return inst, proj_stiefel(C)


def make_complementarity_instance(beta=None):
    a = np.array([1.0, 0.0])
    bb = np.array([0.0, 1.0])

    def value(z):
        return float(np.sum((z[:2] - a) ** 2) + np.sum((z[2:] - bb) ** 2))

    def grad(z):
        return np.concatenate([2.0 * (z[:2] - a), 2.0 * (z[2:] - bb)])

    h = SmoothHandle(value=value, grad=grad, lipschitz_L=2.0)
    return ComplementarityInstance(h, n=2, beta=beta), (a.copy(), bb.copy())


def make_scalar_complementarity_instance(beta=None):
    def value(z):
        return float((z[0] - 1.0) ** 2 + (z[1] - 1.0) ** 2)

    def grad(z):
        return np.array([2.0 * (z[0] - 1.0), 2.0 * (z[1] - 1.0)])

    h = SmoothHandle(value=value, grad=grad, lipschitz_L=2.0)
    return ComplementarityInstance(h, n=1, beta=beta)


def make_decomposition_instance(n=20, m=12, sigma=10.0, lam=0.05, q=1.0,
                                seed=5, beta=None):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=n)
    u /= np.linalg.norm(u)
    v = rng.normal(size=m)
    v /= np.linalg.norm(v)
    V = sigma * np.outer(u, v)
    return DecompositionInstance(V, schatten_q_handle((n, m), lam, q),
                                 beta=beta)
