"""Problem model, augmented Lagrangian, and the multi-block splitting engine.

The engine minimizes

    phi(x_0..x_p, y) + <w, r> + (beta/2)||r||^2,   r = sum_i A_i x_i + B y - b

block by block in a configurable order, then takes the exact dual ascent step
``w += beta * r``.  Each block subproblem is dispatched to an exact route
(prox map, or minimum-norm Newton when the block objective is quadratic) or
an iterative route (gradient descent, prox-gradient) whose achieved tolerance
feeds the per-iteration inexactness ledger.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (DimensionMismatch, InfeasibleOffset, InvalidParameter,
                     NotConverged, SubproblemFailure)
from .prox import ProxHandle
from .subsolvers import (QuadraticHandle, SmoothHandle, smooth_block_descent,
                         solve_quadratic_block)

__all__ = [
    "BlockSpec", "CouplingHandle", "Problem", "State", "TraceRecord", "Trace",
    "UpdateOrder", "StoppingConfig", "SubsolveBudget",
    "build_problem", "augmented_lagrangian", "admm_step", "solve",
]

CLASS_TAGS = ("lower-semicontinuous", "restricted-prox-regular",
              "piecewise-linear", "smooth")


@dataclass(frozen=True)
class BlockSpec:
    """One primal block: its dimension, its separable objective (a prox
    handle, a smooth handle, or absent for a zero objective), and the user's
    declared regularity class."""

    dim: int
    objective: object = None
    class_tag: str = "lower-semicontinuous"

    def __post_init__(self):
        if self.dim <= 0:
            raise InvalidParameter("block dimension must be positive")
        if self.class_tag not in CLASS_TAGS:
            raise InvalidParameter(f"unknown class_tag {self.class_tag!r}")


@dataclass(frozen=True)
class CouplingHandle:
    """Smooth term coupling several blocks.

    ``grad_block(key, xs, y)`` returns the partial gradient with respect to
    block ``key`` (an x-index or ``"y"``).  When the coupling is quadratic in
    a block, ``block_hessians[key]`` holds that constant partial Hessian and
    enables an exact block solve.
    """

    value: Callable[[list, np.ndarray], float]
    grad_block: Callable[[object, list, np.ndarray], np.ndarray]
    lipschitz: float = 0.0
    block_hessians: Optional[dict] = None


@dataclass(frozen=True)
class Problem:
    blocks_x: tuple
    block_y: BlockSpec
    A: tuple
    B: np.ndarray
    b: np.ndarray
    coupling: Optional[CouplingHandle] = None
    h: Optional[object] = None

    @property
    def p(self):
        return len(self.blocks_x) - 1

    @property
    def m(self):
        return self.B.shape[0]

    def y_smooth(self):
        """The y block's smooth objective handle, if it has one."""
        if self.h is not None:
            return self.h
        obj = self.block_y.objective
        if obj is not None and not isinstance(obj, ProxHandle):
            return obj
        return None

    def y_objective(self):
        return self.h if self.h is not None else self.block_y.objective

    def block_keys(self):
        return list(range(len(self.blocks_x))) + ["y"]


@dataclass
class State:
    """Current primal blocks, dual variable, and penalty weight."""

    x: list
    y: np.ndarray
    w: np.ndarray
    beta: float

    def __post_init__(self):
        if self.beta <= 0:
            raise InvalidParameter("beta must be positive")
        self.x = [np.asarray(xi, dtype=np.float64).ravel() for xi in self.x]
        self.y = np.asarray(self.y, dtype=np.float64).ravel()
        self.w = np.asarray(self.w, dtype=np.float64).ravel()

    def copy(self):
        return State([xi.copy() for xi in self.x], self.y.copy(),
                     self.w.copy(), self.beta)


@dataclass(frozen=True)
class TraceRecord:
    """Per-iteration scalars.  ``delta_x[i]`` is ||A_i (x_i^+ - x_i)||,
    ``delta_y`` is ||B (y^+ - y)||; ``dual_identity_err`` is
    ||B^T w^+ + grad_h(y^+)|| when the y objective is smooth, NaN otherwise;
    ``eta_k`` sums the inexactness of this iteration's inner solves."""

    k: int
    L_beta: float
    primal_residual: float
    delta_x: tuple
    delta_y: float
    dual_delta: float
    dual_identity_err: float
    eta_k: float
    block_L: Optional[tuple] = None


@dataclass
class Trace:
    records: list = field(default_factory=list)
    orders: list = field(default_factory=list)
    states: Optional[list] = None
    converged: bool = False

    def __len__(self):
        return len(self.records)

    @property
    def final(self):
        return self.records[-1]


@dataclass(frozen=True)
class UpdateOrder:
    """Primal update order policy.

    ``cyclic-fixed`` runs 0..p then y.  ``permuted-middle`` keeps block 0
    first and y last and applies a seeded pseudorandom permutation to the
    middle blocks each iteration.  ``explicit`` cycles through the given
    sequences; sequences that do not start at block 0 or do not end at y are
    accepted only with ``unsafe=True``.
    """

    policy: str = "cyclic-fixed"
    seed: int = 0
    sequences: tuple = ()
    unsafe: bool = False

    @staticmethod
    def cyclic():
        return UpdateOrder("cyclic-fixed")

    @staticmethod
    def permuted(seed):
        return UpdateOrder("permuted-middle", seed=seed)

    @staticmethod
    def explicit(sequences, unsafe=False):
        seqs = tuple(tuple(s) for s in sequences)
        return UpdateOrder("explicit", sequences=seqs, unsafe=unsafe)

    def validate(self, n_blocks):
        keys = set(range(n_blocks)) | {"y"}
        if self.policy in ("cyclic-fixed", "permuted-middle"):
            return
        if self.policy != "explicit":
            raise InvalidParameter(f"unknown order policy {self.policy!r}")
        if not self.sequences:
            raise InvalidParameter("explicit order needs at least one sequence")
        for seq in self.sequences:
            if set(seq) != keys or len(seq) != len(keys):
                raise InvalidParameter(f"sequence {seq!r} is not a permutation "
                                       "of all blocks")
            if not self.unsafe and (seq[0] != 0 or seq[-1] != "y"):
                raise InvalidParameter(
                    "explicit sequences must start at block 0 and end at y "
                    "unless unsafe=True")

    def sequence_for(self, k, n_blocks, rng=None):
        if self.policy == "cyclic-fixed":
            return tuple(range(n_blocks)) + ("y",)
        if self.policy == "permuted-middle":
            middle = list(range(1, n_blocks))
            if rng is not None and middle:
                middle = [int(i) for i in rng.permutation(middle)]
            return (0, *middle, "y")
        return self.sequences[k % len(self.sequences)]


@dataclass(frozen=True)
class StoppingConfig:
    max_iters: int = 10_000
    eps_primal: float = 1e-8
    eps_change: float = 1e-8


@dataclass(frozen=True)
class SubsolveBudget:
    """Inner-solve tolerance schedule: iteration k gets
    ``max(tol * tighten**k, tol_floor)``, which keeps the inexactness ledger
    summable while staying above float resolution."""

    tol: float = 1e-10
    max_iters: int = 5000
    tighten: float = 0.9
    tol_floor: float = 1e-13
    record_block_lagrangians: bool = False

    def tol_at(self, k):
        return max(self.tol * self.tighten ** k, self.tol_floor)


# ---------------------------------------------------------------------------
# problem construction
# ---------------------------------------------------------------------------

def build_problem(blocks_x, block_y, A, B, b=None, g=None, h=None):
    """Validate shapes and assemble a :class:`Problem`.

    ``A`` is the list of x-block coupling matrices, ``B`` the y block's, and
    ``b`` the constraint offset (default zero).  A nonzero ``b`` must lie in
    the column space of ``B`` (least-squares residual at most 1e-10 ||b||),
    otherwise no feasible point exists for arbitrary x.
    """
    blocks_x = tuple(blocks_x)
    A = tuple(np.atleast_2d(np.asarray(Ai, dtype=np.float64)) for Ai in A)
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if len(A) != len(blocks_x):
        raise DimensionMismatch(f"{len(blocks_x)} x blocks but {len(A)} matrices")
    m = B.shape[0]
    for i, (spec, Ai) in enumerate(zip(blocks_x, A)):
        if Ai.shape[0] != m:
            raise DimensionMismatch(
                f"A[{i}] has {Ai.shape[0]} rows, B has {m}")
        if Ai.shape[1] != spec.dim:
            raise DimensionMismatch(
                f"A[{i}] has {Ai.shape[1]} columns, block dim is {spec.dim}")
    if B.shape[1] != block_y.dim:
        raise DimensionMismatch(
            f"B has {B.shape[1]} columns, y block dim is {block_y.dim}")
    if b is None:
        b = np.zeros(m)
    b = np.asarray(b, dtype=np.float64).ravel()
    if b.size != m:
        raise DimensionMismatch(f"b has length {b.size}, expected {m}")
    bnorm = np.linalg.norm(b)
    if bnorm > 0:
        z, *_ = np.linalg.lstsq(B, b, rcond=None)
        if np.linalg.norm(B @ z - b) > 1e-10 * bnorm:
            raise InfeasibleOffset("b is not in the column space of B")
    if h is not None and block_y.objective is not None:
        raise InvalidParameter("give the y objective either as h or on the "
                               "block spec, not both")
    return Problem(blocks_x=blocks_x, block_y=block_y, A=A, B=B, b=b,
                   coupling=g, h=h)


def _check_state(P, S):
    if len(S.x) != len(P.blocks_x):
        raise DimensionMismatch("state has wrong number of x blocks")
    for i, (xi, spec) in enumerate(zip(S.x, P.blocks_x)):
        if xi.size != spec.dim:
            raise DimensionMismatch(f"x[{i}] has size {xi.size}, "
                                    f"expected {spec.dim}")
    if S.y.size != P.block_y.dim:
        raise DimensionMismatch("y has the wrong size")
    if S.w.size != P.m:
        raise DimensionMismatch("w has the wrong size")


def _phi(P, xs, y):
    total = 0.0
    for spec, xi in zip(P.blocks_x, xs):
        obj = spec.objective
        if obj is None:
            continue
        total += obj.eval(xi) if isinstance(obj, ProxHandle) else obj.value(xi)
        if total == np.inf:
            return np.inf
    yobj = P.y_objective()
    if yobj is not None:
        total += yobj.eval(y) if isinstance(yobj, ProxHandle) else yobj.value(y)
    if P.coupling is not None:
        total += P.coupling.value(xs, y)
    return total


def residual(P, xs, y):
    r = -P.b.copy()
    for Ai, xi in zip(P.A, xs):
        r += Ai @ xi
    r += P.B @ y
    return r


def augmented_lagrangian(P, S):
    """phi(x, y) + <w, r> + (beta/2)||r||^2 with r the constraint residual;
    +inf when an indicator in phi is violated."""
    _check_state(P, S)
    val = _phi(P, S.x, S.y)
    if val == np.inf:
        return np.inf
    r = residual(P, S.x, S.y)
    return float(val + S.w @ r + 0.5 * S.beta * (r @ r))


# ---------------------------------------------------------------------------
# block solvers
# ---------------------------------------------------------------------------

class _BlockInfo:
    def __init__(self, key, spec, A, objective, coupled, beta, coupling):
        self.key = key
        self.spec = spec
        self.A = A
        self.objective = objective
        self.AtA = A.T @ A
        self.sigma_max = math.sqrt(max(float(np.linalg.eigvalsh(self.AtA)[-1]), 0.0))
        alpha = float(np.trace(self.AtA)) / self.AtA.shape[0]
        if alpha > 0 and np.max(np.abs(self.AtA - alpha * np.eye(self.AtA.shape[0]))) \
                <= 1e-12 * alpha:
            self.alpha = alpha
        else:
            self.alpha = None
        self.route = self._pick_route(coupled, coupling)
        self._H = None
        self._H_pinv = None
        self._beta = beta
        self._coupling = coupling

    def _pick_route(self, coupled, coupling):
        obj = self.objective
        if isinstance(obj, ProxHandle):
            if self.alpha is not None and not coupled:
                return "prox"
            return "prox-gradient"
        quad_obj = obj is None or isinstance(obj, QuadraticHandle)
        coup_ok = (not coupled) or (coupling.block_hessians is not None
                                    and self.key in coupling.block_hessians)
        if quad_obj and coup_ok:
            return "newton"
        return "descent"

    def hessian(self):
        if self._H is None:
            H = self._beta * self.AtA
            if isinstance(self.objective, QuadraticHandle):
                H = H + self.objective.Q
            if self._coupling is not None and self._coupling.block_hessians:
                Hc = self._coupling.block_hessians.get(self.key)
                if Hc is not None:
                    H = H + np.asarray(Hc, dtype=np.float64)
            evals = np.linalg.eigvalsh(H)
            if evals[0] < -1e-10 * max(1.0, abs(evals[-1])):
                raise SubproblemFailure(
                    self.key, f"block subproblem is unbounded below "
                              f"(curvature {evals[0]:.3e}); increase beta")
            self._H = H
            self._H_pinv = np.linalg.pinv(H, rcond=1e-12)
        return self._H, self._H_pinv


class _Workspace:
    def __init__(self, P, beta, budget):
        self.P = P
        self.beta = beta
        self.budget = budget
        coupled = P.coupling is not None
        self.info = {}
        for i, (spec, Ai) in enumerate(zip(P.blocks_x, P.A)):
            self.info[i] = _BlockInfo(i, spec, Ai, spec.objective, coupled,
                                      beta, P.coupling)
        self.info["y"] = _BlockInfo("y", P.block_y, P.B, P.y_objective(),
                                    coupled, beta, P.coupling)

    def rest(self, xs, y, skip):
        """Constraint contribution of every block except ``skip``, minus b."""
        P = self.P
        r = -P.b.copy()
        for j, (Aj, xj) in enumerate(zip(P.A, xs)):
            if j != skip:
                r += Aj @ xj
        if skip != "y":
            r += P.B @ y
        return r

    def solve_block(self, key, xs, y, w, tol):
        """Minimize the augmented Lagrangian over block ``key`` with the
        other blocks held at their freshest values.  Returns (u, eta)."""
        P = self.P
        info = self.info[key]
        beta = self.beta
        u0 = y if key == "y" else xs[key]
        c_rest = self.rest(xs, y, key)
        A = info.A

        if info.route == "prox":
            c_til = c_rest + w / beta
            v = -(A.T @ c_til) / info.alpha
            t = 1.0 / (info.alpha * beta)
            h = info.objective
            if h.prox_with_report is not None:
                u, eta = h.prox_with_report(v, t)
            else:
                u, eta = h.prox(v, t), 0.0
            return np.asarray(u, dtype=np.float64).ravel(), float(eta)

        if info.route == "newton":
            H, H_pinv = info.hessian()
            g = A.T @ (w + beta * (A @ u0 + c_rest))
            if isinstance(info.objective, QuadraticHandle):
                g = g + info.objective.grad(u0)
            if P.coupling is not None:
                g = g + np.asarray(
                    P.coupling.grad_block(key, xs, y), dtype=np.float64).ravel()
            step = -(H_pinv @ g)
            if np.linalg.norm(H @ step + g) > 1e-8 * max(1.0, np.linalg.norm(g)):
                raise SubproblemFailure(
                    key, "singular block subproblem has no minimizer")
            return u0 + step, 0.0

        def smooth_value(u):
            xs_t, y_t = self._with(xs, y, key, u)
            val = float(w @ (A @ u)) + 0.5 * beta * float(
                np.sum((A @ u + c_rest) ** 2))
            if info.objective is not None and not isinstance(info.objective, ProxHandle):
                val += info.objective.value(u)
            if P.coupling is not None:
                val += P.coupling.value(xs_t, y_t)
            return val

        def smooth_grad(u):
            xs_t, y_t = self._with(xs, y, key, u)
            g = A.T @ (w + beta * (A @ u + c_rest))
            if info.objective is not None and not isinstance(info.objective, ProxHandle):
                g = g + np.asarray(info.objective.grad(u), dtype=np.float64).ravel()
            if P.coupling is not None:
                g = g + np.asarray(
                    P.coupling.grad_block(key, xs_t, y_t), dtype=np.float64).ravel()
            return g

        L = beta * info.sigma_max ** 2
        if info.objective is not None and not isinstance(info.objective, ProxHandle):
            L += info.objective.lipschitz_L or 0.0
        if P.coupling is not None:
            L += P.coupling.lipschitz

        if info.route == "descent":
            obj = SmoothHandle(value=smooth_value, grad=smooth_grad, lipschitz_L=L)
            u, rep = smooth_block_descent(obj, u0, tol, self.budget.max_iters)
            if not rep.converged:
                raise SubproblemFailure(
                    key, f"inner descent stalled at gradient norm "
                         f"{rep.achieved_grad_norm:.3e} (tol {tol:.1e})")
            return u, rep.eta_contribution

        # prox-gradient route: nonsmooth objective composed with a general
        # coupling matrix or a cross-block smooth term
        handle = info.objective
        u = u0.astype(np.float64, copy=True)

        def sgrad(u):
            g = A.T @ (w + beta * (A @ u + c_rest))
            if P.coupling is not None:
                xs_t, y_t = self._with(xs, y, key, u)
                g = g + np.asarray(
                    P.coupling.grad_block(key, xs_t, y_t), dtype=np.float64).ravel()
            return g

        res = np.inf
        for it in range(self.budget.max_iters):
            u_next = np.asarray(handle.prox(u - sgrad(u) / L, 1.0 / L),
                                dtype=np.float64).ravel()
            res = 2.0 * L * float(np.linalg.norm(u_next - u))
            u = u_next
            if res <= tol:
                break
        if res > tol:
            raise SubproblemFailure(
                key, f"prox-gradient stalled at residual {res:.3e} (tol {tol:.1e})")
        return u, res * float(np.linalg.norm(u - u0))

    def _with(self, xs, y, key, u):
        if key == "y":
            return xs, u
        xs_t = list(xs)
        xs_t[key] = u
        return xs_t, y


def _grad_h_or_none(P, y):
    h = P.y_smooth()
    if h is None:
        return None
    return np.asarray(h.grad(y), dtype=np.float64).ravel()


def _run_iteration(ws, S, seq, tol_k):
    P = ws.P
    beta = ws.beta
    xs = [xi.copy() for xi in S.x]
    y = S.y.copy()
    w = S.w.copy()
    eta = 0.0
    block_L = [] if ws.budget.record_block_lagrangians else None

    for key in seq:
        u, e = ws.solve_block(key, xs, y, w, tol_k)
        if key == "y":
            y = u
        else:
            xs[key] = u
        eta += e
        if block_L is not None:
            block_L.append(augmented_lagrangian(
                P, State(xs, y, w, beta)))

    r = residual(P, xs, y)
    w_new = w + beta * r
    new = State(xs, y, w_new, beta)

    delta_x = tuple(float(np.linalg.norm(Ai @ (xn - xo)))
                    for Ai, xn, xo in zip(P.A, xs, S.x))
    delta_y = float(np.linalg.norm(P.B @ (y - S.y)))
    dual_delta = float(np.linalg.norm(w_new - S.w))
    gh = _grad_h_or_none(P, y)
    if gh is None:
        ident = float("nan")
    else:
        ident = float(np.linalg.norm(P.B.T @ w_new + gh))
    rec = TraceRecord(
        k=0,
        L_beta=augmented_lagrangian(P, new),
        primal_residual=float(np.linalg.norm(r)),
        delta_x=delta_x,
        delta_y=delta_y,
        dual_delta=dual_delta,
        dual_identity_err=ident,
        eta_k=eta,
        block_L=tuple(block_L) if block_L is not None else None,
    )
    return new, rec


def admm_step(P, S, order=None, budget=None, iteration=0, rng=None):
    """One sweep of block minimizations in the prescribed order followed by
    the exact dual update.  Returns the new state and its trace record."""
    _check_state(P, S)
    order = order or UpdateOrder.cyclic()
    order.validate(len(P.blocks_x))
    budget = budget or SubsolveBudget()
    ws = _Workspace(P, S.beta, budget)
    seq = order.sequence_for(iteration, len(P.blocks_x), rng)
    new, rec = _run_iteration(ws, S, seq, budget.tol_at(iteration))
    return new, replace(rec, k=iteration)


def solve(P, S0, order=None, stop=None, budget=None, record_states=False):
    """Iterate :func:`admm_step` until the primal residual and the largest
    block delta both fall under the stopping thresholds.

    Returns ``(state, trace)``; raises :class:`NotConverged` carrying the
    trace when the iteration cap is hit.
    """
    _check_state(P, S0)
    order = order or UpdateOrder.cyclic()
    order.validate(len(P.blocks_x))
    stop = stop or StoppingConfig()
    budget = budget or SubsolveBudget()
    ws = _Workspace(P, S0.beta, budget)
    rng = np.random.default_rng(order.seed) \
        if order.policy == "permuted-middle" else None

    trace = Trace(states=[S0.copy()] if record_states else None)
    S = S0
    for k in range(stop.max_iters):
        seq = order.sequence_for(k, len(P.blocks_x), rng)
        S, rec = _run_iteration(ws, S, seq, budget.tol_at(k))
        rec = replace(rec, k=k)
        trace.records.append(rec)
        trace.orders.append(seq)
        if record_states:
            trace.states.append(S.copy())
        max_delta = max((*rec.delta_x, rec.delta_y))
        if rec.primal_residual <= stop.eps_primal and max_delta <= stop.eps_change:
            trace.converged = True
            return S, trace
    raise NotConverged(
        f"no convergence in {stop.max_iters} iterations "
        f"(residual {trace.records[-1].primal_residual:.3e})",
        state=S, trace=trace)
