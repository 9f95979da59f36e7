"""Runtime and post-hoc verification of the solver's descent, dual-control,
and stationarity-bound behavior, plus structural checks on the coupling
matrices and a sampled curvature probe for nonconvex objectives."""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (DegenerateB, InvalidParameter, MissingConstants,
                     NoSubgradientSampler)

__all__ = [
    "DiagnosticReport", "ConstantsDecl",
    "check_im_subset", "beta_threshold", "check_dual_identity",
    "check_sufficient_descent", "check_subgradient_bound",
    "running_best_rates", "probe_restricted_prox_regularity",
    "check_y_smoothness", "check_reverse_control",
]


@dataclass(frozen=True)
class DiagnosticReport:
    check_name: str
    passed: bool
    margin: float
    tolerance: float = 0.0
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        # keep the pass flag and the worst-case slack consistent
        if self.passed != (self.margin >= -self.tolerance):
            raise InvalidParameter("inconsistent report: passed flag does not "
                                   "match margin/tolerance")


@dataclass(frozen=True)
class ConstantsDecl:
    """User-declared smoothness constants: gradient Lipschitz constants of
    the coupling term (L_g) and the y objective (L_h), and the Lipschitz
    constant Mbar of the per-block sub-minimization maps."""

    L_h: float
    Mbar: float
    L_g: float = 0.0
    L_phi: Optional[float] = None

    def __post_init__(self):
        if self.L_h < 0 or self.Mbar <= 0 or self.L_g < 0:
            raise InvalidParameter("constants must be positive")


def _rank(M, thr):
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > thr))


def check_im_subset(A, B, tol=1e-10):
    """Pass iff the column space of every A_i lies inside the column space of
    B, decided by comparing rank(B) with rank([B | A...]) under a relative
    singular-value threshold."""
    A = [np.atleast_2d(np.asarray(Ai, dtype=float)) for Ai in A]
    B = np.atleast_2d(np.asarray(B, dtype=float))
    stacked = np.hstack([B] + list(A))
    smax = np.linalg.svd(stacked, compute_uv=False)[0]
    thr = tol * smax
    rb = _rank(B, thr)
    rc = _rank(stacked, thr)
    return DiagnosticReport(
        check_name="im-subset",
        passed=rb == rc,
        margin=float(rb - rc),
        details={"rank_B": rb, "rank_stacked": rc},
    )


def beta_threshold(B, constants):
    """Penalty weight above which the per-iteration descent argument holds:
    2 (L_h Mbar^2 + 1 + C) with C = L_h Mbar / sqrt(lambda_pp(B^T B)), where
    lambda_pp is the smallest strictly positive eigenvalue."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    evals = np.linalg.eigvalsh(B.T @ B)
    lam_max = float(evals[-1])
    if lam_max <= 0:
        raise DegenerateB("B is zero")
    pos = evals[evals > 1e-12 * lam_max]
    lam_pp = float(pos[0])
    C = constants.L_h * constants.Mbar / math.sqrt(lam_pp)
    return 2.0 * (constants.L_h * constants.Mbar ** 2 + 1.0 + C)


def check_dual_identity(P, S, tol=1e-8):
    """After an exact y update, the y-block optimality ties the dual to the
    y gradient: ||B^T w + grad_h(y)|| should not exceed the inner solve
    tolerance."""
    h = P.y_smooth()
    if h is None:
        raise InvalidParameter("y objective has no gradient handle")
    err = float(np.linalg.norm(P.B.T @ S.w + np.asarray(h.grad(S.y)).ravel()))
    return DiagnosticReport(
        check_name="dual-identity",
        passed=err <= tol,
        margin=tol - err,
        details={"error": err},
    )


def _step_movement(rec):
    return rec.delta_y ** 2 + sum(d ** 2 for d in rec.delta_x[1:])


def check_sufficient_descent(trace, window=None, slack=1e-9):
    """Over the trailing window (default: last half of the iterations),
    report the largest C1 >= 0 with

        L[k] - L[k+1] >= C1 * (delta_y^2 + sum_{i>=1} delta_x_i^2)

    at every windowed step.  C1 = 0 means failure; steps with zero movement
    are vacuous.  Recorded per-step inexactness is credited to the descent.
    """
    recs = trace.records if hasattr(trace, "records") else list(trace)
    n_steps = max(len(recs) - 1, 0)
    if window is None:
        window = max(n_steps // 2, 1)
    window = min(window, n_steps)
    ratios = []
    offenders = []
    for k in range(n_steps - window, n_steps):
        prev, cur = recs[k], recs[k + 1]
        move = _step_movement(cur)
        if move <= 1e-28:
            continue
        drop = prev.L_beta - cur.L_beta + cur.eta_k \
            + slack * max(1.0, abs(prev.L_beta))
        ratios.append(drop / move)
        if drop / move <= 0:
            offenders.append(cur.k)
    if not ratios:
        return DiagnosticReport(
            check_name="sufficient-descent", passed=True, margin=math.inf,
            details={"C1": math.inf, "window": window, "vacuous": True})
    c1 = max(0.0, min(ratios))
    return DiagnosticReport(
        check_name="sufficient-descent",
        passed=c1 > 0,
        margin=c1 if c1 > 0 else -1.0,
        details={"C1": c1, "window": window, "offending_k": offenders},
    )


def _lambda_pp(B):
    evals = np.linalg.eigvalsh(B.T @ B)
    lam_max = float(evals[-1])
    pos = evals[evals > 1e-12 * max(lam_max, 1e-300)]
    return float(pos[0]) if pos.size else 0.0


def check_subgradient_bound(P, state_pair, constants, order_seq=None,
                            eta=0.0, slack=1e-9):
    """Evaluate the explicit stationarity residual of the augmented
    Lagrangian at the newer of two consecutive exactly-updated states and
    verify it is bounded by the iterate movement.

    Per x block s the residual component is

        d_s = -(A_s^T (w+ - w) + beta A_s^T (sum_{j after s} A_j dx_j + B dy)
               + grad_s g(new) - grad_s g(mixed at s's solve time))

    plus the y component B^T (w+ - w) and the w component (w+ - w)/beta.
    The bound constant aggregates, per block, sigma_max(A_s) beta + L_h Mbar
    + sigma_max(A_s) C against  sum_{i>=1} ||A_i dx_i|| + ||B dy||.
    """
    if constants is None:
        raise MissingConstants("subgradient bound needs declared constants")
    S_prev, S_next = state_pair
    beta = S_next.beta
    n_x = len(P.blocks_x)
    if order_seq is None:
        order_seq = tuple(range(n_x)) + ("y",)
    if order_seq[-1] != "y":
        raise InvalidParameter("the y block must be updated last")

    dw = S_next.w - S_prev.w
    dy_img = P.B @ (S_next.y - S_prev.y)
    dx_img = [Ai @ (xn - xo) for Ai, xn, xo in zip(P.A, S_next.x, S_prev.x)]

    pos = {key: i for i, key in enumerate(order_seq)}
    comp_norms = {}
    total_sq = 0.0
    for s in range(n_x):
        after = [j for j in range(n_x) if pos[j] > pos[s]]
        tail = sum((dx_img[j] for j in after), np.zeros(P.m)) + dy_img
        d_s = -(P.A[s].T @ dw + beta * (P.A[s].T @ tail))
        if P.coupling is not None:
            g_new = np.asarray(P.coupling.grad_block(
                s, S_next.x, S_next.y), dtype=float).ravel()
            xs_mixed = [S_next.x[j] if pos[j] <= pos[s] else S_prev.x[j]
                        for j in range(n_x)]
            g_mixed = np.asarray(P.coupling.grad_block(
                s, xs_mixed, S_prev.y), dtype=float).ravel()
            d_s = d_s - (g_new - g_mixed)
        comp_norms[s] = float(np.linalg.norm(d_s))
        total_sq += comp_norms[s] ** 2
    grad_y = P.B.T @ dw
    grad_w = dw / beta
    comp_norms["y"] = float(np.linalg.norm(grad_y))
    comp_norms["w"] = float(np.linalg.norm(grad_w))
    total_sq += comp_norms["y"] ** 2 + comp_norms["w"] ** 2
    d_norm = math.sqrt(total_sq)

    lam_pp = _lambda_pp(P.B)
    if lam_pp <= 0:
        raise DegenerateB("B is zero")
    C = constants.L_h * constants.Mbar / math.sqrt(lam_pp)
    sig = [np.linalg.svd(Ai, compute_uv=False)[0] for Ai in P.A]
    C2 = sum(s_ * beta + constants.L_h * constants.Mbar + s_ * C for s_ in sig)
    C2 += constants.L_h * constants.Mbar + C / beta
    movement = float(np.linalg.norm(dy_img)) \
        + sum(float(np.linalg.norm(v)) for v in dx_img[1:])
    bound = C2 * movement + eta + slack * max(1.0, C2)
    return DiagnosticReport(
        check_name="subgradient-bound",
        passed=d_norm <= bound,
        margin=bound - d_norm,
        details={"d_norm": d_norm, "bound": bound, "C2": C2,
                 "movement": movement, "components": comp_norms},
    )


def running_best_rates(trace):
    """Scaled running-best sequences over the trace: ``k * min_{i<=k} a_i``
    for the squared movement a, and ``sqrt(k) * min_{i<=k} c_i`` for the
    movement sum c that controls the stationarity residual.  A decreasing
    tail is evidence of rates faster than 1/k and 1/sqrt(k)."""
    recs = trace.records if hasattr(trace, "records") else list(trace)
    a = np.array([_step_movement(r) for r in recs])
    c = np.array([r.delta_y + sum(r.delta_x[1:]) for r in recs])
    k = np.arange(1, len(recs) + 1, dtype=float)
    return k * np.minimum.accumulate(a), np.sqrt(k) * np.minimum.accumulate(c)


def probe_restricted_prox_regularity(f, T, M, gamma_grid=None, seed=0,
                                     pairs_per_point=3, tol=1e-9):
    """Sampled lower-curvature probe for a nonsmooth objective.

    Points of ``T`` whose every subgradient exceeds norm ``M`` are excluded
    (membership decided by the handle's sampler).  Over sampled triples
    (x admissible, y in T, d a subgradient of norm <= M) the probe finds the
    smallest grid value gamma with

        f(y) + (gamma/2) ||x - y||^2  >=  f(x) + <d, y - x>  -  tol

    on every triple, reporting failure when the grid is exhausted.
    """
    if f.subgradients is None:
        raise NoSubgradientSampler("objective handle has no subgradient sampler")
    pts = np.asarray(T, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if gamma_grid is None:
        gamma_grid = [0.0] + [2.0 ** k for k in range(-2, 15)]
    rng = np.random.default_rng(seed)
    n = pts.shape[0]
    partners = rng.integers(0, n, size=(n, pairs_per_point))

    f_vals = np.array([f.eval(x) for x in pts])
    required = 0.0
    admissible = 0
    for i, x in enumerate(pts):
        ds = f.subgradients(x, M)
        if ds is None:
            continue
        admissible += 1
        for j in partners[i]:
            y = pts[j]
            diff = y - x
            q = float(diff @ diff)
            if q <= 0.0:
                continue
            for d in np.atleast_2d(ds):
                gap = f_vals[i] + float(d @ diff) - f_vals[j] - tol
                if gap > 0:
                    required = max(required, 2.0 * gap / q)
    chosen = None
    for g in gamma_grid:
        if g >= required:
            chosen = g
            break
    details = {"gamma": chosen, "gamma_required": required,
               "n_admissible": admissible, "n_points": n}
    if chosen is None:
        return DiagnosticReport("prox-regularity-probe", passed=False,
                                margin=-math.inf, details=details)
    return DiagnosticReport("prox-regularity-probe", passed=True,
                            margin=chosen - required, details=details)


def check_y_smoothness(P, points=None, step=1e-6, rtol=1e-5):
    """Structural check that the y block carries a smooth objective (its own
    gradient handle, or none at all with at most a smooth coupling); when
    sample points are given the gradient is finite-difference verified."""
    from .prox import ProxHandle
    if isinstance(P.block_y.objective, ProxHandle):
        return DiagnosticReport("y-smoothness", passed=False, margin=-1.0,
                                details={"reason": "nonsmooth y objective"})
    h = P.y_smooth()
    worst = 0.0
    if h is not None and points is not None:
        for u in points:
            u = np.asarray(u, dtype=float)
            g = np.asarray(h.grad(u), dtype=float).ravel()
            fd = np.empty_like(g)
            for j in range(u.size):
                e = np.zeros_like(u)
                e[j] = step
                fd[j] = (h.value(u + e) - h.value(u - e)) / (2 * step)
            worst = max(worst, float(np.linalg.norm(fd - g))
                        / max(1.0, float(np.linalg.norm(g))))
    return DiagnosticReport("y-smoothness", passed=worst <= rtol,
                            margin=rtol - worst, details={"fd_error": worst})


def check_reverse_control(P, states, constants, slack=1e-9):
    """With a declared Mbar, iterate differences should be controlled by
    their images: ||y_k1 - y_k2|| <= Mbar ||B(y_k1 - y_k2)|| over consecutive
    states, and likewise per x block."""
    if constants is None:
        raise MissingConstants("reverse control needs declared constants")
    worst = math.inf
    for Sa, Sb in zip(states[:-1], states[1:]):
        pairs = [(Sb.y - Sa.y, P.B)]
        pairs += [(xb - xa, Ai) for xa, xb, Ai in zip(Sa.x, Sb.x, P.A)]
        for diff, Mat in pairs:
            dn = float(np.linalg.norm(diff))
            if dn <= 1e-14:
                continue
            worst = min(worst, constants.Mbar
                        * float(np.linalg.norm(Mat @ diff)) - dn)
    return DiagnosticReport("reverse-control", passed=worst >= -slack,
                            margin=worst, tolerance=slack,
                            details={"worst_margin": worst})
