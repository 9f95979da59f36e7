"""Hot numeric kernels: elementwise nonconvex prox maps and the chained
column-difference (group total-variation) dual loop.

Each kernel has two implementations with identical semantics: a numba
``@njit`` version and a pure-numpy version.  The active implementation is
chosen at import time: numba is used when it is importable and the
environment variable ``NADMM_NUMBA`` is not set to ``0``/``false``/``no``.
``benchmarks/bench_kernels.py`` compares the two paths.
"""

import math
import os

import numpy as np

__all__ = [
    "USING_NUMBA",
    "lq_prox", "lq_prox_numpy",
    "mcp_prox", "mcp_prox_numpy",
    "scad_prox", "scad_prox_numpy",
    "coltv_dual", "coltv_dual_numpy",
]

_NEWTON_ITERS = 100
_NEWTON_RTOL = 1e-15


# ---------------------------------------------------------------------------
# scalar-prox kernels, scalar-loop form (numba-compilable as written)
# ---------------------------------------------------------------------------

def _lq_prox_loop(v, t, lam, q):
    # global minimizer per element of  lam*|u|^q + (u - v)^2 / (2t),  0 < q < 1.
    # Candidates: u = 0 and the larger root of  psi(u) = u + t*lam*q*u^(q-1) - |v|
    # on u > 0 (psi is convex there; the larger root is the local minimum).
    # Ties between 0 and the interior point resolve to 0.
    out = np.empty_like(v)
    c = t * lam * q
    for i in range(v.shape[0]):
        vi = v[i]
        if lam == 0.0:
            out[i] = vi
            continue
        if vi == 0.0:
            out[i] = 0.0
            continue
        s = 1.0 if vi > 0.0 else -1.0
        a = abs(vi)
        ustar = (c * (1.0 - q)) ** (1.0 / (2.0 - q))
        if ustar >= a or ustar + c * ustar ** (q - 1.0) - a > 0.0:
            out[i] = 0.0
            continue
        u = a
        for _ in range(_NEWTON_ITERS):
            psi = u + c * u ** (q - 1.0) - a
            dpsi = 1.0 + c * (q - 1.0) * u ** (q - 2.0)
            step = psi / dpsi
            u -= step
            if u < ustar:          # safeguard: root lies in [ustar, a]
                u = ustar
            if abs(step) <= _NEWTON_RTOL * max(1.0, u):
                break
        interior = lam * u ** q + (u - a) * (u - a) / (2.0 * t)
        at_zero = a * a / (2.0 * t)
        out[i] = s * u if interior < at_zero else 0.0
    return out


def _mcp_penalty(u, gam, lam):
    # Quadratic-capped folded penalty with cap gam*lam and curvature 1/lam;
    # at the cap point the lower branch value applies (lsc envelope).
    gl = gam * lam
    inner = lam * u - u * u / (2.0 * lam)
    outer = 0.5 * gam * lam * lam
    if u < gl:
        return inner
    if u > gl:
        return outer
    return min(inner, outer)


def _mcp_prox_loop(v, t, gam, lam):
    out = np.empty_like(v)
    gl = gam * lam
    for i in range(v.shape[0]):
        vi = v[i]
        s = 1.0 if vi >= 0.0 else -1.0
        a = abs(vi)
        best_u = 0.0
        best_obj = _mcp_penalty(0.0, gam, lam) + a * a / (2.0 * t)
        # candidate list: cap point, tail stationary, inner stationary
        for j in range(3):
            if j == 0:
                u = gl
            elif j == 1:
                u = a if a > gl else gl
            else:
                if lam == t:
                    continue
                u = lam * (a - t * lam) / (lam - t)
                if u <= 0.0 or u >= gl:
                    continue
            obj = _mcp_penalty(u, gam, lam) + (u - a) * (u - a) / (2.0 * t)
            if obj < best_obj or (obj == best_obj and u < best_u):
                best_obj = obj
                best_u = u
        out[i] = s * best_u if best_u > 0.0 else 0.0
    return out


def _scad_penalty(u, gam, lam):
    gl = gam * lam
    if u <= lam:
        return lam * u
    if u <= gl:
        return (2.0 * gam * lam * u - u * u - lam * lam) / (2.0 * (gam - 1.0))
    return 0.5 * (gam + 1.0) * lam * lam


def _scad_prox_loop(v, t, gam, lam):
    out = np.empty_like(v)
    gl = gam * lam
    for i in range(v.shape[0]):
        vi = v[i]
        s = 1.0 if vi >= 0.0 else -1.0
        a = abs(vi)
        best_u = 0.0
        best_obj = a * a / (2.0 * t)
        for j in range(5):
            if j == 0:
                u = lam
            elif j == 1:
                u = gl
            elif j == 2:
                u = a if a > gl else gl
            elif j == 3:
                u = a - t * lam
                if u <= 0.0 or u >= lam:
                    continue
            else:
                if gam - 1.0 == t:
                    continue
                u = ((gam - 1.0) * a - t * gam * lam) / (gam - 1.0 - t)
                if u <= lam or u >= gl:
                    continue
            obj = _scad_penalty(u, gam, lam) + (u - a) * (u - a) / (2.0 * t)
            if obj < best_obj or (obj == best_obj and u < best_u):
                best_obj = obj
                best_u = u
        out[i] = s * best_u if best_u > 0.0 else 0.0
    return out


def _coltv_dual_loop(V, beta, tol, max_iter):
    # Dual of  sum_i ||Y_i - Y_{i+1}|| + (beta/2)||Y - V||_F^2  over the chain
    # of column differences: accelerated projected gradient on the unit-ball
    # product, with the strong-convexity momentum of the chain operator.
    n, m = V.shape
    Y = V.copy()
    if m < 2:
        return Y, 0.0, 0
    L = (2.0 - 2.0 * math.cos((m - 1.0) * math.pi / m)) / beta
    mu = (2.0 - 2.0 * math.cos(math.pi / m)) / beta
    kappa = mu / L
    theta = (1.0 - math.sqrt(kappa)) / (1.0 + math.sqrt(kappa))
    P = np.zeros((n, m - 1))
    Pm = np.zeros((n, m - 1))
    Pn = np.zeros((n, m - 1))
    DP = np.zeros((n, m))
    gap = math.inf
    it = 0
    while it < max_iter:
        it += 1
        # DP = D(Pm), the chained column-difference image of the momentum point
        for r in range(n):
            DP[r, 0] = Pm[r, 0]
            for jc in range(1, m - 1):
                DP[r, jc] = Pm[r, jc] - Pm[r, jc - 1]
            DP[r, m - 1] = -Pm[r, m - 2]
        # gradient step on each dual column, then project to the unit ball
        for jc in range(m - 1):
            nrm2 = 0.0
            for r in range(n):
                g = (DP[r, jc] - DP[r, jc + 1]) / beta - (V[r, jc] - V[r, jc + 1])
                Pn[r, jc] = Pm[r, jc] - g / L
                nrm2 += Pn[r, jc] * Pn[r, jc]
            scale = 1.0 / math.sqrt(nrm2) if nrm2 > 1.0 else 1.0
            for r in range(n):
                pnew = Pn[r, jc] * scale
                Pm[r, jc] = pnew + theta * (pnew - P[r, jc])
                P[r, jc] = pnew
        # duality gap at P
        for r in range(n):
            DP[r, 0] = P[r, 0]
            for jc in range(1, m - 1):
                DP[r, jc] = P[r, jc] - P[r, jc - 1]
            DP[r, m - 1] = -P[r, m - 2]
        primal = 0.0
        dual = 0.0
        for jc in range(m):
            for r in range(n):
                Y[r, jc] = V[r, jc] - DP[r, jc] / beta
                primal += 0.5 * beta * (Y[r, jc] - V[r, jc]) ** 2
                dual += DP[r, jc] * V[r, jc] - DP[r, jc] ** 2 / (2.0 * beta)
        for jc in range(m - 1):
            d2 = 0.0
            for r in range(n):
                d2 += (Y[r, jc] - Y[r, jc + 1]) ** 2
            primal += math.sqrt(d2)
        gap = primal - dual
        if gap <= tol:
            break
    if gap < 0.0:
        gap = 0.0
    return Y, gap, it


# ---------------------------------------------------------------------------
# pure-numpy fallbacks (vectorized, same candidate sets and tie rules)
# ---------------------------------------------------------------------------

def lq_prox_numpy(v, t, lam, q):
    v = np.asarray(v, dtype=np.float64)
    if lam == 0.0:
        return v.copy()
    a = np.abs(v)
    c = t * lam * q
    ustar = (c * (1.0 - q)) ** (1.0 / (2.0 - q))
    with np.errstate(divide="ignore", invalid="ignore"):
        active = (a > 0) & (ustar < a) & (ustar + c * ustar ** (q - 1.0) - a <= 0.0)
    u = np.where(active, a, 1.0)
    for _ in range(_NEWTON_ITERS):
        psi = u + c * u ** (q - 1.0) - a
        dpsi = 1.0 + c * (q - 1.0) * u ** (q - 2.0)
        step = np.where(active, psi / dpsi, 0.0)
        u = np.maximum(u - step, ustar)
        if np.all(np.abs(step) <= _NEWTON_RTOL * np.maximum(1.0, u)):
            break
    interior = lam * u ** q + (u - a) ** 2 / (2.0 * t)
    keep = active & (interior < a ** 2 / (2.0 * t))
    return np.where(keep, np.sign(v) * u, 0.0)


def _pick_candidates(a, t, cands, valid, penalty):
    """Select, per element, the valid candidate with the lowest objective
    (ties go to the smaller magnitude)."""
    objs = np.where(valid, penalty(cands) + (cands - a) ** 2 / (2.0 * t), np.inf)
    order = np.lexsort((cands, objs), axis=0)[0]
    return np.take_along_axis(cands, order[None, :], axis=0)[0]


def mcp_prox_numpy(v, t, gam, lam):
    v = np.asarray(v, dtype=np.float64)
    a = np.abs(v).ravel()
    gl = gam * lam

    def pen(u):
        inner = lam * u - u * u / (2.0 * lam)
        outer = 0.5 * gam * lam * lam
        return np.where(u < gl, inner, np.where(u > gl, outer, np.minimum(inner, outer)))

    zero = np.zeros_like(a)
    cap = np.full_like(a, gl)
    tail = np.maximum(a, gl)
    if lam == t:
        inner = zero
        inner_ok = np.zeros(a.shape, dtype=bool)
    else:
        inner = lam * (a - t * lam) / (lam - t)
        inner_ok = (inner > 0.0) & (inner < gl)
    cands = np.stack([zero, cap, tail, np.where(inner_ok, inner, 0.0)])
    valid = np.stack([np.ones_like(inner_ok), np.ones_like(inner_ok),
                      np.ones_like(inner_ok), inner_ok])
    best = _pick_candidates(a, t, cands, valid, pen)
    return (np.sign(v).ravel() * best).reshape(v.shape) + 0.0


def scad_prox_numpy(v, t, gam, lam):
    v = np.asarray(v, dtype=np.float64)
    a = np.abs(v).ravel()
    gl = gam * lam

    def pen(u):
        mid = (2.0 * gam * lam * u - u * u - lam * lam) / (2.0 * (gam - 1.0))
        return np.where(u <= lam, lam * u,
                        np.where(u <= gl, mid, 0.5 * (gam + 1.0) * lam * lam))

    zero = np.zeros_like(a)
    knee = np.full_like(a, lam)
    cap = np.full_like(a, gl)
    tail = np.maximum(a, gl)
    s1 = a - t * lam
    s1_ok = (s1 > 0.0) & (s1 < lam)
    if gam - 1.0 == t:
        s2 = zero
        s2_ok = np.zeros(a.shape, dtype=bool)
    else:
        s2 = ((gam - 1.0) * a - t * gam * lam) / (gam - 1.0 - t)
        s2_ok = (s2 > lam) & (s2 < gl)
    ones = np.ones(a.shape, dtype=bool)
    cands = np.stack([zero, knee, cap, tail,
                      np.where(s1_ok, s1, 0.0), np.where(s2_ok, s2, 0.0)])
    valid = np.stack([ones, ones, ones, ones, s1_ok, s2_ok])
    best = _pick_candidates(a, t, cands, valid, pen)
    return (np.sign(v).ravel() * best).reshape(v.shape) + 0.0


def _chain_diff(P, m):
    """Map dual columns p_1..p_{m-1} to the m-column form whose inner product
    with Y equals sum_i <p_i, Y_i - Y_{i+1}>."""
    n = P.shape[0]
    D = np.zeros((n, m))
    D[:, 0] = P[:, 0]
    if m > 2:
        D[:, 1:m - 1] = P[:, 1:] - P[:, :-1]
    D[:, m - 1] = -P[:, m - 2]
    return D


def coltv_dual_numpy(V, beta, tol, max_iter):
    V = np.asarray(V, dtype=np.float64)
    n, m = V.shape
    if m < 2:
        return V.copy(), 0.0, 0
    L = (2.0 - 2.0 * math.cos((m - 1.0) * math.pi / m)) / beta
    mu = (2.0 - 2.0 * math.cos(math.pi / m)) / beta
    theta = (1.0 - math.sqrt(mu / L)) / (1.0 + math.sqrt(mu / L))
    P = np.zeros((n, m - 1))
    Pm = np.zeros((n, m - 1))
    gap = np.inf
    it = 0
    while it < max_iter:
        it += 1
        Z = _chain_diff(Pm, m) / beta - V
        G = Z[:, :-1] - Z[:, 1:]
        Pn = Pm - G / L
        nrm = np.linalg.norm(Pn, axis=0)
        Pn = Pn / np.maximum(nrm, 1.0)
        Pm = Pn + theta * (Pn - P)
        P = Pn
        DP = _chain_diff(P, m)
        Y = V - DP / beta
        primal = np.sum(np.linalg.norm(Y[:, :-1] - Y[:, 1:], axis=0)) \
            + 0.5 * beta * np.sum((Y - V) ** 2)
        dual = np.sum(DP * V) - np.sum(DP ** 2) / (2.0 * beta)
        gap = primal - dual
        if gap <= tol:
            break
    Y = V - _chain_diff(P, m) / beta
    return Y, max(gap, 0.0), it


# ---------------------------------------------------------------------------
# backend selection
# ---------------------------------------------------------------------------

def _want_numba():
    return os.environ.get("NADMM_NUMBA", "1").lower() not in ("0", "false", "no")


USING_NUMBA = False
if _want_numba():
    try:
        from numba import njit

        _mcp_penalty = njit(cache=True)(_mcp_penalty)
        _scad_penalty = njit(cache=True)(_scad_penalty)
        _lq_prox_jit = njit(cache=True)(_lq_prox_loop)
        _mcp_prox_jit = njit(cache=True)(_mcp_prox_loop)
        _scad_prox_jit = njit(cache=True)(_scad_prox_loop)
        _coltv_dual_jit = njit(cache=True)(_coltv_dual_loop)
        USING_NUMBA = True
    except ImportError:
        USING_NUMBA = False

if USING_NUMBA:
    def lq_prox(v, t, lam, q):
        v = np.ascontiguousarray(v, dtype=np.float64)
        return _lq_prox_jit(v.ravel(), float(t), float(lam), float(q)).reshape(v.shape)

    def mcp_prox(v, t, gam, lam):
        v = np.ascontiguousarray(v, dtype=np.float64)
        return _mcp_prox_jit(v.ravel(), float(t), float(gam), float(lam)).reshape(v.shape)

    def scad_prox(v, t, gam, lam):
        v = np.ascontiguousarray(v, dtype=np.float64)
        return _scad_prox_jit(v.ravel(), float(t), float(gam), float(lam)).reshape(v.shape)

    def coltv_dual(V, beta, tol, max_iter):
        V = np.ascontiguousarray(V, dtype=np.float64)
        return _coltv_dual_jit(V, float(beta), float(tol), int(max_iter))
else:
    def lq_prox(v, t, lam, q):
        v = np.asarray(v, dtype=np.float64)
        return lq_prox_numpy(v.ravel(), t, lam, q).reshape(v.shape)

    def mcp_prox(v, t, gam, lam):
        return mcp_prox_numpy(v, t, gam, lam)

    def scad_prox(v, t, gam, lam):
        return scad_prox_numpy(v, t, gam, lam)

    coltv_dual = coltv_dual_numpy
