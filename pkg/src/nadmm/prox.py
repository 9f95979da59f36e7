"""Proximal operators and projections for the nonsmooth objectives and
constraint sets shipped with the package.

All scalar-valued operators act elementwise, accept scalars or arrays, and
use deterministic tie rules (stated per operator).  ``ProxHandle`` is the
uniform wrapper the solver engine consumes for a nonsmooth block objective.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import InvalidParameter, InvalidSpec

__all__ = [
    "ProxHandle", "PiecewiseLinearSpec",
    "prox_l1", "prox_lq", "prox_mcp", "prox_scad", "prox_piecewise_linear",
    "proj_box", "proj_sphere", "proj_stiefel", "proj_complementarity",
    "prox_schatten_q",
    "l1_handle", "lq_handle", "mcp_handle", "scad_handle",
    "piecewise_linear_handle", "box_indicator_handle",
    "sphere_indicator_handle", "stiefel_indicator_handle",
    "complementarity_indicator_handle", "schatten_q_handle",
]


@dataclass(frozen=True)
class ProxHandle:
    """A nonsmooth block objective exposed through its proximal map.

    ``prox(v, t)`` returns argmin_u  eval(u) + ||u - v||^2 / (2t), using the
    documented ``tie_rule`` when the argmin is not unique.  When a handle's
    prox is computed iteratively, ``prox_with_report`` returns ``(u, eta)``
    where ``eta`` bounds the achieved suboptimality; the engine adds it to
    the per-iteration inexactness ledger.  ``subgradients(x, bound)`` is an
    optional sampler returning representative subgradients of norm <= bound
    (``None`` when every subgradient at ``x`` exceeds the bound).
    """

    eval: Callable[[np.ndarray], float]
    prox: Callable[[np.ndarray, float], np.ndarray]
    tie_rule: str = ""
    class_tag: str = "lower-semicontinuous"
    prox_with_report: Optional[Callable[[np.ndarray, float], tuple]] = None
    subgradients: Optional[Callable[[np.ndarray, float], Optional[np.ndarray]]] = None

    def __post_init__(self):
        tags = {"lower-semicontinuous", "restricted-prox-regular",
                "piecewise-linear", "smooth"}
        if self.class_tag not in tags:
            raise InvalidParameter(f"unknown class_tag {self.class_tag!r}")


def _prep(v):
    arr = np.asarray(v, dtype=np.float64)
    return arr, arr.ndim == 0


def _ret(out, scalar):
    return float(out) if scalar else out


# ---------------------------------------------------------------------------
# elementwise operators
# ---------------------------------------------------------------------------

def prox_l1(v, t, lam):
    """Soft threshold at ``t*lam``, elementwise."""
    arr, scalar = _prep(v)
    out = np.sign(arr) * np.maximum(np.abs(arr) - t * lam, 0.0)
    return _ret(out, scalar)


def prox_lq(v, t, lam, q):
    """Elementwise global minimizer of  lam*|u|^q + (u-v)^2/(2t),  0 < q <= 1.

    For q < 1 the candidate u=0 is compared against the interior stationary
    point located by safeguarded Newton; ties resolve to 0.  q = 1 reduces to
    the soft threshold.
    """
    arr, scalar = _prep(v)
    if q == 1.0:
        return prox_l1(v, t, lam)
    out = _kernels.lq_prox(arr, t, lam, q)
    return _ret(out, scalar)


def prox_mcp(v, t, gamma, lam):
    """Elementwise prox of the quadratic-capped folded penalty with cap
    ``gamma*lam``, inner curvature ``1/lam``, and constant tail
    ``gamma*lam^2/2``.

    Note the inner quadratic coefficient is ``1/(2*lam)`` (independent of
    gamma); unless ``gamma == lam`` the penalty jumps at the cap point and is
    evaluated there as the lower of the two branch values.  The common
    variant with coefficient ``1/(2*gamma)`` is intentionally not used.
    Ties resolve to the smaller magnitude.
    """
    if gamma <= 0 or lam <= 0:
        raise InvalidParameter(f"need gamma > 0 and lam > 0, got {gamma}, {lam}")
    if t <= 0:
        raise InvalidParameter("need t > 0")
    arr, scalar = _prep(v)
    return _ret(_kernels.mcp_prox(arr, t, gamma, lam), scalar)


def prox_scad(v, t, gamma, lam):
    """Elementwise prox of the three-branch folded penalty: linear slope
    ``lam`` up to ``lam``, quadratic blend on ``(lam, gamma*lam]``, constant
    ``(gamma+1)*lam^2/2`` beyond.  Ties resolve to the smaller magnitude.
    """
    if gamma <= 2 or lam <= 0:
        raise InvalidParameter(f"need gamma > 2 and lam > 0, got {gamma}, {lam}")
    if t <= 0:
        raise InvalidParameter("need t > 0")
    arr, scalar = _prep(v)
    return _ret(_kernels.scad_prox(arr, t, gamma, lam), scalar)


# ---------------------------------------------------------------------------
# piecewise linear objectives
# ---------------------------------------------------------------------------

@dataclass
class PiecewiseLinearSpec:
    """A continuous piecewise linear function given as polyhedral pieces.

    Each piece is ``(C, d, a, b)``: on the polyhedron {u : C u <= d} the
    function equals ``a . u + b``.  ``C`` may have zero rows (whole space).
    Pieces must cover the space and agree on shared boundaries; this is
    checked on sampled points the first time the spec is used.
    """

    pieces: Sequence[tuple]
    sample_box: float = 5.0
    _validated: bool = field(default=False, repr=False)

    def dim(self):
        return len(np.atleast_1d(np.asarray(self.pieces[0][2], dtype=float)))

    def validate(self, n_samples=400, seed=0, tol=1e-8):
        if self._validated:
            return
        rng = np.random.default_rng(seed)
        dim = self.dim()
        pts = rng.uniform(-self.sample_box, self.sample_box, size=(n_samples, dim))
        for x in pts:
            vals = []
            for (C, d, a, b) in self._norm_pieces():
                if C.shape[0] == 0 or np.all(C @ x <= d + 1e-7):
                    vals.append(float(a @ x) + b)
            if not vals:
                raise InvalidSpec("pieces do not cover a sampled point")
            if max(vals) - min(vals) > tol * max(1.0, abs(vals[0])):
                raise InvalidSpec("pieces disagree on a sampled boundary point")
        self._validated = True

    def _norm_pieces(self):
        out = []
        for (C, d, a, b) in self.pieces:
            C = np.atleast_2d(np.asarray(C, dtype=float))
            if C.size == 0:
                C = np.zeros((0, self.dim()))
            out.append((C, np.atleast_1d(np.asarray(d, dtype=float)).ravel(),
                        np.atleast_1d(np.asarray(a, dtype=float)).ravel(), float(b)))
        return out

    def eval(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        best = None
        for (C, d, a, b) in self._norm_pieces():
            if C.shape[0] == 0 or np.all(C @ x <= d + 1e-9):
                v = float(a @ x) + b
                best = v if best is None else min(best, v)
        return np.inf if best is None else best


def _proj_polyhedron(v, C, d, tol=1e-13, max_cycles=200):
    """Euclidean projection onto {u : C u <= d} by Dykstra over halfspaces."""
    if C.shape[0] == 0:
        return v.copy()
    if C.shape[0] == 1:
        c = C[0]
        viol = max(0.0, (c @ v - d[0]) / (c @ c))
        return v - viol * c
    u = v.copy()
    incs = np.zeros((C.shape[0], v.size))
    for _ in range(max_cycles):
        u_prev = u.copy()
        for j in range(C.shape[0]):
            c = C[j]
            z = u + incs[j]
            viol = max(0.0, (c @ z - d[j]) / (c @ c))
            u_new = z - viol * c
            incs[j] = z - u_new
            u = u_new
        if np.linalg.norm(u - u_prev) <= tol * max(1.0, np.linalg.norm(u)):
            break
    return u


def prox_piecewise_linear(spec, v, t):
    """Prox of a continuous piecewise linear function.

    Per piece the minimizer of the shifted quadratic is the projection of
    ``v - t*a_i`` onto the piece's polyhedron; the global best is returned.
    Ties resolve to the lowest piece index.
    """
    spec.validate()
    arr, scalar = _prep(v)
    x = np.atleast_1d(arr)
    best_u, best_obj = None, np.inf
    for (C, d, a, b) in spec._norm_pieces():
        u = _proj_polyhedron(x - t * a, C, d)
        obj = float(a @ u) + b + float(np.sum((u - x) ** 2)) / (2.0 * t)
        if obj < best_obj:
            best_obj, best_u = obj, u
    out = best_u if arr.ndim else best_u[0]
    return _ret(out, scalar)


# ---------------------------------------------------------------------------
# projections
# ---------------------------------------------------------------------------

def proj_box(v, lo, hi):
    """Elementwise clamp to [lo, hi]."""
    arr, scalar = _prep(v)
    return _ret(np.clip(arr, lo, hi), scalar)


def proj_sphere(v):
    """Nearest point on the unit sphere; 0 maps to the first basis vector.

    Inputs already unit-norm (within a few ulp) are returned unchanged so
    that repeated projection is exactly idempotent.
    """
    arr = np.atleast_1d(np.asarray(v, dtype=np.float64))
    n = np.linalg.norm(arr)
    if n == 0.0:
        out = np.zeros_like(arr)
        out[0] = 1.0
        return out
    if abs(n - 1.0) <= 4 * np.finfo(float).eps:
        return arr.copy()
    return arr / n


def proj_stiefel(M):
    """Nearest matrix with orthonormal columns in Frobenius norm: the polar
    factor U V^T of the thin SVD.  Rank-deficient inputs use the SVD's own
    deterministic basis completion."""
    M = np.asarray(M, dtype=np.float64)
    U, _, Vt = np.linalg.svd(M, full_matrices=False)
    return U @ Vt


def proj_complementarity(a, b):
    """Project coordinate pairs onto {x >= 0, y >= 0, x*y = 0}.

    Per pair the nearer of ``(max(a,0), 0)`` and ``(0, max(b,0))`` in squared
    distance is chosen; exact ties take the first (x) branch.
    """
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    ax = np.maximum(a, 0.0)
    by = np.maximum(b, 0.0)
    d_x = (a - ax) ** 2 + b ** 2
    d_y = a ** 2 + (b - by) ** 2
    take_x = d_x <= d_y
    x = np.where(take_x, ax, 0.0)
    y = np.where(take_x, 0.0, by)
    return x, y


def prox_schatten_q(M, t, lam, q):
    """Prox of ``lam * sum_i sigma_i(M)^q`` (0 < q <= 1): apply the scalar
    lq prox to each singular value and reassemble.  Valid because the
    objective depends on the matrix only through its singular values."""
    M = np.asarray(M, dtype=np.float64)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    if q == 1.0:
        sp = np.maximum(s - t * lam, 0.0)
    else:
        sp = _kernels.lq_prox(s, t, lam, q)
    return (U * sp) @ Vt


# ---------------------------------------------------------------------------
# handle factories
# ---------------------------------------------------------------------------

def l1_handle(lam):
    return ProxHandle(
        eval=lambda x: lam * float(np.sum(np.abs(x))),
        prox=lambda v, t: np.atleast_1d(prox_l1(v, t, lam)),
        tie_rule="unique minimizer",
        class_tag="piecewise-linear",
        subgradients=lambda x, bound: _l1_subgradients(x, lam, bound),
    )


def _l1_subgradients(x, lam, bound):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size == 1:
        if x[0] != 0.0:
            d = lam * np.sign(x[0])
            return None if abs(d) > bound else np.array([[d]])
        lim = min(lam, bound)
        return np.array([[-lim], [0.0], [lim]])
    d = lam * np.sign(x)
    if np.linalg.norm(d) > bound:
        return None
    return d[None, :]


def lq_handle(lam, q):
    def subgrads(x, bound):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.all(x == 0.0):
            lim = bound
            out = [np.zeros_like(x)]
            for j in range(x.size):
                e = np.zeros_like(x)
                e[j] = lim
                out.extend([e, -e])
            return np.array(out)
        if np.any(x == 0.0):
            return None  # mixed support: steep directions dominate
        d = lam * q * np.sign(x) * np.abs(x) ** (q - 1.0)
        return None if np.linalg.norm(d) > bound else d[None, :]

    return ProxHandle(
        eval=lambda x: lam * float(np.sum(np.abs(x) ** q)),
        prox=lambda v, t: np.atleast_1d(prox_lq(v, t, lam, q)),
        tie_rule="ties between 0 and the interior stationary point go to 0",
        class_tag="restricted-prox-regular",
        subgradients=subgrads,
    )


def mcp_handle(gamma, lam):
    def eval_pen(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(sum(_kernels._mcp_penalty(abs(xi), gamma, lam) for xi in x))

    return ProxHandle(
        eval=eval_pen,
        prox=lambda v, t: np.atleast_1d(prox_mcp(v, t, gamma, lam)),
        tie_rule="ties go to the smaller magnitude",
        class_tag="restricted-prox-regular",
    )


def scad_handle(gamma, lam):
    def eval_pen(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(sum(_kernels._scad_penalty(abs(xi), gamma, lam) for xi in x))

    return ProxHandle(
        eval=eval_pen,
        prox=lambda v, t: np.atleast_1d(prox_scad(v, t, gamma, lam)),
        tie_rule="ties go to the smaller magnitude",
        class_tag="restricted-prox-regular",
    )


def piecewise_linear_handle(spec):
    return ProxHandle(
        eval=spec.eval,
        prox=lambda v, t: np.atleast_1d(prox_piecewise_linear(spec, v, t)),
        tie_rule="ties go to the lowest piece index",
        class_tag="piecewise-linear",
    )


def box_indicator_handle(lo, hi):
    def eval_ind(x):
        x = np.asarray(x, dtype=float)
        return 0.0 if np.all(x >= lo - 1e-12) and np.all(x <= hi + 1e-12) else np.inf

    return ProxHandle(
        eval=eval_ind,
        prox=lambda v, t: np.atleast_1d(proj_box(v, lo, hi)),
        tie_rule="unique minimizer",
        class_tag="lower-semicontinuous",
    )


def sphere_indicator_handle(feas_tol=1e-9):
    def subgrads(x, bound):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        scales = np.linspace(-bound, bound, 5) / max(np.linalg.norm(x), 1e-30)
        return np.array([s * x for s in scales])

    return ProxHandle(
        eval=lambda x: 0.0 if abs(np.linalg.norm(x) - 1.0) <= feas_tol else np.inf,
        prox=lambda v, t: proj_sphere(v),
        tie_rule="0 maps to the first basis vector",
        class_tag="restricted-prox-regular",
        subgradients=subgrads,
    )


def stiefel_indicator_handle(shape, feas_tol=1e-8):
    n, p = shape

    def eval_ind(x):
        M = np.asarray(x, dtype=float).reshape(n, p)
        return 0.0 if np.linalg.norm(M.T @ M - np.eye(p)) <= feas_tol else np.inf

    return ProxHandle(
        eval=eval_ind,
        prox=lambda v, t: proj_stiefel(np.asarray(v, dtype=float).reshape(n, p)).ravel(),
        tie_rule="SVD basis completion on rank deficiency",
        class_tag="restricted-prox-regular",
    )


def complementarity_indicator_handle(n, feas_tol=1e-9):
    def eval_ind(z):
        z = np.asarray(z, dtype=float)
        x, y = z[:n], z[n:]
        ok = np.all(x >= -feas_tol) and np.all(y >= -feas_tol) \
            and abs(float(x @ y)) <= feas_tol
        return 0.0 if ok else np.inf

    def prox(v, t):
        v = np.asarray(v, dtype=float)
        x, y = proj_complementarity(v[:n], v[n:])
        return np.concatenate([x, y])

    return ProxHandle(
        eval=eval_ind,
        prox=prox,
        tie_rule="pairwise ties take the x branch",
        class_tag="lower-semicontinuous",
    )


def schatten_q_handle(shape, lam, q):
    n, m = shape

    def eval_pen(x):
        M = np.asarray(x, dtype=float).reshape(n, m)
        s = np.linalg.svd(M, compute_uv=False)
        return lam * float(np.sum(s ** q))

    return ProxHandle(
        eval=eval_pen,
        prox=lambda v, t: prox_schatten_q(
            np.asarray(v, dtype=float).reshape(n, m), t, lam, q).ravel(),
        tie_rule="spectral ties follow the scalar lq rule (0 wins)",
        class_tag="restricted-prox-regular",
    )
