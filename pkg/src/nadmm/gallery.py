"""Closed-form oracles and runnable instances for the shipped benchmark
cases: the box-quadratic example where the splitting engine finitely
converges while joint-minimization dual ascent oscillates, the two
image-condition failure cases, the nonsmooth-last-block cycle, and the
update-order sensitivity example."""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (BlockSpec, CouplingHandle, State, UpdateOrder,
                   build_problem)
from .errors import InvalidBeta, UnknownCase
from .prox import ProxHandle, l1_handle
from .subsolvers import QuadraticHandle

__all__ = [
    "GalleryCase",
    "prop1_admm_oracle", "prop1_alm_oracle",
    "prop1_duality_gap", "prop1_duality_gap_numeric",
    "prop1_admm_case", "prop1_alm_case",
    "neg_abs_cycle_case", "order_alternation_case",
    "chen_divergence_case", "lipong_example7_case", "abs_shift_case",
    "get_case", "CASE_NAMES",
]


@dataclass
class GalleryCase:
    """A runnable benchmark case.  ``oracle(K)`` (when present) generates the
    closed-form iterates the engine must reproduce; ``kind`` distinguishes
    engine-driven cases from the oracle-only dual-ascent recursion."""

    name: str
    problem: object
    beta: float
    start: Optional[State]
    oracle: Optional[Callable[[int], list]]
    expected_behavior: str
    violated_assumption: str = "none"
    order: Optional[UpdateOrder] = None
    kind: str = "engine+oracle"
    notes: str = ""


# ---------------------------------------------------------------------------
# box-quadratic example: engine converges finitely, dual ascent oscillates
# ---------------------------------------------------------------------------

def _box_square_handle():
    # x^2 restricted to [-1, 1]: the prox is the clipped scaled point.
    return ProxHandle(
        eval=lambda x: float(x[0] ** 2) if abs(x[0]) <= 1 + 1e-12 else np.inf,
        prox=lambda v, t: np.atleast_1d(np.clip(np.asarray(v) / (1 + 2 * t), -1.0, 1.0)),
        tie_rule="unique minimizer",
        class_tag="lower-semicontinuous",
    )


def prop1_problem():
    """min x^2 - y^2  s.t.  x = y, x in [-1, 1]."""
    return build_problem(
        blocks_x=[BlockSpec(1, _box_square_handle())],
        block_y=BlockSpec(1),
        A=[np.array([[1.0]])],
        B=np.array([[-1.0]]),
        h=QuadraticHandle(np.array([[-2.0]]), np.zeros(1)),
    )


def prop1_admm_oracle(beta_a, y0, w0, K):
    """Closed-form engine iterates for the box-quadratic case in the doubled
    penalty convention (quadratic weight beta_a, dual step 2 beta_a):

        x+ = clip(beta/(beta+1) (y - w/(2 beta)))
        y+ = beta/(beta-1) (x+ + w/(2 beta))
        w+ = w + 2 beta (x+ - y+)

    After the first iteration the iterates keep w = -2y; this is verified on
    every generated iterate.  The engine reproduces the sequence at penalty
    2*beta_a.
    """
    if beta_a <= 1:
        raise InvalidBeta("need beta_a > 1")
    b = float(beta_a)
    y, w = float(y0), float(w0)
    out = []
    for k in range(K):
        x = min(1.0, max(-1.0, b / (b + 1.0) * (y - w / (2.0 * b))))
        y = b / (b - 1.0) * (x + w / (2.0 * b))
        w = w + 2.0 * b * (x - y)
        if abs(w + 2.0 * y) > 1e-9 * max(1.0, abs(w)):
            raise AssertionError("oracle invariant w = -2y violated")
        out.append((x, y, w))
    return out


def prop1_alm_oracle(beta, tau, w0, K):
    """Dual iterates of joint minimization + dual ascent on the
    box-quadratic case:

        w+ = (1 - tau/(2(beta-1))) w -+ tau/(beta-1)

    with the '-' branch for w >= 0 and '+' for w <= 0.  At w = 0 the inner
    minimization has two minimizers; branches alternate deterministically
    starting with the '-' branch.
    """
    if beta <= 1:
        raise InvalidBeta("need beta > 1")
    w = float(w0)
    decay = 1.0 - tau / (2.0 * (beta - 1.0))
    kick = tau / (beta - 1.0)
    out = []
    tie_minus = True
    for k in range(K):
        if w > 0:
            w = decay * w - kick
        elif w < 0:
            w = decay * w + kick
        else:
            w = -kick if tie_minus else kick
            tie_minus = not tie_minus
        out.append(w)
    return out


def prop1_duality_gap(beta):
    """Saddle-value gap of the box-quadratic model at penalty weight beta:
    the inner infimum attains -1/(beta-1) while the outer value is 0."""
    if beta <= 1:
        raise InvalidBeta("need beta > 1")
    return -1.0 / (beta - 1.0)


def prop1_duality_gap_numeric(beta, span=10.0, step=1e-3):
    """Grid evaluation of sup_w inf_{x in [-1,1], t} of the penalized form
    (w + 2x) t + (beta-1) t^2: the t-infimum is the quadratic vertex value
    and the x-infimum is attained at an interval endpoint."""
    if beta <= 1:
        raise InvalidBeta("need beta > 1")
    n = int(round(span / step))
    w = np.arange(-n, n + 1, dtype=float) * step
    inner = -np.maximum((w - 2.0) ** 2, (w + 2.0) ** 2) / (4.0 * (beta - 1.0))
    return float(inner.max())


def prop1_admm_case(beta_a=4.0, y0=0.5, w0=None):
    if w0 is None:
        w0 = -2.0 * y0
    P = prop1_problem()
    start = State(x=[np.zeros(1)], y=np.array([float(y0)]),
                  w=np.array([float(w0)]), beta=2.0 * float(beta_a))
    return GalleryCase(
        name="prop1-admm", problem=P, beta=2.0 * float(beta_a), start=start,
        oracle=lambda K: prop1_admm_oracle(beta_a, y0, w0, K),
        expected_behavior="finite-convergence",
        notes="engine penalty is twice the oracle's quadratic weight",
    )


def prop1_alm_case(beta=2.0, tau=0.5, w0=0.1):
    return GalleryCase(
        name="prop1-alm", problem=prop1_problem(), beta=float(beta), start=None,
        oracle=lambda K: prop1_alm_oracle(beta, tau, w0, K),
        expected_behavior="divergence", kind="oracle-only",
        notes=f"dual-ascent recursion, tau={tau}, w0={w0}",
    )


# ---------------------------------------------------------------------------
# nonsmooth last block: a period-2 cycle
# ---------------------------------------------------------------------------

def _neg_abs_box_handle():
    # -|x| on [-1, 1]: concave, so the prox compares the two shifted branches.
    def prox(v, t):
        v = float(np.asarray(v).ravel()[0])
        up = min(1.0, max(0.0, v + t))
        dn = min(0.0, max(-1.0, v - t))
        obj_up = -abs(up) + (up - v) ** 2 / (2 * t)
        obj_dn = -abs(dn) + (dn - v) ** 2 / (2 * t)
        # tie rule: the nonnegative branch wins
        return np.array([up if obj_up <= obj_dn else dn])

    return ProxHandle(
        eval=lambda x: -abs(float(x[0])) if abs(x[0]) <= 1 + 1e-12 else np.inf,
        prox=prox,
        tie_rule="ties take the nonnegative branch",
        class_tag="lower-semicontinuous",
    )


def neg_abs_cycle_case(beta=2.0):
    """min -|x| + |y|  s.t.  x = y, x in [-1, 1]: from (-2/beta, 0, -1) the
    engine cycles with period 2 between (2/beta, 0, 1) and (-2/beta, 0, -1)."""
    P = build_problem(
        blocks_x=[BlockSpec(1, _neg_abs_box_handle())],
        block_y=BlockSpec(1, l1_handle(1.0)),
        A=[np.array([[1.0]])],
        B=np.array([[-1.0]]),
    )
    start = State(x=[np.array([-2.0 / beta])], y=np.zeros(1),
                  w=np.array([-1.0]), beta=float(beta))

    def oracle(K):
        hi = (2.0 / beta, 0.0, 1.0)
        lo = (-2.0 / beta, 0.0, -1.0)
        return [hi if k % 2 == 0 else lo for k in range(K)]

    return GalleryCase(
        name="neg-abs", problem=P, beta=float(beta), start=start,
        oracle=oracle, expected_behavior="cycle(2)", violated_assumption="A5",
    )


# ---------------------------------------------------------------------------
# update-order sensitivity
# ---------------------------------------------------------------------------

def _bilinear_coupling():
    # phi(x, y) = x (1 + y): linear in each block separately.
    return CouplingHandle(
        value=lambda xs, y: float(xs[0][0] * (1.0 + y[0])),
        grad_block=lambda key, xs, y: (np.array([1.0 + y[0]]) if key == 0
                                       else np.array([xs[0][0]])),
        lipschitz=1.0,
        block_hessians={0: np.zeros((1, 1)), "y": np.zeros((1, 1))},
    )


def order_alt_problem():
    """min x (1 + y)  s.t.  x - y = 0."""
    return build_problem(
        blocks_x=[BlockSpec(1)],
        block_y=BlockSpec(1),
        A=[np.array([[1.0]])],
        B=np.array([[-1.0]]),
        g=_bilinear_coupling(),
    )


def order_alternation_case(beta=4.0):
    """Alternating the update order between (y, x) and (x, y) produces a
    two-point oscillation: with a = 1/beta the iterates alternate between
    (2a(a-1), -a, a-1) and (-a, 2a(a-1), -a).  A fixed order converges."""
    if beta <= 1:
        raise InvalidBeta("need beta > 1")
    a = 1.0 / beta
    P = order_alt_problem()
    start = State(x=[np.array([-a])], y=np.array([2 * a * (a - 1)]),
                  w=np.array([-a]), beta=float(beta))
    order = UpdateOrder.explicit([("y", 0), (0, "y")], unsafe=True)

    def oracle(K):
        odd = (2 * a * (a - 1), -a, a - 1)
        even = (-a, 2 * a * (a - 1), -a)
        return [odd if k % 2 == 0 else even for k in range(K)]

    return GalleryCase(
        name="order-alt", problem=P, beta=float(beta), start=start,
        oracle=oracle, expected_behavior="order-sensitive",
        violated_assumption="update-order", order=order,
        notes="at beta=2 the two printed points coincide at (-1/2,-1/2,-1/2)",
    )


# ---------------------------------------------------------------------------
# image-condition failures
# ---------------------------------------------------------------------------

def _zero_quadratic(dim):
    return QuadraticHandle(np.zeros((dim, dim)), np.zeros(dim))


def chen_divergence_case(beta=1.0):
    """Three 1-D blocks with zero objective and coupling columns (1,1,1),
    (1,1,2), (1,2,2): the image condition fails and the residual never
    decays."""
    P = build_problem(
        blocks_x=[BlockSpec(1), BlockSpec(1)],
        block_y=BlockSpec(1),
        A=[np.array([[1.0], [1.0], [1.0]]), np.array([[1.0], [1.0], [2.0]])],
        B=np.array([[1.0], [2.0], [2.0]]),
        h=_zero_quadratic(1),
    )
    start = State(x=[np.ones(1), np.ones(1)], y=np.ones(1),
                  w=np.zeros(3), beta=float(beta))
    return GalleryCase(
        name="chen", problem=P, beta=float(beta), start=start, oracle=None,
        expected_behavior="divergence", violated_assumption="A2",
        kind="engine-only",
    )


def _line_handle():
    def prox(v, t):
        v = np.asarray(v, dtype=float).copy()
        v[1] = 0.0
        return v

    return ProxHandle(
        eval=lambda x: 0.0 if abs(x[1]) <= 1e-12 else np.inf,
        prox=prox, tie_rule="unique minimizer",
        class_tag="lower-semicontinuous",
    )


def _three_point_handle():
    points = np.array([[0.0, 0.0], [2.0, 1.0], [2.0, -1.0]])

    def prox(v, t):
        v = np.asarray(v, dtype=float)
        d = np.sum((points - v) ** 2, axis=1)
        return points[int(np.argmin(d))].copy()   # argmin takes the lowest index

    return ProxHandle(
        eval=lambda x: 0.0 if np.min(np.sum((points - x) ** 2, axis=1)) <= 1e-18
        else np.inf,
        prox=prox, tie_rule="ties take the lowest point index",
        class_tag="lower-semicontinuous",
    )


def lipong_example7_case(beta=1.0):
    """Two set-indicator blocks both pinned to the same y: the stacked
    coupling matrix has image strictly larger than B's, so the image
    condition fails."""
    I2 = np.eye(2)
    Z2 = np.zeros((2, 2))
    P = build_problem(
        blocks_x=[BlockSpec(2, _line_handle()), BlockSpec(2, _three_point_handle())],
        block_y=BlockSpec(2),
        A=[np.vstack([I2, Z2]), np.vstack([Z2, I2])],
        B=np.vstack([-I2, -I2]),
        h=_zero_quadratic(2),
    )
    start = State(x=[np.array([1.0, 0.0]), np.array([2.0, 1.0])],
                  y=np.array([1.0, 0.5]), w=np.zeros(4), beta=float(beta))
    return GalleryCase(
        name="li-pong", problem=P, beta=float(beta), start=start, oracle=None,
        expected_behavior="divergence", violated_assumption="A2",
        kind="engine-only",
        notes="only the image-condition violation is asserted",
    )


# ---------------------------------------------------------------------------
# second order-sensitivity example (no printed iterates)
# ---------------------------------------------------------------------------

def _shifted_abs_handle(weight, center):
    return ProxHandle(
        eval=lambda x: weight * abs(float(x[0]) - center),
        prox=lambda v, t: np.atleast_1d(
            center + np.sign(np.asarray(v) - center)
            * np.maximum(np.abs(np.asarray(v) - center) - weight * t, 0.0)),
        tie_rule="unique minimizer",
        class_tag="piecewise-linear",
    )


def abs_shift_case(beta=4.0):
    """min 2|x - 1| + |y|  s.t.  x = y: runnable order-sensitivity case
    without a closed-form iterate oracle."""
    P = build_problem(
        blocks_x=[BlockSpec(1, _shifted_abs_handle(2.0, 1.0))],
        block_y=BlockSpec(1, l1_handle(1.0)),
        A=[np.array([[1.0]])],
        B=np.array([[-1.0]]),
    )
    start = State(x=[np.zeros(1)], y=np.zeros(1), w=np.zeros(1),
                  beta=float(beta))
    return GalleryCase(
        name="abs-shift", problem=P, beta=float(beta), start=start,
        oracle=None, expected_behavior="order-sensitive",
        violated_assumption="update-order", kind="engine-only",
    )


_BUILDERS = {
    "prop1-admm": lambda beta=None: prop1_admm_case(beta_a=(beta or 8.0) / 2.0),
    "prop1-alm": lambda beta=None: prop1_alm_case(beta=beta or 2.0),
    "neg-abs": lambda beta=None: neg_abs_cycle_case(beta=beta or 2.0),
    "order-alt": lambda beta=None: order_alternation_case(beta=beta or 4.0),
    "chen": lambda beta=None: chen_divergence_case(beta=beta or 1.0),
    "li-pong": lambda beta=None: lipong_example7_case(beta=beta or 1.0),
    "abs-shift": lambda beta=None: abs_shift_case(beta=beta or 4.0),
}

CASE_NAMES = tuple(_BUILDERS)


def get_case(name, beta=None):
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise UnknownCase(f"unknown gallery case {name!r}; "
                          f"known: {', '.join(CASE_NAMES)}") from None
    return builder(beta)
