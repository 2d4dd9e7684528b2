"""Conservative and dissipative billiard steps, chart changes, exact differential.

The reflection condition is solved on the bracket ``(t2, t2*)``, on which the
defining function is strictly increasing with a single root, so a fixed-count
bisection plus a Newton polish is both fast and unconditionally safe.  All
operations are vectorized: scalars in, scalars out; arrays in, arrays out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ChartError, DomainError, SolveError
from .table import TWO_PI

ADM_TOL = 1e-12
_BISECT_ITERS = 48
_NEWTON_ITERS = 3


def det2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass
class LPartials:
    """Generating determinant ``L(t1, t2) = det(g(t1) - O, g(t2) - O)`` and partials."""

    l: np.ndarray
    l1: np.ndarray
    l2: np.ndarray
    l11: np.ndarray
    l12: np.ndarray
    l22: np.ndarray


def generating_partials(table, t1, t2):
    """Analytic ``L`` and its first and second partial derivatives."""
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    o = table.origin
    g1 = table.point(t1) - o
    g2 = table.point(t2) - o
    d1 = table.tangent(t1)
    d2 = table.tangent(t2)
    s1 = table.second(t1)
    s2 = table.second(t2)
    return LPartials(
        l=det2(g1, g2),
        l1=det2(d1, g2),
        l2=det2(g1, d2),
        l11=det2(s1, g2),
        l12=det2(d1, d2),
        l22=det2(g1, s2),
    )


def _shape_in(*vals):
    arrs = [np.asarray(v, dtype=float) for v in vals]
    shape = np.broadcast_shapes(*(a.shape for a in arrs))
    return [np.broadcast_to(a, shape).astype(float) for a in arrs], shape


def _shape_out(arr, shape):
    if shape == ():
        return float(arr)
    return arr


def normalize_corner(table, t1, t2):
    """Validate positive admissibility and return ``(t1, t2)`` with ``t2`` lifted.

    Admissible means the lifted second coordinate lies strictly between ``t1``
    and the opposite-tangent parameter ``t1*``.
    """
    (a1, a2), shape = _shape_in(t1, t2)
    gap = np.mod(a2 - a1, TWO_PI)
    gs = table.star_gap(a1)
    bad = (gap <= ADM_TOL) | (gap >= gs - ADM_TOL)
    if np.any(bad):
        raise ChartError("corner pair is not positive admissible")
    return a1, a1 + gap, shape


def _forward_root(table, lam, t1, t2):
    """Root of ``lam*L2(t1,t2) + L1(t2,u)`` for ``u`` in ``(t2, t2*)``.

    The function is negative at ``t2``, positive at ``t2*`` and strictly
    increasing in between, which makes the bracketed search exact.
    """
    o = table.origin
    g1 = table.point(t1) - o
    d2 = table.tangent(t2)
    c = lam * det2(g1, d2)

    lo = np.array(t2, dtype=float, copy=True)
    hi = t2 + table.star_gap(t2)

    def f(u):
        return c + det2(d2, table.point(u) - o)

    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        pos = f(mid) > 0.0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    u = 0.5 * (lo + hi)
    for _ in range(_NEWTON_ITERS):
        fu = f(u)
        fp = det2(d2, table.tangent(u))
        upd = np.where(np.abs(fp) > 1e-300, fu / np.where(fp == 0.0, 1.0, fp), 0.0)
        u = np.clip(u - upd, lo, hi)
    if not np.all(np.isfinite(u)):
        raise SolveError("forward root diverged")
    return u


def _check_lambda(lam, allow_one=True):
    lam = float(lam)
    top = 1.0 if allow_one else 1.0 - 1e-15
    if not (0.0 < lam <= top):
        raise DomainError(f"dissipation rate must be in (0, 1], got {lam}")
    return lam


def step_dissipative(table, lam, corner):
    """One dissipative step ``(t1, t2) -> (t2, t3)``.

    ``t3`` is where the line through the contracted point ``O + lam*(g(t1)-O)``
    parallel to the tangent at ``t2`` meets the boundary again; ``lam = 1``
    reproduces the conservative step exactly.
    """
    lam = _check_lambda(lam)
    t1, t2, shape = normalize_corner(table, *corner)
    t3 = _forward_root(table, lam, t1, t2)
    return _shape_out(t2, shape), _shape_out(t3, shape)


def step_conservative(table, corner):
    return step_dissipative(table, 1.0, corner)


def step_backward_conservative(table, corner):
    """Inverse conservative step ``(t2, t3) -> (t1, t2)`` (reversed chord)."""
    t2, t3, shape = normalize_corner(table, *corner)
    o = table.origin
    d2 = table.tangent(t2)
    c = det2(d2, table.point(t3) - o)

    lo = t2 + table.star_gap(t2) - TWO_PI
    hi = np.array(t2, dtype=float, copy=True)

    def f(u):
        return det2(table.point(u) - o, d2) + c

    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        pos = f(mid) > 0.0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    u = 0.5 * (lo + hi)
    for _ in range(_NEWTON_ITERS):
        fu = f(u)
        fp = det2(table.tangent(u), d2)
        u = np.clip(u - np.where(np.abs(fp) > 1e-300, fu / np.where(fp == 0.0, 1.0, fp), 0.0), lo, hi)
    return _shape_out(u, shape), _shape_out(t2, shape)


# -- charts --------------------------------------------------------------------


def phase_bounds(table, t):
    """Fiber bounds ``(psi1(t), psi2(t))`` of the twist chart, ``psi1 < 0 < psi2``."""
    t = np.asarray(t, dtype=float)
    o = table.origin
    d = table.tangent(t)
    psi2 = -det2(d, table.point(t) - o)
    psi1 = -det2(d, table.point(t + table.star_gap(t)) - o)
    return psi1, psi2


def to_twist(table, corner):
    """Corner chart to twist chart: ``s = -L1(t1, t2)``."""
    t1, t2, shape = normalize_corner(table, *corner)
    s = -det2(table.tangent(t1), table.point(t2) - table.origin)
    return _shape_out(t1, shape), _shape_out(s, shape)


def from_twist(table, t, s):
    """Twist chart back to the corner chart (monotone bracketed inversion)."""
    (t_a, s_a), shape = _shape_in(t, s)
    psi1, psi2 = phase_bounds(table, t_a)
    if np.any((s_a <= psi1 + ADM_TOL) | (s_a >= psi2 - ADM_TOL)):
        raise ChartError("twist coordinate s outside the fiber bounds")
    o = table.origin
    d1 = table.tangent(t_a)

    lo = np.array(t_a, copy=True)
    hi = t_a + table.star_gap(t_a)

    def q(u):
        # -L1(t, u) - s: positive at u = t, negative at u = t*, decreasing
        return -det2(d1, table.point(u) - o) - s_a

    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        neg = q(mid) < 0.0
        hi = np.where(neg, mid, hi)
        lo = np.where(neg, lo, mid)
    u = 0.5 * (lo + hi)
    for _ in range(_NEWTON_ITERS):
        qu = q(u)
        qp = -det2(d1, table.tangent(u))
        u = np.clip(u - np.where(np.abs(qp) > 1e-300, qu / np.where(qp == 0.0, 1.0, qp), 0.0), lo, hi)
    return _shape_out(np.array(t_a, copy=True), shape), _shape_out(u, shape)


def to_plot(table, corner):
    """Corner chart to the plotting chart ``(theta, psi = theta2 - theta1)``."""
    t1, t2, shape = normalize_corner(table, *corner)
    th1 = table.tangent_angle(t1)
    psi = table.tangent_angle(t2) - th1
    return _shape_out(th1, shape), _shape_out(psi, shape)


def from_plot(table, theta, psi):
    (th, ps), shape = _shape_in(theta, psi)
    if np.any((ps <= 0.0) | (ps >= math.pi)):
        raise ChartError("plot chart needs psi strictly inside (0, pi)")
    t1 = table.param_of_tangent_angle(th)
    t2 = table.param_of_tangent_angle(th + ps)
    return _shape_out(t1, shape), _shape_out(t2, shape)


def step_twist(table, lam, t, s):
    """One dissipative step expressed in the twist chart."""
    lam = _check_lambda(lam)
    t1, t2 = from_twist(table, t, s)
    t1a = np.asarray(t1, dtype=float)
    t2a = np.asarray(t2, dtype=float)
    _check_forward = _forward_root(table, lam, t1a, t2a)
    s_next = -det2(table.tangent(t2a), table.point(_check_forward) - table.origin)
    shape = t1a.shape
    return _shape_out(t2a, shape), _shape_out(s_next, shape)


# -- differential ----------------------------------------------------------------


@dataclass
class Jacobian2:
    """Differential of the dissipative step in the twist chart at one state."""

    matrix: np.ndarray  # (..., 2, 2)
    l11: np.ndarray
    l12: np.ndarray
    l22: np.ndarray

    @property
    def determinant(self):
        m = self.matrix
        return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def differential(table, lam, corner):
    """Exact 2x2 differential of the twist-chart step at the given corner state.

    ``matrix = -(1/L12) [[L11, 1], [lam*(L11*L22 - L12^2), lam*L22]]``; its
    determinant is ``lam`` identically.
    """
    lam = _check_lambda(lam)
    t1, t2, shape = normalize_corner(table, *corner)
    lp = generating_partials(table, t1, t2)
    if np.any(lp.l12 <= 0.0):
        raise ChartError("twist condition violated: L12 <= 0")
    inv = -1.0 / lp.l12
    m = np.empty(shape + (2, 2))
    m[..., 0, 0] = inv * lp.l11
    m[..., 0, 1] = inv
    m[..., 1, 0] = inv * lam * (lp.l11 * lp.l22 - lp.l12 * lp.l12)
    m[..., 1, 1] = inv * lam * lp.l22
    return Jacobian2(m, lp.l11, lp.l12, lp.l22)


# -- phase points -----------------------------------------------------------------


@dataclass
class PhasePoint:
    """A state in one of the three charts, with its unwrapped first coordinate."""

    chart: str  # "corner" | "twist" | "plot"
    x: float
    y: float
    lift: float = 0.0


def as_corner(table, point):
    if point.chart == "corner":
        return point.x, point.y
    if point.chart == "twist":
        return from_twist(table, point.x, point.y)
    if point.chart == "plot":
        return from_plot(table, point.x, point.y)
    raise ChartError(f"unknown chart {point.chart!r}")


def convert(table, point, chart):
    corner = as_corner(table, point)
    if chart == "corner":
        x, y = corner
    elif chart == "twist":
        x, y = to_twist(table, corner)
    elif chart == "plot":
        x, y = to_plot(table, corner)
    else:
        raise ChartError(f"unknown chart {chart!r}")
    return PhasePoint(chart, float(x), float(y), point.lift)
