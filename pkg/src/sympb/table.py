"""Strictly convex billiard tables given by trigonometric-polynomial boundaries.

Two representations are supported:

* ``support``: the boundary is described by its support function ``p(theta)``
  about the plane origin, with ``theta`` the tangent angle.  Requires the
  curvature radius ``p + p''`` to stay positive (regular parametrization).
* ``polar``: the boundary is ``r(u) (cos u, sin u)`` with ``u`` the polar
  angle.  Handles convex curves with isolated zero-curvature points, which
  the support representation cannot parametrize.

Both kinds evaluate position, tangent and acceleration analytically, so the
billiard dynamics downstream never touches finite differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import GeometryError, KindMismatch, SearchError

TWO_PI = 2.0 * math.pi

SUPPORT = "support"
POLAR = "polar"

# Root finding in the boundary parameter; curvature-zero detection.
PARAM_TOL = 1e-12
FLAT_TOL = 1e-9

_VALIDATION_SAMPLES = 4096


def _as_harmonics(harmonics):
    out = []
    seen = set()
    for item in harmonics:
        k, c, s = item
        k = int(k)
        c = float(c)
        s = float(s)
        if k < 0:
            raise GeometryError(f"harmonic index must be >= 0, got {k}")
        if k in seen:
            raise GeometryError(f"duplicate harmonic index {k}")
        if not (math.isfinite(c) and math.isfinite(s)):
            raise GeometryError("harmonic coefficients must be finite")
        seen.add(k)
        out.append((k, c, s))
    return tuple(sorted(out))


def harmonic_series(harmonics, theta):
    """Value and first three derivatives of ``sum_k c_k cos(k t) + s_k sin(k t)``.

    Vectorized over ``theta``; derivatives are exact (the second derivative of
    each mode is ``-k**2`` times the mode itself).
    """
    th = np.asarray(theta, dtype=float)
    f = np.zeros(th.shape)
    d1 = np.zeros(th.shape)
    d2 = np.zeros(th.shape)
    d3 = np.zeros(th.shape)
    for k, c, s in harmonics:
        ck = np.cos(k * th)
        sk = np.sin(k * th)
        v = c * ck + s * sk
        w = k * (s * ck - c * sk)
        f += v
        d1 += w
        d2 -= k * k * v
        d3 -= k * k * w
    return f, d1, d2, d3


@dataclass(frozen=True)
class TableSpec:
    """Harmonic description of a convex boundary.

    ``harmonics`` is a sequence of ``(k, cos_coeff, sin_coeff)``; the ``k = 0``
    cosine coefficient is the constant term.  ``origin_override`` places the
    reference origin of the dynamics somewhere other than ``(0, 0)``.
    """

    kind: str
    harmonics: tuple
    origin_override: tuple | None = None

    def __post_init__(self):
        if self.kind not in (SUPPORT, POLAR):
            raise GeometryError(f"unknown table kind {self.kind!r}")
        object.__setattr__(self, "harmonics", _as_harmonics(self.harmonics))
        if self.origin_override is not None:
            ox, oy = self.origin_override
            object.__setattr__(self, "origin_override", (float(ox), float(oy)))
        self._validate_geometry()

    # -- radial / support function -------------------------------------------------

    def radial(self, theta):
        """(f, f', f'', f''') of the defining function at ``theta``."""
        return harmonic_series(self.harmonics, theta)

    def _validate_geometry(self):
        th = np.linspace(0.0, TWO_PI, _VALIDATION_SAMPLES, endpoint=False)
        f, _, d2, _ = self.radial(th)
        if np.min(f) <= 1e-9:
            raise GeometryError(f"{self.kind} function must be strictly positive")
        if self.kind == SUPPORT:
            rho = f + d2
            if np.min(rho) <= 1e-9:
                raise GeometryError(
                    "support representation needs p + p'' > 0 everywhere "
                    f"(min {np.min(rho):.3e}); use the polar kind for flat points"
                )
        else:
            kappa = _polar_curvature(self, th)
            if np.min(kappa) < -FLAT_TOL:
                raise GeometryError(
                    f"polar boundary is nonconvex (min curvature {np.min(kappa):.3e})"
                )

    # -- symmetry ------------------------------------------------------------------

    def odd_part_size(self):
        """Largest coefficient among harmonics that break central symmetry.

        For the support kind the ``k = 1`` mode is a pure translation of the
        curve and does not count.
        """
        skip = {1} if self.kind == SUPPORT else set()
        sizes = [max(abs(c), abs(s)) for k, c, s in self.harmonics if k % 2 == 1 and k not in skip]
        return max(sizes, default=0.0)

    def translation_part(self):
        """Plane vector carried by the ``k = 1`` support mode (zero for polar)."""
        if self.kind != SUPPORT:
            return np.zeros(2)
        for k, c, s in self.harmonics:
            if k == 1:
                return np.array([c, s])
        return np.zeros(2)

    def recentered(self):
        """Same curve described about its central-symmetry candidate center."""
        if self.kind != SUPPORT:
            return self
        harms = tuple((k, c, s) for k, c, s in self.harmonics if k != 1)
        return TableSpec(SUPPORT, harms, self.origin_override)

    # -- JSON ------------------------------------------------------------------

    def to_dict(self):
        d = {
            "kind": self.kind,
            "harmonics": [{"k": k, "cos": c, "sin": s} for k, c, s in self.harmonics],
        }
        if self.origin_override is not None:
            d["origin"] = list(self.origin_override)
        return d

    @staticmethod
    def from_dict(d):
        kind = d.get("kind")
        if kind not in (SUPPORT, POLAR):
            raise GeometryError(f"table spec kind must be 'support' or 'polar', got {kind!r}")
        harms = [(h["k"], h.get("cos", 0.0), h.get("sin", 0.0)) for h in d["harmonics"]]
        origin = d.get("origin")
        return TableSpec(kind, tuple(harms), tuple(origin) if origin is not None else None)


def spec_from_json(text):
    return TableSpec.from_dict(json.loads(text))


def spec_to_json(spec):
    return json.dumps(spec.to_dict(), indent=2)


def eval_support(spec, theta):
    """``(p, p', p'', p''')`` of a support-kind spec; exact and 2*pi-periodic."""
    if spec.kind != SUPPORT:
        raise KindMismatch("eval_support needs a support-kind spec")
    return spec.radial(theta)


def _polar_curvature(spec, u):
    r, r1, r2, _ = spec.radial(u)
    return (r * r + 2.0 * r1 * r1 - r * r2) / (r * r + r1 * r1) ** 1.5


@dataclass
class ConvexityReport:
    convexity_class: str  # "strongly_convex" | "flat_points" | "invalid"
    min_curvature: float
    flat_points: list


class BilliardTable:
    """Immutable convex table; every query is pure and safe under concurrency.

    The boundary parameter is the tangent angle for support-kind tables and
    the polar angle for polar-kind tables.  ``origin`` is the reference point
    of the generating determinant and of the dissipative dynamics.
    """

    def __init__(self, spec, origin=None):
        self.spec = spec
        self.param_kind = "tangent_angle" if spec.kind == SUPPORT else "polar_angle"
        if origin is not None:
            self.origin = np.array(origin, dtype=float)
        elif spec.origin_override is not None:
            self.origin = np.array(spec.origin_override, dtype=float)
        else:
            self.origin = np.zeros(2)
        self.period = TWO_PI

        self.centrally_symmetric = spec.odd_part_size() == 0.0
        self.symmetry_center = spec.translation_part() if self.centrally_symmetric else None

        u = np.linspace(0.0, TWO_PI, _VALIDATION_SAMPLES, endpoint=False)
        speed = np.linalg.norm(self.tangent(u), axis=-1)
        self.perimeter = float(np.mean(speed) * TWO_PI)
        if np.min(speed) <= 1e-12:
            raise GeometryError("boundary parametrization is singular")
        if not self.contains(self.origin):
            raise GeometryError("origin must lie strictly inside the table")

    # -- boundary evaluation ------------------------------------------------------

    def point(self, t):
        t = np.asarray(t, dtype=float)
        if self.spec.kind == SUPPORT:
            p, p1, _, _ = self.spec.radial(t)
            st, ct = np.sin(t), np.cos(t)
            return np.stack([p * ct - p1 * st, p * st + p1 * ct], axis=-1)
        r, _, _, _ = self.spec.radial(t)
        return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)

    def tangent(self, t):
        t = np.asarray(t, dtype=float)
        if self.spec.kind == SUPPORT:
            p, _, p2, _ = self.spec.radial(t)
            rho = p + p2
            return np.stack([-rho * np.sin(t), rho * np.cos(t)], axis=-1)
        r, r1, _, _ = self.spec.radial(t)
        st, ct = np.sin(t), np.cos(t)
        return np.stack([r1 * ct - r * st, r1 * st + r * ct], axis=-1)

    def second(self, t):
        t = np.asarray(t, dtype=float)
        if self.spec.kind == SUPPORT:
            p, p1, p2, p3 = self.spec.radial(t)
            rho = p + p2
            a = p1 + p3
            st, ct = np.sin(t), np.cos(t)
            # gamma'' = a e_t + rho J e_t with e_t = (-sin t, cos t)
            return np.stack([-a * st - rho * ct, a * ct - rho * st], axis=-1)
        r, r1, r2, _ = self.spec.radial(t)
        st, ct = np.sin(t), np.cos(t)
        return np.stack([(r2 - r) * ct - 2 * r1 * st, (r2 - r) * st + 2 * r1 * ct], axis=-1)

    def curvature(self, t):
        """Signed curvature, positive for the counterclockwise convex boundary."""
        if self.spec.kind == SUPPORT:
            p, _, p2, _ = self.spec.radial(t)
            return 1.0 / (p + p2)
        return _polar_curvature(self.spec, t)

    def tangent_angle(self, t):
        """Lifted angle of the tangent direction against the vertical axis.

        Monotone in ``t`` and satisfying ``angle(t + 2*pi) = angle(t) + 2*pi``;
        the identity for support-kind tables.
        """
        t = np.asarray(t, dtype=float)
        if self.spec.kind == SUPPORT:
            return t.copy()
        r, r1, _, _ = self.spec.radial(t)
        return t - np.arctan2(r1, r)

    def param_of_tangent_angle(self, theta):
        """Inverse of :meth:`tangent_angle` (bisection on the monotone lift)."""
        theta = np.asarray(theta, dtype=float)
        if self.spec.kind == SUPPORT:
            return theta.copy()
        lo = theta - 0.5 * math.pi
        hi = theta + 0.5 * math.pi
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            high = self.tangent_angle(mid) > theta
            hi = np.where(high, mid, hi)
            lo = np.where(high, lo, mid)
        return 0.5 * (lo + hi)

    # -- derived geometry -----------------------------------------------------------

    def star(self, t):
        """Opposite-tangent parameter, returned as the lift in ``(t, t + 2*pi)``."""
        t = np.asarray(t, dtype=float)
        if self.spec.kind == SUPPORT or self.centrally_symmetric:
            return t + math.pi
        return self.param_of_tangent_angle(self.tangent_angle(t) + math.pi)

    def star_gap(self, t):
        """``star(t) - t``; constant pi except for non-symmetric polar tables."""
        t = np.asarray(t, dtype=float)
        if self.spec.kind == SUPPORT or self.centrally_symmetric:
            return np.full(t.shape, math.pi)
        return self.star(t) - t

    def contains(self, point):
        """Winding-number test for a strictly interior point."""
        u = np.linspace(0.0, TWO_PI, 720, endpoint=False)
        rel = self.point(u) - np.asarray(point, dtype=float)
        dist = np.linalg.norm(rel, axis=-1)
        if np.min(dist) <= 1e-12:
            return False
        ang = np.arctan2(rel[:, 1], rel[:, 0])
        d = np.diff(np.concatenate([ang, ang[:1]]))
        d = (d + math.pi) % TWO_PI - math.pi
        return abs(np.sum(d)) > math.pi

    def diameter(self):
        u = np.linspace(0.0, TWO_PI, 512, endpoint=False)
        pts = self.point(u)
        return float(np.linalg.norm(pts - pts[len(pts) // 2], axis=-1).max())


class AffineImage:
    """Orientation-preserving affine image ``A x + b`` of a base table.

    Keeps the base parametrization, so conservative orbit parameter sequences
    are shared with the base table.  Opposite-tangent parameters carry over
    unchanged because affine maps preserve tangent parallelism.
    """

    def __init__(self, base, matrix, offset=(0.0, 0.0)):
        self.base = base
        self.matrix = np.asarray(matrix, dtype=float)
        if self.matrix.shape != (2, 2) or np.linalg.det(self.matrix) <= 0.0:
            raise GeometryError("affine matrix must be 2x2 with positive determinant")
        self.offset = np.asarray(offset, dtype=float)
        self.spec = base.spec
        self.period = base.period
        self.origin = self.matrix @ base.origin + self.offset
        self.centrally_symmetric = base.centrally_symmetric
        if base.symmetry_center is not None:
            self.symmetry_center = self.matrix @ base.symmetry_center + self.offset
        else:
            self.symmetry_center = None
        u = np.linspace(0.0, TWO_PI, 1024, endpoint=False)
        self.perimeter = float(np.mean(np.linalg.norm(self.tangent(u), axis=-1)) * TWO_PI)

    def point(self, t):
        return self.base.point(t) @ self.matrix.T + self.offset

    def tangent(self, t):
        return self.base.tangent(t) @ self.matrix.T

    def second(self, t):
        return self.base.second(t) @ self.matrix.T

    def star(self, t):
        return self.base.star(t)

    def star_gap(self, t):
        return self.base.star_gap(t)

    def curvature(self, t):
        d = self.tangent(t)
        dd = self.second(t)
        num = d[..., 0] * dd[..., 1] - d[..., 1] * dd[..., 0]
        return num / np.linalg.norm(d, axis=-1) ** 3

    def tangent_angle(self, t):
        base_angle = self.base.tangent_angle(t)
        d = self.tangent(t)
        raw = np.arctan2(-d[..., 0], d[..., 1])
        # lift next to the base angle; valid while the affine distortion < pi
        return base_angle + np.mod(raw - base_angle + math.pi, TWO_PI) - math.pi

    def param_of_tangent_angle(self, theta):
        theta = np.asarray(theta, dtype=float)
        lo = theta - math.pi
        hi = theta + math.pi
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            high = self.tangent_angle(mid) > theta
            hi = np.where(high, mid, hi)
            lo = np.where(high, lo, mid)
        return 0.5 * (lo + hi)

    def contains(self, point):
        inv = np.linalg.inv(self.matrix)
        return self.base.contains(inv @ (np.asarray(point, dtype=float) - self.offset))

    def diameter(self):
        u = np.linspace(0.0, TWO_PI, 512, endpoint=False)
        pts = self.point(u)
        return float(np.linalg.norm(pts - pts[len(pts) // 2], axis=-1).max())


def convexity_report(table, samples=_VALIDATION_SAMPLES, tol=FLAT_TOL):
    """Dense curvature scan refined by local minimization.

    Flat points are curvature zeros within ``tol``; any refined minimum below
    ``-tol`` marks the boundary invalid.
    """
    u = np.linspace(0.0, TWO_PI, samples, endpoint=False)
    kappa = np.asarray(table.curvature(u))
    step = TWO_PI / samples

    flat = []
    min_kappa = float(np.min(kappa))
    # refine every local minimum of the sampled curvature
    local_min = (kappa <= np.roll(kappa, 1)) & (kappa <= np.roll(kappa, -1))
    for i in np.nonzero(local_min)[0]:
        res = minimize_scalar(
            lambda x: float(np.asarray(table.curvature(x))),
            bounds=(u[i] - step, u[i] + step),
            method="bounded",
            options={"xatol": 1e-13},
        )
        val = float(res.fun)
        min_kappa = min(min_kappa, val)
        if abs(val) <= tol:
            flat.append(res.x % TWO_PI)

    flat = sorted(flat)
    deduped = []
    for x in flat:
        if not deduped or min(abs(x - deduped[-1]), TWO_PI - abs(x - deduped[-1])) > 1e-6:
            deduped.append(float(x))

    if min_kappa < -tol:
        cls = "invalid"
    elif deduped:
        cls = "flat_points"
    else:
        cls = "strongly_convex"
    return ConvexityReport(cls, min_kappa, deduped)


def _chord_tangent_param(table, chord, near):
    """Parameter where the tangent is parallel and co-oriented with ``chord``."""
    theta_c = math.atan2(-chord[0], chord[1])  # tangent convention e = (-sin, cos)
    # two lifts of the two antiparallel candidates, pick by co-orientation
    cands = []
    for off in (0.0, math.pi):
        th = theta_c + off
        th += TWO_PI * round((near - th) / TWO_PI)
        cands.append(th)
    best = None
    for th in cands:
        t = float(np.asarray(table.param_of_tangent_angle(th)))
        tan = np.asarray(table.tangent(t))
        if float(tan @ chord) > 0.0:
            best = t
    if best is None:
        raise SearchError("no co-oriented tangent for chord")
    return best


def max_area_quadrilateral(table, sweeps=200, starts=8):
    """Inscribed quadrilateral of maximal area via monotone cyclic coordinate ascent.

    Each coordinate update places the vertex where the tangent is parallel to
    the chord joining its neighbors, which is the exact one-dimensional
    maximizer.  The converged vertices form a 4-periodic orbit of the
    conservative dynamics.
    """

    def area(ts):
        pts = table.point(np.asarray(ts))
        x, y = pts[:, 0], pts[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    best_ts, best_area = None, -np.inf
    for s in range(starts):
        base = TWO_PI * s / starts
        ts = [
            float(np.asarray(table.param_of_tangent_angle(base + j * 0.5 * math.pi)))
            for j in range(4)
        ]
        prev = area(ts)
        for _ in range(sweeps):
            for i in range(4):
                pts = table.point(np.asarray(ts))
                chord = pts[(i + 1) % 4] - pts[(i - 1) % 4]
                if np.linalg.norm(chord) < 1e-14:
                    continue
                ts[i] = _chord_tangent_param(table, chord, ts[i])
            cur = area(ts)
            if abs(cur - prev) < 1e-15 * max(1.0, abs(cur)):
                prev = cur
                break
            prev = cur
        if prev > best_area:
            best_area, best_ts = prev, [t % TWO_PI for t in ts]
    if best_ts is None or best_area <= 0.0:
        raise SearchError("area maximization failed")
    return best_ts, best_area


def _segment_intersection(a1, a2, b1, b2):
    d1 = a2 - a1
    d2 = b2 - b1
    mat = np.array([d1, -d2]).T
    det = np.linalg.det(mat)
    if abs(det) < 1e-14:
        raise SearchError("degenerate quadrilateral diagonals")
    st = np.linalg.solve(mat, b1 - a1)
    return a1 + st[0] * d1


def compatible_origin(table):
    """Origin choice keeping one conservative 4-periodic orbit on the zero section.

    For a centrally symmetric table this is the symmetry center; otherwise it
    is the diagonal intersection of the maximal-area inscribed quadrilateral.
    """
    if table.centrally_symmetric:
        return table.symmetry_center.copy()
    ts, _ = max_area_quadrilateral(table)
    pts = table.point(np.asarray(ts))
    origin = _segment_intersection(pts[0], pts[2], pts[1], pts[3])
    if not table.contains(origin):
        raise SearchError("computed origin is not interior")
    return origin


def load_table(path_or_dict, origin=None):
    """Build a table from a spec dict, JSON text, or a path to a JSON file."""
    if isinstance(path_or_dict, dict):
        spec = TableSpec.from_dict(path_or_dict)
    else:
        text = str(path_or_dict)
        if text.lstrip().startswith("{"):
            spec = spec_from_json(text)
        else:
            with open(text, "r", encoding="utf8") as fh:
                spec = TableSpec.from_dict(json.load(fh))
    return BilliardTable(spec, origin=origin)


def support_table(*harmonics, origin=None):
    """Shorthand: ``support_table((0, 1, 0), (2, 0, 0.125))``."""
    return BilliardTable(TableSpec(SUPPORT, tuple(harmonics)), origin=origin)


def polar_table(*harmonics, origin=None):
    return BilliardTable(TableSpec(POLAR, tuple(harmonics)), origin=origin)


def unit_circle():
    return support_table((0, 1.0, 0.0))
