"""4-periodic orbits of centrally symmetric tables and their stability under dissipation.

On a centrally symmetric table with the origin at the center, every
4-periodic orbit sits on the zero section of the twist chart, and its angles
solve a scalar equation in the support-function data.  Dissipation leaves the
orbit in place but changes its linear type, governed by one dimensionless
index (the product ``L11*L22 / L12^2`` along the orbit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import dynamics as dyn
from .errors import ChartError, ConsistencyError, DomainError, KindMismatch, SearchError
from .table import SUPPORT, TWO_PI, _chord_tangent_param, harmonic_series

PI = math.pi

SADDLE = "saddle"
PARABOLIC = "parabolic"
SINK_REAL_NODE = "sink_real_node"
SINK_FOCUS = "sink_focus"
SINK_DEGENERATE = "sink_degenerate"


@dataclass
class PeriodicOrbit4:
    theta1: float
    theta2: float
    residual: float
    quad_area: float

    def corner_cycle(self):
        """The four corner states of the orbit, with lifted second coordinates."""
        t1, t2 = self.theta1, self.theta2
        return [(t1, t2), (t2, t1 + PI), (t1 + PI, t2 + PI), (t2 + PI, t1 + TWO_PI)]

    def theta_set(self):
        return sorted(x % TWO_PI for x in (self.theta1, self.theta2, self.theta1 + PI, self.theta2 + PI))


@dataclass
class RadonFamily:
    """Flag returned when every zero-section point is 4-periodic (no isolated roots)."""

    max_residual: float


@dataclass
class StabilityReport:
    k12: float
    lam: float
    mu: tuple  # eigenvalues of the two-step differential, |mu[0]| <= |mu[1]|
    t4_multipliers: tuple  # eigenvalues of the four-step differential (mu squared)
    orbit_type: str
    lambda_minus: float | None = None


def _centered_harmonics(table):
    """Support harmonics about the symmetry center; rejects unsuitable tables."""
    if table.spec.kind != SUPPORT:
        raise KindMismatch("4-periodic angle analysis needs a support-kind table")
    if not table.centrally_symmetric:
        raise KindMismatch("4-periodic angle analysis needs a centrally symmetric table")
    if np.linalg.norm(table.origin - table.symmetry_center) > 1e-9:
        raise KindMismatch("origin must be the symmetry center for 4-periodic analysis")
    return tuple((k, c, s) for k, c, s in table.spec.harmonics if k != 1)


def support_ratio(table, theta):
    """``p'/p`` of the support function about the symmetry center."""
    harms = _centered_harmonics(table)
    p, p1, _, _ = harmonic_series(harms, theta)
    return p1 / p


def partner_angle(table, theta):
    """Second orbit angle forced by the zero-section condition at ``theta``."""
    return np.arctan(support_ratio(table, theta)) + 0.5 * PI + np.asarray(theta, dtype=float)


def four_periodic_residual(table, theta):
    """Scalar function whose zeros are the first angles of 4-periodic orbits.

    Pi-periodic for a pi-periodic support function.
    """
    q1 = support_ratio(table, theta)
    theta2 = np.arctan(q1) + 0.5 * PI + np.asarray(theta, dtype=float)
    return support_ratio(table, theta2) + q1


def _quad_area(table, thetas):
    pts = table.point(np.asarray(thetas))
    x, y = pts[..., 0], pts[..., 1]
    return 0.5 * float(abs(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)))


def _closure_error(table, theta1, theta2):
    a, b = float(theta1), float(theta2)
    for _ in range(4):
        a, b = dyn.step_conservative(table, (a, b))
    return max(abs(a - theta1 - TWO_PI), abs(b - theta2 - TWO_PI))


def find_four_periodic(table, scan=2048, closure_tol=1e-9):
    """All 4-periodic orbits from the sign changes of the angle equation.

    Returns a :class:`RadonFamily` flag when the residual vanishes identically
    (a continuum of orbits); otherwise a deduplicated orbit list.  Each orbit
    is validated by closing it under the conservative step.
    """
    grid = np.linspace(0.0, PI, scan, endpoint=False)
    g = np.asarray(four_periodic_residual(table, grid))
    q = np.asarray(support_ratio(table, grid))
    qscale = max(1.0, float(np.max(np.abs(q))))
    if float(np.max(np.abs(g))) < 1e-9 * qscale:
        return RadonFamily(float(np.max(np.abs(g))))

    func = lambda x: float(np.asarray(four_periodic_residual(table, x)))
    roots = []
    gg = np.concatenate([g, g[:1]])
    xs = np.concatenate([grid, [PI]])
    for i in range(scan):
        a, b = xs[i], xs[i + 1]
        fa, fb = gg[i], gg[i + 1]
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0.0:
            roots.append(brentq(func, a, b, xtol=1e-14, rtol=8.9e-16))

    def _mod_pi(x):
        y = x % PI
        return y - PI if y >= PI - 1e-9 else y

    orbits = []
    seen = []
    for root in roots:
        th2_raw = float(np.asarray(partner_angle(table, root)))
        # canonical representative: smallest orbit angle reduced mod pi
        th1 = min(_mod_pi(root), _mod_pi(th2_raw))
        th2 = float(np.asarray(partner_angle(table, th1)))
        sig = tuple(sorted((_mod_pi(th1), _mod_pi(th2))))
        if any(abs(sig[0] - s[0]) < 1e-6 and abs(sig[1] - s[1]) < 1e-6 for s in seen):
            continue
        err = _closure_error(table, th1, th2)
        if err > closure_tol:
            continue
        seen.append(sig)
        orbits.append(
            PeriodicOrbit4(
                theta1=th1,
                theta2=th2,
                residual=abs(func(th1)),
                quad_area=_quad_area(table, [th1, th2, th1 + PI, th2 + PI]),
            )
        )
    orbits.sort(key=lambda o: o.theta1)
    return orbits


def orbit_theta_set(orbits):
    """Union of all orbit angles mod 2*pi (the zero-section 4-periodic set)."""
    out = []
    for orb in orbits:
        out.extend(orb.theta_set())
    return sorted(out)


def stability_index(table, theta1, theta2):
    """Dimensionless index ``L11*L22 / L12^2`` at a validated 4-periodic pair.

    Evaluated both from the generating-determinant partials and from the
    closed support-function form; the two must agree, otherwise the input was
    not a 4-periodic pair.
    """
    harms = _centered_harmonics(table)
    p1v, d1, dd1, _ = harmonic_series(harms, theta1)
    p2v, d2, dd2, _ = harmonic_series(harms, theta2)
    rho1, rho2 = p1v + dd1, p2v + dd2
    k_support = float(
        (d1 * d1 + p1v * p1v) * (d2 * d2 + p2v * p2v) / (rho1 * rho2 * p1v * p2v)
    )

    lp = dyn.generating_partials(table, theta1, theta2)
    k_partials = float(lp.l11 * lp.l22 / (lp.l12 * lp.l12))

    if abs(k_support - k_partials) > 1e-6 * max(1.0, abs(k_support)):
        raise ConsistencyError(
            f"stability index mismatch ({k_support:.9g} vs {k_partials:.9g}); "
            "input is not a 4-periodic pair"
        )
    return k_support


def classify(k12, lam):
    """Linear type of a 4-periodic point of the dissipative map.

    Eigenvalues come from the characteristic polynomial of the two-step
    differential, ``x^2 - [(1+lam)^2 k12 - 2 lam] x + lam^2``; the four-step
    multipliers are their squares.
    """
    k12 = float(k12)
    lam = float(lam)
    if k12 <= 0.0:
        raise DomainError(f"stability index must be positive, got {k12}")
    if not (0.0 < lam < 1.0):
        raise DomainError(f"classification needs lam in (0, 1), got {lam}")

    tr = (1.0 + lam) ** 2 * k12 - 2.0 * lam
    disc = tr * tr - 4.0 * lam * lam
    scale = max(tr * tr, 4.0 * lam * lam, 1.0)
    if abs(disc) <= 1e-10 * scale:
        mu = (complex(0.5 * tr), complex(0.5 * tr))
    elif disc > 0.0:
        sq = math.sqrt(disc)
        lo, hi = 0.5 * (tr - sq), 0.5 * (tr + sq)
        mu = tuple(sorted((complex(lo), complex(hi)), key=abs))
    else:
        sq = math.sqrt(-disc)
        mu = (complex(0.5 * tr, -0.5 * sq), complex(0.5 * tr, 0.5 * sq))

    tol = 1e-12
    lam_minus = None
    if k12 > 1.0 + tol:
        kind = SADDLE
    elif k12 >= 1.0 - tol:
        kind = PARABOLIC
    else:
        root = math.sqrt(1.0 - k12)
        lam_minus = (1.0 - root) / (1.0 + root)
        flip = 2.0 * lam / (1.0 + lam) ** 2
        if lam < lam_minus - tol:
            kind = SINK_REAL_NODE
        elif lam <= lam_minus + tol or abs(k12 - flip) <= tol:
            kind = SINK_DEGENERATE
        else:
            kind = SINK_FOCUS

    t4 = (mu[0] * mu[0], mu[1] * mu[1])
    return StabilityReport(k12, lam, mu, t4, kind, lam_minus)


def classify_orbit(table, lam, orbit):
    return classify(stability_index(table, orbit.theta1, orbit.theta2), lam)


def four_step_differential(table, lam, orbit):
    """Product of the four twist-chart differentials along the orbit."""
    m = np.eye(2)
    for corner in orbit.corner_cycle():
        m = dyn.differential(table, lam, corner).matrix @ m
    return m


@dataclass
class ManifoldSample:
    branches: list  # two (m, 2) arrays in the twist chart
    arc_length: float
    iterations: int


def four_step_map(table, lam, pts):
    """Apply the dissipative step four times to twist-chart points (m, 2)."""
    t, s = pts[:, 0], pts[:, 1]
    for _ in range(4):
        t, s = dyn.step_twist(table, lam, t, s)
    return np.stack([np.asarray(t), np.asarray(s)], axis=-1)


def unstable_manifold_sample(
    table,
    lam,
    orbit,
    arc_budget,
    max_iters=50,
    chord_tol=1e-4,
    seed_offset=1e-7,
    seed_points=96,
    max_level_points=4096,
):
    """Polyline sample of the unstable manifold of a saddle 4-periodic point.

    A fundamental segment at distance ``seed_offset`` along the unstable
    eigenvector is pushed forward by the four-step map; levels are refined
    where image chords exceed ``chord_tol``.  Growth stops at ``arc_budget``
    total arc length, after ``max_iters`` levels, or on leaving the chart.
    """
    report = classify_orbit(table, lam, orbit)
    if report.orbit_type != SADDLE:
        raise TypeError(f"unstable manifold needs a saddle orbit, got {report.orbit_type}")

    m4 = four_step_differential(table, lam, orbit)
    evals, evecs = np.linalg.eig(m4)
    iu = int(np.argmax(np.abs(evals)))
    mu_u = float(np.real(evals[iu]))
    v = np.real(evecs[:, iu])
    v = v / np.linalg.norm(v)
    fp = np.array([orbit.theta1, 0.0])

    branches = []
    total_arc = 0.0
    iterations = 0
    for sign in (1.0, -1.0):
        ms = np.geomspace(1.0, mu_u, seed_points)
        seg = fp[None, :] + sign * seed_offset * ms[:, None] * v[None, :]
        poly = [seg]
        arc = float(np.sum(np.linalg.norm(np.diff(seg, axis=0), axis=-1)))
        level = seg
        for k in range(max_iters):
            try:
                nxt = four_step_map(table, lam, level)
                guard = 0
                while guard < 8 and len(level) < max_level_points:
                    gaps = np.linalg.norm(np.diff(nxt, axis=0), axis=-1)
                    bad = np.nonzero(gaps > chord_tol)[0]
                    if bad.size == 0:
                        break
                    mids = 0.5 * (level[bad] + level[bad + 1])
                    level = np.insert(level, bad + 1, mids, axis=0)
                    nxt = four_step_map(table, lam, level)
                    guard += 1
            except ChartError:
                break
            poly.append(nxt)
            arc += float(np.sum(np.linalg.norm(np.diff(nxt, axis=0), axis=-1)))
            level = nxt
            iterations = max(iterations, k + 1)
            if arc >= arc_budget:
                break
        pts = np.concatenate(poly, axis=0)
        pts[:, 0] = np.mod(pts[:, 0], TWO_PI)
        branches.append(pts)
        total_arc += arc
    return ManifoldSample(branches, total_arc, iterations)


def birkhoff_orbit(table, p, q, sweeps=400, starts=6):
    """Action-maximizing (p, q) periodic orbit by monotone cyclic coordinate ascent.

    Maximizes the cyclic sum of generating determinants; each coordinate
    update places a point where the tangent is parallel to the chord joining
    its neighbors.  Returns the orbit parameters and the closure residual.
    """
    if q < 3 or p < 1 or math.gcd(p, q) != 1:
        raise DomainError("need coprime p >= 1, q >= 3")

    def action(ts):
        pts = table.point(np.asarray(ts))
        rel = pts - table.origin
        nxt = np.roll(rel, -1, axis=0)
        return float(np.sum(rel[:, 0] * nxt[:, 1] - rel[:, 1] * nxt[:, 0]))

    best = None
    best_action = -np.inf
    for s0 in range(starts):
        base = TWO_PI * s0 / (starts * q)
        ts = [
            float(np.asarray(table.param_of_tangent_angle(base + TWO_PI * p * j / q)))
            for j in range(q)
        ]
        prev = action(ts)
        for _ in range(sweeps):
            for i in range(q):
                pts = table.point(np.asarray(ts))
                chord = pts[(i + 1) % q] - pts[(i - 1) % q]
                if np.linalg.norm(chord) < 1e-14:
                    continue
                ts[i] = _chord_tangent_param(table, chord, ts[i])
            cur = action(ts)
            if abs(cur - prev) < 1e-14 * max(1.0, abs(cur)):
                prev = cur
                break
            prev = cur
        if prev > best_action:
            best_action, best = prev, [t % TWO_PI for t in ts]
    if best is None:
        raise SearchError("coordinate ascent failed")

    # closure residual under the conservative step
    order = np.argsort(best)
    seq = [best[order[(0 + k * p) % q]] for k in range(q)]  # visit order with winding p
    a, b = seq[0], seq[1]
    for _ in range(q):
        a, b = dyn.step_conservative(table, (a, b))
    residual = abs((a - seq[0]) % TWO_PI)
    residual = min(residual, TWO_PI - residual)
    return best, best_action, residual
