"""Attractor approximation: orbit clouds, normally contracted graphs, rotation intervals.

The strong-dissipation attractor is computed as the fixed point of the graph
transform acting on circle graphs in the twist chart; the transform is gated
by an explicit cone-field contraction check.  In the mild-dissipation regime
only orbit clouds are produced, together with empirical complexity
certificates (a non-graph witness pair and the rotation-interval spread).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from . import dynamics as dyn
from .errors import ChartError, ConfigError, DomainError, NotContracted
from .table import TWO_PI

_GRID_T = 192
_GRID_S = 9


# -- orbit clouds ------------------------------------------------------------------


@dataclass
class AttractorCloud:
    """Post-transient orbit points of a batch of seeds, plus lift bookkeeping."""

    lam: float
    n: int
    n0: int
    theta: np.ndarray
    psi: np.ndarray
    s: np.ndarray
    lift: np.ndarray
    seed_id: np.ndarray
    iterate_index: np.ndarray
    lifts: np.ndarray  # (n_seeds, n + 1) unwrapped first coordinates
    terminated: np.ndarray
    seeds: np.ndarray
    table: object
    table_id: str


def iterate_cloud(table, lam, seeds, n, n0):
    """Iterate the dissipative map over plot-chart seeds, keeping iterates past ``n0``.

    Deterministic given the seed list.  Orbits that numerically reach the
    chart boundary are frozen and flagged in ``terminated``.
    """
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    if seeds.size == 0:
        raise ConfigError("empty seed list")
    if not (0.0 < lam <= 1.0):
        raise DomainError(f"dissipation rate must be in (0, 1], got {lam}")
    if not (n > n0 >= 0):
        raise ConfigError(f"need n > n0 >= 0, got n={n}, n0={n0}")

    nseeds = seeds.shape[0]
    t1, t2 = dyn.from_plot(table, seeds[:, 0], seeds[:, 1])
    a = np.mod(np.asarray(t1, dtype=float), TWO_PI)
    gap = np.asarray(t2, dtype=float) - np.asarray(t1, dtype=float)

    lift = np.asarray(t1, dtype=float).copy()
    lifts = np.empty((nseeds, n + 1))
    lifts[:, 0] = lift
    active = np.ones(nseeds, dtype=bool)

    rec_theta, rec_psi, rec_s, rec_lift, rec_seed, rec_iter = [], [], [], [], [], []
    origin = table.origin
    for k in range(1, n + 1):
        if np.any(active):
            ia = np.nonzero(active)[0]
            aa, ga = a[ia], gap[ia]
            t2l, t3l = dyn.step_dissipative(table, lam, (aa, aa + ga))
            newgap = np.asarray(t3l) - np.asarray(t2l)
            gs = table.star_gap(np.asarray(t2l))
            dead = (newgap <= 1e-9) | (newgap >= gs - 1e-9)
            lift[ia] += ga
            a[ia] = np.mod(np.asarray(t2l), TWO_PI)
            gap[ia] = newgap
            if np.any(dead):
                active[ia[dead]] = False
        lifts[:, k] = lift

        if k > n0 and np.any(active):
            ia = np.nonzero(active)[0]
            th1 = table.tangent_angle(a[ia])
            th2 = table.tangent_angle(a[ia] + gap[ia])
            sval = -dyn.det2(table.tangent(a[ia]), table.point(a[ia] + gap[ia]) - origin)
            rec_theta.append(np.mod(th1, TWO_PI))
            rec_psi.append(th2 - th1)
            rec_s.append(sval)
            rec_lift.append(lift[ia].copy())
            rec_seed.append(ia)
            rec_iter.append(np.full(ia.size, k))

    def _cat(parts, dtype=float):
        return np.concatenate(parts) if parts else np.empty(0, dtype=dtype)

    return AttractorCloud(
        lam=float(lam),
        n=int(n),
        n0=int(n0),
        theta=_cat(rec_theta),
        psi=_cat(rec_psi),
        s=_cat(rec_s),
        lift=_cat(rec_lift),
        seed_id=_cat(rec_seed, dtype=int).astype(int),
        iterate_index=_cat(rec_iter, dtype=int).astype(int),
        lifts=lifts,
        terminated=~active,
        seeds=seeds,
        table=table,
        table_id=f"{table.spec.kind}:{table.spec.harmonics}",
    )


@dataclass
class RotationInterval:
    rho_minus: float
    rho_plus: float
    n_used: int
    per_seed: np.ndarray


def rotation_interval(cloud):
    """Min/max of tail-windowed rotation averages over the cloud's seeds.

    The window is the last half of the post-transient iterates; averages are
    lift advances per step in revolutions.
    """
    span = cloud.n - cloud.n0
    if span < 1000:
        raise ConfigError(f"need at least 1000 post-transient iterates, got {span}")
    w = span // 2
    keep = ~cloud.terminated
    if not np.any(keep):
        raise ConfigError("all orbits terminated before the averaging window")
    adv = (cloud.lifts[keep, cloud.n] - cloud.lifts[keep, cloud.n - w]) / (TWO_PI * w)
    return RotationInterval(float(np.min(adv)), float(np.max(adv)), w, adv)


def non_graph_witness(cloud, theta_bin_width, s_gap):
    """Two cloud points sharing a theta bin with a large s separation, if any.

    An empirical certificate that the sampled attractor is not a graph over
    the circle; returns ``None`` when every bin is s-thin.
    """
    if cloud.s.size == 0:
        return None
    smax = float(np.max(np.abs(cloud.s)))
    if smax == 0.0:
        return None
    nbins = int(math.ceil(TWO_PI / theta_bin_width))
    bins = np.minimum((cloud.theta / theta_bin_width).astype(int), nbins - 1)
    bmin = np.full(nbins, np.inf)
    bmax = np.full(nbins, -np.inf)
    np.minimum.at(bmin, bins, cloud.s)
    np.maximum.at(bmax, bins, cloud.s)
    spread = bmax - bmin
    j = int(np.nanargmax(np.where(np.isfinite(spread), spread, -np.inf)))
    if spread[j] < s_gap * smax:
        return None
    mask = bins == j
    idx = np.nonzero(mask)[0]
    ilo = idx[np.argmin(cloud.s[idx])]
    ihi = idx[np.argmax(cloud.s[idx])]

    def _point(i):
        return {
            "theta": float(cloud.theta[i]),
            "psi": float(cloud.psi[i]),
            "s": float(cloud.s[i]),
            "seed_id": int(cloud.seed_id[i]),
            "iterate_index": int(cloud.iterate_index[i]),
        }

    return _point(ilo), _point(ihi)


# -- cone field --------------------------------------------------------------------


def band_bound(table, samples=1024):
    """Sup of |s| over the twist chart (the fiber-band constant of the table)."""
    t = np.linspace(0.0, TWO_PI, samples, endpoint=False)
    psi1, psi2 = dyn.phase_bounds(table, t)
    return float(max(np.max(np.abs(psi1)), np.max(np.abs(psi2))))


def _band_states(table, band_m, grid_t=_GRID_T, grid_s=_GRID_S):
    t = np.linspace(0.0, TWO_PI, grid_t, endpoint=False)
    psi1, psi2 = dyn.phase_bounds(table, t)
    rows_t, rows_s = [], []
    for sigma in np.linspace(-1.0, 1.0, grid_s):
        s = np.clip(sigma * band_m, 0.98 * psi1, 0.98 * psi2)
        rows_t.append(t)
        rows_s.append(s)
    return np.concatenate(rows_t), np.concatenate(rows_s)


@dataclass
class ConeFieldResult:
    passed: bool
    worst_slope: float
    slope_limit: float
    alpha: float
    band_m: float
    fail_point: tuple | None = None


def cone_check(table, lam, alpha, band_m, grid_t=_GRID_T, grid_s=_GRID_S, mu0=0.9):
    """Check that the differential maps the slope-``alpha`` cone strictly inside itself.

    Edge vectors ``(1, +-alpha)`` are pushed through the exact differential on
    a band grid; the image slopes must not exceed ``mu0 * alpha``.
    """
    ts, ss = _band_states(table, band_m, grid_t, grid_s)
    corner = dyn.from_twist(table, ts, ss)
    jac = dyn.differential(table, lam, corner)
    m = jac.matrix
    worst = -np.inf
    worst_i = 0
    for edge in (alpha, -alpha):
        vt = m[..., 0, 0] + m[..., 0, 1] * edge
        vs = m[..., 1, 0] + m[..., 1, 1] * edge
        slope = np.where(np.abs(vt) > 0.0, np.abs(vs) / np.abs(vt), np.inf)
        i = int(np.argmax(slope))
        if slope[i] > worst:
            worst, worst_i = float(slope[i]), i
    passed = worst <= mu0 * alpha
    fail = None if passed else (float(ts[worst_i]), float(ss[worst_i]))
    return ConeFieldResult(passed, worst, mu0 * alpha, alpha, band_m, fail)


def suggest_cone_alpha(table, lam, band_m=None):
    """Half of the smallest |L11| over the contracted band (the cone opening)."""
    if band_m is None:
        band_m = lam * band_bound(table)
    ts, ss = _band_states(table, band_m)
    corner = dyn.from_twist(table, ts, ss)
    lp = dyn.generating_partials(table, corner[0], corner[1])
    c0 = float(np.min(np.abs(lp.l11)))
    if c0 <= 0.0:
        raise NotContracted("cone opening collapsed: L11 vanishes on the band")
    return 0.5 * c0


def largest_cone_lambda(table, lo=1e-4, hi=0.95, iters=24, mu0=0.9):
    """Largest dissipation rate passing the cone check, located by bisection."""

    def passes(lam):
        band = lam * band_bound(table)
        try:
            alpha = suggest_cone_alpha(table, lam, band)
            return cone_check(table, lam, alpha, band, mu0=mu0).passed
        except (NotContracted, ChartError):
            return False

    if not passes(lo):
        raise NotContracted(f"cone check fails even at lam={lo}")
    if passes(hi):
        return hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if passes(mid):
            lo = mid
        else:
            hi = mid
    return lo


# -- graph transform ----------------------------------------------------------------


@dataclass
class AttractorGraph:
    """Fixed point of the graph transform: the attractor as a circle graph."""

    theta: np.ndarray
    eta: np.ndarray
    sup_change: float
    slope_bound: float
    lam: float
    table: object
    history: list = field(default_factory=list)
    _spline: object = None

    def eval(self, thetas):
        if self._spline is None:
            x = np.concatenate([self.theta, [self.theta[0] + TWO_PI]])
            y = np.concatenate([self.eta, [self.eta[0]]])
            self._spline = CubicSpline(x, y, bc_type="periodic")
        return self._spline(np.mod(np.asarray(thetas, dtype=float), TWO_PI))


def _eta_spline(tgrid, eta):
    x = np.concatenate([tgrid, [tgrid[0] + TWO_PI]])
    y = np.concatenate([eta, [eta[0]]])
    return CubicSpline(x, y, bc_type="periodic")


def _transform_once(table, lam, tgrid, eta, targets):
    """One graph-transform image evaluated at the lifted ``targets``.

    Inverts the circle map ``u -> partner(u, eta(u))`` by monotone bracketed
    bisection, then reads the contracted second coordinate in closed form.
    """
    origin = table.origin
    spline = _eta_spline(tgrid, eta)

    # forward images of the grid nodes under the current graph
    _, c = dyn.from_twist(table, tgrid, eta)
    c = np.asarray(c)
    c_ext = np.concatenate([c, [c[0] + TWO_PI]])
    if np.any(np.diff(c_ext) <= 0.0):
        raise NotContracted("graph image circle map is not monotone")
    t_ext = np.concatenate([tgrid, [tgrid[0] + TWO_PI]])

    targ = np.asarray(targets, dtype=float)
    targ_lift = targ + TWO_PI * np.ceil((c_ext[0] - targ) / TWO_PI)
    j = np.clip(np.searchsorted(c_ext, targ_lift, side="right") - 1, 0, len(tgrid) - 1)
    lo = t_ext[j]
    hi = t_ext[j + 1]

    def h(u):
        # -L1(u, target) - eta(u): <= 0 at the left bracket end, >= 0 at the right
        val = -dyn.det2(table.tangent(u), table.point(targ_lift) - origin)
        return val - spline(np.mod(u, TWO_PI))

    for _ in range(50):
        mid = 0.5 * (lo + hi)
        pos = h(mid) > 0.0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    u = 0.5 * (lo + hi)
    return lam * dyn.det2(table.point(u) - origin, table.tangent(targ_lift))


def graph_transform_fixed_point(
    table, lam, grid_size=1024, tol=1e-8, max_sweeps=400, mu0=0.9
):
    """Iterate the graph transform from the zero section to its fixed point.

    Refuses (``NotContracted``) unless the cone check passes at ``lam``; also
    refuses if the induced circle map loses monotonicity or the sweeps fail
    to contract below ``tol``.
    """
    band = lam * band_bound(table)
    alpha = suggest_cone_alpha(table, lam, band)
    gate = cone_check(table, lam, alpha, band, mu0=mu0)
    if not gate.passed:
        raise NotContracted(
            f"cone check fails at lam={lam}: slope {gate.worst_slope:.3g} > {gate.slope_limit:.3g}"
        )

    tgrid = np.linspace(0.0, TWO_PI, grid_size, endpoint=False)
    eta = np.zeros(grid_size)
    history = []
    for _ in range(max_sweeps):
        eta_new = _transform_once(table, lam, tgrid, eta, tgrid)
        change = float(np.max(np.abs(eta_new - eta)))
        history.append(change)
        eta = eta_new
        if change < tol:
            return AttractorGraph(tgrid, eta, change, alpha, float(lam), table, history)
    raise NotContracted(
        f"graph transform did not reach tol={tol} in {max_sweeps} sweeps "
        f"(last change {history[-1]:.3g})"
    )


def invariance_residual(table, graph, n_probe=1024):
    """Max distance from the stepped graph back to the graph, at uniform probes."""
    th = np.linspace(0.0, TWO_PI, n_probe, endpoint=False) + 1e-4
    s = graph.eval(th)
    corner = dyn.from_twist(table, th, s)
    t2 = np.asarray(corner[1])
    s2 = graph.lam * dyn.det2(
        table.point(np.asarray(corner[0])) - table.origin, table.tangent(t2)
    )
    return float(np.max(np.abs(s2 - graph.eval(t2))))


def zero_section_hits(graph, tol=1e-8):
    """Angles where the attractor graph meets the zero section.

    Returns every grid angle when the graph vanishes identically (a family);
    otherwise sign crossings refined through the transform-consistent spline.
    """
    eta = graph.eta
    if float(np.max(np.abs(eta))) < tol:
        return [float(x) for x in graph.theta]

    hits = []
    n = len(graph.theta)
    t_ext = np.concatenate([graph.theta, [graph.theta[0] + TWO_PI]])
    e_ext = np.concatenate([eta, [eta[0]]])
    for i in range(n):
        a, b = t_ext[i], t_ext[i + 1]
        fa, fb = e_ext[i], e_ext[i + 1]
        if fa == 0.0:
            hits.append(float(a % TWO_PI))
        elif fa * fb < 0.0:
            root = brentq(lambda x: float(graph.eval(x)), a, b, xtol=1e-12)
            hits.append(float(root % TWO_PI))
    hits = sorted(hits)
    if not hits:
        warnings.warn(
            "attractor graph does not meet the zero section; "
            "this indicates non-convergence of the transform",
            RuntimeWarning,
        )
    return hits


# -- exports -----------------------------------------------------------------------


def cloud_to_csv(cloud, path):
    with open(path, "w", encoding="utf8") as fh:
        fh.write("seed_id,n,theta,psi,s,lift\n")
        for i in range(cloud.theta.size):
            fh.write(
                "%d,%d,%.17g,%.17g,%.17g,%.17g\n"
                % (
                    cloud.seed_id[i],
                    cloud.iterate_index[i],
                    cloud.theta[i],
                    cloud.psi[i],
                    cloud.s[i],
                    cloud.lift[i],
                )
            )


def graph_to_csv(graph, path):
    with open(path, "w", encoding="utf8") as fh:
        fh.write("theta,eta\n")
        for t, e in zip(graph.theta, graph.eta):
            fh.write("%.17g,%.17g\n" % (t, e))


def summary_json(lam, interval=None, zero_hits=None, witness=None):
    out = {"lambda": lam}
    if interval is not None:
        out["rho_minus"] = interval.rho_minus
        out["rho_plus"] = interval.rho_plus
    if zero_hits is not None:
        out["zero_hits"] = list(zero_hits)
    if witness is not None:
        out["non_graph_witness"] = list(witness)
    return json.dumps(out, indent=2)
