import math

import numpy as np
import pytest
from scipy.spatial import cKDTree

from sympb import dynamics as dyn
from sympb import periodic as per
from sympb.errors import ConsistencyError, DomainError, KindMismatch
from sympb.table import harmonic_series, polar_table, support_table, unit_circle

from util_geom import make_eps_table, make_flat_table, make_wave8, make_wave83

TWO_PI = 2.0 * math.pi


# -- the scalar orbit equation ---------------------------------------------------------


def test_residual_zero_on_circle():
    circ = unit_circle()
    th = np.linspace(0.0, math.pi, 64)
    assert np.max(np.abs(per.four_periodic_residual(circ, th))) == 0.0


def test_residual_eps_table_axis():
    tbl = make_eps_table()
    assert abs(float(np.asarray(per.four_periodic_residual(tbl, 0.0)))) < 1e-15


def test_residual_matches_independent_composition():
    # independent oracle: hand-coded coefficients, plain math module
    eps = 0.1
    p = lambda x: 1.0 + eps * math.cos(2 * x)
    dp = lambda x: -2.0 * eps * math.sin(2 * x)
    q = lambda x: dp(x) / p(x)
    theta = math.pi / 8
    theta2 = math.atan(q(theta)) + math.pi / 2 + theta
    expected = q(theta2) + q(theta)
    got = float(np.asarray(per.four_periodic_residual(make_eps_table(), theta)))
    assert abs(got - expected) < 1e-14
    assert abs(got) > 1e-3  # genuinely nonzero off the orbits


def test_residual_pi_periodic():
    tbl = make_wave8()
    th = np.linspace(0.0, math.pi, 33)
    a = per.four_periodic_residual(tbl, th)
    b = per.four_periodic_residual(tbl, th + math.pi)
    assert np.max(np.abs(a - b)) < 1e-13


def test_residual_requires_symmetric_support_table():
    with pytest.raises(KindMismatch):
        per.four_periodic_residual(make_wave83(), 0.1)
    with pytest.raises(KindMismatch):
        per.four_periodic_residual(make_flat_table(), 0.1)


# -- orbit finding ----------------------------------------------------------------------


def test_find_orbits_eps_table():
    tbl = make_eps_table()
    orbits = per.find_four_periodic(tbl)
    assert isinstance(orbits, list) and len(orbits) == 2
    axis = orbits[0]
    assert abs(axis.theta1) < 1e-10
    assert abs(axis.theta2 - math.pi / 2) < 1e-10
    assert axis.residual < 1e-10
    for orb in orbits:
        # closure under the conservative step, lifted advance exactly one turn
        a, b = orb.theta1, orb.theta2
        for _ in range(4):
            a, b = dyn.step_conservative(tbl, (a, b))
        assert abs(a - orb.theta1 - TWO_PI) < 1e-9
        assert abs(b - orb.theta2 - TWO_PI) < 1e-9
        assert orb.quad_area > 0.0


def test_find_orbits_wave8_nonempty():
    orbits = per.find_four_periodic(make_wave8())
    assert isinstance(orbits, list) and len(orbits) >= 1


def test_radon_family_on_circle():
    found = per.find_four_periodic(unit_circle())
    assert isinstance(found, per.RadonFamily)
    assert found.max_residual < 1e-12


def test_orbit_twist_points_on_zero_section():
    tbl = make_eps_table()
    orbits = per.find_four_periodic(tbl)
    for orb in orbits:
        for corner in orb.corner_cycle():
            _, s = dyn.to_twist(tbl, corner)
            assert abs(s) < 1e-10


def test_pi_invariance_under_dissipation():
    # zero-section orbit corners are fixed in the twist chart for every lambda
    tbl = make_eps_table()
    orbits = per.find_four_periodic(tbl)
    for orb in orbits:
        cycle = orb.corner_cycle()
        for lam in (0.1, 0.5, 0.9):
            for i, corner in enumerate(cycle):
                a, b = dyn.step_dissipative(tbl, lam, corner)
                nxt = cycle[(i + 1) % 4]
                assert abs(a % TWO_PI - nxt[0] % TWO_PI) < 1e-9
                assert abs(b % TWO_PI - nxt[1] % TWO_PI) < 1e-9


# -- stability index ----------------------------------------------------------------------


def test_k12_circle_is_one():
    circ = unit_circle()
    assert abs(per.stability_index(circ, 0.0, math.pi / 2) - 1.0) < 1e-12


def test_k12_eps_table_axis_value():
    tbl = make_eps_table()
    expected = 0.99 / 0.91
    got = per.stability_index(tbl, 0.0, math.pi / 2)
    assert abs(got - expected) < 1e-8


def test_k12_dual_formula_consistency():
    tbl = make_eps_table()
    for orb in per.find_four_periodic(tbl):
        k_sup = per.stability_index(tbl, orb.theta1, orb.theta2)
        lp = dyn.generating_partials(tbl, orb.theta1, orb.theta2)
        k_part = float(lp.l11 * lp.l22 / lp.l12**2)
        assert abs(k_sup - k_part) < 1e-8


def test_k12_rejects_non_periodic_pair():
    tbl = make_eps_table()
    with pytest.raises(ConsistencyError):
        per.stability_index(tbl, 0.3, 1.3)


# -- classification -------------------------------------------------------------------------


def test_classify_parabolic():
    rep = per.classify(1.0, 0.5)
    assert rep.orbit_type == per.PARABOLIC
    assert abs(rep.t4_multipliers[0] - 0.5**4) < 1e-12
    assert abs(rep.t4_multipliers[1] - 1.0) < 1e-12


def test_classify_lambda_minus_double_eigenvalue():
    rep = per.classify(0.75, 1.0 / 3.0)
    assert abs(rep.lambda_minus - 1.0 / 3.0) < 1e-12
    assert rep.orbit_type == per.SINK_DEGENERATE
    # double four-step multiplier lambda^2
    assert abs(rep.t4_multipliers[0] - (1.0 / 3.0) ** 2) < 1e-9
    assert abs(rep.t4_multipliers[1] - (1.0 / 3.0) ** 2) < 1e-9


def test_classify_focus_modulus():
    rep = per.classify(0.75, 0.6)
    assert rep.orbit_type == per.SINK_FOCUS
    assert rep.mu[0] == rep.mu[1].conjugate()
    assert abs(abs(rep.mu[0]) - 0.6) < 1e-12
    assert abs(abs(rep.t4_multipliers[0]) - 0.36) < 1e-12


def test_classify_real_node_below_lambda_minus():
    rep = per.classify(0.75, 0.2)
    assert rep.orbit_type == per.SINK_REAL_NODE
    mus = sorted(m.real for m in rep.t4_multipliers)
    assert 0.2**4 < mus[0] <= mus[1] < 1.0
    assert all(abs(m.imag) == 0.0 for m in rep.t4_multipliers)


def test_classify_antidiagonal_degenerate_case():
    lam = 0.5
    flip = 2.0 * lam / (1.0 + lam) ** 2
    rep = per.classify(flip, lam)
    assert rep.orbit_type == per.SINK_DEGENERATE
    for m in rep.t4_multipliers:
        assert abs(m - (-(lam**2))) < 1e-12


def test_classify_saddle_multiplier_ordering():
    rng = np.random.default_rng(11)
    for _ in range(200):
        k = 1.0 + rng.uniform(1e-3, 3.0)
        lam = rng.uniform(0.05, 0.95)
        rep = per.classify(k, lam)
        assert rep.orbit_type == per.SADDLE
        m1, m2 = (m.real for m in rep.t4_multipliers)
        assert 0.0 < m1 < lam**4 + 1e-9
        assert lam**4 - 1e-9 < lam**4 < 1.0 < m2


def test_eigenvalue_identities_random():
    rng = np.random.default_rng(12)
    for _ in range(1000):
        k = rng.uniform(0.05, 3.0)
        lam = rng.uniform(0.02, 0.98)
        rep = per.classify(k, lam)
        prod = rep.mu[0] * rep.mu[1]
        tot = rep.mu[0] + rep.mu[1]
        assert abs(prod - lam * lam) < 1e-9
        assert abs(tot - ((1 + lam) ** 2 * k - 2 * lam)) < 1e-9


def test_classify_domain_errors():
    with pytest.raises(DomainError):
        per.classify(-0.2, 0.5)
    with pytest.raises(DomainError):
        per.classify(0.5, 1.0)


def test_four_step_differential_matches_two_step_squared():
    tbl = make_eps_table()
    orbits = per.find_four_periodic(tbl)
    saddle = orbits[0]
    lam = 0.3
    m4 = per.four_step_differential(tbl, lam, saddle)
    rep = per.classify_orbit(tbl, lam, saddle)
    evs = sorted(np.linalg.eigvals(m4).real)
    expect = sorted(m.real for m in rep.t4_multipliers)
    assert np.allclose(evs, expect, rtol=1e-7, atol=1e-9)


# -- unstable manifolds -----------------------------------------------------------------------


def test_unstable_manifold_saddle_to_sink():
    tbl = make_eps_table()
    orbits = per.find_four_periodic(tbl)
    saddle, sink = orbits[0], orbits[1]
    assert per.classify_orbit(tbl, 0.05, saddle).orbit_type == per.SADDLE
    assert per.classify_orbit(tbl, 0.05, sink).orbit_type != per.SADDLE
    lam = 0.05

    sample = per.unstable_manifold_sample(tbl, lam, saddle, arc_budget=1.0, max_iters=60)
    assert len(sample.branches) == 2
    sink_pts = np.array([[x, 0.0] for x in sink.theta_set()])
    for branch in sample.branches:
        assert branch.shape[0] > 100
        # all sampled points stay inside the phase space
        psi1, psi2 = dyn.phase_bounds(tbl, branch[:, 0])
        assert np.all(branch[:, 1] > psi1) and np.all(branch[:, 1] < psi2)
        # omega-limit of the tip under continued iteration is a neighboring sink point
        t = branch[-1:, 0].copy()
        s = branch[-1:, 1].copy()
        for _ in range(4 * 800):
            t, s = dyn.step_twist(tbl, lam, t, s)
        pt = np.array([float(np.asarray(t)) % TWO_PI, float(np.asarray(s))])
        dist = np.min(np.linalg.norm(sink_pts - pt, axis=-1))
        assert dist < 1e-4


def test_unstable_manifold_set_invariance():
    tbl = make_eps_table()
    saddle = per.find_four_periodic(tbl)[0]
    lam = 0.05
    sample = per.unstable_manifold_sample(tbl, lam, saddle, arc_budget=1.0, max_iters=40)
    extended = per.unstable_manifold_sample(tbl, lam, saddle, arc_budget=1.0, max_iters=41)
    for branch, ext in zip(sample.branches, extended.branches):
        img = per.four_step_map(tbl, lam, branch[::5])
        img[:, 0] = np.mod(img[:, 0], TWO_PI)
        dist, _ = cKDTree(ext).query(img)
        assert float(np.max(dist)) < 1e-4


def test_unstable_manifold_rejects_sink():
    tbl = make_eps_table()
    sink = per.find_four_periodic(tbl)[1]
    with pytest.raises(TypeError):
        per.unstable_manifold_sample(tbl, 0.05, sink, arc_budget=1.0)


# -- general periodic orbits --------------------------------------------------------------------


def test_birkhoff_orbit_quarter_matches_axis():
    tbl = make_eps_table()
    ts, action, residual = per.birkhoff_orbit(tbl, 1, 4)
    assert residual < 1e-8
    # the maximizer is the axis orbit {0, pi/2, pi, 3pi/2}
    got = sorted(t % (math.pi / 2) for t in ts)
    assert all(min(x, math.pi / 2 - x) < 1e-6 for x in got)


def test_birkhoff_orbit_triangle():
    tbl = make_wave83()
    ts, action, residual = per.birkhoff_orbit(tbl, 1, 3)
    assert len(ts) == 3 and residual < 1e-6 and action > 0.0


def test_birkhoff_orbit_rejects_bad_pq():
    with pytest.raises(DomainError):
        per.birkhoff_orbit(make_eps_table(), 2, 4)
