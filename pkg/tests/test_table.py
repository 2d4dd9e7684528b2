import json
import math

import numpy as np
import pytest

from sympb.errors import GeometryError, KindMismatch, SearchError
from sympb.table import (
    AffineImage,
    BilliardTable,
    TableSpec,
    compatible_origin,
    convexity_report,
    eval_support,
    load_table,
    max_area_quadrilateral,
    polar_table,
    spec_from_json,
    spec_to_json,
    support_table,
    unit_circle,
)
from sympb import dynamics as dyn

from util_geom import (
    central_difference,
    make_eps_table,
    make_flat_table,
    make_wave8,
    make_wave83,
    second_difference,
)

TWO_PI = 2.0 * math.pi


# -- support evaluation -----------------------------------------------------------


def test_eval_support_circle_constant():
    spec = TableSpec("support", ((0, 1.0, 0.0),))
    for th in (0.0, 0.31, 5.9):
        p, p1, p2, p3 = eval_support(spec, th)
        assert (p, p1, p2, p3) == (1.0, 0.0, 0.0, 0.0)


def test_eval_support_wave8_at_zero():
    spec = TableSpec("support", ((0, 1.0, 0.0), (2, 0.0, 0.125)))
    p, p1, p2, p3 = eval_support(spec, 0.0)
    assert abs(p - 1.0) < 1e-15
    assert abs(p1 - 0.25) < 1e-15
    assert abs(p2 - 0.0) < 1e-15
    assert abs(p3 - (-1.0)) < 1e-15


def test_eval_support_wave83_at_zero():
    spec = TableSpec("support", ((0, 1.0, 0.0), (2, 0.0, 0.125), (3, 1.0 / 27.0, 0.0)))
    p, p1, p2, p3 = eval_support(spec, 0.0)
    assert abs(p - (1.0 + 1.0 / 27.0)) < 1e-15
    assert abs(p1 - 0.25) < 1e-15
    assert abs(p2 - (-1.0 / 3.0)) < 1e-14
    assert abs(p3 - (-1.0)) < 1e-14


def test_eval_support_matches_finite_differences():
    spec = TableSpec("support", ((0, 1.0, 0.0), (2, 0.0, 0.125), (3, 1.0 / 27.0, 0.0)))
    h = 1e-5
    pval = lambda x: eval_support(spec, x)[0]
    d1 = lambda x: eval_support(spec, x)[1]
    for th in np.linspace(0.0, TWO_PI, 17):
        p, p1, p2, _ = eval_support(spec, th)
        assert abs(central_difference(pval, th, h) - p1) < 1e-7 * max(1.0, abs(p1))
        assert abs(second_difference(pval, th, h) - p2) < 1e-5
        assert abs(central_difference(d1, th, h) - p2) < 1e-7 * max(1.0, abs(p2))


def test_eval_support_kind_mismatch():
    spec = TableSpec("polar", ((0, 1.0, 0.0),))
    with pytest.raises(KindMismatch):
        eval_support(spec, 0.0)


# -- boundary evaluation ------------------------------------------------------------


def test_boundary_circle_points():
    circ = unit_circle()
    assert np.allclose(circ.point(0.0), [1.0, 0.0], atol=1e-15)
    assert np.allclose(circ.tangent(0.0), [0.0, 1.0], atol=1e-15)
    assert np.allclose(circ.point(math.pi / 2), [0.0, 1.0], atol=1e-15)
    assert np.allclose(circ.tangent(math.pi / 2), [-1.0, 0.0], atol=1e-15)


def test_boundary_polar_flat_point():
    tbl = make_flat_table()
    assert np.allclose(tbl.point(0.0), [0.8, 0.0], atol=1e-15)
    assert np.allclose(tbl.tangent(0.0), [0.0, 0.8], atol=1e-15)


def test_boundary_derivatives_match_finite_differences():
    h = 1e-5
    for tbl in (make_wave83(), make_flat_table()):
        for t in np.linspace(0.0, TWO_PI, 13):
            d_fd = central_difference(tbl.point, t, h)
            assert np.allclose(d_fd, tbl.tangent(t), rtol=1e-7, atol=1e-7)
            dd_fd = central_difference(tbl.tangent, t, h)
            assert np.allclose(dd_fd, tbl.second(t), rtol=1e-7, atol=1e-6)


def test_support_tangent_is_curvature_radius_times_direction():
    tbl = make_wave83()
    th = np.linspace(0.0, TWO_PI, 512, endpoint=False)
    p, _, p2, _ = eval_support(tbl.spec, th)
    rho = p + p2
    e = np.stack([-np.sin(th), np.cos(th)], axis=-1)
    err = np.linalg.norm(tbl.tangent(th) - rho[:, None] * e, axis=-1)
    assert np.all(err <= 1e-10 * rho)


# -- curvature ----------------------------------------------------------------------


def test_curvature_circle():
    circ = unit_circle()
    assert np.allclose(circ.curvature(np.linspace(0, TWO_PI, 64)), 1.0, atol=1e-14)


def test_curvature_flat_table_zero_at_origin():
    tbl = make_flat_table()
    assert abs(tbl.curvature(0.0)) < 1e-14
    assert abs(tbl.curvature(math.pi)) < 1e-14


def test_curvature_wave8_at_zero():
    tbl = make_wave8()
    assert abs(tbl.curvature(0.0) - 1.0) < 1e-14  # rho(0) = p(0) + p''(0) = 1


# -- opposite tangent ---------------------------------------------------------------


def test_star_circle():
    circ = unit_circle()
    assert abs(circ.star(0.0) - math.pi) < 1e-15


def test_star_support_exact_half_turn():
    tbl = make_wave83()
    t = np.linspace(0.0, TWO_PI, 33)
    assert np.allclose(tbl.star(t), t + math.pi)


def test_star_polar_nonsymmetric_matches_bisection_oracle():
    tbl = polar_table((0, 1.0, 0.0), (1, 0.1, 0.0), (2, 0.05, 0.0))
    assert not tbl.centrally_symmetric
    for t in np.linspace(0.0, TWO_PI, 9):
        ts = float(np.asarray(tbl.star(t)))
        # oracle: dense sign scan of det(g'(t), g'(u)) on (t, t + 2pi) + bisection
        us = np.linspace(t + 1e-3, t + TWO_PI - 1e-3, 256)
        def f(u):
            a = np.asarray(tbl.tangent(t))
            b = np.asarray(tbl.tangent(u))
            return float(a[0] * b[1] - a[1] * b[0])
        vals = [f(u) for u in us]
        bracket = next(i for i in range(255) if vals[i] > 0 > vals[i + 1])
        lo, hi = us[bracket], us[bracket + 1]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if f(mid) > 0:
                lo = mid
            else:
                hi = mid
        assert abs(ts - 0.5 * (lo + hi)) < 1e-9
        assert abs(f(ts)) < 1e-12
        # involution through the symmetric relation
        tss = float(np.asarray(tbl.star(ts)))
        assert abs((tss - t) % TWO_PI) < 1e-9 or abs((tss - t) % TWO_PI - TWO_PI) < 1e-9


# -- convexity reports ----------------------------------------------------------------


def test_convexity_circle():
    rep = convexity_report(unit_circle())
    assert rep.convexity_class == "strongly_convex"
    assert abs(rep.min_curvature - 1.0) < 1e-9


def test_convexity_flat_table():
    rep = convexity_report(make_flat_table())
    assert rep.convexity_class == "flat_points"
    flats = sorted(x % math.pi for x in rep.flat_points)
    assert len(rep.flat_points) == 2
    assert all(min(x, math.pi - x) < 1e-6 for x in flats)


def test_degenerate_polar_rejected():
    with pytest.raises(GeometryError):
        polar_table((0, 1.0, 0.0), (2, -1.0, 0.0))  # r = 1 - cos(2u) vanishes


def test_nonconvex_support_rejected():
    with pytest.raises(GeometryError):
        support_table((0, 1.0, 0.0), (2, 0.4, 0.0))  # p + p'' < 0 near 0


# -- symmetry -------------------------------------------------------------------------


def test_central_symmetry_detection():
    assert make_wave8().centrally_symmetric  # pi-periodic support function
    assert not make_wave83().centrally_symmetric
    assert make_flat_table().centrally_symmetric


def test_symmetry_center_with_translation_mode():
    tbl = support_table((0, 1.0, 0.0), (1, 0.2, -0.1), (2, 0.1, 0.0))
    assert tbl.centrally_symmetric
    assert np.allclose(tbl.symmetry_center, [0.2, -0.1], atol=1e-14)
    t = np.linspace(0.0, TWO_PI, 1024, endpoint=False)
    err = np.linalg.norm(tbl.point(t + math.pi) + tbl.point(t) - 2 * tbl.symmetry_center, axis=-1)
    assert np.max(err) <= 1e-10 * tbl.diameter()


# -- compatible origin ----------------------------------------------------------------


def test_compatible_origin_circle_and_symmetric():
    assert np.allclose(compatible_origin(unit_circle()), [0.0, 0.0], atol=1e-14)
    assert np.allclose(compatible_origin(make_eps_table()), [0.0, 0.0], atol=1e-14)


def test_compatible_origin_nonsymmetric_interior_diagonal_point():
    tbl = make_wave83()
    ts, area = max_area_quadrilateral(tbl)
    # the maximizer is a conservative 4-periodic orbit
    a, b = ts[0], ts[1]
    for _ in range(4):
        a, b = dyn.step_conservative(tbl, (a, b))
    assert abs((a - ts[0]) % TWO_PI) < 1e-8 or TWO_PI - abs((a - ts[0]) % TWO_PI) < 1e-8
    origin = compatible_origin(tbl)
    assert tbl.contains(origin)
    pts = tbl.point(np.asarray(ts))
    # origin sits on both diagonals
    for (i, j) in ((0, 2), (1, 3)):
        d = pts[j] - pts[i]
        rel = origin - pts[i]
        assert abs(d[0] * rel[1] - d[1] * rel[0]) < 1e-9


# -- spec files -----------------------------------------------------------------------


def test_spec_json_roundtrip(tmp_path):
    spec = TableSpec("support", ((0, 1.0, 0.0), (2, 0.0, 0.125)), origin_override=(0.1, 0.0))
    again = spec_from_json(spec_to_json(spec))
    assert again == spec

    path = tmp_path / "table.json"
    path.write_text(spec_to_json(spec))
    tbl = load_table(str(path))
    assert isinstance(tbl, BilliardTable)
    assert np.allclose(tbl.origin, [0.1, 0.0])


def test_spec_rejects_bad_input():
    with pytest.raises(GeometryError):
        TableSpec("support", ((0, 1.0, 0.0), (0, 0.5, 0.0)))  # duplicate k
    with pytest.raises(GeometryError):
        TableSpec("banana", ((0, 1.0, 0.0),))
    with pytest.raises(GeometryError):
        TableSpec("support", ((2, 0.1, 0.0),))  # not positive
    with pytest.raises(GeometryError):
        spec_from_json(json.dumps({"kind": "support", "harmonics": [{"k": 0, "cos": -1.0}]}))


def test_affine_image_geometry():
    circ = unit_circle()
    A = np.array([[2.0, 0.3], [0.0, 1.0]])
    ell = AffineImage(circ, A, offset=(1.0, 2.0))
    t = np.linspace(0.0, TWO_PI, 64)
    assert np.allclose(ell.point(t), circ.point(t) @ A.T + [1.0, 2.0])
    assert np.allclose(ell.star(t), t + math.pi)
    assert ell.contains([1.0, 2.0])
    with pytest.raises(GeometryError):
        AffineImage(circ, [[1.0, 0.0], [0.0, -1.0]])  # orientation reversing
