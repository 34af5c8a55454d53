import math

import numpy as np
import pytest

from freeloop.convexity import (
    LoopTransport,
    body_from_gauge,
    body_from_points,
    convergence_experiment,
    discrete_hausdorff,
    distq_upper_subspace,
    hausdorff_distance,
    hull_union_limit_check,
    point_to_body_distance,
)
from freeloop.graphs import directed_double, dynkin_a, dynkin_a_infty, loop_bouquet
from freeloop.loops import AlgebraElement, GnsWorkspace


def euclid(v):
    return float(np.sqrt(np.sum(v * v)))


def sphere_cloud(dim, count, radius=1.0, seed=0):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((count, dim))
    return radius * u / np.linalg.norm(u, axis=1, keepdims=True)


# -- distances to bodies -----------------------------------------------------------

def test_distance_zero_for_members():
    body = body_from_gauge(euclid, sphere_cloud(3, 8))
    assert point_to_body_distance(np.array([0.2, -0.1, 0.3]), body, euclid) == 0.0


def test_distance_to_euclidean_ball_is_radial():
    body = body_from_gauge(euclid, sphere_cloud(4, 8))
    x = np.array([0.0, 3.0, 0.0, 4.0])        # norm 5, distance 4 to the unit ball
    assert point_to_body_distance(x, body, euclid) == pytest.approx(4.0, abs=1e-9)


def test_distance_to_cross_polytope():
    pts = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    body = body_from_points(pts)
    d = point_to_body_distance(np.array([1.0, 1.0]), body, euclid)
    assert d == pytest.approx(math.sqrt(0.5), rel=1e-2)


def test_hausdorff_between_nested_balls():
    b1 = body_from_gauge(euclid, sphere_cloud(3, 10, radius=1.0, seed=1))
    b2 = body_from_gauge(lambda v: euclid(v) / 2.0,
                         sphere_cloud(3, 10, radius=2.0, seed=2))
    est = hausdorff_distance(b1, b2, euclid)
    assert est.directed_ab == 0.0              # small ball sits inside the big one
    assert est.directed_ba == pytest.approx(1.0, abs=1e-9)
    assert est.value == pytest.approx(1.0, abs=1e-9)
    assert distq_upper_subspace(b1, b2, euclid) == pytest.approx(2.0, abs=1e-8)


def test_hausdorff_thread_count_does_not_change_result():
    b1 = body_from_gauge(euclid, sphere_cloud(3, 12, seed=3))
    b2 = body_from_gauge(lambda v: euclid(v) / 1.5,
                         sphere_cloud(3, 12, radius=1.5, seed=4))
    v1 = hausdorff_distance(b1, b2, euclid, threads=1)
    v2 = hausdorff_distance(b1, b2, euclid, threads=3)
    assert v1 == v2


def test_discrete_hausdorff_hand_values():
    P = np.array([[0.0], [1.0]])
    Q = np.array([[0.25]])
    assert discrete_hausdorff(P, Q) == 0.75
    assert discrete_hausdorff(Q, P) == 0.75
    assert discrete_hausdorff(P, P) == 0.0


def test_hull_union_check_on_perturbed_clouds():
    rng = np.random.default_rng(9)
    clouds_l = [sphere_cloud(3, 10, seed=s) for s in (5, 6)]
    clouds_n = [c + 0.01 * rng.standard_normal(c.shape) for c in clouds_l]
    rep = hull_union_limit_check(clouds_n, clouds_l, tol=0.02)
    assert rep.ok
    assert rep.hull_distance <= rep.piecewise_bound + rep.tol


# -- loop transport -----------------------------------------------------------------

def test_transport_preserves_loop_shape():
    limit = dynkin_a_infty(9)
    member = dynkin_a(7)
    tr = LoopTransport(limit, member, radius=3)
    ws_l = GnsWorkspace(tr.dd_limit, 8)
    ws_m = GnsWorkspace(tr.dd_member, 8)
    moved = 0
    for p in ws_l.basis.elements:
        try:
            q = tr.map_loop(p)
        except ValueError:
            continue            # loop leaves the identified ball
        moved += 1
        assert q in ws_m.basis.index
        assert len(q) == len(p)
    assert moved > 10


def test_transport_is_coefficient_preserving():
    limit = dynkin_a_infty(9)
    tr = LoopTransport(limit, dynkin_a(7), radius=3)
    dd = tr.dd_limit
    a = AlgebraElement.from_loop(dd, (0,)).scaled(2.0)
    e01 = next(e.id for e in dd.edges if e.source == 0)
    back = dd.opposite(e01)
    a = a + AlgebraElement.from_loop(dd, (0, e01, back), coeff=1j)
    b = tr.map_element(a)
    assert sorted(b.coeffs.values(), key=abs) == sorted(a.coeffs.values(), key=abs)
    assert b.degree == a.degree


def test_transport_rejects_escaping_loop():
    limit = dynkin_a_infty(9)
    tr = LoopTransport(limit, dynkin_a(7), radius=2)
    # staircase out to distance 3 and back; edge 2k walks outward, 2k+1 back
    deep = (0, 0, 2, 4, 5, 3, 1)
    with pytest.raises(ValueError):
        tr.map_loop(deep)


def test_transport_requires_isomorphic_balls():
    with pytest.raises(ValueError):
        LoopTransport(dynkin_a_infty(6), loop_bouquet(2), radius=1)


# -- the experiment -------------------------------------------------------------------

def test_convergence_experiment_small_family():
    family = [("5", dynkin_a(5)), ("9", dynkin_a(9))]
    limit = dynkin_a_infty(8)
    res = convergence_experiment(family, limit, K=4, depth=8,
                                 samples=4, mix_samples=3, seed=2)
    assert [r.label for r in res.rows] == ["5", "9"]
    assert res.rows[0].norm_distortion > res.rows[1].norm_distortion > 0
    assert res.rows[0].ball_distance >= res.rows[1].ball_distance
    assert res.radius == 2
    for r in res.rows:
        assert r.distq_upper == pytest.approx(2 * r.ball_distance)


def test_convergence_experiment_threads_deterministic():
    family = [("1", dynkin_a_infty(6, q=1.5)), ("3", dynkin_a_infty(6, q=1.125))]
    limit = dynkin_a_infty(6)
    r1 = convergence_experiment(family, limit, K=2, depth=5,
                                samples=3, mix_samples=2, seed=7, threads=1)
    r2 = convergence_experiment(family, limit, K=2, depth=5,
                                samples=3, mix_samples=2, seed=7, threads=2)
    assert r1.rows == r2.rows
    assert r1.local_converged == r2.local_converged


def test_convergence_experiment_guards():
    with pytest.raises(ValueError, match="K <= depth"):
        convergence_experiment([("5", dynkin_a(5))], dynkin_a_infty(6), K=4, depth=3)
    with pytest.raises(ValueError, match="no basepoint loops"):
        convergence_experiment([("5", dynkin_a(5))], dynkin_a_infty(6), K=1, depth=4)
