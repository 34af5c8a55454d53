"""Hausdorff geometry of seminorm balls and the convergence experiment.

Bodies are presented by a membership oracle plus a finite cloud of
boundary candidates.  Distances from an outside point are upper-estimated
by bisection along segments into the body (the ray to the origin, then
refinements toward cloud points); the Hausdorff estimate takes the worst
cloud point in each direction.  All sampling is driven by an explicit
seed and all norms go through the deterministic power iteration, so a
rerun reproduces every figure exactly.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog

from .graphs import (
    DirectedDouble,
    WeightedPointedGraph,
    ball,
    directed_double,
    find_pointed_isomorphism,
    verify_local_uniform_convergence,
)
from .lipnorms import SelfAdjointChart, lip_value
from .loops import AlgebraElement, GnsWorkspace
from .numerics import rng_from_seed, sigma_max_value

BISECT_ITERS = 14
MEMBERSHIP_SLACK = 1e-9


@dataclass
class ConvexBody:
    dim: int
    membership: Callable[[np.ndarray], bool]
    cloud: np.ndarray                       # boundary candidates, one per row
    gauge: Callable[[np.ndarray], float] | None = None
    name: str = ""


def body_from_gauge(gauge: Callable[[np.ndarray], float], cloud: np.ndarray,
                    name: str = "") -> ConvexBody:
    dim = cloud.shape[1]
    return ConvexBody(dim, lambda x: gauge(x) <= 1.0 + MEMBERSHIP_SLACK,
                      cloud, gauge=gauge, name=name)


def membership_from_points(points: np.ndarray) -> Callable[[np.ndarray], bool]:
    """Convex hull membership of a finite cloud, by LP feasibility."""
    P = np.asarray(points, dtype=float)
    npts, dim = P.shape

    def member(x: np.ndarray) -> bool:
        A_eq = np.vstack([P.T, np.ones(npts)])
        b_eq = np.concatenate([np.asarray(x, dtype=float), [1.0]])
        res = linprog(np.zeros(npts), A_eq=A_eq, b_eq=b_eq,
                      bounds=[(0, None)] * npts, method="highs")
        return bool(res.success)

    return member


def body_from_points(points: np.ndarray, name: str = "") -> ConvexBody:
    P = np.asarray(points, dtype=float)
    return ConvexBody(P.shape[1], membership_from_points(P), P, name=name)


def _bisect_into(body: ConvexBody, inside: np.ndarray, outside: np.ndarray,
                 iters: int = BISECT_ITERS) -> np.ndarray:
    """Last inside point of the segment from a member point to an outside one."""
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        z = inside + mid * (outside - inside)
        if body.membership(z):
            lo = mid
        else:
            hi = mid
    return inside + lo * (outside - inside)


def point_to_body_distance(x: np.ndarray, body: ConvexBody,
                           norm_fn: Callable[[np.ndarray], float],
                           candidates: int = 4) -> float:
    """Upper estimate of dist(x, body) in the given norm.

    Starts from the radial boundary point (closed form when the body
    carries a gauge, else bisection toward the origin) and refines along
    segments from the nearest cloud candidates.
    """
    if body.membership(x):
        return 0.0
    if body.gauge is not None:
        g = body.gauge(x)
        best = norm_fn(x - x / g) if g > 0 else math.inf
    else:
        y = _bisect_into(body, np.zeros_like(x), x)
        best = norm_fn(x - y)
    if body.cloud.size and candidates > 0:
        d2 = np.sum((body.cloud - x) ** 2, axis=1)
        order = np.argsort(d2, kind="stable")[:candidates]
        for i in order:
            y = _bisect_into(body, body.cloud[i], x)
            best = min(best, norm_fn(x - y))
    return best


@dataclass(frozen=True)
class HausdorffEstimate:
    value: float
    directed_ab: float
    directed_ba: float
    points_a: int
    points_b: int


def hausdorff_distance(body_a: ConvexBody, body_b: ConvexBody,
                       norm_fn: Callable[[np.ndarray], float],
                       candidates: int = 4, threads: int = 1) -> HausdorffEstimate:
    """Sampled symmetric Hausdorff estimate between two convex bodies."""

    def directed(src: ConvexBody, dst: ConvexBody) -> float:
        pts = list(src.cloud)

        def one(p):
            return point_to_body_distance(p, dst, norm_fn, candidates=candidates)

        if threads > 1 and len(pts) > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                vals = list(ex.map(one, pts))
        else:
            vals = [one(p) for p in pts]
        return max(vals, default=0.0)

    d_ab = directed(body_a, body_b)
    d_ba = directed(body_b, body_a)
    return HausdorffEstimate(max(d_ab, d_ba), d_ab, d_ba,
                             len(body_a.cloud), len(body_b.cloud))


def distq_upper_subspace(body_a: ConvexBody, body_b: ConvexBody,
                         norm_fn: Callable[[np.ndarray], float],
                         candidates: int = 4, threads: int = 1) -> float:
    """Quantum-distance upper bound: twice the Hausdorff estimate between
    the trace-zero unit-ball slices presented by the two bodies."""
    return 2.0 * hausdorff_distance(body_a, body_b, norm_fn,
                                    candidates=candidates, threads=threads).value


def discrete_hausdorff(P: np.ndarray, Q: np.ndarray,
                       norm_fn: Callable[[np.ndarray], float] | None = None) -> float:
    nf = norm_fn or (lambda v: float(np.sqrt(np.sum(v * v))))
    d_pq = max(min(nf(p - q) for q in Q) for p in P)
    d_qp = max(min(nf(q - p) for p in P) for q in Q)
    return max(d_pq, d_qp)


@dataclass(frozen=True)
class HullUnionReport:
    hull_distance: float
    piecewise_bound: float
    tol: float
    ok: bool


def hull_union_limit_check(clouds_n: Sequence[np.ndarray],
                           clouds_limit: Sequence[np.ndarray],
                           tol: float = 0.02) -> HullUnionReport:
    """Hulls of unions converge no slower than the worst constituent.

    Both sides are estimated from the given finite clouds: the left side
    with the hull-membership machinery, the right as the max of discrete
    Hausdorff distances.
    """
    if len(clouds_n) != len(clouds_limit):
        raise ValueError("need matching family lengths")
    union_n = np.vstack(clouds_n)
    union_l = np.vstack(clouds_limit)
    hn = body_from_points(union_n, "hull_n")
    hl = body_from_points(union_l, "hull_limit")
    nf = lambda v: float(np.sqrt(np.sum(v * v)))
    lhs = hausdorff_distance(hn, hl, nf).value
    rhs = max(discrete_hausdorff(cn, cl) for cn, cl in zip(clouds_n, clouds_limit))
    return HullUnionReport(lhs, rhs, tol, lhs <= rhs + tol)


# -- transporting elements along ball isomorphisms -------------------------------

def _embed_ball_edges(g: WeightedPointedGraph, bg: WeightedPointedGraph) -> dict[int, int]:
    """Map edge positions of a ball graph to positions in the parent graph.

    Both store edges as sorted index pairs; matching goes through vertex
    ids and pairs up parallel edges in slot order.
    """
    parent_pos: dict[tuple[str, str], list[int]] = {}
    for pos, (i, j) in enumerate(g.edges):
        key = (g.ids[i], g.ids[j])
        parent_pos.setdefault(key, []).append(pos)
    out: dict[int, int] = {}
    taken: dict[tuple[str, str], int] = {}
    for pos, (i, j) in enumerate(bg.edges):
        key = (bg.ids[i], bg.ids[j])
        alt = (key[1], key[0])
        k = key if key in parent_pos else alt
        slot = taken.get(k, 0)
        taken[k] = slot + 1
        out[pos] = parent_pos[k][slot]
    return out


class LoopTransport:
    """Identify basepoint loops of the limit graph with loops of a family
    member through a pointed ball isomorphism."""

    def __init__(self, limit: WeightedPointedGraph, member: WeightedPointedGraph,
                 radius: int):
        self.dd_limit = directed_double(limit)
        self.dd_member = directed_double(member)
        b_l = ball(limit, radius).graph
        b_m = ball(member, radius).graph
        iso = find_pointed_isomorphism(b_l, b_m)
        if iso is None:
            raise ValueError(f"no pointed ball isomorphism at radius {radius} "
                             f"between {limit.name!r} and {member.name!r}")
        self.radius = radius
        emb_l = _embed_ball_edges(limit, b_l)
        emb_m = _embed_ball_edges(member, b_m)
        inv_emb_l = {v: k for k, v in emb_l.items()}
        # directed edge map limit -> member, for edges inside the ball
        self._edge_map: dict[int, int] = {}
        vmap_ids = {b_l.ids[i]: b_m.ids[iso.vertex_map[i]] for i in range(b_l.n_vertices)}
        for de in self.dd_limit.edges:
            upos = de.undirected
            if upos not in inv_emb_l:
                continue
            ball_pos = inv_emb_l[upos]
            member_upos = emb_m[iso.edge_map[ball_pos]]
            src_id = limit.ids[de.source]
            if src_id not in vmap_ids:
                continue
            target_src = member.index(vmap_ids[src_id])
            for dm in self.dd_member.edges:
                if dm.undirected == member_upos and dm.source == target_src:
                    self._edge_map[de.id] = dm.id
                    break

    def map_loop(self, loop: tuple[int, ...]) -> tuple[int, ...]:
        try:
            return (0,) + tuple(self._edge_map[e] for e in loop[1:])
        except KeyError:
            raise ValueError(f"loop {loop} leaves the identified ball of radius "
                             f"{self.radius}") from None

    def map_element(self, a: AlgebraElement) -> AlgebraElement:
        return AlgebraElement(self.dd_member,
                              {self.map_loop(p): c for p, c in a.coeffs.items()})


# -- the convergence experiment ---------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    label: str
    K: int
    norm_distortion: float
    lip_distortion: float
    ball_distance: float
    distq_upper: float
    samples: int
    seed: int


@dataclass
class ConvergenceResult:
    rows: list[ConvergenceRow]
    K: int
    depth: int
    radius: int
    seed: int
    local_converged: bool


def convergence_experiment(family: Sequence[tuple[str, WeightedPointedGraph]],
                           limit: WeightedPointedGraph,
                           K: int, depth: int,
                           samples: int = 24, mix_samples: int = 16,
                           seed: int = 0, threads: int = 1,
                           weight_tol: float = 0.05,
                           power_tol: float = 1e-8,
                           candidates: int = 4) -> ConvergenceResult:
    """Compare the span of Wick words of degree <= K across a graph family.

    For each member: the worst operator-norm distortion over shared sample
    directions, the worst per-degree commutator-seminorm distortion, and a
    Hausdorff estimate between the trace-zero slices of the adjusted-
    seminorm unit balls, measured in the limit operator norm.
    """
    if K > depth:
        raise ValueError("need K <= depth")
    radius = max(1, K // 2)
    graphs = [g for _, g in family]
    local = verify_local_uniform_convergence(graphs, limit, radius, weight_tol)
    dd_limit = directed_double(limit)
    ws_limit = GnsWorkspace(dd_limit, depth)
    degrees = [k for k in range(1, K + 1)
               if any(len(p) - 1 == k for p in ws_limit.basis.elements)]
    if not degrees:
        raise ValueError(f"limit graph has no basepoint loops of degree <= {K}")
    chart = SelfAdjointChart(ws_limit, degrees)
    charts_k = {k: SelfAdjointChart(ws_limit, [k]) for k in degrees}

    rng = rng_from_seed(seed, 2)
    dirs_full = _unit_rows(rng, samples, chart.dim)
    dirs_k = {k: _unit_rows(rng, samples, charts_k[k].dim) for k in degrees}
    mixes = rng.dirichlet(np.ones(len(degrees)), size=mix_samples)
    mix_pick = rng.integers(0, samples, size=(mix_samples, len(degrees)))

    def limit_norm(coords: np.ndarray) -> float:
        return sigma_max_value(ws_limit.realize(chart.from_coords(coords)).matrix,
                               tol=power_tol)

    def limit_lip_k(k: int, u: np.ndarray) -> float:
        return lip_value(charts_k[k].from_coords(u), ws_limit, power_tol=power_tol)

    lip_limit = {k: np.array([limit_lip_k(k, u) for u in dirs_k[k]]) for k in degrees}
    norm_limit = np.array([limit_norm(u) for u in dirs_full])

    cloud_limit = _ball_cloud(chart, charts_k, degrees, dirs_k, lip_limit, mixes, mix_pick)

    def limit_gauge(coords: np.ndarray) -> float:
        x = chart.from_coords(coords)
        return sum(lip_value(x.homogeneous_component(k), ws_limit, power_tol=power_tol)
                   for k in degrees)

    body_limit = body_from_gauge(limit_gauge, cloud_limit, name="limit")

    def run_member(pos: int) -> ConvergenceRow:
        label, g = family[pos]
        transport = LoopTransport(limit, g, radius)
        ws_n = GnsWorkspace(transport.dd_member, depth)

        def member_norm(coords: np.ndarray) -> float:
            x = transport.map_element(chart.from_coords(coords))
            return sigma_max_value(ws_n.realize(x).matrix, tol=power_tol)

        def member_lip_k(k: int, u: np.ndarray) -> float:
            x = transport.map_element(charts_k[k].from_coords(u))
            return lip_value(x, ws_n, power_tol=power_tol)

        norm_dist = max(abs(member_norm(u) - norm_limit[i])
                        for i, u in enumerate(dirs_full))
        lip_n = {k: np.array([member_lip_k(k, u) for u in dirs_k[k]]) for k in degrees}
        lip_dist = max(float(np.max(np.abs(lip_n[k] - lip_limit[k]))) for k in degrees)

        cloud_n = _ball_cloud(chart, charts_k, degrees, dirs_k, lip_n, mixes, mix_pick)

        def member_gauge(coords: np.ndarray) -> float:
            x = transport.map_element(chart.from_coords(coords))
            return sum(lip_value(x.homogeneous_component(k), ws_n, power_tol=power_tol)
                       for k in degrees)

        body_n = body_from_gauge(member_gauge, cloud_n, name=str(label))
        dh = hausdorff_distance(body_n, body_limit, limit_norm, candidates=candidates)
        return ConvergenceRow(str(label), K, float(norm_dist), float(lip_dist),
                              dh.value, 2.0 * dh.value, samples, seed)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(run_member, range(len(family))))
    else:
        rows = [run_member(i) for i in range(len(family))]
    return ConvergenceResult(rows, K, depth, radius, seed, local.converged)


def _unit_rows(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    out = np.zeros((count, dim))
    made = 0
    while made < count:
        u = rng.standard_normal(dim)
        n = float(np.sqrt(np.sum(u * u)))
        if n > 1e-12:
            out[made] = u / n
            made += 1
    return out


def _embed(chart: SelfAdjointChart, chart_k: SelfAdjointChart, u: np.ndarray) -> np.ndarray:
    """Coordinates of a homogeneous element inside the full chart."""
    pos = {key: i for i, key in enumerate(chart.coords)}
    v = np.zeros(chart.dim)
    for i, key in enumerate(chart_k.coords):
        v[pos[key]] = u[i]
    return v


def _ball_cloud(chart: SelfAdjointChart, charts_k, degrees, dirs_k, lip_vals,
                mixes: np.ndarray, mix_pick: np.ndarray) -> np.ndarray:
    """Boundary points of the adjusted-seminorm ball: normalized homogeneous
    directions and convex mixtures of them, with their negatives."""
    pts = []
    boundary_k = {}
    for k in degrees:
        rows = []
        for i, u in enumerate(dirs_k[k]):
            val = lip_vals[k][i]
            if not val > 1e-12:
                raise ValueError(f"degenerate direction at degree {k}")
            rows.append(_embed(chart, charts_k[k], u) / val)
        boundary_k[k] = rows
        pts.extend(rows)
    for w, picks in zip(mixes, mix_pick):
        z = np.zeros(chart.dim)
        for pos_k, k in enumerate(degrees):
            z = z + w[pos_k] * boundary_k[k][int(picks[pos_k]) % len(boundary_k[k])]
        pts.append(z)
    arr = np.array(pts)
    return np.vstack([arr, -arr])
