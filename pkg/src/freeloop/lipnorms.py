"""Seminorms from the degree grading on the loop sector.

The basic seminorm of an element is the operator norm of its commutator
with the number operator, estimated from below by compressions to
increasing loop cutoffs; the trace of estimates is certified nondecreasing.
The adjusted seminorm sums the basic one over homogeneous components of
degree at least one, and a linear-program oracle checks that value against
the convex-hull definition on sampled ball boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .fock import GradedOperator
from .loops import AlgebraElement, GnsWorkspace, l2_norm, reverse_path
from .numerics import rng_from_seed, sigma_max_value

STRUCTURAL_TOL = 1e-9
POWER_TOL = 1e-10
GEOMETRY_REL_TOL = 0.02
BOUNDARY_SLACK = 1e-3


class DegenerateDirectionError(RuntimeError):
    """A sampled direction has zero seminorm but is not scalar."""


def graded_commutator(op: GradedOperator) -> sp.csr_matrix:
    """Matrix of [N, op]: each entry scaled by row degree minus column degree."""
    coo = op.matrix.tocoo()
    lens = op.basis.lengths
    data = coo.data * (lens[coo.row] - lens[coo.col])
    return sp.coo_matrix((data, (coo.row, coo.col)), shape=coo.shape).tocsr()


@dataclass(frozen=True)
class CommutatorEstimate:
    value: float
    trace: tuple[tuple[int, float], ...]   # (cutoff, lower bound), nondecreasing
    converged: bool
    rel_tol: float
    cutoff: int


def commutator_norm(a: AlgebraElement, cutoff: int, rel_tol: float = 1e-6,
                    step: int = 1, workspace: GnsWorkspace | None = None,
                    power_tol: float = POWER_TOL) -> CommutatorEstimate:
    """Sweep of compression lower bounds for the commutator seminorm.

    Compressions to nested cutoffs can only grow, so the sweep is a
    certified nondecreasing chain of lower bounds; `converged` records
    whether the last relative increment fell below `rel_tol`.
    """
    ws = workspace if workspace is not None and workspace.cutoff >= cutoff else \
        GnsWorkspace(a.double, cutoff)
    if a.degree > cutoff:
        raise ValueError(f"element degree {a.degree} exceeds cutoff {cutoff}")
    C = graded_commutator(ws.realize(a))
    lens = ws.basis.lengths
    ks = list(range(a.degree, cutoff + 1, max(1, step)))
    if ks[-1] != cutoff:
        ks.append(cutoff)
    trace = []
    prev = 0.0
    for K in ks:
        nk = int(np.searchsorted(lens, K + 1))
        val = sigma_max_value(C[:nk, :nk], tol=power_tol)
        val = max(val, prev)  # numerically enforce the monotone certificate
        trace.append((K, val))
        prev = val
    converged = False
    if len(trace) >= 2:
        tail_inc = trace[-1][1] - trace[-2][1]
        converged = tail_inc <= rel_tol * max(trace[-1][1], 1e-30)
    return CommutatorEstimate(trace[-1][1], tuple(trace), converged, rel_tol, cutoff)


def lip_value(a: AlgebraElement, ws: GnsWorkspace, power_tol: float = POWER_TOL) -> float:
    """Commutator seminorm at the workspace cutoff, no sweep."""
    return sigma_max_value(graded_commutator(ws.realize(a)), tol=power_tol)


def adjusted_lip(a: AlgebraElement, cutoff: int, rel_tol: float = 1e-6,
                 workspace: GnsWorkspace | None = None) -> float:
    """Sum of the basic seminorm over homogeneous components of degree >= 1."""
    ws = workspace if workspace is not None and workspace.cutoff >= cutoff else \
        GnsWorkspace(a.double, cutoff)
    total = 0.0
    for k in a.degrees():
        if k == 0:
            continue
        total += commutator_norm(a.homogeneous_component(k), cutoff,
                                 rel_tol=rel_tol, workspace=ws).value
    return total


def adjusted_lip_value(a: AlgebraElement, ws: GnsWorkspace,
                       power_tol: float = POWER_TOL) -> float:
    total = 0.0
    for k in a.degrees():
        if k == 0:
            continue
        total += lip_value(a.homogeneous_component(k), ws, power_tol=power_tol)
    return total


# -- Haagerup-type block bounds -------------------------------------------------

@dataclass(frozen=True)
class HaagerupBlockReport:
    degree: int
    m: int
    n: int
    block_norm: float
    l2: float
    margin: float
    in_band: bool
    ok: bool


def haagerup_verify(x: AlgebraElement, m: int, n: int,
                    workspace: GnsWorkspace | None = None,
                    tol: float = STRUCTURAL_TOL) -> HaagerupBlockReport:
    """Check one graded block of a homogeneous element against its 2-norm.

    Blocks vanish identically outside the triangle |m - n| <= degree <= m + n;
    inside, the operator norm of the block is at most the 2-norm.
    """
    degs = [k for k in x.degrees() if x.homogeneous_component(k).coeffs]
    if len(degs) != 1:
        raise ValueError(f"need a homogeneous element, got degrees {degs}")
    k = degs[0]
    cutoff_needed = n + k
    ws = workspace if workspace is not None and workspace.cutoff >= max(cutoff_needed, m) \
        else GnsWorkspace(x.double, max(cutoff_needed, m))
    op = ws.realize(x)
    block = op.matrix[ws.basis.degree_slice(m), ws.basis.degree_slice(n)]
    bnorm = sigma_max_value(block)
    l2 = l2_norm(x)
    in_band = abs(m - n) <= k <= m + n
    if in_band:
        ok = bnorm <= l2 + tol
    else:
        ok = block.nnz == 0
    return HaagerupBlockReport(k, m, n, bnorm, l2, l2 - bnorm, in_band, ok)


def haagerup_sweep(x: AlgebraElement, m_max: int, n_max: int,
                   workspace: GnsWorkspace | None = None,
                   tol: float = STRUCTURAL_TOL) -> list[HaagerupBlockReport]:
    degs = x.degrees()
    k = degs[-1]
    ws = workspace if workspace is not None and workspace.cutoff >= max(n_max + k, m_max) \
        else GnsWorkspace(x.double, max(n_max + k, m_max))
    return [haagerup_verify(x, m, n, workspace=ws, tol=tol)
            for m in range(m_max + 1) for n in range(n_max + 1)]


# -- real coordinates on the self-adjoint part ----------------------------------

class SelfAdjointChart:
    """Real coordinates for self-adjoint combinations of Wick words.

    Loops pair with their reversals; a self-paired loop contributes one
    real coordinate, the ordered representative of a two-element pair
    contributes a real and an imaginary one.
    """

    def __init__(self, workspace: GnsWorkspace, degrees: Sequence[int]):
        self.workspace = workspace
        self.degrees = tuple(sorted(set(degrees)))
        if any(d < 1 or d > workspace.cutoff for d in self.degrees):
            raise ValueError(f"degrees {degrees} outside 1..{workspace.cutoff}")
        dd = workspace.double
        self.coords: list[tuple[tuple[int, ...], str]] = []
        seen = set()
        for p in workspace.basis.elements:
            if (len(p) - 1) not in self.degrees or p in seen:
                continue
            rev = reverse_path(dd, p)
            seen.add(p)
            if rev == p:
                self.coords.append((p, "re"))
            else:
                seen.add(rev)
                self.coords.append((p, "re"))
                self.coords.append((p, "im"))

    @property
    def dim(self) -> int:
        return len(self.coords)

    def to_coords(self, a: AlgebraElement, tol: float = 1e-9) -> np.ndarray:
        if not a.is_selfadjoint(tol=tol):
            raise ValueError("element is not self-adjoint")
        v = np.zeros(self.dim)
        for i, (p, part) in enumerate(self.coords):
            c = complex(a.coeffs.get(p, 0.0))
            v[i] = c.real if part == "re" else c.imag
        return v

    def from_coords(self, vec: np.ndarray) -> AlgebraElement:
        dd = self.workspace.double
        coeffs: dict[tuple[int, ...], complex] = {}
        for i, (p, part) in enumerate(self.coords):
            val = float(vec[i])
            if val == 0.0:
                continue
            c = complex(val, 0.0) if part == "re" else complex(0.0, val)
            rev = reverse_path(dd, p)
            coeffs[p] = coeffs.get(p, 0.0) + c
            if rev != p:
                coeffs[rev] = coeffs.get(rev, 0.0) + c.conjugate()
        return AlgebraElement(dd, coeffs)


# -- ball boundary clouds --------------------------------------------------------

@dataclass
class LipBallCloud:
    chart: SelfAdjointChart
    points: np.ndarray           # rows are boundary coordinates, seminorm 1
    seed: int
    seminorm_tag: str


def sample_lip_ball(chart: SelfAdjointChart, seminorm: Callable[[AlgebraElement], float],
                    count: int, seed: int, tag: str = "L",
                    include_axes: bool = False) -> LipBallCloud:
    """Symmetric cloud of boundary points of the unit seminorm ball.

    Directions are drawn from a splittable counter-based stream and
    rescaled to unit seminorm; a zero seminorm on a nonscalar direction is
    a hard failure since the quotient geometry degenerates.
    """
    rng = rng_from_seed(seed, 0x5EED)
    dirs = []
    if include_axes:
        dirs.extend(np.eye(chart.dim))
    while len(dirs) < count:
        u = rng.standard_normal(chart.dim)
        nu = float(np.sqrt(np.sum(u * u)))
        if nu < 1e-12:
            continue
        dirs.append(u / nu)
    pts = []
    for u in dirs[:max(count, len(dirs))]:
        val = seminorm(chart.from_coords(u))
        if not val > 1e-12:
            raise DegenerateDirectionError(
                f"direction with seminorm {val}; grading seminorm degenerates")
        pts.append(u / val)
        pts.append(-u / val)
    return LipBallCloud(chart, np.array(pts), seed, tag)


# -- Minkowski functional oracle ---------------------------------------------------

@dataclass(frozen=True)
class MinkowskiEstimate:
    value: float
    feasible: bool
    n_points: int
    seed: int


def minkowski_oracle(a: AlgebraElement, workspace: GnsWorkspace,
                     samples: int = 64, seed: int = 0,
                     include_components: bool = True) -> MinkowskiEstimate:
    """Gauge of the convex hull of per-degree unit balls, on sampled points.

    Writes the element as a nonnegative combination of sampled boundary
    points of the homogeneous balls, minimizing total weight by linear
    programming.  With finitely many points this upper-bounds the true
    gauge and converges to it as samples grow.
    """
    degs = [k for k in a.degrees() if k >= 1]
    if not degs:
        return MinkowskiEstimate(0.0, True, 0, seed)
    blocks = []
    rhs = []
    sizes = []
    total_pts = 0
    for pos, k in enumerate(degs):
        comp = a.homogeneous_component(k)
        chart = SelfAdjointChart(workspace, [k])
        cloud = sample_lip_ball(chart, lambda e: lip_value(e, workspace),
                                samples, seed + pos, tag="L")
        pts = [cloud.points]
        if include_components:
            cvec = chart.to_coords(comp)
            cval = lip_value(comp, workspace)
            if cval > 1e-12:
                pts.append(np.array([cvec / cval, -cvec / cval]))
        P = np.vstack(pts)
        blocks.append(P.T)
        rhs.append(chart.to_coords(comp))
        sizes.append(P.shape[0])
        total_pts += P.shape[0]
    dim_total = sum(b.shape[0] for b in blocks)
    A_eq = np.zeros((dim_total, total_pts))
    b_eq = np.concatenate(rhs)
    r0 = c0 = 0
    for B, npts in zip(blocks, sizes):
        A_eq[r0:r0 + B.shape[0], c0:c0 + npts] = B
        r0 += B.shape[0]
        c0 += npts
    res = linprog(np.ones(total_pts), A_eq=A_eq, b_eq=b_eq,
                  bounds=[(0, None)] * total_pts, method="highs")
    if not res.success:
        return MinkowskiEstimate(float("inf"), False, total_pts, seed)
    return MinkowskiEstimate(float(res.fun), True, total_pts, seed)


# -- band and degree tails ---------------------------------------------------------

@dataclass
class TailDecomposition:
    band_min: int
    degree_cut: int
    far: GradedOperator
    near: GradedOperator
    low: AlgebraElement
    high: AlgebraElement
    norms: dict[str, float]


def tail_decompose(a: AlgebraElement, band_min: int, degree_cut: int,
                   workspace: GnsWorkspace) -> TailDecomposition:
    """Split the realized element into far and near band parts, and the
    coefficients into low and high degree parts."""
    op = workspace.realize(a)
    coo = op.matrix.tocoo()
    lens = workspace.basis.lengths
    far_mask = np.abs(lens[coo.row] - lens[coo.col]) >= band_min
    far_mat = sp.coo_matrix((coo.data[far_mask], (coo.row[far_mask], coo.col[far_mask])),
                            shape=coo.shape).tocsr()
    near_mat = (op.matrix - far_mat).tocsr()
    far = GradedOperator(op.basis, far_mat, op.band, op.raise_, op.exact_cols)
    near = GradedOperator(op.basis, near_mat, min(op.band, band_min - 1) if band_min > 0 else 0,
                          op.raise_, op.exact_cols)
    low = AlgebraElement(a.double, {p: c for p, c in a.coeffs.items()
                                    if len(p) - 1 <= degree_cut})
    high = a - low
    norms = {
        "far_op": sigma_max_value(far_mat),
        "near_op": sigma_max_value(near_mat),
        "low_l2": l2_norm(low),
        "high_l2": l2_norm(high),
        "high_op": sigma_max_value(workspace.realize(high).matrix) if high.coeffs else 0.0,
    }
    return TailDecomposition(band_min, degree_cut, far, near, low, high, norms)
