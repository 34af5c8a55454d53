"""Diagram algebra of non-crossing pairings with a loop parameter.

Basis diagrams are non-crossing perfect matchings of boundary points on a
line segment.  The product caps the right strands of the left factor
against the left strands of the right factor through nested arcs, each
closed loop contributing the loop parameter.  A one-point derivation into
a bimodule of marked diagrams gives back the degree grading through its
adjoint, and loop counts of the half-line graph control the growth of
the graded dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .graphs import WeightedPointedGraph, dynkin_a_infty


@dataclass(frozen=True)
class NcPairing:
    """Non-crossing perfect matching of points 1..n on a line."""

    n: int
    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pts = sorted(p for ab in self.pairs for p in ab)
        if pts != list(range(1, self.n + 1)):
            raise ValueError(f"pairs do not cover 1..{self.n} exactly once: {self.pairs}")
        norm = tuple(sorted((min(a, b), max(a, b)) for a, b in self.pairs))
        if norm != self.pairs:
            raise ValueError("pairs must be sorted with each pair increasing")
        for a, b in norm:
            for c, d in norm:
                if a < c < b < d:
                    raise ValueError(f"crossing pairs ({a},{b}) and ({c},{d})")

    def partner(self, i: int) -> int:
        for a, b in self.pairs:
            if a == i:
                return b
            if b == i:
                return a
        raise KeyError(i)

    def mirror(self) -> "NcPairing":
        m = self.n
        return NcPairing(m, tuple(sorted((min(m + 1 - a, m + 1 - b), max(m + 1 - a, m + 1 - b))
                                         for a, b in self.pairs)))


@lru_cache(maxsize=None)
def enumerate_pairings(n: int) -> tuple[NcPairing, ...]:
    """All non-crossing perfect matchings of 1..n, deterministic order.

    Odd n gives the empty tuple; n = 0 gives the empty pairing.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n % 2:
        return ()

    def rec(points: tuple[int, ...]) -> list[tuple[tuple[int, int], ...]]:
        if not points:
            return [()]
        a = points[0]
        out = []
        for pos in range(1, len(points), 2):
            b = points[pos]
            inside = points[1:pos]
            outside = points[pos + 1:]
            for pi in rec(inside):
                for po in rec(outside):
                    out.append(tuple(sorted(((a, b),) + pi + po)))
        return out

    return tuple(NcPairing(n, pairs) for pairs in rec(tuple(range(1, n + 1))))


def catalan_number(k: int) -> int:
    return math.comb(2 * k, k) // (k + 1)


@dataclass
class TLElement:
    """Finite combination of diagrams, possibly of mixed degree."""

    delta: float
    coeffs: dict[NcPairing, complex] = field(default_factory=dict)

    @staticmethod
    def basis(delta: float, pairing: NcPairing, coeff: complex = 1.0) -> "TLElement":
        return TLElement(delta, {pairing: complex(coeff)})

    @staticmethod
    def unit(delta: float) -> "TLElement":
        return TLElement(delta, {NcPairing(0, ()): 1.0 + 0.0j})

    def degrees(self) -> list[int]:
        return sorted({p.n for p in self.coeffs})

    def component(self, m: int) -> "TLElement":
        return TLElement(self.delta, {p: c for p, c in self.coeffs.items() if p.n == m})

    def __add__(self, other: "TLElement") -> "TLElement":
        assert self.delta == other.delta
        out = dict(self.coeffs)
        for p, c in other.coeffs.items():
            out[p] = out.get(p, 0.0) + c
        return TLElement(self.delta, {p: c for p, c in out.items() if c != 0})

    def __sub__(self, other: "TLElement") -> "TLElement":
        return self + other.scaled(-1.0)

    def scaled(self, c: complex) -> "TLElement":
        return TLElement(self.delta, {p: complex(c) * v for p, v in self.coeffs.items()})

    def star(self) -> "TLElement":
        return TLElement(self.delta, {p.mirror(): v.conjugate() for p, v in self.coeffs.items()})

    def number_scaled(self) -> "TLElement":
        """Apply the grading operator: scale each component by its degree."""
        return TLElement(self.delta, {p: p.n * v for p, v in self.coeffs.items()})


def _cap_basis(p: NcPairing, q: NcPairing, j: int) -> tuple[NcPairing, int]:
    """Cap the last j points of p against the first j points of q by nested
    arcs; return the boundary pairing and the number of closed loops."""
    m, n = p.n, q.n
    match: dict[tuple[str, int], tuple[str, int]] = {}
    for a, b in p.pairs:
        match[("x", a)] = ("x", b)
        match[("x", b)] = ("x", a)
    for a, b in q.pairs:
        match[("y", a)] = ("y", b)
        match[("y", b)] = ("y", a)
    conn: dict[tuple[str, int], tuple[str, int]] = {}
    for k in range(1, j + 1):
        conn[("x", m + 1 - k)] = ("y", k)
        conn[("y", k)] = ("x", m + 1 - k)

    def renum(node: tuple[str, int]) -> int:
        side, i = node
        return i if side == "x" else m + i - 2 * j

    surviving = [("x", i) for i in range(1, m - j + 1)] + \
                [("y", i) for i in range(j + 1, n + 1)]
    surv = set(surviving)
    visited: set[tuple[str, int]] = set()
    out_pairs = []
    for s in surviving:
        if s in visited:
            continue
        visited.add(s)
        cur = match[s]
        while cur not in surv:
            visited.add(cur)
            nxt = conn[cur]
            visited.add(nxt)
            cur = match[nxt]
        visited.add(cur)
        a, b = renum(s), renum(cur)
        out_pairs.append((min(a, b), max(a, b)))
    loops = 0
    for c in conn:
        if c in visited:
            continue
        loops += 1
        cur = c
        while True:
            visited.add(cur)
            step = match[cur]
            visited.add(step)
            cur = conn[step]
            if cur == c:
                break
    return NcPairing(m + n - 2 * j, tuple(sorted(out_pairs))), loops


def star_product_terms(x: TLElement, y: TLElement) -> dict[int, TLElement]:
    """The product split by the number of capped strand pairs."""
    assert x.delta == y.delta
    delta = x.delta
    terms: dict[int, TLElement] = {}
    for p, cp in x.coeffs.items():
        for q, cq in y.coeffs.items():
            for j in range(0, min(p.n, q.n) + 1):
                res, loops = _cap_basis(p, q, j)
                t = terms.setdefault(j, TLElement(delta, {}))
                t.coeffs[res] = t.coeffs.get(res, 0.0) + cp * cq * (delta ** loops)
    return terms


def star_product(x: TLElement, y: TLElement) -> TLElement:
    out = TLElement(x.delta, {})
    for t in star_product_terms(x, y).values():
        out = out + t
    return out


def tl_trace(x: TLElement) -> complex:
    """Coefficient of the empty diagram."""
    return complex(x.coeffs.get(NcPairing(0, ()), 0.0))


def _union_loops(p: NcPairing, q: NcPairing) -> int:
    """Connected components of the union of two matchings of the same points."""
    assert p.n == q.n
    seen: set[int] = set()
    loops = 0
    for start in range(1, p.n + 1):
        if start in seen:
            continue
        loops += 1
        cur = start
        use_p = True
        while True:
            seen.add(cur)
            cur = p.partner(cur) if use_p else q.partner(cur)
            use_p = not use_p
            if cur == start and use_p:
                break
            seen.add(cur)
    return loops


def gram_matrix(n: int, delta: float) -> np.ndarray:
    """Pairing of basis diagrams: loop parameter to the number of closed
    loops in the union of the two matchings."""
    basis = enumerate_pairings(n)
    G = np.zeros((len(basis), len(basis)))
    for i, p in enumerate(basis):
        for j in range(i, len(basis)):
            val = delta ** _union_loops(p, basis[j])
            G[i, j] = val
            G[j, i] = val
    return G


# -- one-point derivation and its adjoint ----------------------------------------

@dataclass
class KElement:
    """Element of the marked-diagram bimodule, indexed by the split of
    boundary points into a top row, one marked right point, and a bottom row."""

    delta: float
    comps: dict[tuple[int, int], dict[NcPairing, complex]] = field(default_factory=dict)

    def add_to(self, key: tuple[int, int], pairing: NcPairing, coeff: complex) -> None:
        blk = self.comps.setdefault(key, {})
        blk[pairing] = blk.get(pairing, 0.0) + coeff


def derivation(x: TLElement) -> KElement:
    """Mark each boundary point in turn: the component with i top points and
    j bottom points collects the degree-(i+j+1) part of x unchanged."""
    out = KElement(x.delta)
    for p, c in x.coeffs.items():
        m = p.n
        for top in range(m):
            out.add_to((top, m - 1 - top), p, c)
    return out


def _role_map(i_top: int, j_bottom: int) -> dict[int, tuple[str, int]]:
    """Linear boundary point -> role, for a marked component.

    Top points keep their order, the marked point follows them, and the
    bottom row is read backwards from the far end of the line.
    """
    m = i_top + 1 + j_bottom
    roles: dict[int, tuple[str, int]] = {}
    for k in range(1, i_top + 1):
        roles[k] = ("t", k)
    roles[i_top + 1] = ("r", 1)
    for k in range(1, j_bottom + 1):
        roles[m + 1 - k] = ("b", k)
    return roles


def kspace_gram(i_top: int, j_bottom: int, delta: float) -> np.ndarray:
    """Closure pairing of marked components: connect equal roles of the two
    diagrams and count closed loops."""
    m = i_top + 1 + j_bottom
    basis = enumerate_pairings(m)
    roles = _role_map(i_top, j_bottom)
    by_role = {r: pt for pt, r in roles.items()}
    conn = {pt: by_role[roles[pt]] for pt in roles}  # x linear point -> y linear point
    G = np.zeros((len(basis), len(basis)))
    for a, p in enumerate(basis):
        for b, q in enumerate(basis):
            seen: set[tuple[str, int]] = set()
            loops = 0
            for start_pt in range(1, m + 1):
                node = ("x", start_pt)
                if node in seen:
                    continue
                loops += 1
                side, pt = "x", start_pt
                while True:
                    seen.add((side, pt))
                    pt = p.partner(pt) if side == "x" else q.partner(pt)
                    seen.add((side, pt))
                    side, pt = ("y", conn[pt]) if side == "x" else ("x", conn[pt])
                    if (side, pt) == node:
                        break
            G[a, b] = delta ** loops
    return G


def kspace_inner(xi: KElement, eta: KElement) -> complex:
    assert xi.delta == eta.delta
    total = 0.0 + 0.0j
    for key in set(xi.comps) | set(eta.comps):
        i, j = key
        basis = enumerate_pairings(i + 1 + j)
        G = kspace_gram(i, j, xi.delta)
        u = np.array([xi.comps.get(key, {}).get(p, 0.0) for p in basis], dtype=complex)
        v = np.array([eta.comps.get(key, {}).get(p, 0.0) for p in basis], dtype=complex)
        total += v.conjugate() @ (G @ u)
    return complex(total)


def derivation_adjoint(xi: KElement) -> TLElement:
    """Solve the Gram equations blockwise to pull a marked element back."""
    out = TLElement(xi.delta, {})
    for (i, j), blk in sorted(xi.comps.items()):
        m = i + 1 + j
        basis = enumerate_pairings(m)
        if not basis:
            continue
        G = gram_matrix(m, xi.delta)
        GK = kspace_gram(i, j, xi.delta)
        vec = np.array([blk.get(p, 0.0) for p in basis], dtype=complex)
        try:
            a = np.linalg.solve(G, GK @ vec)
        except np.linalg.LinAlgError:
            raise ValueError(f"singular diagram pairing at degree {m}, "
                             f"delta={xi.delta}") from None
        for p, c in zip(basis, a):
            if c != 0:
                out.coeffs[p] = out.coeffs.get(p, 0.0) + complex(c)
    return out


def laplace_number_residual(m: int, delta: float) -> float:
    """Worst entrywise residual of (adjoint of derivation) after derivation
    against degree times identity on the degree-m diagram space."""
    basis = enumerate_pairings(m)
    if not basis:
        return 0.0
    worst = 0.0
    for col, p in enumerate(basis):
        x = TLElement.basis(delta, p)
        back = derivation_adjoint(derivation(x))
        for row, q in enumerate(basis):
            want = m if row == col else 0.0
            got = back.coeffs.get(q, 0.0)
            worst = max(worst, abs(got - want))
    return worst


def commutator_band_identity(x: TLElement, max_degree: int) -> float:
    """Residual of the graded commutator against the weighted cap terms.

    For homogeneous x of degree m and every basis diagram y of degree up
    to max_degree, compare N(x*y) - x*N(y) with sum over j of (m - 2j)
    times the j-cap term.
    """
    degs = x.degrees()
    if len(degs) != 1:
        raise ValueError(f"need homogeneous x, got degrees {degs}")
    m = degs[0]
    worst = 0.0
    for n in range(0, max_degree + 1):
        for q in enumerate_pairings(n):
            y = TLElement.basis(x.delta, q)
            terms = star_product_terms(x, y)
            lhs = TLElement(x.delta, {})
            for t in terms.values():
                lhs = lhs + t.number_scaled()
            lhs = lhs - star_product(x, y.number_scaled())
            rhs = TLElement(x.delta, {})
            for j, t in terms.items():
                rhs = rhs + t.scaled(m - 2 * j)
            diff = lhs - rhs
            if diff.coeffs:
                worst = max(worst, max(abs(c) for c in diff.coeffs.values()))
    return worst


# -- graded dimensions and heat sums ----------------------------------------------

def loop_count_dimension(g: WeightedPointedGraph, n: int) -> int:
    """Number of closed basepoint walks of length 2n, by integer matvecs."""
    A = g.adjacency()
    v = np.zeros(g.n_vertices, dtype=np.int64)
    v[0] = 1
    for _ in range(2 * n):
        v = A @ v
    return int(v[0])


@dataclass(frozen=True)
class ThetaSumRow:
    n: int
    dim: int
    term: float
    bound_term: float
    partial_sum: float
    partial_bound: float
    bounded: bool


@dataclass(frozen=True)
class ThetaSumTable:
    t: float
    delta: float
    rows: tuple[ThetaSumRow, ...]
    all_bounded: bool

    @property
    def total(self) -> float:
        return self.rows[-1].partial_sum if self.rows else 0.0


def theta_sum(t: float, n_max: int, delta: float,
              graph: WeightedPointedGraph | None = None) -> ThetaSumTable:
    """Heat-kernel partial sums of graded dimensions against the loop-
    parameter bound.  Dimensions come from closed walk counts on the
    half-line graph, which is exact for the generic diagram tower."""
    if t <= 0:
        raise ValueError("need t > 0")
    g = graph if graph is not None else dynkin_a_infty(n_max + 2)
    rows = []
    partial = 0.0
    partial_bound = 0.0
    for n in range(n_max + 1):
        dim = loop_count_dimension(g, n)
        term = dim * math.exp(-t * n * n)
        bound = (delta ** (2 * n)) * math.exp(-t * n * n)
        partial += term
        partial_bound += bound
        rows.append(ThetaSumRow(n, dim, term, bound, partial, partial_bound,
                                term <= bound + 1e-12))
    return ThetaSumTable(t, delta, tuple(rows), all(r.bounded for r in rows))
