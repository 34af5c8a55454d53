"""Truncated path Fock spaces over a directed double.

Basis vectors are composable edge paths graded by length, with length-0
paths standing for vertices.  Distinct paths are orthogonal and the
squared length of a path is the weight of its endpoint; operators are
stored in the orthonormalized basis (path divided by the square root of
its endpoint weight), where creation and annihilation become exact 0/1
matrices because they never move a path's endpoint.

The enumeration order is degree-major, then lexicographic in edge ids
(vertex index for degree zero), which fixes matrix layouts across runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .graphs import DirectedDouble

DEFAULT_BASIS_BUDGET = 2_000_000


class BasisSizeError(RuntimeError):
    """Requested truncation exceeds the element budget."""


class InsufficientDepthError(ValueError):
    """The requested computation cannot be exact at this truncation depth."""


class GradedBasis:
    """Ordered family of paths with degree bookkeeping and index lookup."""

    def __init__(self, double: DirectedDouble, depth: int,
                 elements: Sequence[tuple[int, ...]]):
        self.double = double
        self.depth = depth
        self.elements: tuple[tuple[int, ...], ...] = tuple(elements)
        self.index: dict[tuple[int, ...], int] = {p: i for i, p in enumerate(self.elements)}
        self.lengths = np.array([len(p) - 1 for p in self.elements], dtype=np.int64)
        tg = []
        for p in self.elements:
            tg.append(p[0] if len(p) == 1 else double.edges[p[-1]].target)
        self.targets = np.array(tg, dtype=np.int64)
        self.sources = np.array([p[0] for p in self.elements], dtype=np.int64)
        self._slices: list[slice] = []
        start = 0
        for d in range(depth + 1):
            count = int(np.sum(self.lengths == d))
            self._slices.append(slice(start, start + count))
            start += count

    def __len__(self) -> int:
        return len(self.elements)

    def degree_slice(self, d: int) -> slice:
        if d < 0 or d > self.depth:
            return slice(0, 0)
        return self._slices[d]

    def degree_count(self, d: int) -> int:
        s = self.degree_slice(d)
        return s.stop - s.start


class PathBasis(GradedBasis):
    pass


def _extend_by_degree(double: DirectedDouble, depth: int, seeds: list[tuple[int, ...]],
                      max_size: int) -> list[tuple[int, ...]]:
    out_by_vertex = double.out
    elements = list(seeds)
    frontier = list(seeds)
    edge_targets = [e.target for e in double.edges]
    for _ in range(depth):
        nxt = []
        for p in frontier:
            tail = p[0] if len(p) == 1 else edge_targets[p[-1]]
            for eid in out_by_vertex[tail]:
                nxt.append(p + (eid,))
        elements.extend(nxt)
        if len(elements) > max_size:
            raise BasisSizeError(
                f"basis budget exceeded: more than {max_size} paths at depth {depth}")
        frontier = nxt
        if not frontier:
            break
    return elements


def enumerate_paths(double: DirectedDouble, depth: int,
                    max_size: int = DEFAULT_BASIS_BUDGET) -> PathBasis:
    """All composable paths of length <= depth, from every start vertex."""
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    seeds = [(v,) for v in range(double.graph.n_vertices)]
    return PathBasis(double, depth, _extend_by_degree(double, depth, seeds, max_size))


@dataclass
class GradedOperator:
    """Sparse operator in an orthonormalized graded basis.

    `band` bounds |output degree - input degree| over nonzero blocks,
    `raise_` bounds output minus input degree from above, and columns for
    inputs of degree <= `exact_cols` agree with the untruncated operator.
    """

    basis: GradedBasis
    matrix: sp.csr_matrix
    band: int
    raise_: int
    exact_cols: int

    def __add__(self, other: "GradedOperator") -> "GradedOperator":
        assert self.basis is other.basis
        return GradedOperator(self.basis, (self.matrix + other.matrix).tocsr(),
                              max(self.band, other.band), max(self.raise_, other.raise_),
                              min(self.exact_cols, other.exact_cols))

    def __sub__(self, other: "GradedOperator") -> "GradedOperator":
        return self + other.scaled(-1.0)

    def scaled(self, c: complex) -> "GradedOperator":
        return GradedOperator(self.basis, (self.matrix * c).tocsr(),
                              self.band, self.raise_, self.exact_cols)

    def __matmul__(self, other: "GradedOperator") -> "GradedOperator":
        assert self.basis is other.basis
        depth = self.basis.depth
        exact = min(other.exact_cols,
                    self.exact_cols - max(other.raise_, 0),
                    depth - max(self.raise_, 0) - max(other.raise_, 0))
        return GradedOperator(self.basis, (self.matrix @ other.matrix).tocsr(),
                              self.band + other.band, self.raise_ + other.raise_, exact)

    def adjoint(self) -> "GradedOperator":
        return GradedOperator(self.basis, self.matrix.conjugate().transpose().tocsr(),
                              self.band, self.band, self.exact_cols - self.band)

    def block(self, m: int, n: int) -> np.ndarray:
        rows = self.basis.degree_slice(m)
        cols = self.basis.degree_slice(n)
        return self.matrix[rows, cols].toarray()

    def nonzero_blocks(self) -> Iterable[tuple[int, int]]:
        coo = self.matrix.tocoo()
        lens = self.basis.lengths
        return sorted({(int(lens[r]), int(lens[c])) for r, c in zip(coo.row, coo.col)})


def _op_from_entries(basis: GradedBasis, rows, cols, data, band: int, raise_: int,
                     exact_cols: int) -> GradedOperator:
    n = len(basis)
    mat = sp.coo_matrix((np.asarray(data, dtype=np.complex128),
                         (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
                        shape=(n, n)).tocsr()
    return GradedOperator(basis, mat, band, raise_, exact_cols)


def creation(basis: GradedBasis, edge_id: int) -> GradedOperator:
    """Prepend the edge to paths whose source is its target."""
    dd = basis.double
    e = dd.edges[edge_id]
    rows, cols = [], []
    for i, p in enumerate(basis.elements):
        if p[0] != e.target or len(p) - 1 >= basis.depth:
            continue
        newp = (e.source,) + ((edge_id,) if len(p) == 1 else (edge_id,) + p[1:])
        j = basis.index.get(newp)
        if j is not None:
            rows.append(j)
            cols.append(i)
    return _op_from_entries(basis, rows, cols, np.ones(len(rows)), 1, 1, basis.depth - 1)


def annihilation(basis: GradedBasis, edge_id: int) -> GradedOperator:
    """Strip the edge from paths that start with it; kill the rest."""
    dd = basis.double
    e = dd.edges[edge_id]
    rows, cols = [], []
    for i, p in enumerate(basis.elements):
        if len(p) == 1 or p[1] != edge_id:
            continue
        rest = (e.target,) + p[2:]
        j = basis.index.get(rest)
        if j is not None:
            rows.append(j)
            cols.append(i)
    return _op_from_entries(basis, rows, cols, np.ones(len(rows)), 1, -1, basis.depth)


def vertex_projector(basis: GradedBasis, vertex: int) -> GradedOperator:
    idx = [i for i, p in enumerate(basis.elements) if p[0] == vertex]
    return _op_from_entries(basis, idx, idx, np.ones(len(idx)), 0, 0, basis.depth)


def hop_amplitude(double: DirectedDouble, edge_id: int) -> float:
    """Fourth root of source weight over target weight."""
    e = double.edges[edge_id]
    return (double.weight(e.source) / double.weight(e.target)) ** 0.25


def path_amplitude(double: DirectedDouble, path: tuple[int, ...]) -> float:
    """Edgewise hop amplitudes telescope to the endpoint weight ratio."""
    if len(path) == 1:
        return 1.0
    s = path[0]
    t = double.edges[path[-1]].target
    return (double.weight(s) / double.weight(t)) ** 0.25


def edge_element(basis: GradedBasis, edge_id: int) -> GradedOperator:
    """Weighted creation plus weighted annihilation of the opposite edge."""
    dd = basis.double
    op_id = dd.opposite(edge_id)
    return (creation(basis, edge_id).scaled(hop_amplitude(dd, edge_id))
            + annihilation(basis, op_id).scaled(hop_amplitude(dd, op_id)))


def cond_expectation(op: GradedOperator) -> dict[str, complex]:
    """Diagonal compression to the degree-zero layer, one value per vertex."""
    g = op.basis.double.graph
    out: dict[str, complex] = {}
    for i, p in enumerate(op.basis.elements):
        if len(p) == 1:
            out[g.ids[p[0]]] = complex(op.matrix[i, i])
    return out


def trace_Tr(op: GradedOperator) -> complex:
    """Weighted sum of the conditional expectation over vertices."""
    g = op.basis.double.graph
    e = cond_expectation(op)
    return sum(g.weights[g.index(v)] * e[v] for v in g.ids)


def moments(double: DirectedDouble, word: Sequence[int], n: int,
            depth: int | None = None,
            max_size: int = DEFAULT_BASIS_BUDGET) -> list[complex]:
    """Vacuum moments tr0(x^j), j = 0..n, of x = product of edge elements
    over the word.  Exact provided depth >= n * len(word)."""
    k = len(word)
    need = n * k
    if depth is None:
        depth = need + 1
    if depth < need:
        raise InsufficientDepthError(f"need depth >= {need} for {n} powers of a "
                                     f"length-{k} word, got {depth}")
    basis = enumerate_paths(double, depth, max_size=max_size)
    ops = [edge_element(basis, eid) for eid in word]
    prod = ops[0]
    for o in ops[1:]:
        prod = prod @ o
    vac = basis.index[(0,)]  # basepoint vertex path
    v = np.zeros(len(basis), dtype=np.complex128)
    v[vac] = 1.0
    out = [complex(1.0)]
    for _ in range(n):
        v = prod.matrix.dot(v)
        out.append(complex(v[vac]))
    return out
