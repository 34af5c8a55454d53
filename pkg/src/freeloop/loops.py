"""Loop algebra of a weighted pointed graph in its Wick basis.

Elements are finite combinations of Wick words, one per basepoint loop.
Acting on the loop sector of the Fock space, the word of a loop sends the
vacuum to that loop, so an element's coefficient vector can be read off
its first matrix column; this makes the loop basis orthonormal for the
vacuum trace and keeps all realizations sparse and exact below an
explicit degree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
import scipy.sparse as sp

from .graphs import DirectedDouble
from .fock import (
    DEFAULT_BASIS_BUDGET,
    GradedBasis,
    GradedOperator,
    InsufficientDepthError,
    _extend_by_degree,
    edge_element,
    hop_amplitude,
    path_amplitude,
    vertex_projector,
)
from .numerics import euclidean_norm, rng_from_seed


class LoopBasis(GradedBasis):
    """Basepoint loops of length at most the cutoff, degree-major order."""


def enumerate_loops(double: DirectedDouble, cutoff: int,
                    max_size: int = DEFAULT_BASIS_BUDGET) -> LoopBasis:
    paths = _extend_by_degree(double, cutoff, [(0,)], max_size)
    tg = lambda p: p[0] if len(p) == 1 else double.edges[p[-1]].target
    return LoopBasis(double, cutoff, [p for p in paths if tg(p) == 0])


def reverse_path(double: DirectedDouble, path: tuple[int, ...]) -> tuple[int, ...]:
    if len(path) == 1:
        return path
    target = double.edges[path[-1]].target
    return (target,) + tuple(double.opposite(e) for e in reversed(path[1:]))


# -- algebra elements ----------------------------------------------------------

@dataclass(frozen=True)
class AlgebraElement:
    """Finite combination of Wick words, keyed by basepoint loop."""

    double: DirectedDouble
    coeffs: Mapping[tuple[int, ...], complex]

    @staticmethod
    def from_loop(double: DirectedDouble, loop: tuple[int, ...],
                  coeff: complex = 1.0) -> "AlgebraElement":
        return AlgebraElement(double, {tuple(loop): complex(coeff)})

    @staticmethod
    def unit(double: DirectedDouble) -> "AlgebraElement":
        return AlgebraElement(double, {(0,): 1.0 + 0.0j})

    @property
    def degree(self) -> int:
        return max((len(p) - 1 for p in self.coeffs), default=0)

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        assert self.double is other.double
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0.0) + v
        return AlgebraElement(self.double, {k: v for k, v in out.items() if v != 0})

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        return self + other.scaled(-1.0)

    def scaled(self, c: complex) -> "AlgebraElement":
        return AlgebraElement(self.double, {k: complex(c) * v for k, v in self.coeffs.items()})

    def star(self) -> "AlgebraElement":
        return AlgebraElement(self.double,
                              {reverse_path(self.double, p): v.conjugate()
                               for p, v in self.coeffs.items()})

    def homogeneous_component(self, k: int) -> "AlgebraElement":
        return AlgebraElement(self.double,
                              {p: v for p, v in self.coeffs.items() if len(p) - 1 == k})

    def degrees(self) -> list[int]:
        return sorted({len(p) - 1 for p in self.coeffs})

    def is_selfadjoint(self, tol: float = 1e-12) -> bool:
        s = self.star()
        keys = set(self.coeffs) | set(s.coeffs)
        return all(abs(self.coeffs.get(k, 0) - s.coeffs.get(k, 0)) <= tol for k in keys)


def tr0(a: AlgebraElement) -> complex:
    """Vacuum trace: the coefficient of the empty loop."""
    return complex(a.coeffs.get((0,), 0.0))


def l2_norm(a: AlgebraElement) -> float:
    """Trace 2-norm; the Wick words are orthonormal."""
    return euclidean_norm(np.array(list(a.coeffs.values()) or [0.0], dtype=np.complex128))


def element_to_json(a: AlgebraElement) -> dict:
    out = {}
    for p, v in sorted(a.coeffs.items(), key=lambda kv: (len(kv[0]), kv[0])):
        key = ",".join(str(e) for e in p[1:])
        out[key] = [float(v.real), float(v.imag)]
    return out


def element_from_json(double: DirectedDouble, doc: Mapping) -> AlgebraElement:
    coeffs = {}
    for key, pair in doc.items():
        edges = tuple(int(t) for t in key.split(",")) if key else ()
        loop = (0,) + edges if edges else (0,)
        src = 0 if not edges else double.edges[edges[0]].source
        if src != 0:
            raise ValueError(f"loop key {key!r} does not start at the basepoint")
        coeffs[loop] = complex(pair[0], pair[1])
    return AlgebraElement(double, coeffs)


def random_homogeneous(ws: "GnsWorkspace", degree: int, seed: int,
                       index: int = 0, normalize: bool = True) -> AlgebraElement:
    """Random degree-homogeneous element with complex gaussian coefficients.

    Deterministic in (seed, degree, index); unit trace 2-norm unless
    normalize is off.
    """
    loops = [p for p in ws.basis.elements if len(p) - 1 == degree]
    if not loops:
        raise ValueError(f"no loops of degree {degree} at cutoff {ws.cutoff}")
    rng = rng_from_seed(seed, degree, index)
    z = rng.standard_normal((len(loops), 2))
    a = AlgebraElement(ws.double, {p: complex(z[i, 0], z[i, 1])
                                   for i, p in enumerate(loops)})
    return a.scaled(1.0 / l2_norm(a)) if normalize else a


# -- Wick words ----------------------------------------------------------------

def wick_word_terms(double: DirectedDouble, loop: tuple[int, ...]) -> list[tuple[tuple[int, ...], tuple[int, ...], float]]:
    """Splittings loop = prefix * suffix with amplitude a(prefix) / a(suffix)."""
    edges = loop[1:]
    terms = []
    for j in range(len(edges) + 1):
        pre = edges[:j]
        suf = edges[j:]
        mid = double.edges[suf[0]].source if suf else (
            double.edges[pre[-1]].target if pre else loop[0])
        rho = ((loop[0],) + pre) if pre else (loop[0],)
        tau = ((mid,) + suf) if suf else (mid,)
        coeff = path_amplitude(double, rho) * path_amplitude(double, reverse_path(double, tau))
        terms.append((rho, tau, coeff))
    return terms


@dataclass
class WickWord:
    loop: tuple[int, ...]
    terms: list[tuple[tuple[int, ...], tuple[int, ...], float]]
    realized: GradedOperator


def _prefix_strip_entries(basis: GradedBasis, rho: tuple[int, ...], tau: tuple[int, ...],
                          coeff: float) -> tuple[list[int], list[int], list[float]]:
    """Entries of the partial isometry: strip the reversed suffix, prepend the prefix."""
    dd = basis.double
    tau_op = reverse_path(dd, tau)
    t_edges = tau_op[1:]
    nt = len(t_edges)
    nr = len(rho) - 1
    depth = basis.depth
    rows, cols, data = [], [], []
    for i, p in enumerate(basis.elements):
        if p[0] != tau_op[0] or p[1:1 + nt] != t_edges:
            continue
        if (len(p) - 1) - nt + nr > depth:
            continue
        rest = p[1 + nt:]
        newp = (rho[0],) + rho[1:] + rest
        j = basis.index.get(newp)
        if j is not None:
            rows.append(j)
            cols.append(i)
            data.append(coeff)
    return rows, cols, data


def wick_direct(loop: tuple[int, ...], basis: GradedBasis) -> WickWord:
    """Realize the Wick word of a loop from its splitting terms."""
    dd = basis.double
    terms = wick_word_terms(dd, loop)
    rows: list[int] = []
    cols: list[int] = []
    data: list[float] = []
    for rho, tau, coeff in terms:
        r, c, d = _prefix_strip_entries(basis, rho, tau, coeff)
        rows += r
        cols += c
        data += d
    n = len(basis)
    mat = sp.coo_matrix((np.asarray(data, dtype=np.complex128),
                         (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
                        shape=(n, n)).tocsr()
    k = len(loop) - 1
    op = GradedOperator(basis, mat, k, k, basis.depth - k)
    return WickWord(loop, terms, op)


def wick_recursive(loop: tuple[int, ...], basis: GradedBasis,
                   _memo: dict | None = None) -> WickWord:
    """Realize the Wick word by peeling edges off the front.

    Multiplying by an edge element either extends the word or, when the
    edge cancels against the word's first letter, contracts it with the
    squared hop amplitude of the cancelled letter.

    The intermediate words are based at interior vertices of the loop, so
    `basis` must contain all paths, not only basepoint loops.
    """
    dd = basis.double
    memo = {} if _memo is None else _memo

    def realize(p: tuple[int, ...]) -> GradedOperator:
        if p in memo:
            return memo[p]
        if len(p) == 1:
            op = vertex_projector(basis, p[0])
        else:
            eid = p[1]
            e = dd.edges[eid]
            rest = (e.target,) + p[2:]
            op = edge_element(basis, eid) @ realize(rest)
            if len(rest) > 1 and rest[1] == dd.opposite(eid):
                opp = dd.opposite(eid)
                shorter = (dd.edges[rest[1]].target,) + rest[2:]
                op = op - realize(shorter).scaled(hop_amplitude(dd, opp) ** 2)
        memo[p] = op
        return op

    op = realize(tuple(loop))
    return WickWord(tuple(loop), wick_word_terms(dd, tuple(loop)), op)


# -- GNS workspace -------------------------------------------------------------

class GnsWorkspace:
    """Loop-sector realizations at a fixed cutoff, with per-word caching."""

    def __init__(self, double: DirectedDouble, cutoff: int,
                 max_size: int = DEFAULT_BASIS_BUDGET):
        self.double = double
        self.cutoff = cutoff
        self.basis = enumerate_loops(double, cutoff, max_size=max_size)
        self._entries: dict[tuple[int, ...], tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        # prefix index: edge tuple -> loop indices having that prefix
        self._prefix: dict[tuple[int, ...], list[int]] = {}
        for i, p in enumerate(self.basis.elements):
            edges = p[1:]
            for j in range(len(edges) + 1):
                self._prefix.setdefault(edges[:j], []).append(i)

    @property
    def vacuum_index(self) -> int:
        return self.basis.index[(0,)]

    def word_entries(self, loop: tuple[int, ...]):
        loop = tuple(loop)
        cached = self._entries.get(loop)
        if cached is not None:
            return cached
        dd = self.double
        basis = self.basis
        depth = basis.depth
        rows, cols, data = [], [], []
        for rho, tau, coeff in wick_word_terms(dd, loop):
            tau_op = reverse_path(dd, tau)
            t_edges = tau_op[1:]
            nt = len(t_edges)
            rho_edges = rho[1:]
            nr = len(rho_edges)
            for i in self._prefix.get(t_edges, ()):
                p = basis.elements[i]
                if (len(p) - 1) - nt + nr > depth:
                    continue
                newp = (0,) + rho_edges + p[1 + nt:]
                j = basis.index.get(newp)
                if j is not None:
                    rows.append(j)
                    cols.append(i)
                    data.append(coeff)
        out = (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64),
               np.asarray(data, dtype=np.complex128))
        self._entries[loop] = out
        return out

    def realize(self, a: AlgebraElement) -> GradedOperator:
        """Assemble the loop-sector matrix of an element."""
        n = len(self.basis)
        rows = [np.zeros(0, dtype=np.int64)]
        cols = [np.zeros(0, dtype=np.int64)]
        data = [np.zeros(0, dtype=np.complex128)]
        for loop, c in sorted(a.coeffs.items(), key=lambda kv: (len(kv[0]), kv[0])):
            r, cix, d = self.word_entries(loop)
            rows.append(r)
            cols.append(cix)
            data.append(d * c)
        mat = sp.coo_matrix((np.concatenate(data),
                             (np.concatenate(rows), np.concatenate(cols))),
                            shape=(n, n)).tocsr()
        k = a.degree
        return GradedOperator(self.basis, mat, k, k, self.cutoff - k)

    def vector_of(self, a: AlgebraElement) -> np.ndarray:
        v = np.zeros(len(self.basis), dtype=np.complex128)
        for loop, c in a.coeffs.items():
            i = self.basis.index.get(tuple(loop))
            if i is None:
                raise InsufficientDepthError(
                    f"loop of length {len(loop) - 1} exceeds cutoff {self.cutoff}")
            v[i] = c
        return v

    def element_of(self, vec: np.ndarray, tol: float = 0.0) -> AlgebraElement:
        coeffs = {}
        for i, c in enumerate(vec):
            if abs(c) > tol:
                coeffs[self.basis.elements[i]] = complex(c)
        return AlgebraElement(self.double, coeffs)

    def multiply(self, a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
        """Product in Wick coordinates via the vacuum column; exact when the
        degrees fit under the cutoff."""
        if a.degree + b.degree > self.cutoff:
            raise InsufficientDepthError(
                f"product degree {a.degree + b.degree} exceeds cutoff {self.cutoff}")
        vec = self.realize(a).matrix.dot(self.vector_of(b))
        return self.element_of(vec)


def act_on_gns(a: AlgebraElement, cutoff: int,
               workspace: GnsWorkspace | None = None) -> GradedOperator:
    ws = workspace if workspace is not None and workspace.cutoff == cutoff else \
        GnsWorkspace(a.double, cutoff)
    return ws.realize(a)


def loop_gram(workspace: GnsWorkspace, max_degree: int | None = None) -> np.ndarray:
    """Gram matrix of the Wick words in the vacuum trace inner product."""
    basis = workspace.basis
    kmax = workspace.cutoff if max_degree is None else max_degree
    keep = [i for i, p in enumerate(basis.elements) if len(p) - 1 <= kmax]
    cols = []
    for i in keep:
        w = AlgebraElement.from_loop(workspace.double, basis.elements[i])
        vec = workspace.realize(w).matrix.getcol(workspace.vacuum_index).toarray().ravel()
        cols.append(vec)
    M = np.array(cols).T
    return M.conj().T @ M


# -- change of basis -----------------------------------------------------------

@dataclass
class ChangeOfBasis:
    basis: LoopBasis
    x_in_y: np.ndarray   # column j: Wick coefficients of the plain edge word of loop j
    y_in_x: np.ndarray   # inverse, same ordering

    def check(self, tol: float = 1e-12) -> float:
        n = self.x_in_y.shape[0]
        r1 = np.max(np.abs(self.x_in_y @ self.y_in_x - np.eye(n)))
        r2 = np.max(np.abs(self.y_in_x @ self.x_in_y - np.eye(n)))
        return float(max(r1, r2))


def _edge_word_in_wick(double: DirectedDouble, loop: tuple[int, ...]) -> dict[tuple[int, ...], float]:
    """Expand a product of edge elements over a loop into Wick coordinates.

    Multiplying on the left by an edge element turns a Wick word into the
    extended word plus the squared-amplitude contraction when the first
    letter cancels; iterating from the right end of the loop keeps every
    intermediate term a word, so the expansion is exact."""
    state: dict[tuple[int, ...], float] = {(0,): 1.0}
    for eid in reversed(loop[1:]):
        e = double.edges[eid]
        opp = double.opposite(eid)
        amp2 = hop_amplitude(double, opp) ** 2
        nxt: dict[tuple[int, ...], float] = {}
        for p, c in state.items():
            if e.target == p[0]:
                grown = (e.source,) + (eid,) + p[1:]
                nxt[grown] = nxt.get(grown, 0.0) + c
                if len(p) > 1 and p[1] == opp:
                    shrunk = (double.edges[p[1]].target,) + p[2:]
                    nxt[shrunk] = nxt.get(shrunk, 0.0) + c * amp2
        state = nxt
    return state


def change_of_basis(double: DirectedDouble, cutoff: int,
                    max_size: int = DEFAULT_BASIS_BUDGET) -> ChangeOfBasis:
    """Triangular dictionaries between plain edge words and Wick words on loops."""
    basis = enumerate_loops(double, cutoff, max_size=max_size)
    n = len(basis)
    M = np.zeros((n, n))
    for j, loop in enumerate(basis.elements):
        for p, c in _edge_word_in_wick(double, loop).items():
            M[basis.index[p], j] = c
    W = np.linalg.solve(M, np.eye(n))
    return ChangeOfBasis(basis, M, W)


# -- grading operators ---------------------------------------------------------

def number_operator(basis: GradedBasis) -> GradedOperator:
    """Diagonal operator multiplying each basis path by its length."""
    mat = sp.diags(basis.lengths.astype(np.complex128), format="csr")
    return GradedOperator(basis, mat, 0, 0, basis.depth)


def degree_projector(basis: GradedBasis, d: int) -> GradedOperator:
    diag = (basis.lengths == d).astype(np.complex128)
    return GradedOperator(basis, sp.diags(diag, format="csr"), 0, 0, basis.depth)
