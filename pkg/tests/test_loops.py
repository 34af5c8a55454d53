import math

import numpy as np
import pytest

from freeloop.fock import InsufficientDepthError, enumerate_paths, hop_amplitude
from freeloop.graphs import directed_double
from freeloop.loops import (
    AlgebraElement,
    GnsWorkspace,
    change_of_basis,
    element_from_json,
    element_to_json,
    enumerate_loops,
    l2_norm,
    loop_gram,
    number_operator,
    degree_projector,
    random_homogeneous,
    reverse_path,
    tr0,
    wick_direct,
    wick_recursive,
)


def catalan(n):
    return math.comb(2 * n, n) // (n + 1)


# -- loop enumeration -----------------------------------------------------------

def test_bouquet_loop_counts(ws_bouquet2):
    for d in range(9):
        assert ws_bouquet2.basis.degree_count(d) == 2 ** d


def test_half_line_loop_counts_are_catalan(a_trunc6):
    dd = directed_double(a_trunc6)
    basis = enumerate_loops(dd, 10)
    for n in range(6):
        assert basis.degree_count(2 * n) == catalan(n)
        assert basis.degree_count(2 * n + 1) == 0


def test_loops_stay_based(ws_a3):
    dd = ws_a3.double
    for p in ws_a3.basis.elements:
        assert p[0] == 0
        if len(p) > 1:
            assert dd.edges[p[-1]].target == 0


def test_reverse_path_involution(ws_a3):
    dd = ws_a3.double
    for p in ws_a3.basis.elements:
        assert reverse_path(dd, reverse_path(dd, p)) == p


# -- element arithmetic -----------------------------------------------------------

def test_star_is_antilinear_involution(ws_bouquet2):
    a = random_homogeneous(ws_bouquet2, 2, seed=3)
    b = random_homogeneous(ws_bouquet2, 3, seed=4)
    c = 0.5 - 2.0j
    assert a.star().star().coeffs == a.coeffs
    lhs = (a.scaled(c) + b).star()
    rhs = a.star().scaled(np.conj(c)) + b.star()
    assert lhs.coeffs == pytest.approx(rhs.coeffs)


def test_homogeneous_components_partition(ws_bouquet2):
    a = random_homogeneous(ws_bouquet2, 1, seed=5) + random_homogeneous(ws_bouquet2, 3, seed=5)
    assert a.degrees() == [1, 3]
    back = a.homogeneous_component(1) + a.homogeneous_component(3)
    assert back.coeffs == a.coeffs
    assert a.homogeneous_component(2).coeffs == {}


def test_selfadjoint_detection(ws_a3):
    a = random_homogeneous(ws_a3, 2, seed=6)
    sym = a + a.star()
    assert sym.is_selfadjoint()
    if not a.is_selfadjoint():
        assert not (a + a.scaled(1j)).is_selfadjoint()


def test_tr0_and_l2(bouquet2):
    dd = directed_double(bouquet2)
    unit = AlgebraElement.unit(dd)
    assert tr0(unit) == 1
    a = unit.scaled(2.0) + AlgebraElement.from_loop(dd, (0, 0, 1), coeff=1j)
    assert tr0(a) == 2.0
    assert l2_norm(a) == pytest.approx(math.sqrt(5))


def test_element_json_roundtrip(ws_bouquet2):
    a = random_homogeneous(ws_bouquet2, 2, seed=8) + AlgebraElement.unit(ws_bouquet2.double)
    doc = element_to_json(a)
    back = element_from_json(ws_bouquet2.double, doc)
    assert back.coeffs == pytest.approx(a.coeffs)


def test_random_homogeneous_is_deterministic(ws_a3):
    a = random_homogeneous(ws_a3, 2, seed=13)
    b = random_homogeneous(ws_a3, 2, seed=13)
    c = random_homogeneous(ws_a3, 2, seed=14)
    assert a.coeffs == b.coeffs
    assert a.coeffs != c.coeffs
    assert l2_norm(a) == pytest.approx(1.0, abs=1e-14)
    assert a.degrees() == [2]


# -- Wick realizations -------------------------------------------------------------

def test_wick_word_hits_vacuum_on_its_loop(ws_a3):
    # the loop realization applied to the vacuum returns exactly that loop
    vac = ws_a3.vacuum_index
    for loop in ws_a3.basis.elements:
        if len(loop) - 1 > ws_a3.cutoff // 2:
            continue
        col = ws_a3.realize(AlgebraElement.from_loop(ws_a3.double, loop)) \
            .matrix.getcol(vac).toarray().ravel()
        want = np.zeros(len(ws_a3.basis))
        want[ws_a3.basis.index[loop]] = 1.0
        assert np.array_equal(col, want.astype(complex))


def test_wick_gram_is_identity(ws_a3, ws_bouquet2):
    for ws in (ws_a3, ws_bouquet2):
        G = loop_gram(ws, max_degree=ws.cutoff // 2)
        assert np.array_equal(G, np.eye(G.shape[0], dtype=complex))


def test_wick_direct_equals_recursive(a3, bouquet2):
    # the recursive route multiplies operators, so it needs the full path basis
    for g in (a3, bouquet2):
        dd = directed_double(g)
        basis = enumerate_paths(dd, 8)
        loops = [p for p in basis.elements
                 if p[0] == 0 and (len(p) == 1 or dd.edges[p[-1]].target == 0)]
        memo = {}
        for loop in loops:
            k = len(loop) - 1
            if k > 4:
                continue
            d = wick_direct(loop, basis)
            r = wick_recursive(loop, basis, _memo=memo)
            exact = min(d.realized.exact_cols, r.realized.exact_cols)
            keep = basis.lengths <= exact
            diff = (d.realized.matrix - r.realized.matrix).toarray()[:, keep]
            assert np.max(np.abs(diff)) < 1e-12


def test_workspace_matches_wick_direct(ws_bouquet2):
    # same entries through the prefix-indexed and the scanning construction
    basis = ws_bouquet2.basis
    for loop in [(0,), (0, 0), (0, 0, 1), (0, 1, 1, 0)]:
        a = ws_bouquet2.realize(AlgebraElement.from_loop(ws_bouquet2.double, loop))
        b = wick_direct(loop, basis).realized
        assert (a.matrix != b.matrix).nnz == 0


def test_realize_is_linear(ws_a3):
    a = random_homogeneous(ws_a3, 2, seed=21)
    b = random_homogeneous(ws_a3, 4, seed=22)
    lhs = ws_a3.realize(a.scaled(2j) + b).matrix
    rhs = (ws_a3.realize(a).matrix * 2j + ws_a3.realize(b).matrix)
    assert abs(lhs - rhs).max() < 1e-15


def test_star_realizes_as_adjoint(ws_a3):
    a = random_homogeneous(ws_a3, 2, seed=23)
    A = ws_a3.realize(a)
    B = ws_a3.realize(a.star())
    top = ws_a3.cutoff - 2
    for m in range(0, top + 1, 2):
        for n in range(0, top + 1, 2):
            assert np.allclose(B.block(m, n), A.block(n, m).conj().T, atol=1e-14)


# -- multiplication -----------------------------------------------------------------

def test_multiply_unit(ws_bouquet2):
    unit = AlgebraElement.unit(ws_bouquet2.double)
    a = random_homogeneous(ws_bouquet2, 3, seed=31)
    assert ws_bouquet2.multiply(unit, a).coeffs == pytest.approx(a.coeffs)
    assert ws_bouquet2.multiply(a, unit).coeffs == pytest.approx(a.coeffs)


def test_multiply_associative(ws_bouquet2):
    a = random_homogeneous(ws_bouquet2, 2, seed=32)
    b = random_homogeneous(ws_bouquet2, 2, seed=33)
    c = random_homogeneous(ws_bouquet2, 2, seed=34)
    lhs = ws_bouquet2.multiply(ws_bouquet2.multiply(a, b), c)
    rhs = ws_bouquet2.multiply(a, ws_bouquet2.multiply(b, c))
    keys = set(lhs.coeffs) | set(rhs.coeffs)
    for k in keys:
        assert lhs.coeffs.get(k, 0) == pytest.approx(rhs.coeffs.get(k, 0), abs=1e-12)


def test_multiply_trace_symmetry(ws_bouquet2):
    a = random_homogeneous(ws_bouquet2, 3, seed=35)
    b = random_homogeneous(ws_bouquet2, 3, seed=36)
    assert tr0(ws_bouquet2.multiply(a, b)) == pytest.approx(tr0(ws_bouquet2.multiply(b, a)), abs=1e-12)


def test_multiply_star_gives_norm(ws_bouquet2):
    a = random_homogeneous(ws_bouquet2, 2, seed=37)
    prod = ws_bouquet2.multiply(a.star(), a)
    assert tr0(prod).real == pytest.approx(l2_norm(a) ** 2, abs=1e-12)
    assert abs(tr0(prod).imag) < 1e-13


def test_multiply_rejects_overflow(ws_bouquet2):
    a = random_homogeneous(ws_bouquet2, 5, seed=38)
    with pytest.raises(InsufficientDepthError):
        ws_bouquet2.multiply(a, a)


# -- change of basis -----------------------------------------------------------------

def test_change_of_basis_unitriangular(a3):
    dd = directed_double(a3)
    cb = change_of_basis(dd, 6)
    M = cb.x_in_y
    assert np.allclose(np.diag(M), 1.0)
    # strictly lower degree only below the diagonal in degree-major order
    lens = cb.basis.lengths
    r, c = np.nonzero(M - np.diag(np.diag(M)))
    assert np.all(lens[r] < lens[c])
    assert cb.check() < 1e-12


def test_change_of_basis_hand_value(a3):
    # X over the loop out-and-back equals its Wick word plus sqrt(w(v2)) times the unit
    dd = directed_double(a3)
    cb = change_of_basis(dd, 4)
    loop = (0, 0, 1)
    j = cb.basis.index[loop]
    col = cb.x_in_y[:, j]
    amp2 = hop_amplitude(dd, dd.opposite(0)) ** 2
    assert col[cb.basis.index[loop]] == pytest.approx(1.0)
    assert col[cb.basis.index[(0,)]] == pytest.approx(amp2)
    assert amp2 == pytest.approx(math.sqrt(a3.weights[1]))
    assert np.count_nonzero(col) == 2


# -- grading operators ----------------------------------------------------------------

def test_number_operator_diagonal(ws_a3):
    N = number_operator(ws_a3.basis)
    assert np.array_equal(N.matrix.diagonal().real, ws_a3.basis.lengths)


def test_degree_projectors_resolve_identity(ws_a3):
    total = sum(degree_projector(ws_a3.basis, d).matrix.toarray()
                for d in range(ws_a3.cutoff + 1))
    assert np.array_equal(total, np.eye(len(ws_a3.basis), dtype=complex))
