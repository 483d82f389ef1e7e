import math

import numpy as np
import numpy.polynomial.chebyshev as npcheb
import pytest
from hypothesis import given, strategies as st

from prodmoment.poly import (Basis, PolyFormatError, SparseChebPoly, cheb_eval_1d, cheb_mul,
                             evaluate, family1, family2, monomial_to_cheb, parse, serialize)


def polys(max_dim=3, max_deg=6, max_terms=6):
    """Random Chebyshev polynomials with a shared dimension drawn first."""
    def build(dim):
        idx = st.tuples(*[st.integers(0, max_deg)] * dim)
        coef = st.floats(-2.0, 2.0, allow_nan=False)
        return st.dictionaries(idx, coef, max_size=max_terms).map(
            lambda t: SparseChebPoly(dim, t))
    return st.integers(1, max_dim).flatmap(lambda d: st.tuples(build(d), build(d)))


class TestChebEval:
    @pytest.mark.parametrize("n, x, expected", [(0, 0.7, 1.0), (2, 0.0, -1.0), (3, 0.5, -1.0)])
    def test_examples(self, n, x, expected):
        assert cheb_eval_1d(n, x) == pytest.approx(expected, abs=1e-14)

    def test_trig_identity(self, rng):
        theta = rng.uniform(0, np.pi, 50)
        for n in range(17):
            np.testing.assert_allclose(cheb_eval_1d(n, np.cos(theta)), np.cos(n * theta),
                                       atol=1e-10)

    def test_outside_interval(self):
        # T_3(2) = 4*8 - 3*2
        assert cheb_eval_1d(3, 2.0) == pytest.approx(26.0)

    def test_negative_degree(self):
        with pytest.raises(ValueError):
            cheb_eval_1d(-1, 0.0)


class TestEvaluate:
    def test_family1_origin(self):
        assert evaluate(family1(2), [0.0, 0.0]) == pytest.approx(-2.0)

    def test_constant(self, rng):
        p = SparseChebPoly(2, {(0, 0): 1.0})
        for x in rng.uniform(-1, 1, (5, 2)):
            assert evaluate(p, x) == 1.0

    def test_family2_value(self):
        assert evaluate(family2(1), [-0.75553]) == pytest.approx(-1.3911, abs=1e-3)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            evaluate(family1(2), [0.0])

    def test_monomial_basis(self):
        p = SparseChebPoly(2, {(2, 1): 3.0}, Basis.MONOMIAL)
        assert evaluate(p, [0.5, -2.0]) == pytest.approx(-1.5)


class TestInvariants:
    def test_zero_coefficients_dropped(self):
        p = SparseChebPoly(1, {(1,): 0.0, (2,): 1e-16, (3,): 1.0})
        assert p.terms == {(3,): 1.0}
        assert p.per_var_degree == 3

    def test_index_length(self):
        with pytest.raises(ValueError):
            SparseChebPoly(2, {(1,): 1.0})

    def test_negative_index(self):
        with pytest.raises(ValueError):
            SparseChebPoly(1, {(-1,): 1.0})

    def test_sorted_terms(self):
        p = SparseChebPoly(2, {(2, 0): 1.0, (0, 1): 2.0, (1, 1): 3.0})
        assert list(p.terms) == sorted(p.terms)


class TestChebMul:
    def test_x_squared(self, rng):
        t1 = SparseChebPoly(1, {(1,): 1.0})
        prod = cheb_mul(t1, t1)
        assert prod.terms == {(0,): 0.5, (2,): 0.5}
        for x in rng.uniform(-1, 1, 10):
            assert evaluate(prod, [x]) == pytest.approx(x * x, abs=1e-14)

    def test_t2_t3(self, rng):
        prod = cheb_mul(SparseChebPoly(1, {(2,): 1.0}), SparseChebPoly(1, {(3,): 1.0}))
        assert prod.terms == {(1,): 0.5, (5,): 0.5}
        for x in rng.uniform(-1, 1, 10):
            assert abs(evaluate(prod, [x]) - cheb_eval_1d(2, x) * cheb_eval_1d(3, x)) <= 1e-12

    def test_identity(self):
        p = family1(2)
        assert cheb_mul(SparseChebPoly(2, {(0, 0): 1.0}), p).terms == p.terms

    def test_matches_numpy_1d(self, rng):
        a, b = rng.normal(size=5), rng.normal(size=4)
        ours = cheb_mul(SparseChebPoly(1, {(k,): c for k, c in enumerate(a)}),
                        SparseChebPoly(1, {(k,): c for k, c in enumerate(b)}))
        ref = npcheb.chebmul(a, b)
        got = np.zeros_like(ref)
        for (k,), c in ours.terms.items():
            got[k] = c
        np.testing.assert_allclose(got, ref, atol=1e-13)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            cheb_mul(family1(1), family1(2))
        with pytest.raises(ValueError):
            cheb_mul(SparseChebPoly(1, {(1,): 1.0}, Basis.MONOMIAL),
                     SparseChebPoly(1, {(1,): 1.0}, Basis.MONOMIAL))

    @given(polys(), st.integers(0, 2**32 - 1))
    def test_pointwise_product(self, pair, seed):
        a, b = pair
        prod = cheb_mul(a, b)
        xs = np.random.default_rng(seed).uniform(-1, 1, (100, a.dimension))
        for x in xs:
            ref = evaluate(a, x) * evaluate(b, x)
            assert abs(evaluate(prod, x) - ref) <= 1e-10 * (1 + abs(ref))


class TestMonomialToCheb:
    @pytest.mark.parametrize("k, expected", [
        (2, {(0,): 0.5, (2,): 0.5}),
        (3, {(1,): 0.75, (3,): 0.25}),
        (0, {(0,): 1.0}),
    ])
    def test_examples(self, k, expected):
        out = monomial_to_cheb(SparseChebPoly(1, {(k,): 1.0}, Basis.MONOMIAL))
        assert out.basis is Basis.CHEBYSHEV
        assert out.terms.keys() == expected.keys()
        for key, c in expected.items():
            assert out.terms[key] == pytest.approx(c, abs=1e-15)

    def test_matches_numpy_poly2cheb(self, rng):
        coef = rng.normal(size=9)
        ours = monomial_to_cheb(SparseChebPoly(1, {(k,): c for k, c in enumerate(coef)},
                                               Basis.MONOMIAL))
        ref = npcheb.poly2cheb(coef)
        for (k,), c in ours.terms.items():
            assert c == pytest.approx(ref[k], abs=1e-12)

    @given(polys(max_deg=7))
    def test_preserves_values(self, pair):
        a, _ = pair
        mono = SparseChebPoly(a.dimension, a.terms, Basis.MONOMIAL)
        cheb = monomial_to_cheb(mono)
        for x in np.random.default_rng(1).uniform(-1, 1, (20, a.dimension)):
            v = evaluate(mono, x)
            assert abs(evaluate(cheb, x) - v) <= 1e-10 * (1 + abs(v))

    def test_wrong_basis(self):
        with pytest.raises(ValueError):
            monomial_to_cheb(family1(1))


def _g_direct(x):
    x = np.asarray(x)
    return np.mean(np.cos(4 * np.arccos(x))) + np.mean(x) ** 3


def _brute_cheb_terms(dim):
    """Chebyshev support of g_D via sympy monomial expansion and poly2cheb per variable."""
    sympy = pytest.importorskip("sympy")
    xs = sympy.symbols(f"x0:{dim}")
    expr = sympy.expand(sum(sympy.chebyshevt(4, x) for x in xs) / dim + (sum(xs) / dim) ** 3)
    out = {}
    for monom, coef in sympy.Poly(expr, *xs).terms():
        parts = [npcheb.poly2cheb([0] * k + [1]) for k in monom]
        for idx in np.ndindex(*[len(q) for q in parts]):
            w = float(coef) * math.prod(q[j] for q, j in zip(parts, idx))
            out[idx] = out.get(idx, 0.0) + w
    return {k: v for k, v in out.items() if abs(v) > 1e-14}


class TestFamilies:
    def test_family1_d1(self):
        assert family1(1).terms == {(2,): 1.0, (8,): -1.0}

    def test_family1_d3(self):
        p = family1(3)
        assert p.n_terms == 4
        for idx in [(2, 0, 0), (0, 2, 0), (0, 0, 2)]:
            assert p.terms[idx] == pytest.approx(1 / 3)
        assert p.terms[(8, 8, 8)] == -1.0
        assert p.per_var_degree == 8

    @pytest.mark.parametrize("dim", [1, 2, 5, 17, 40])
    def test_family1_origin_and_count(self, dim):
        p = family1(dim)
        assert p.n_terms == dim + 1
        assert evaluate(p, np.zeros(dim)) == pytest.approx(-2.0)

    def test_family2_d1(self):
        p = family2(1)
        assert p.terms.keys() == {(1,), (3,), (4,)}
        assert p.terms[(4,)] == pytest.approx(1.0)
        assert p.terms[(3,)] == pytest.approx(0.25)
        assert p.terms[(1,)] == pytest.approx(0.75)

    @pytest.mark.parametrize("dim", [1, 2, 3, 6, 10])
    def test_family2_value(self, dim):
        assert evaluate(family2(dim), np.full(dim, -0.75553)) == pytest.approx(-1.3911, abs=1e-3)

    def test_family2_direct(self, rng):
        p = family2(2)
        for x in rng.uniform(-1, 1, (20, 2)):
            assert abs(evaluate(p, x) - _g_direct(x)) <= 1e-10

    @pytest.mark.parametrize("dim", [1, 2, 3, 4])
    def test_family2_support_bruteforce(self, dim):
        ref = _brute_cheb_terms(dim)
        p = family2(dim)
        assert set(p.terms) == set(ref)
        for k, v in ref.items():
            assert p.terms[k] == pytest.approx(v, abs=1e-12)
        assert p.per_var_degree == 4


class TestTextFormat:
    def test_parse_family1(self):
        assert parse("poly 1 chebyshev\n1.0 2\n-1.0 8\n").terms == family1(1).terms

    def test_empty_terms(self):
        p = parse("poly 2 chebyshev\n")
        assert p.n_terms == 0
        assert evaluate(p, [0.3, -0.2]) == 0.0

    def test_comments_and_blank_lines(self):
        p = parse("# header comment\n\npoly 1 monomial\n# term\n2.5 3\n")
        assert p.basis is Basis.MONOMIAL and p.terms == {(3,): 2.5}

    @pytest.mark.parametrize("text, line", [
        ("poly 1 chebyshev\n1.0 2\n1.0 2\n", 3),
        ("poly 2 chebyshev\n1.0 2\n", 2),
        ("poly 1 chebyshev\n1.0 -2\n", 2),
        ("poly 1 chebyshev\nnan 2\n", 2),
        ("poly 1 chebyshev\nx 2\n", 2),
        ("poly x chebyshev\n", 1),
        ("poly 1 legendre\n", 1),
        ("1.0 2\n", 1),
    ])
    def test_errors_carry_line(self, text, line):
        with pytest.raises(PolyFormatError) as info:
            parse(text)
        assert info.value.line == line

    def test_missing_header(self):
        with pytest.raises(PolyFormatError):
            parse("# nothing\n")

    @given(polys(max_deg=8))
    def test_round_trip(self, pair):
        a, _ = pair
        back = parse(serialize(a))
        assert back == a
