import io
import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.linalg
import scipy.special
from hypothesis import given, settings
from hypothesis import strategies as st

from expik import (BasisFamily, ContractViolation, basis_residual, basis_residual_quadrature,
                   chebyshev_coeffs, coefficient_map, eval_basis, expansion_coeffs, hessenberg,
                   krylov_matrix)

J, I, MONO = BasisFamily.BESSEL_J, BasisFamily.BESSEL_I, BasisFamily.MONOMIAL


# -- oracles ------------------------------------------------------------------

def chebyshev_closed_form(k):
    """Integer coefficients of T_k from the explicit sum over (2x)^(k-2m)."""
    coeffs = [0] * (k + 1)
    if k == 0:
        coeffs[0] = 1
        return coeffs
    for m in range(k // 2 + 1):
        # k/2 * (-1)^m (k-m-1)! / (m! (k-2m)!) * 2^(k-2m)
        val = Fraction(k, 2) * (-1) ** m * math.factorial(k - m - 1)
        val /= math.factorial(m) * math.factorial(k - 2 * m)
        val *= 2 ** (k - 2 * m)
        assert val.denominator == 1
        coeffs[k - 2 * m] = int(val)
    return coeffs


def bessel_series(ell, t, modified, terms=80):
    """Exact rational partial sum of the defining power series, as a float."""
    x = Fraction(t) / 2
    total = Fraction(0)
    sign = 1 if modified else -1
    for m in range(terms):
        total += sign ** m * x ** (2 * m + ell) / (math.factorial(m) * math.factorial(m + ell))
    return float(total)


# -- generators ---------------------------------------------------------------

def test_hessenberg_examples():
    np.testing.assert_array_equal(hessenberg(MONO, 3), [[0, 0, 0], [1, 0, 0], [0, 1, 0]])
    np.testing.assert_array_equal(hessenberg(J, 3), [[0, -1, 0], [0.5, 0, -0.5], [0, 0.5, 0]])
    np.testing.assert_array_equal(hessenberg(I, 3), [[0, 1, 0], [0.5, 0, 0.5], [0, 0.5, 0]])


def test_hessenberg_rejects_bad_N():
    with pytest.raises(ContractViolation):
        hessenberg(J, 0)


def test_family_parse():
    assert BasisFamily.parse("BesselJ") is J
    assert BasisFamily.parse("bessel_i") is I
    with pytest.raises(ContractViolation):
        BasisFamily.parse("legendre")


@pytest.mark.parametrize("N", [1, 2, 3, 10, 64, 250, 500])
def test_hessenberg_norms(N):
    assert np.linalg.norm(hessenberg(MONO, N), 2) == (1.0 if N > 1 else 0.0)
    for family in (J, I):
        assert np.linalg.norm(hessenberg(family, N), 2) <= 1.5 + 1e-12


# -- basis values -------------------------------------------------------------

def test_eval_basis_examples():
    np.testing.assert_array_equal(eval_basis(J, 4, 0), [1, 0, 0, 0])
    np.testing.assert_array_equal(eval_basis(MONO, 3, 2), [1, 2, 2])
    np.testing.assert_allclose(eval_basis(I, 3, 1), [1.2660658777520082, 0.5651591039924851,
                                                     0.13574766976703828], rtol=1e-14)


@pytest.mark.parametrize("family", [J, I])
@pytest.mark.parametrize("t", [0.25, 1.0, 3.7, 9.0])
def test_eval_basis_matches_power_series(family, t):
    got = eval_basis(family, 25, t)
    ref = [bessel_series(ell, t, family is I) for ell in range(25)]
    scale = math.exp(t) if family is I else 1.0
    np.testing.assert_allclose(got, ref, rtol=0, atol=1e-13 * scale)


@pytest.mark.parametrize("family, fn", [(J, scipy.special.jv), (I, scipy.special.iv)])
@pytest.mark.parametrize("t", [0.5, 12.0, 33.0, 50.0])
def test_eval_basis_matches_scipy(family, fn, t):
    N = 200
    ref = fn(np.arange(N), t)
    scale = math.exp(t) if family is I else 1.0
    np.testing.assert_allclose(eval_basis(family, N, t), ref, rtol=0, atol=1e-12 * scale)


@pytest.mark.parametrize("family", list(BasisFamily))
@pytest.mark.parametrize("N", [1, 2, 5, 12])
@pytest.mark.parametrize("t", [0.3, 1.7, 4.0])
def test_derivative_identity(family, N, t):
    h = 1e-5
    fd = (eval_basis(family, N, t + h) - eval_basis(family, N, t - h)) / (2 * h)
    phi = eval_basis(family, N + 1, t)
    rhs = hessenberg(family, N) @ phi[:N]
    rhs[-1] += family.tail_coefficient(N) * phi[N]
    assert np.max(np.abs(fd - rhs)) <= 1e-6 * max(1.0, np.max(np.abs(phi)))


# -- Chebyshev ----------------------------------------------------------------

def test_chebyshev_examples():
    table = chebyshev_coeffs(5)
    np.testing.assert_array_equal(chebyshev_coeffs(0).row(0), [1])
    np.testing.assert_array_equal(table.row(2), [-1, 0, 2])
    np.testing.assert_array_equal(table.row(5), [0, 5, 0, -20, 0, 16])


def test_chebyshev_closed_form_exact():
    table = chebyshev_coeffs(30)
    for k in range(31):
        assert [int(c) for c in table.row(k)] == chebyshev_closed_form(k)


def test_chebyshev_invariants():
    table = chebyshev_coeffs(40)
    for k in range(1, 41):
        assert table.row(k)[-1] == 2.0 ** (k - 1)
    # T_k(1) = 1, exactly while the coefficients are integers below 2^53
    for k in range(0, 25):
        assert math.fsum(table.row(k)) == 1.0


def test_chebyshev_guard():
    with pytest.raises(ContractViolation):
        chebyshev_coeffs(1001)
    with pytest.raises(ContractViolation):
        chebyshev_coeffs(-1)


def test_chebyshev_csv():
    buf = io.StringIO()
    chebyshev_coeffs(3).to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "k,c0,c1,c2,c3"
    assert lines[4] == "3,0.0,-3.0,0.0,4.0"


# -- Krylov matrices and coefficient maps -------------------------------------

def test_krylov_examples():
    np.testing.assert_array_equal(krylov_matrix(hessenberg(MONO, 3), 3), np.eye(3))
    K = krylov_matrix(hessenberg(I, 3), 3)
    np.testing.assert_array_equal(K, [[1, 0, 0.5], [0, 0.5, 0], [0, 0, 0.25]])
    inv = scipy.linalg.solve_triangular(K, np.eye(3))
    np.testing.assert_array_equal(inv, [[1, 0, -2], [0, 2, 0], [0, 0, 4]])


@pytest.mark.parametrize("family", [J, I])
def test_krylov_inverse_is_chebyshev_table(family):
    for N in range(1, 21):
        K = krylov_matrix(hessenberg(family, N))
        inv = scipy.linalg.solve_triangular(K, np.eye(N))
        C = coefficient_map(family, N)
        assert np.max(np.abs(inv - C)) <= 1e-8 * np.max(np.abs(C))


def test_expansion_coeffs_examples():
    G = np.arange(12).reshape(3, 4) * (1 + 1j)
    np.testing.assert_array_equal(expansion_coeffs(MONO, G).W, G)
    ones = np.ones((1, 5))
    np.testing.assert_array_equal(expansion_coeffs(I, ones).W[0], [1, 2, 2, 2, 2])
    # w_k = 2 sum_l |T_kl| = 2 T_k(i) / i^k; the alternating (1, -2, 2, -2, 2) would
    # be the BesselI weights of exp(-t), not the BesselJ weights of exp(t)
    np.testing.assert_array_equal(expansion_coeffs(J, ones).W[0], [1, 2, 6, 14, 34])


def test_alternating_weights_do_not_reproduce_e():
    N = 30
    w_alt = np.array([1.0] + [2.0 * (-1) ** k for k in range(1, N)])
    w = expansion_coeffs(J, np.ones((1, N))).W[0].real
    phi = eval_basis(J, N, 1.0)
    assert abs(w @ phi - math.e) <= 1e-12
    assert abs(w_alt @ phi - math.e) > 1.0


def test_expansion_coeffs_rejects_nan():
    with pytest.raises(ContractViolation):
        expansion_coeffs(J, np.array([[1.0, np.nan]]))


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(list(BasisFamily)), st.integers(1, 15), st.integers(1, 4),
       st.integers(0, 2**31 - 1))
def test_expansion_coeffs_match_triangular_solve(family, N, n, seed):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n, N)) + 1j * rng.standard_normal((n, N))
    K = krylov_matrix(hessenberg(family, N))
    ref = scipy.linalg.solve_triangular(K.T, G.T, lower=True).T  # G K^{-1}
    W = expansion_coeffs(family, G).W
    assert np.max(np.abs(W - ref)) <= 1e-8 * max(1.0, np.max(np.abs(ref)))


@pytest.mark.parametrize("family", list(BasisFamily))
def test_expansion_of_exp_converges_monotonically(family):
    ts = np.linspace(0, 2, 41)
    errs = []
    for N in range(5, 26):
        w = expansion_coeffs(family, np.ones((1, N))).W[0].real
        errs.append(max(abs(math.exp(t) - w @ eval_basis(family, N, t)) for t in ts))
    floor = 1e-14
    for a, b in zip(errs, errs[1:]):
        assert b <= max(a, floor)
    assert errs[-1] <= floor


# -- residuals ----------------------------------------------------------------

def test_monomial_residual_vanishes():
    assert np.linalg.norm(basis_residual(MONO, 8, 1.5)) <= 1e-12


def test_bessel_residual_example():
    bound = 1 / math.factorial(7) * math.sqrt(2) * 2 * math.e ** 2
    # (t/2)^N = 1 at t = 2, so the bound is sqrt(2) 2 e^2 / 7! = 0.0041467...
    assert abs(bound - 0.0041467077) < 1e-10
    assert np.linalg.norm(basis_residual(J, 6, 2.0)) <= bound


@pytest.mark.parametrize("family", [J, I])
@pytest.mark.parametrize("N", [1, 2, 6, 15])
@pytest.mark.parametrize("t", [0.5, 2.0, 6.0])
def test_residual_matches_quadrature(family, N, t):
    d = basis_residual(family, N, t)
    q = basis_residual_quadrature(family, N, t)
    assert np.linalg.norm(d - q) <= 1e-8
