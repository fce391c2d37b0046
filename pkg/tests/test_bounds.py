import csv
import io
import json
import math

import numpy as np
import pytest
import scipy.linalg

from expik import (BasisFamily, ContractViolation, PowerSeriesProgram, SeparableProfile,
                   basis_residual, basis_residual_quadrature, bound_report, conditioning_check,
                   convergence_indicator, eps_elementwise_bound, eval_basis, expansion_coeffs,
                   hessenberg, phi_matrix, phi_norm_bound, tail_bound, truncation_bound_bessel,
                   wk_growth_bounds)
from expik.bounds import BoundReport, chebyshev_eigenvectors, growth_constant, max_modulus

J, I = BasisFamily.BESSEL_J, BasisFamily.BESSEL_I
T = PowerSeriesProgram.t()


# -- truncation bound ---------------------------------------------------------

def test_truncation_bound_examples():
    assert truncation_bound_bessel(3, 0.0) == 0.0
    assert abs(truncation_bound_bessel(4, 2.0) - 0.17416) < 5e-6
    assert truncation_bound_bessel(60, 8.0) < 1e-20


@pytest.mark.parametrize("family", [J, I])
def test_truncation_bound_dominates(family):
    for N in (1, 3, 8, 20):
        for t in (0.1, 1.0, 4.0, 8.0):
            bound = truncation_bound_bessel(N, t)
            assert np.linalg.norm(basis_residual_quadrature(family, N, t)) <= bound
            # the direct difference cannot resolve values below its rounding level
            floor = 64 * np.finfo(float).eps * np.linalg.norm(eval_basis(family, N, t))
            assert np.linalg.norm(basis_residual(family, N, t)) <= bound + floor


def test_bounds_finite_far_out():
    for N in (100, 300, 500):
        assert math.isfinite(truncation_bound_bessel(N, 8.0))
        assert math.isfinite(tail_bound(N))
        assert np.all(np.isfinite(wk_growth_bounds(3.0, 0.5, N)))
        assert math.isfinite(eps_elementwise_bound(N, N // 2, 8.0))


# -- element-wise bound -------------------------------------------------------

def test_eps_elementwise_example():
    b = eps_elementwise_bound(6, 3, 2.0, R=4.0)
    assert 0 < b < math.inf
    assert abs(basis_residual(J, 6, 2.0)[2]) <= b


def test_eps_elementwise_rejects_small_R():
    with pytest.raises(ContractViolation):
        eps_elementwise_bound(6, 3, 2.0, R=2.0)
    with pytest.raises(ContractViolation):
        eps_elementwise_bound(6, 7, 2.0)


def test_eps_elementwise_decays_with_N():
    for k in (1, 3):
        for t in (0.5, 2.0):
            vals = [eps_elementwise_bound(N, k, t, R=4.0) for N in range(k, 40)]
            assert all(b <= a for a, b in zip(vals, vals[1:]))
    assert eps_elementwise_bound(40, 40, 1.0) < 1e-40


@pytest.mark.parametrize("family", [J, I])
def test_eps_elementwise_dominates(family):
    for N in (2, 6, 12):
        for t in (0.5, 2.0, 5.0):
            eps = basis_residual(family, N, t)
            floor = 64 * np.finfo(float).eps
            for k in range(1, N + 1):
                assert abs(eps[k - 1]) <= eps_elementwise_bound(N, k, t, family=family) + floor


# -- coefficient growth -------------------------------------------------------

def test_wk_regimes():
    K = 15
    b = wk_growth_bounds(3.0, 2.0, K)
    np.testing.assert_allclose(b, [3.0 * math.factorial(k) for k in range(K)], rtol=1e-12)
    small = wk_growth_bounds(1.0, 1.0, 5)
    np.testing.assert_allclose(small, [math.factorial(k) * 2.0 ** k for k in range(5)], rtol=1e-12)
    b4 = wk_growth_bounds(1.0, 4.0, 11)
    assert b4[10] / math.factorial(10) < 1
    assert b4[10] == pytest.approx(2 * math.factorial(10) * 0.5 ** 10, rel=1e-12)


def test_wk_exp_example():
    w = expansion_coeffs(I, np.ones((1, 20))).W[0]
    bound = wk_growth_bounds(math.e, 1.0, 20)
    assert np.all(np.abs(w[1:]) == 2)
    assert np.all(np.abs(w) <= bound)


@pytest.mark.parametrize("family", [J, I])
@pytest.mark.parametrize("profile", [T.exp(), (2j * T).sin(), T.square() + 1, (0.5 * T).cos().square()])
@pytest.mark.parametrize("t", [0.5, 2.0, 3.0, 6.0])
def test_wk_dominates(family, profile, t):
    src = SeparableProfile([(profile, [1.0, -0.5j])])
    W = expansion_coeffs(family, src.derivatives(25)).W
    bound = wk_growth_bounds(max_modulus(src, t), t, 25)
    # constant and quadratic profiles attain the bound, allow rounding only
    assert np.all(np.linalg.norm(W, axis=0) <= bound * (1 + 1e-12))


def test_max_modulus_of_exp():
    src = SeparableProfile([(T.exp(), [3.0, 4.0])])
    assert max_modulus(src, 2.0) == pytest.approx(5 * math.exp(2.0), rel=1e-12)


def test_growth_constant():
    src = SeparableProfile([((2 * T).exp(), [1.0])])
    # ||g^(l)|| = 2^l, so c = max_l (2/||A||)^l
    assert growth_constant(src, 2.0, 10) == pytest.approx(1.0)
    assert growth_constant(src, 1.0, 5) == pytest.approx(16.0)


# -- phi and tail bounds ------------------------------------------------------

def test_phi_bound_examples():
    assert phi_norm_bound(1, np.array([[0.0, 1.0], [-1.0, 0.0]])) == pytest.approx(1.0)
    assert phi_norm_bound(3, np.array([[-5.0]])) == pytest.approx(1 / 6)
    assert phi_norm_bound(2, np.array([[1.0]])) == pytest.approx(math.e / 2)
    assert abs(phi_matrix(2, np.array([[1.0]]))[0, 0]) == pytest.approx(math.e - 2)


def test_phi_bound_dominates_random():
    rng = np.random.default_rng(1)
    for _ in range(30):
        n = int(rng.integers(1, 7))
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        for ell in (1, 2, 4):
            assert np.linalg.norm(phi_matrix(ell, A), 2) <= phi_norm_bound(ell, A) * (1 + 1e-12)


def test_tail_bound_examples():
    assert tail_bound(1) == pytest.approx(2 * (1 + math.sqrt(2)), rel=1e-14)
    assert tail_bound(4) == pytest.approx(135.88, abs=0.01)


@pytest.mark.parametrize("family", [J, I])
def test_tail_bound_dominates(family):
    for N in range(1, 11):
        H = hessenberg(family, N)
        K = np.column_stack([np.linalg.matrix_power(H, j)[:, 0] for j in range(N)])
        for k in (N, N + 5):
            v = np.linalg.matrix_power(H, k)[:, 0]
            x = scipy.linalg.solve_triangular(K, v)
            assert np.linalg.norm(x) <= tail_bound(N)


# -- conditioning -------------------------------------------------------------

@pytest.mark.parametrize("family", [J, I])
@pytest.mark.parametrize("N", [2, 4, 8, 16, 32])
def test_kappa_is_sqrt2(family, N):
    kappa, _ = conditioning_check(family, N, t_grid=[0.0])
    assert abs(kappa - math.sqrt(2)) <= 1e-8


@pytest.mark.parametrize("family", [J, I])
def test_chebyshev_eigenpairs(family):
    N = 8
    lam, V = chebyshev_eigenvectors(family, N)
    H = hessenberg(family, N)
    assert np.max(np.abs(H @ V - V * lam)) <= 1e-13
    if family is I:
        assert np.all(np.abs(lam.imag) == 0) and np.all(np.abs(lam.real) < 1)
        np.testing.assert_allclose(np.sort(np.linalg.eigvals(H).real), np.sort(lam.real),
                                   atol=1e-12)


def test_besselj_exponential_stays_below_sqrt2():
    _, ratio = conditioning_check(J, 16)
    assert ratio <= math.sqrt(2)


# -- indicator and report -----------------------------------------------------

def test_indicator_examples():
    assert convergence_indicator(np.diag([2.0]), 2.0) == 0.0
    F = 3.0 * (np.eye(4) + np.diag(np.ones(3), -1))
    assert math.isfinite(convergence_indicator(F, 3.0))
    with pytest.raises(ContractViolation):
        convergence_indicator(F, 0.0)


def test_indicator_huge_powers():
    F = 1e3 * (np.eye(200) + 0.1 * np.random.default_rng(0).standard_normal((200, 200)))
    assert math.isfinite(convergence_indicator(F, 1e3))


def test_bound_report():
    src = SeparableProfile([(T.sin(), [1.0, 2.0])])
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    rep = bound_report("besselj", 6, 2.0, A=A, src=src, F=np.diag([1.0, 0.5]), rho=1.0)
    assert rep.phi_bound == pytest.approx(1.0)
    assert len(rep.eps_elementwise) == 6 and len(rep.wk_bounds) == 6
    obj = json.loads(rep.dumps())
    assert obj["family"] == "besselj" and obj["N"] == 6
    row = rep.csv_row()
    assert len(row) == len(BoundReport.CSV_FIELDS)
    buf = io.StringIO()
    csv.writer(buf).writerow(row)
    assert buf.getvalue().startswith("besselj,2.0,6,")


def test_bound_report_rejects_negative():
    rep = bound_report("besseli", 3, 1.0)
    rep.tail_bound = -1.0
    with pytest.raises(ContractViolation):
        rep.check()
