"""Numerical verification sweeps behind ``expik verify-lemmas`` and ``verify-bounds``.

Each sweep returns a plain dict (JSON-ready) with the worst observed
deviation or bound ratio and a ``passed`` flag.
"""
import math

import numpy as np
import scipy.linalg

from .basis import (BasisFamily, basis_residual, basis_residual_quadrature, coefficient_map,
                    eval_basis, expansion_coeffs, hessenberg, krylov_matrix)
from .bounds import (conditioning_check, eps_elementwise_bound, max_modulus, phi_norm_bound,
                     tail_bound, truncation_bound_bessel, wk_growth_bounds)
from .gsource import PowerSeriesProgram, SeparableProfile
from .integrator import infinite_arnoldi, truncated_arnoldi
from .linalg import SparseOperator, phi_matrix

__all__ = [
    "random_profile",
    "random_source",
    "random_problem",
    "chebyshev_identity_report",
    "truncation_equivalence_report",
    "bound_sweep",
]

BESSEL = (BasisFamily.BESSEL_J, BasisFamily.BESSEL_I)
_EPS = np.finfo(float).eps
# rounding allowance for measured-vs-bound comparisons where the bound is attained
_TIE = 1e-12


def random_profile(rng):
    """A random entire scalar profile: a polynomial, exp, sin or cos^2 of a linear argument."""
    T = PowerSeriesProgram.t()
    c = complex(*rng.standard_normal(2))
    kind = rng.integers(4)
    if kind == 0:
        out, mono = PowerSeriesProgram.const(c), PowerSeriesProgram.const(1.0)
        for _ in range(rng.integers(0, 6)):
            mono = mono * T
            out = out + complex(*rng.standard_normal(2)) * mono
        return out
    a = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
    if kind == 1:
        return c * (a * T).exp()
    if kind == 2:
        return c * (a * T).sin()
    return c * (a * T).cos().square()


def random_source(rng, n, terms=None):
    terms = rng.integers(1, 3) if terms is None else terms
    return SeparableProfile(
        [(random_profile(rng), rng.standard_normal(n) + 1j * rng.standard_normal(n))
         for _ in range(terms)])


def random_problem(rng, n_max=30):
    """``(A, src, u0)`` with ``||A||_2 ~ 1`` and a random separable source."""
    n = int(rng.integers(2, n_max + 1))
    M = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    A = SparseOperator.from_dense(M / np.linalg.norm(M, 2))
    u0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return A, random_source(rng, n), u0


def chebyshev_identity_report(max_N=15, families=BESSEL):
    """Compare a triangular solve of ``K_N(H_N, e_1)`` with the closed-form map."""
    rows = []
    for family in families:
        family = BasisFamily.parse(family)
        for N in range(1, max_N + 1):
            K = krylov_matrix(hessenberg(family, N))
            inv = scipy.linalg.solve_triangular(K, np.eye(N), lower=False)
            C = coefficient_map(family, N)
            dev = float(np.max(np.abs(inv - C)) / np.max(np.abs(C)))
            rows.append({"family": family.value, "N": N, "rel_dev": dev})
    worst = max(r["rel_dev"] for r in rows)
    return {"check": "chebyshev_krylov_inverse", "max_N": max_N, "worst_rel_dev": worst,
            "tolerance": 1e-8, "passed": worst <= 1e-8, "rows": rows}


def truncation_equivalence_report(trials=20, seed=0, n_max=30, N_max=12):
    """Infinite Arnoldi versus Arnoldi on the assembled ``A_m``, ``m in {N, N+3, 2N}``."""
    rng = np.random.default_rng(seed)
    rows = []
    families = list(BasisFamily)
    for i in range(trials):
        A, src, u0 = random_problem(rng, n_max)
        family = families[i % len(families)]
        N = int(rng.integers(1, N_max + 1))
        t = float(rng.uniform(0.1, 2.0))
        ref = infinite_arnoldi(A, src, family, u0, t, N)
        for m in sorted({N, N + 3, 2 * N}):
            W = expansion_coeffs(family, src.derivatives(m)).W
            other = truncated_arnoldi(A, W, hessenberg(family, m), u0, t, N,
                                      homogeneous=src.is_zero)
            dev = float(np.linalg.norm(ref.u - other.u) / np.linalg.norm(ref.u))
            rows.append({"trial": i, "family": family.value, "n": A.n, "N": N, "m": m,
                         "t": t, "rel_dev": dev})
    worst = max(r["rel_dev"] for r in rows)
    return {"check": "truncation_equivalence", "trials": trials, "seed": seed,
            "worst_rel_dev": worst, "tolerance": 1e-10, "passed": worst <= 1e-10,
            "rows": rows}


def _ratio_summary(name, ratios, limit=1.0):
    ratios = np.asarray(ratios, dtype=float)
    violations = int(np.sum(ratios > limit))
    return {"check": name, "cases": int(ratios.size), "worst_ratio": float(ratios.max()),
            "violations": violations, "passed": violations == 0}


def bound_sweep(seed=0, N_max=40, t_max=8.0, families=BESSEL, trials=40):
    """Measured quantities against every bound, over families x N x t grids.

    Ratios are ``measured / bound``; a case violates when the ratio exceeds 1.
    Direct residual measurements are allowed their rounding floor
    ``64 eps ||phi_N(t)||`` since the bound drops far below double precision
    for large ``N``; the quadrature measurement gets no allowance.
    """
    rng = np.random.default_rng(seed)
    families = [BasisFamily.parse(f) for f in families]
    t_grid = np.linspace(t_max / 32, t_max, 32)
    report = {}

    direct, quad, elem = [], [], []
    agree = 0.0
    for f in families:
        for N in range(1, N_max + 1):
            for t in t_grid:
                b = truncation_bound_bessel(N, t)
                d = basis_residual(f, N, t)
                q = basis_residual_quadrature(f, N, t)
                floor = 64 * _EPS * np.linalg.norm(eval_basis(f, N, t))
                direct.append(np.linalg.norm(d) / (b + floor))
                quad.append(np.linalg.norm(q) / b)
                agree = max(agree, float(np.linalg.norm(d - q)))
            for t in t_grid[::8]:
                q = basis_residual_quadrature(f, N, t)
                floor = 64 * _EPS * np.linalg.norm(eval_basis(f, N, t))
                for k in range(1, N + 1):
                    elem.append(abs(q[k - 1]) / (eps_elementwise_bound(N, k, t, family=f) + floor))
    report["truncation_direct"] = _ratio_summary("truncation_bound_vs_direct", direct)
    report["truncation_quadrature"] = _ratio_summary("truncation_bound_vs_quadrature", quad)
    report["quadrature_agreement"] = {"check": "direct_vs_quadrature", "max_abs_dev": agree,
                                      "tolerance": 1e-8, "passed": agree <= 1e-8}
    report["eps_elementwise"] = _ratio_summary("eps_elementwise_bound", elem)

    wk = []
    for _ in range(trials):
        n = int(rng.integers(1, 4))
        src = random_source(rng, n)
        K = 20
        G = src.derivatives(K)
        for f in families:
            norms = np.linalg.norm(expansion_coeffs(f, G).W, axis=0)
            for t in (0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, t_max):
                M_t = max_modulus(src, t)
                if M_t > 0:
                    wk.extend(norms / wk_growth_bounds(M_t, t, K))
    report["wk_growth"] = _ratio_summary("wk_growth_bounds", wk, 1 + _TIE)

    phi = []
    for _ in range(trials):
        n = int(rng.integers(1, 9))
        A = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) * rng.uniform(0.1, 3)
        for ell in range(1, 6):
            phi.append(np.linalg.norm(phi_matrix(ell, A), 2) / phi_norm_bound(ell, A))
    report["phi_norm"] = _ratio_summary("phi_norm_bound", phi, 1 + _TIE)

    tail = []
    for f in families:
        for N in range(1, min(N_max, 10) + 1):
            H, C = hessenberg(f, N), coefficient_map(f, N)
            for k in (N, N + 5):
                v = np.linalg.matrix_power(H, k)[:, 0]
                tail.append(np.linalg.norm(C @ v) / tail_bound(N))
    report["tail"] = _ratio_summary("tail_bound", tail)

    cond = []
    for f in families:
        for N in (4, 8, 16, 32):
            kappa, exph = conditioning_check(f, N)
            cond.append({"family": f.value, "N": N, "kappa": kappa, "expH_ratio": exph})
    ok = all(abs(c["kappa"] - math.sqrt(2)) <= 1e-8 and c["expH_ratio"] <= math.sqrt(2) * (1 + _TIE)
             for c in cond)
    report["conditioning"] = {"check": "conditioning", "rows": cond, "passed": ok}
    report["passed"] = all(v["passed"] for v in report.values() if isinstance(v, dict))
    return report
