"""Basis-function families and their expansion coefficients.

Three families are supported. Each one satisfies ``phi'(t) = H phi(t)``,
``phi(0) = e_1`` for an infinite Hessenberg generator ``H``:

* ``MONOMIAL``: ``phi_l(t) = t^l / l!``, ``H`` the transposed Jordan block.
* ``BESSEL_J``: ``phi_l(t) = J_l(t)``, ``H`` tridiagonal with ``-1, -1/2`` above
  and ``1/2`` below the diagonal.
* ``BESSEL_I``: ``phi_l(t) = I_l(t)``, the same with ``+1, +1/2`` above.
"""
import csv
import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.special

from .errors import ContractViolation, NumericOverflow
from .linalg import dense_expm
from .validation import check_positive_int, check_time

__all__ = [
    "BasisFamily",
    "ChebyshevCoeffTable",
    "ExpansionCoefficients",
    "hessenberg",
    "hessenberg_column",
    "eval_basis",
    "chebyshev_coeffs",
    "krylov_matrix",
    "coefficient_map",
    "expansion_coeffs",
    "basis_residual",
    "basis_residual_quadrature",
]


class BasisFamily(enum.Enum):
    MONOMIAL = "monomial"
    BESSEL_J = "besselj"
    BESSEL_I = "besseli"

    @classmethod
    def parse(cls, value):
        """Accept a member, its value, or a loose spelling like ``"BesselJ"``."""
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        aliases = {
            "monomial": cls.MONOMIAL, "taylor": cls.MONOMIAL,
            "besselj": cls.BESSEL_J, "j": cls.BESSEL_J,
            "besseli": cls.BESSEL_I, "i": cls.BESSEL_I, "modifiedbessel": cls.BESSEL_I,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ContractViolation(f"unknown basis family {value!r}") from None

    def _offdiag(self):
        # (first superdiagonal entry, remaining superdiagonal, subdiagonal)
        if self is BasisFamily.MONOMIAL:
            return 0.0, 0.0, 1.0
        if self is BasisFamily.BESSEL_J:
            return -1.0, -0.5, 0.5
        return 1.0, 0.5, 0.5

    def tail_coefficient(self, N):
        """c such that ``phi_{N-1}' = (H_N phi)_{N-1} + c * phi_N``.

        This is the generator entry ``H[N-1, N]`` cut off by truncation.
        """
        first, upper, _ = self._offdiag()
        return first if N == 1 else upper


def hessenberg(family, N):
    """Leading ``N x N`` block of the generator of ``family`` (real array)."""
    family = BasisFamily.parse(family)
    N = check_positive_int(N, "N")
    first, upper, lower = family._offdiag()
    H = np.zeros((N, N))
    idx = np.arange(N - 1)
    H[idx + 1, idx] = lower
    if N > 1 and upper:
        H[idx, idx + 1] = upper
        H[0, 1] = first
    return H


def hessenberg_column(family, j):
    """Nonzero part of column ``j`` (0-based) of the infinite generator.

    Returns a length ``j + 2`` array: rows ``0 .. j + 1``.
    """
    family = BasisFamily.parse(family)
    first, upper, lower = family._offdiag()
    col = np.zeros(j + 2)
    col[j + 1] = lower
    if j >= 1:
        col[j - 1] = first if j == 1 else upper
    return col


def _miller_bessel(N, t, modified):
    # Backward recurrence from an index well past both N and t, normalized
    # by J_0 + 2 sum J_2k = 1 or I_0 + 2 sum I_k = e^t.
    start = N + 25 + int(math.ceil(1.3 * t))
    if start % 2:
        start += 1
    sign = 1.0 if modified else -1.0
    vals = np.zeros(start + 2)
    vals[start] = 1e-30
    for k in range(start, 0, -1):
        vals[k - 1] = (2.0 * k / t) * vals[k] + sign * vals[k + 1]
        if abs(vals[k - 1]) > 1e250:
            vals[k - 1:] *= 1e-250
    if modified:
        norm = vals[0] + 2.0 * math.fsum(vals[1:start + 1])
        # scale by e^t without overflowing the intermediate sum
        out = vals[:N] / norm * math.exp(t)
    else:
        norm = vals[0] + 2.0 * math.fsum(vals[2:start + 1:2])
        out = vals[:N] / norm
    out[np.abs(out) < 1e-305] = 0.0
    return out


def eval_basis(family, N, t):
    """Return ``(phi_0(t), ..., phi_{N-1}(t))`` for ``t >= 0``."""
    family = BasisFamily.parse(family)
    N = check_positive_int(N, "N")
    t = check_time(t)
    if t == 0.0:
        out = np.zeros(N)
        out[0] = 1.0
        return out
    if family is BasisFamily.MONOMIAL:
        out = np.empty(N)
        out[0] = 1.0
        for ell in range(1, N):
            out[ell] = out[ell - 1] * t / ell
        return out
    return _miller_bessel(N, t, modified=family is BasisFamily.BESSEL_I)


@dataclass(frozen=True)
class ChebyshevCoeffTable:
    """Monomial coefficients of ``T_0 .. T_K``; ``table[k, l]`` multiplies ``x**l``."""

    table: np.ndarray

    @property
    def K(self):
        return self.table.shape[0] - 1

    def row(self, k):
        return self.table[k, :k + 1].copy()

    def __getitem__(self, k):
        return self.row(k)

    def to_csv(self, path_or_file):
        """Write one line per row: ``k, T_k0, ..., T_kk``."""
        def _write(fh):
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["k"] + [f"c{ell}" for ell in range(self.K + 1)])
            for k in range(self.K + 1):
                writer.writerow([k] + [repr(float(c)) for c in self.row(k)])
        if hasattr(path_or_file, "write"):
            _write(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                _write(fh)


def chebyshev_coeffs(K):
    """Coefficient table of the first-kind Chebyshev polynomials up to degree ``K``.

    Built with ``T_{k+1} = 2x T_k - T_{k-1}`` on coefficient vectors.
    """
    if isinstance(K, bool) or not isinstance(K, (int, np.integer)) or K < 0:
        raise ContractViolation(f"K must be a non-negative integer, got {K!r}")
    if K > 1000:
        raise ContractViolation("K > 1000 rejected: coefficients overflow double precision")
    table = np.zeros((K + 1, K + 1))
    table[0, 0] = 1.0
    if K >= 1:
        table[1, 1] = 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, K):
            table[k + 1, 1:k + 2] = 2.0 * table[k, :k + 1]
            table[k + 1, :k] -= table[k - 1, :k]
    if not np.all(np.isfinite(table)):
        raise NumericOverflow(f"Chebyshev coefficients overflow before degree {K}")
    return ChebyshevCoeffTable(table)


def krylov_matrix(H, N=None):
    """``[e_1, H e_1, ..., H^{N-1} e_1]`` for the leading ``N x N`` block of ``H``."""
    H = np.asarray(H)
    if N is None:
        N = H.shape[0]
    N = check_positive_int(N, "N")
    if H.ndim != 2 or H.shape[0] < N or H.shape[1] < N:
        raise ContractViolation(f"H must be at least {N}x{N}")
    H = H[:N, :N]
    K = np.zeros((N, N), dtype=H.dtype)
    v = np.zeros(N, dtype=H.dtype)
    v[0] = 1
    for k in range(N):
        K[:, k] = v
        v = H @ v
    return K


def coefficient_map(family, N):
    """Upper-triangular ``C`` with ``W_N = G_N @ C`` (closed form, no inversion).

    This is ``K_N(H_N, e_1)^{-1}``: the identity for monomials and the scaled
    Chebyshev table (absolute values for ``BESSEL_J``) for the Bessel families.
    """
    family = BasisFamily.parse(family)
    N = check_positive_int(N, "N")
    if family is BasisFamily.MONOMIAL:
        return np.eye(N)
    T = chebyshev_coeffs(N - 1).table
    if family is BasisFamily.BESSEL_J:
        T = np.abs(T)
    C = 2.0 * T.T
    C[0, 0] = 1.0
    return C


@dataclass(frozen=True)
class ExpansionCoefficients:
    """Expansion coefficients ``w_0 .. w_{N-1}`` as the columns of ``W``."""

    W: np.ndarray
    family: BasisFamily
    t0: float = 0.0

    @property
    def n(self):
        return self.W.shape[0]

    @property
    def N(self):
        return self.W.shape[1]


def expansion_coeffs(family, G, t0=0.0):
    """Coefficients of ``g`` in ``family`` from derivative columns ``G``.

    ``G[:, l]`` must hold ``g^{(l)}(t0)``.
    """
    family = BasisFamily.parse(family)
    G = np.asarray(G, dtype=complex)
    if G.ndim == 1:
        G = G.reshape(1, -1)
    if G.ndim != 2 or G.shape[1] < 1:
        raise ContractViolation("G must be an n x N matrix with N >= 1")
    if not np.all(np.isfinite(G)):
        raise ContractViolation("G contains NaN or Inf")
    W = G @ coefficient_map(family, G.shape[1])
    return ExpansionCoefficients(W, family, float(t0))


def basis_residual(family, N, t):
    """``phi_N(t) - exp(t H_N) e_1`` via :func:`eval_basis` and :func:`dense_expm`."""
    family = BasisFamily.parse(family)
    H = hessenberg(family, N)
    return eval_basis(family, N, t) - dense_expm(t * H)[:, 0].real


def basis_residual_quadrature(family, N, t, nodes=64):
    """Residual from its integral representation, by Gauss-Legendre quadrature.

    ``eps(t) = c * int_0^t exp((t-s) H_N) e_N phi_N(s) ds`` with ``c`` the
    family's tail coefficient. Uses :func:`scipy.special.jv`/``iv`` and
    :func:`scipy.linalg.expm`, so it shares no code with :func:`basis_residual`.
    """
    family = BasisFamily.parse(family)
    N = check_positive_int(N, "N")
    t = check_time(t)
    if family is BasisFamily.MONOMIAL or t == 0.0:
        return np.zeros(N)
    x, w = np.polynomial.legendre.leggauss(nodes)
    s = 0.5 * t * (x + 1.0)
    w = 0.5 * t * w
    H = hessenberg(family, N)
    bessel = scipy.special.jv if family is BasisFamily.BESSEL_J else scipy.special.iv
    total = np.zeros(N)
    for sk, wk in zip(s, w):
        total += wk * bessel(N, sk) * scipy.linalg.expm((t - sk) * H)[:, -1]
    return family.tail_coefficient(N) * total
