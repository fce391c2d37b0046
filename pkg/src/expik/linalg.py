"""Dense and sparse linear algebra primitives.

The sparse side is a thin, validated CSR container over :mod:`scipy.sparse`;
the dense matrix exponential and the scalar phi-functions are implemented
here directly.
"""
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ContractViolation, EstimateFailed, NumericOverflow
from .validation import check_positive_int, check_square

__all__ = [
    "SparseOperator",
    "spmv",
    "dense_expm",
    "phi_scalar",
    "phi_matrix",
    "log_norm",
    "spectral_radius_estimate",
    "read_matrix_market",
    "write_matrix_market",
    "as_operator",
]


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """Square complex matrix in compressed sparse row storage.

    Build it with :meth:`from_scipy`, :meth:`from_dense` or directly from
    the three CSR arrays; the structure is validated on construction.
    """

    n: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray
    _csr: sp.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        n = check_positive_int(self.n, "n")
        row_ptr = np.asarray(self.row_ptr, dtype=np.int64)
        col_idx = np.asarray(self.col_idx, dtype=np.int64)
        values = np.asarray(self.values, dtype=complex)
        if row_ptr.shape != (n + 1,):
            raise ContractViolation(f"row_ptr must have length n+1={n + 1}")
        if row_ptr[0] != 0 or np.any(np.diff(row_ptr) < 0):
            raise ContractViolation("row_ptr must start at 0 and be nondecreasing")
        nnz = int(row_ptr[-1])
        if col_idx.shape != (nnz,) or values.shape != (nnz,):
            raise ContractViolation("col_idx/values length must equal row_ptr[-1]")
        if nnz and (col_idx.min() < 0 or col_idx.max() >= n):
            raise ContractViolation("col_idx entries must lie in [0, n)")
        if not np.all(np.isfinite(values)):
            raise ContractViolation("values contain NaN or Inf")
        for name, arr in (("row_ptr", row_ptr), ("col_idx", col_idx), ("values", values)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "n", n)
        csr = sp.csr_matrix((values, col_idx, row_ptr), shape=(n, n))
        object.__setattr__(self, "_csr", csr)

    @classmethod
    def from_scipy(cls, M):
        M = sp.csr_matrix(M, dtype=complex)
        if M.shape[0] != M.shape[1]:
            raise ContractViolation(f"operator must be square, got {M.shape}")
        M.sum_duplicates()
        M.sort_indices()
        return cls(M.shape[0], M.indptr, M.indices, M.data)

    @classmethod
    def from_dense(cls, M):
        return cls.from_scipy(sp.csr_matrix(check_square(M)))

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def nnz(self):
        return int(self.row_ptr[-1])

    def to_scipy(self):
        return self._csr.copy()

    def toarray(self):
        return self._csr.toarray()

    def matvec(self, x):
        return self._csr @ x

    def __matmul__(self, x):
        return self._csr @ x

    def norm1(self):
        """Maximum absolute column sum."""
        if self.nnz == 0:
            return 0.0
        return float(abs(self._csr).sum(axis=0).max())

    def hermitian_part(self):
        return 0.5 * (self._csr + self._csr.conj().T)


def spmv(A, x):
    """Return ``A @ x`` for a :class:`SparseOperator` ``A``."""
    if not isinstance(A, SparseOperator):
        raise ContractViolation("spmv expects a SparseOperator")
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != A.n:
        raise ContractViolation(f"dimension mismatch: A is {A.n}x{A.n}, x has shape {x.shape}")
    return A.matvec(x.astype(complex, copy=False))


# [13/13] Pade numerator coefficients and the norm threshold for degree 13.
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def dense_expm(M):
    """Matrix exponential by scaling and squaring with a [13/13] Pade approximant.

    The scaling exponent is ``s = max(0, ceil(log2(||M||_1 / theta_13)))``.
    Raises :class:`NumericOverflow` if the squaring phase overflows.
    """
    M = check_square(M)
    n = M.shape[0]
    if n == 0:
        return M.copy()
    norm = np.linalg.norm(M, 1)
    if norm == 0.0:
        return np.eye(n, dtype=complex)
    s = 0
    if norm > _THETA13:
        s = max(0, int(math.ceil(math.log2(norm / _THETA13))))
    X = M / (2.0 ** s)
    b = _PADE13
    ident = np.eye(n, dtype=complex)
    X2 = X @ X
    X4 = X2 @ X2
    X6 = X2 @ X4
    U = X @ (X6 @ (b[13] * X6 + b[11] * X4 + b[9] * X2)
             + b[7] * X6 + b[5] * X4 + b[3] * X2 + b[1] * ident)
    V = (X6 @ (b[12] * X6 + b[10] * X4 + b[8] * X2)
         + b[6] * X6 + b[4] * X4 + b[2] * X2 + b[0] * ident)
    E = np.linalg.solve(V - U, V + U)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(s):
            E = E @ E
    if not np.all(np.isfinite(E)):
        raise NumericOverflow(f"overflow while squaring exp(M); ||M||_1 = {norm:.3e}")
    return E


def _series_phi(ell, z, nterms=None):
    # sum_{k>=0} z^k/(k+ell)!, exact summation of the real and imaginary parts
    term = 1.0 / math.factorial(ell)
    re, im = [term], [0.0]
    term = complex(term)
    k = 0
    while True:
        k += 1
        if nterms is not None and k >= nterms:
            break
        term = term * z / (k + ell)
        re.append(term.real)
        im.append(term.imag)
        if nterms is None and abs(term) <= 1e-18 * max(abs(complex(math.fsum(re), math.fsum(im))), 1e-300):
            break
        if k > 10000:
            break
    return complex(math.fsum(re), math.fsum(im))


def phi_scalar(ell, z):
    """phi_ell(z) = sum_{k>=0} z^k / (k+ell)! for ell >= 1.

    For ``|z| <= 1`` a 30-term series is used. For larger ``|z|`` the series
    is still used while ``|z| < ell + 1`` (its terms decrease from the start);
    otherwise the upward recurrence
    ``phi_j(z) = (phi_{j-1}(z) - 1/(j-1)!) / z`` is run from ``exp(z)``.
    """
    if isinstance(ell, bool) or not isinstance(ell, (int, np.integer)):
        raise ContractViolation(f"ell must be an integer, got {ell!r}")
    if ell < 1:
        raise ContractViolation("phi_0 is exp; use numpy.exp or dense_expm")
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ContractViolation("z must be finite")
    az = abs(z)
    if az <= 1.0:
        return _series_phi(ell, z, nterms=30)
    if az < ell + 1:
        return _series_phi(ell, z)
    phi = complex(np.exp(z))
    for j in range(1, ell + 1):
        phi = (phi - 1.0 / math.factorial(j - 1)) / z
    return phi


def phi_matrix(ell, M):
    """phi_ell(M) for a small dense matrix via one augmented exponential.

    Uses exp([[M, I, 0..], [0, 0, I, ..], ...]) whose top-right block is
    phi_ell(M). Independent of :func:`phi_scalar`.
    """
    M = check_square(M)
    ell = check_positive_int(ell, "ell")
    n = M.shape[0]
    big = np.zeros(((ell + 1) * n, (ell + 1) * n), dtype=complex)
    big[:n, :n] = M
    for j in range(ell):
        big[j * n:(j + 1) * n, (j + 1) * n:(j + 2) * n] = np.eye(n)
    E = dense_expm(big)
    return E[:n, ell * n:]


def _as_hermitian_part(A):
    if isinstance(A, SparseOperator):
        return A.hermitian_part()
    if sp.issparse(A):
        A = sp.csr_matrix(A, dtype=complex)
        if A.shape[0] != A.shape[1]:
            raise ContractViolation("log_norm needs a square operator")
        return 0.5 * (A + A.conj().T)
    M = check_square(A)
    return 0.5 * (M + M.conj().T)


def log_norm(A, tol=1e-10, dense_limit=400):
    """Logarithmic 2-norm mu(A): largest eigenvalue of (A + A*)/2.

    Small problems are solved densely; larger sparse ones use an implicitly
    restarted Lanczos iteration (ARPACK) on the Hermitian part.
    """
    Hs = _as_hermitian_part(A)
    n = Hs.shape[0]
    if sp.issparse(Hs):
        Hs = sp.csr_matrix(Hs)
        Hs.eliminate_zeros()
        if Hs.nnz == 0:
            return 0.0
        if n > dense_limit:
            try:
                vals = spla.eigsh(Hs, k=1, which="LA", tol=tol, maxiter=5000,
                                  return_eigenvectors=False)
            except spla.ArpackNoConvergence as exc:
                best = float(np.max(exc.eigenvalues)) if len(exc.eigenvalues) else None
                raise EstimateFailed("Lanczos iteration for log_norm did not converge",
                                     best=best) from exc
            return float(np.max(vals.real))
        Hs = Hs.toarray()
    if not np.any(Hs):
        return 0.0
    return float(scipy.linalg.eigvalsh(Hs)[-1])


def spectral_radius_estimate(A, tol=1e-4, maxiter=5000, seed=20140722):
    """Power-iteration estimate of the spectral radius of ``A``.

    Convergence is declared when the eigen-residual satisfies
    ``||A x - theta x|| <= tol * |theta|`` for the Rayleigh quotient theta.
    The start vector is drawn from a fixed-seed generator.
    """
    if isinstance(A, SparseOperator):
        op, n = A.matvec, A.n
    elif sp.issparse(A):
        A = sp.csr_matrix(A, dtype=complex)
        op, n = (lambda v: A @ v), A.shape[0]
    else:
        M = check_square(A)
        op, n = (lambda v: M @ v), M.shape[0]
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)
    theta, res = 0.0, np.inf
    for _ in range(maxiter):
        y = op(x)
        theta = np.vdot(x, y)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            # x lies in the null space; the whole matrix may be nilpotent or zero
            return 0.0
        res = np.linalg.norm(y - theta * x)
        if res <= tol * abs(theta):
            return float(abs(theta))
        x = y / ny
    raise EstimateFailed(
        f"power iteration did not converge in {maxiter} iterations",
        best=float(abs(theta)), residual=float(res))


def read_matrix_market(path):
    """Read a Matrix Market file; sparse coordinate data becomes a SparseOperator,
    dense arrays are returned as numpy arrays (vectors flattened)."""
    data = scipy.io.mmread(str(path))
    if sp.issparse(data):
        return SparseOperator.from_scipy(data)
    arr = np.asarray(data, dtype=complex)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.reshape(-1)
    return arr


def write_matrix_market(path, obj, comment=""):
    """Write a SparseOperator (coordinate, complex general) or a dense vector/matrix."""
    if isinstance(obj, SparseOperator):
        scipy.io.mmwrite(str(path), sp.coo_matrix(obj.to_scipy()), comment=comment,
                         field="complex", symmetry="general")
        return
    arr = np.asarray(obj, dtype=complex)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    scipy.io.mmwrite(str(path), arr, comment=comment, field="complex", symmetry="general")


def as_operator(A):
    """Coerce a SparseOperator, scipy sparse matrix or dense array to SparseOperator."""
    if isinstance(A, SparseOperator):
        return A
    if sp.issparse(A):
        return SparseOperator.from_scipy(A)
    return SparseOperator.from_dense(A)
