"""Infinite Arnoldi exponential integrator for ``u' = A u + g(t)``.

The solution is written as the top block of ``exp(t A_k) (u0; e_1)`` where

    A_k = [[A, W_k], [0, H_k]]

couples the ODE to the generator ``H`` of a basis-function family through
the expansion coefficients ``W_k`` of ``g``. Arnoldi on this augmented
operator never needs a fixed ``k``: the basis vectors have block-triangular
structure, so each step only touches one more coefficient column and one
more row of ``H``.

:class:`InfiniteArnoldiIntegrator` is the estimator front end; the functions
:func:`infinite_arnoldi`, :func:`truncated_arnoldi` and :func:`integrate_steps`
are the functional API.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .basis import BasisFamily, coefficient_map
from .errors import ContractViolation, DerivativeOrderUnavailable, NumericFailure
from .gsource import GSource, SeparableProfile
from .linalg import SparseOperator, as_operator, dense_expm
from .validation import check_positive_int, check_square, check_time, check_vector

__all__ = [
    "ArnoldiState",
    "IntegratorResult",
    "InfiniteArnoldiIntegrator",
    "apply_augmented",
    "infinite_arnoldi",
    "truncated_arnoldi",
    "integrate_steps",
]

BREAKDOWN_TOL = 1e-14
_REORTH_RATIO = 1.0 / math.sqrt(2.0)


def apply_augmented(A, W, family, q, n=None):
    """Apply ``A_k`` to a structured vector ``q = (q_top; q_tail)``.

    Parameters
    ----------
    A : SparseOperator or array-like
        The ``n x n`` system matrix.
    W : ndarray or ExpansionCoefficients
        Coefficient columns; at least ``k = len(q_tail)`` are needed.
    family : BasisFamily
    q : array-like of length ``n + k``

    Returns
    -------
    ndarray of length ``n + k + 1``
        ``(A q_top + W_k q_tail; H_{k+1,k} q_tail)``.
    """
    A = as_operator(A)
    family = BasisFamily.parse(family)
    W = getattr(W, "W", W)
    W = np.asarray(W, dtype=complex)
    n = A.n if n is None else n
    q = np.asarray(q, dtype=complex)
    k = q.shape[0] - n
    if k < 1:
        raise ContractViolation("q needs a tail of length >= 1")
    if W.ndim != 2 or W.shape[0] != n:
        raise ContractViolation(f"W must have {n} rows")
    if W.shape[1] < k:
        raise DerivativeOrderUnavailable(f"{k} coefficient columns needed, {W.shape[1]} available")
    top, tail = q[:n], q[n:]
    out = np.zeros(n + k + 1, dtype=complex)
    out[:n] = A.matvec(top) + W[:, :k] @ tail
    out[n:] = _apply_generator(family, tail)
    return out


def _apply_generator(family, tail):
    # H_{k+1,k} @ tail using the tridiagonal/bidiagonal structure
    first, upper, lower = family._offdiag()
    k = tail.shape[0]
    out = np.zeros(k + 1, dtype=complex)
    out[1:] += lower * tail
    if upper and k > 1:
        out[0] += first * tail[1]
        out[1:k - 1] += upper * tail[2:]
    return out


@dataclass
class IntegratorResult:
    """Approximation ``u ~ u(t)`` together with the Arnoldi diagnostics."""

    u: np.ndarray
    N: int
    breakdown: bool
    f_subdiag: np.ndarray
    F: np.ndarray
    t: float = 0.0
    family: str = ""

    def to_json(self):
        return {
            "u": [[float(z.real), float(z.imag)] for z in self.u],
            "N": int(self.N),
            "breakdown": bool(self.breakdown),
            "f_subdiag": [float(abs(f)) for f in self.f_subdiag],
        }

    def dumps(self):
        return json.dumps(self.to_json(), indent=1)


@dataclass
class ArnoldiState:
    """Growing structured Arnoldi factorization ``A_k Q_k = Q_{k+1} F_k``.

    ``Q`` is stored padded to ``(n + capacity + 1) x (capacity + 1)``; column
    ``j`` (0-based) only ever has nonzeros in its first ``n + j + 1`` rows.
    """

    A: SparseOperator
    n: int
    family: BasisFamily
    beta: float
    Q: np.ndarray
    F: np.ndarray
    k: int = 0
    W: np.ndarray = None
    norm_estimate: float = 0.0
    f_subdiag: list = field(default_factory=list)
    breakdown: bool = False

    def basis(self):
        return self.Q[: self.n + self.k + 1, : self.k + 1]

    def hessenberg(self):
        """Square ``F_k``."""
        return self.F[: self.k, : self.k]

    def check_invariants(self, tol=1e-10):
        """Raise AssertionError if orthonormality, structure or the Arnoldi relation fail."""
        k, n = self.k, self.n
        ncols = k if self.breakdown else k + 1
        Q = self.Q[:, :ncols]
        err = np.max(np.abs(Q.conj().T @ Q - np.eye(ncols))) if ncols else 0.0
        assert err <= tol, f"orthonormality lost: {err:.3e}"
        for j in range(ncols):
            assert not np.any(Q[n + j + 1:, j]), f"column {j} breaks block-triangular structure"
        if k == 0:
            return
        F = self.F[: k + 1, :k]
        W = np.zeros((n, k), dtype=complex) if self.W is None else self.W
        for j in range(k):
            lhs = apply_augmented(self.A, W, self.family, self.Q[: n + j + 1, j], n)
            rhs = self.Q[: n + j + 2, : j + 2] @ F[: j + 2, j]
            scale = max(1.0, np.linalg.norm(lhs))
            rel = np.linalg.norm(lhs - rhs) / scale
            assert rel <= tol, f"Arnoldi relation fails at column {j}: {rel:.3e}"


class _CoefficientStream:
    """Lazily extended ``W`` columns; the map is triangular so prefixes are stable."""

    def __init__(self, src, family, t0, N):
        self.src, self.family, self.t0, self.N = src, family, t0, N
        self.W = np.zeros((src.n, 0), dtype=complex)

    def ensure(self, k):
        if self.W.shape[1] >= k:
            return self.W
        m = min(self.N, max(k, 2 * self.W.shape[1], 4))
        G = self.src.derivatives(m, self.t0)
        self.W = G @ coefficient_map(self.family, m)
        return self.W


def _orthogonalize(Q, w, ncols):
    """MGS against ``Q[:, :ncols]`` with one conditional second pass."""
    h = np.zeros(ncols + 1, dtype=complex)
    norm_in = np.linalg.norm(w)
    for sweep in range(2):
        for j in range(ncols):
            c = np.vdot(Q[:, j], w)
            w -= c * Q[:, j]
            h[j] += c
        alpha = np.linalg.norm(w)
        if alpha >= _REORTH_RATIO * norm_in:
            break
        norm_in = alpha
    h[ncols] = alpha
    return w, h


def _run_arnoldi(A, src, family, u0, N, t0=0.0, tol=BREAKDOWN_TOL, debug=False):
    A = as_operator(A)
    family = BasisFamily.parse(family)
    n = A.n
    u0 = check_vector(u0, n=n, name="u0")
    N = check_positive_int(N, "N")
    if src is None:
        src = SeparableProfile([], n=n)
    if not isinstance(src, GSource):
        raise ContractViolation("src must be a GSource")
    if src.n != n:
        raise ContractViolation(f"source dimension {src.n} does not match A ({n})")
    zero_source = src.is_zero
    # a vanishing source decouples the tail block; drop it from the start vector
    tail0 = 0.0 if zero_source else 1.0
    beta = math.sqrt(np.linalg.norm(u0) ** 2 + tail0 ** 2)
    if beta == 0.0:
        raise ContractViolation("starting vector (u0; e_1) is zero")

    Q = np.zeros((n + N + 1, N + 1), dtype=complex)
    Q[:n, 0] = u0 / beta
    Q[n, 0] = tail0 / beta
    F = np.zeros((N + 1, N), dtype=complex)
    state = ArnoldiState(A=A, n=n, family=family, beta=beta, Q=Q, F=F)
    coeffs = None if zero_source else _CoefficientStream(src, family, t0, N)
    zeros_W = np.zeros((n, N), dtype=complex)

    for k in range(1, N + 1):
        W = zeros_W if coeffs is None else coeffs.ensure(k)
        q = Q[: n + k, k - 1]
        w = apply_augmented(A, W, family, q, n)
        if not np.all(np.isfinite(w)):
            raise NumericFailure(f"non-finite entries in A_k q_k at step {k}", step=k)
        state.norm_estimate = max(state.norm_estimate, np.linalg.norm(w))
        w, h = _orthogonalize(Q[: n + k + 1], w, k)
        if not np.all(np.isfinite(h)):
            raise NumericFailure(f"orthogonalization produced NaN at step {k}", step=k)
        F[: k + 1, k - 1] = h
        state.k = k
        state.f_subdiag.append(h[k])
        alpha = h[k].real
        if alpha <= tol * state.norm_estimate:
            state.breakdown = True
            break
        Q[: n + k + 1, k] = w / alpha
    if coeffs is not None:
        state.W = coeffs.ensure(state.k)[:, : state.k].copy()
    if debug:
        state.check_invariants()
    return state


def _evaluate(state, t):
    t = check_time(t)
    k, n = state.k, state.n
    E = dense_expm(t * state.hessenberg())
    with np.errstate(over="ignore", invalid="ignore"):
        u = state.Q[:n, :k] @ E[:, 0] * state.beta
    if not np.all(np.isfinite(u)):
        raise NumericFailure(f"non-finite solution after step {k}", step=k)
    return u


def _result(state, t):
    return IntegratorResult(
        u=_evaluate(state, t), N=state.k, breakdown=state.breakdown,
        f_subdiag=np.asarray(state.f_subdiag), F=state.hessenberg().copy(),
        t=float(t), family=state.family.value,
    )


def infinite_arnoldi(A, src, family, u0, t, N, t0=0.0, debug=False):
    """Approximate ``u(t0 + t)`` with ``N`` infinite Arnoldi steps.

    ``src`` is expanded about ``t0`` and ``u0`` is the state at ``t0``. A
    ``None`` or identically zero source runs the homogeneous problem.
    """
    check_time(t)
    state = _run_arnoldi(A, src, family, u0, N, t0=t0, debug=debug)
    return _result(state, t)


def truncated_arnoldi(A, W, H_m, u0, t, N, homogeneous=None):
    """Plain Arnoldi on the explicitly assembled ``A_m = [[A, W_m], [0, H_m]]``.

    This is a reference implementation: it builds the bordered sparse matrix
    and runs unstructured modified Gram-Schmidt Arnoldi on ``(u0; e_1)``.
    ``homogeneous`` marks ``g == 0``, in which case the start is ``(u0; 0)``
    as in :func:`infinite_arnoldi`. It defaults to ``W_m == 0``, which is
    only right when the truncated coefficients reflect ``g`` itself.
    """
    A = as_operator(A)
    n = A.n
    W = np.asarray(getattr(W, "W", W), dtype=complex)
    H_m = check_square(H_m, name="H_m")
    m = H_m.shape[0]
    N = check_positive_int(N, "N")
    if m < N:
        raise ContractViolation(f"m = {m} must be >= N = {N}")
    if W.shape != (n, m):
        raise ContractViolation(f"W must be {n} x {m}, got {W.shape}")
    u0 = check_vector(u0, n=n, name="u0")
    t = check_time(t)
    Am = sp.bmat([[A.to_scipy(), sp.csr_matrix(W)],
                  [None, sp.csr_matrix(H_m)]], format="csr")
    b = np.zeros(n + m, dtype=complex)
    b[:n] = u0
    if homogeneous is None:
        homogeneous = not np.any(W)
    b[n] = 0.0 if homogeneous else 1.0
    beta = np.linalg.norm(b)
    if beta == 0.0:
        raise ContractViolation("starting vector is zero")
    V = np.zeros((n + m, N + 1), dtype=complex)
    F = np.zeros((N + 1, N), dtype=complex)
    V[:, 0] = b / beta
    scale = 0.0
    subdiag = []
    k_used = N
    breakdown = False
    for k in range(N):
        w = Am @ V[:, k]
        scale = max(scale, np.linalg.norm(w))
        for _ in range(2):
            for j in range(k + 1):
                c = np.vdot(V[:, j], w)
                w = w - c * V[:, j]
                F[j, k] += c
        alpha = np.linalg.norm(w)
        F[k + 1, k] = alpha
        subdiag.append(alpha)
        if alpha <= BREAKDOWN_TOL * scale:
            k_used, breakdown = k + 1, True
            break
        V[:, k + 1] = w / alpha
    Fk = F[:k_used, :k_used]
    u = V[:n, :k_used] @ dense_expm(t * Fk)[:, 0] * beta
    return IntegratorResult(u=u, N=k_used, breakdown=breakdown,
                            f_subdiag=np.asarray(subdiag), F=Fk.copy(), t=t)


def integrate_steps(A, src, family, u0, steps, N):
    """Chain infinite Arnoldi over ``t_i = h_1 + ... + h_i``, re-expanding ``g`` each step.

    ``N`` is one subspace size for all steps or a sequence with one per step.
    The returned result carries the diagnostics of the last step and
    ``N`` summed over all steps.
    """
    steps = [float(h) for h in steps]
    if not steps or any(not (h > 0 and math.isfinite(h)) for h in steps):
        raise ContractViolation("steps must be a non-empty list of positive step sizes")
    Ns = [N] * len(steps) if np.isscalar(N) else list(N)
    if len(Ns) != len(steps):
        raise ContractViolation("one N per step required")
    u = check_vector(u0, name="u0")
    t0 = 0.0
    total = 0
    last = None
    for h, Nk in zip(steps, Ns):
        last = infinite_arnoldi(A, src, family, u, h, Nk, t0=t0)
        u = last.u
        t0 += h
        total += last.N
    return IntegratorResult(u=u, N=total, breakdown=last.breakdown,
                            f_subdiag=last.f_subdiag, F=last.F, t=t0, family=last.family)


class InfiniteArnoldiIntegrator(BaseEstimator):
    """Estimator wrapper around the infinite Arnoldi integrator.

    ``fit`` builds the time-independent Krylov basis for ``A``, ``g`` and
    ``u0``; ``predict(t)`` then evaluates the approximation at any ``t >= 0``
    (measured from ``t0``) for the cost of one small matrix exponential.

    Parameters
    ----------
    family : str or BasisFamily, default="besselj"
    n_steps : int, default=30
        Maximum Krylov subspace size ``N``.
    t0 : float, default=0.0
        Expansion point for ``g``.
    breakdown_tol : float, default=1e-14
    check_invariants : bool, default=False
        Verify orthonormality, structure and the Arnoldi relation after fitting.

    Attributes
    ----------
    n_steps_ : int
        Subspace size actually reached (smaller on lucky breakdown).
    breakdown_ : bool
    hessenberg_ : ndarray of shape (n_steps_, n_steps_)
    f_subdiag_ : ndarray of shape (n_steps_,)
    """

    def __init__(self, family="besselj", n_steps=30, t0=0.0, breakdown_tol=BREAKDOWN_TOL,
                 check_invariants=False):
        self.family = family
        self.n_steps = n_steps
        self.t0 = t0
        self.breakdown_tol = breakdown_tol
        self.check_invariants = check_invariants

    def fit(self, A, source=None, u0=None):
        if u0 is None:
            raise ContractViolation("u0 is required")
        self.family_ = BasisFamily.parse(self.family)
        self.state_ = _run_arnoldi(A, source, self.family_, u0, self.n_steps, t0=self.t0,
                                   tol=self.breakdown_tol, debug=self.check_invariants)
        self.n_features_in_ = self.state_.n
        self.n_steps_ = self.state_.k
        self.breakdown_ = self.state_.breakdown
        self.hessenberg_ = self.state_.hessenberg().copy()
        self.f_subdiag_ = np.asarray(self.state_.f_subdiag)
        return self

    def predict(self, t):
        """``u(t0 + t)`` for scalar ``t``; a 2-D array with one row per time for sequences."""
        check_is_fitted(self, "state_")
        if np.ndim(t) == 0:
            return _evaluate(self.state_, float(t))
        return np.vstack([_evaluate(self.state_, float(s)) for s in np.asarray(t).ravel()])

    def result(self, t):
        check_is_fitted(self, "state_")
        return _result(self.state_, float(t))
