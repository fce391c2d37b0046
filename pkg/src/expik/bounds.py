"""Computable error bounds and convergence indicators.

Everything that involves factorials or powers is evaluated as a logarithm
(via :func:`math.lgamma`) and exponentiated at the end, so the bounds stay
finite far beyond the point where the individual factors overflow.
"""
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .basis import BasisFamily, hessenberg
from .errors import ContractViolation
from .linalg import as_operator, dense_expm, log_norm
from .validation import check_positive_int, check_time

__all__ = [
    "BoundReport",
    "truncation_bound_bessel",
    "eps_elementwise_bound",
    "element_constant",
    "wk_growth_bounds",
    "phi_norm_bound",
    "tail_bound",
    "conditioning_check",
    "chebyshev_eigenvectors",
    "convergence_indicator",
    "power_norm_log",
    "max_modulus",
    "growth_constant",
    "bound_report",
]

_SQRT2 = math.sqrt(2.0)


def _exp_clamped(logv):
    # largest finite double has log ~709.78
    return math.exp(min(logv, 709.0))


def truncation_bound_bessel(N, t):
    """``(t/2)^N / (N+1)! * sqrt(2) t e^t``, the bound on the Bessel residual norm."""
    N = check_positive_int(N, "N")
    t = check_time(t)
    if t == 0.0:
        return 0.0
    logv = N * math.log(t / 2) - math.lgamma(N + 2) + math.log(_SQRT2 * t) + t
    return _exp_clamped(logv)


def element_constant(family, N, t, R):
    """``C(R) = max(||exp(t H_N)||, 2 sqrt(2) e^{R + 1/(4R)} / (1 - t/(2R)))``."""
    family = BasisFamily.parse(family)
    lam = t / (2 * R)
    norm_exp = np.linalg.norm(dense_expm(t * hessenberg(family, N)), 2)
    return max(norm_exp, 2 * _SQRT2 * math.exp(R + 1 / (4 * R)) / (1 - lam))


def eps_elementwise_bound(N, k, t, R=None, family=BasisFamily.BESSEL_J):
    """Bound on entry ``k`` (1-based) of the Bessel residual vector.

    Integrating the element decay ``|exp(s H_N)_{k,N}| <= C(R) (s / 2R)^{N-k}``
    against ``|phi_N(s)| <= (s/2)^N e^s / N!`` gives

        e^t C(R) t^{2N-k+1} (N-k)! / (R^{N-k} 2^{2N-k} (2N-k+1)!).

    With ``R = t^2`` this is ``e^t C t^{k+1} (N-k)! / (2^{2N-k} (2N-k+1)!)``;
    the compact form of the claim quotes ``t^k`` there, which is one power of
    ``t`` short of what the integration produces, so the derived form is used.
    ``R`` defaults to ``max(t + 1, 2t)``.
    """
    N = check_positive_int(N, "N")
    k = check_positive_int(k, "k")
    if k > N:
        raise ContractViolation(f"k = {k} must be <= N = {N}")
    t = check_time(t)
    if R is None:
        R = max(t + 1.0, 2.0 * t)
    if not R > t:
        raise ContractViolation(f"R = {R} must exceed t = {t}")
    if t == 0.0:
        return 0.0
    C = element_constant(family, N, t, R)
    logv = (t + math.log(C) + (2 * N - k + 1) * math.log(t) + math.lgamma(N - k + 1)
            - (N - k) * math.log(R) - (2 * N - k) * math.log(2.0) - math.lgamma(2 * N - k + 2))
    return _exp_clamped(logv)


def wk_growth_bounds(M_t, t, K):
    """Per-``k`` bounds on ``||w_k||``, ``k = 0 .. K-1``, for the Bessel expansions.

    ``t < 2``: ``M_t k! (2/t)^k``. ``t >= 2``: ``M_t k!``, tightened to
    ``2 M_t k! (2/t)^k`` once ``k > 2 (t/2)^2 + 1``, the threshold under which
    the geometric tail argument goes through.
    """
    K = check_positive_int(K, "K")
    if not M_t > 0 or not t > 0:
        raise ContractViolation("M_t and t must be positive")
    logM = math.log(M_t)
    out = np.empty(K)
    threshold = 2 * (t / 2) ** 2 + 1
    for k in range(K):
        base = logM + math.lgamma(k + 1)
        if t < 2:
            logv = base + k * math.log(2 / t)
        else:
            logv = base
            if k > threshold:
                logv = min(logv, base + math.log(2.0) + k * math.log(2 / t))
        out[k] = _exp_clamped(logv)
    return out


def phi_norm_bound(ell, A):
    """``max(1, e^{mu(A)}) / ell!`` with ``mu`` the logarithmic norm."""
    ell = check_positive_int(ell, "ell")
    mu = log_norm(A)
    return _exp_clamped(max(0.0, mu) - math.lgamma(ell + 1))


def tail_bound(N):
    """``2 sqrt(N) (1 + sqrt(2))^N``, bounding ``||K_N^{-1} H_N^k e_1||`` for ``k >= N``."""
    N = check_positive_int(N, "N")
    return _exp_clamped(math.log(2.0) + 0.5 * math.log(N) + N * math.log1p(_SQRT2))


def chebyshev_eigenvectors(family, N):
    """Eigen-decomposition of ``H_N`` from Chebyshev zeros.

    For ``BESSEL_I`` the eigenvalues are the zeros ``x_k`` of ``T_N`` and the
    eigenvectors have entries ``T_i(x_k)``; ``BESSEL_J`` is the same after
    the diagonal similarity ``diag((-i)^j)``, with eigenvalues ``i x_k``.
    """
    family = BasisFamily.parse(family)
    if family is BasisFamily.MONOMIAL:
        raise ContractViolation("the monomial generator is not diagonalizable")
    N = check_positive_int(N, "N", minimum=2)
    theta = (2 * np.arange(N) + 1) * np.pi / (2 * N)
    x = np.cos(theta)
    V = np.cos(np.outer(np.arange(N), theta)).astype(complex)
    if family is BasisFamily.BESSEL_J:
        V = ((-1j) ** np.arange(N))[:, None] * V
        return 1j * x, V
    return x.astype(complex), V


def conditioning_check(family, N, t_grid=None):
    """``(kappa_2(V), max_t ||exp(t H_N)|| / e^{t alpha})`` for a Bessel family.

    ``alpha`` is the spectral abscissa: 0 for ``BESSEL_J``, ``cos(pi / 2N)``
    for ``BESSEL_I``. ``t_grid`` defaults to 101 points on ``[0, 10]``.
    """
    family = BasisFamily.parse(family)
    lam, V = chebyshev_eigenvectors(family, N)
    kappa = float(np.linalg.cond(V, 2))
    alpha = float(np.max(lam.real))
    t_grid = np.linspace(0.0, 10.0, 101) if t_grid is None else np.asarray(t_grid, dtype=float)
    H = hessenberg(family, N)
    worst = max(np.linalg.norm(dense_expm(s * H), 2) / math.exp(s * alpha) for s in t_grid)
    return kappa, float(worst)


def power_norm_log(F, p):
    """``log ||F^p||_2`` by binary powering, renormalizing after every product."""
    F = np.asarray(F, dtype=complex)
    p = check_positive_int(p, "p")
    base, base_log = F, 0.0
    acc, acc_log = None, 0.0
    while True:
        s = np.linalg.norm(base, 2)
        if s == 0.0:
            return -math.inf
        base, base_log = base / s, base_log + math.log(s)
        if p & 1:
            acc = base if acc is None else acc @ base
            s = np.linalg.norm(acc, 2)
            if s == 0.0:
                return -math.inf
            acc, acc_log = acc / s, acc_log + base_log + math.log(s)
        p >>= 1
        if not p:
            return acc_log
        base, base_log = base @ base, 2 * base_log


def convergence_indicator(F_N, rho_A):
    """``| ||F_N^N||^{1/N} / rho(A) - 1 |`` for the square Arnoldi matrix ``F_N``."""
    F = np.asarray(F_N, dtype=complex)
    if F.ndim != 2 or F.shape[0] != F.shape[1] or F.shape[0] == 0:
        raise ContractViolation("F_N must be a non-empty square matrix")
    if not rho_A > 0:
        raise ContractViolation(f"rho_A must be positive, got {rho_A}")
    N = F.shape[0]
    logn = power_norm_log(F, N)
    root = 0.0 if logn == -math.inf else math.exp(logn / N)
    return abs(root / rho_A - 1.0)


def max_modulus(src, t, samples=2048):
    """``M_t = max_{|lambda| = t} ||g(lambda)||`` sampled on the circle."""
    t = check_time(t)
    angles = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    values = src.evaluate_many(t * np.exp(1j * angles))
    return float(np.max(np.linalg.norm(values, axis=0)))


def growth_constant(src, norm_A, N, t0=0.0):
    """Smallest ``c`` with ``||g^{(l)}(t0)|| <= c ||A||^l`` over the first ``N`` columns."""
    if not norm_A > 0:
        raise ContractViolation("norm_A must be positive")
    G = src.derivatives(N, t0)
    norms = np.linalg.norm(G, axis=0)
    with np.errstate(divide="ignore"):
        logs = np.where(norms > 0, np.log(np.where(norms > 0, norms, 1.0)), -np.inf)
    vals = logs - np.arange(N) * math.log(norm_A)
    return float(math.exp(min(np.max(vals), 709.0))) if np.isfinite(np.max(vals)) else 0.0


@dataclass
class BoundReport:
    """All bound quantities for one ``(family, N, t)`` triple; ``None`` when not applicable."""

    t: float
    N: int
    family: str
    truncation_bound: float
    eps_elementwise: list
    wk_bounds: list
    phi_bound: float
    tail_bound: float
    kappa_V: float
    expH_bound: float
    indicator: float = None
    M_t: float = None
    growth_constant: float = None

    def check(self):
        """Raise ContractViolation unless every present field is finite and nonnegative."""
        for name, val in asdict(self).items():
            if name in ("family", "t", "N") or val is None:
                continue
            arr = np.atleast_1d(np.asarray(val, dtype=float))
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ContractViolation(f"bound field {name} is not finite and nonnegative")
        return self

    def to_json(self):
        return asdict(self)

    def dumps(self):
        return json.dumps(self.to_json(), indent=1)

    CSV_FIELDS = ("family", "t", "N", "truncation_bound", "eps_max", "wk_max", "phi_bound",
                  "tail_bound", "kappa_V", "expH_bound", "indicator", "M_t", "growth_constant")

    def csv_row(self):
        def fmt(v):
            return "" if v is None else repr(float(v))
        return [self.family, repr(float(self.t)), str(self.N), fmt(self.truncation_bound),
                fmt(max(self.eps_elementwise) if self.eps_elementwise else None),
                fmt(max(self.wk_bounds) if self.wk_bounds else None),
                fmt(self.phi_bound), fmt(self.tail_bound), fmt(self.kappa_V),
                fmt(self.expH_bound), fmt(self.indicator), fmt(self.M_t),
                fmt(self.growth_constant)]


def bound_report(family, N, t, A=None, src=None, F=None, rho=None, ell=1, R=None):
    """Assemble a :class:`BoundReport`.

    ``A`` enables the phi bound, ``src`` the ``M_t``/``w_k`` bounds and the
    growth constant, ``F`` with ``rho`` the convergence indicator.
    """
    family = BasisFamily.parse(family)
    N = check_positive_int(N, "N")
    t = check_time(t)
    if family is BasisFamily.MONOMIAL:
        # the truncated Jordan block reproduces t^l/l! exactly
        trunc, eps, kappa, exph = 0.0, [0.0] * N, None, None
    else:
        trunc = truncation_bound_bessel(N, t)
        eps = [eps_elementwise_bound(N, k, t, R, family) for k in range(1, N + 1)]
        kappa, exph = conditioning_check(family, max(N, 2), t_grid=np.linspace(0, t, 21))
    phi = phi_norm_bound(ell, A) if A is not None else None
    M_t = wk = c = None
    if src is not None and t > 0:
        M_t = max_modulus(src, t)
        if M_t > 0:
            wk = list(wk_growth_bounds(M_t, t, N))
        if A is not None:
            norm_A = as_operator(A).norm1()
            if norm_A > 0:
                c = growth_constant(src, norm_A, N)
    ind = convergence_indicator(F, rho) if F is not None and rho else None
    return BoundReport(t=t, N=N, family=family.value, truncation_bound=trunc,
                       eps_elementwise=eps, wk_bounds=wk or [], phi_bound=phi,
                       tail_bound=tail_bound(N), kappa_V=kappa, expH_bound=exph,
                       indicator=ind, M_t=M_t, growth_constant=c).check()
