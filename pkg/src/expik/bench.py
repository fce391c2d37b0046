"""Schrödinger benchmark problems, a certified reference solver and study drivers."""
import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .basis import BasisFamily
from .errors import ContractViolation, OracleUncertified
from .gsource import PowerSeriesProgram, SeparableProfile, source_from_json, source_to_json
from .integrator import infinite_arnoldi
from .linalg import (SparseOperator, as_operator, dense_expm, read_matrix_market,
                     write_matrix_market)
from .validation import check_positive_int, check_time

__all__ = [
    "BenchmarkProblem",
    "StudyResult",
    "StudyRow",
    "periodic_laplacian_1d",
    "periodic_laplacian_2d",
    "schrodinger_1d",
    "schrodinger_2d",
    "rk4_solve",
    "augmented_expm_solution",
    "reference_solution",
    "run_convergence_study",
    "run_timing_study",
    "dump_problem",
    "load_problem",
    "thread_count",
]

CSV_HEADER = ["family", "epsilon", "T", "N", "error", "seconds"]


@dataclass
class BenchmarkProblem:
    """``u' = A u + g(t)``, ``u(0) = u0`` on ``[0, T]``."""

    A: SparseOperator
    src: SeparableProfile
    u0: np.ndarray
    T: float
    label: str = "custom"
    epsilon: float = float("nan")
    D: SparseOperator = None

    @property
    def n(self):
        return self.A.n


def periodic_laplacian_1d(n):
    """Second-order periodic difference on ``x_j = j / n``, scaled by ``n**2``."""
    n = check_positive_int(n, "n", minimum=3)
    main = -2.0 * np.ones(n)
    off = np.ones(n - 1)
    D = sp.diags([off, main, off], [-1, 0, 1], shape=(n, n), format="lil")
    D[0, n - 1] = 1.0
    D[n - 1, 0] = 1.0
    return (D.tocsr() * float(n) ** 2).astype(complex)


def periodic_laplacian_2d(n_per_side):
    """Kronecker sum ``D (x) I + I (x) D`` of the 1-D periodic Laplacian."""
    D = periodic_laplacian_1d(n_per_side)
    eye = sp.identity(n_per_side, format="csr", dtype=complex)
    return (sp.kron(D, eye) + sp.kron(eye, D)).tocsr()


def _forcing_profile():
    # f(t) = (1 + i) sin(t)^2
    return PowerSeriesProgram.const(1 + 1j) * PowerSeriesProgram.t().sin().square()


def schrodinger_1d(n=100, epsilon=1e-3, T=0.5):
    """``i u_t = -eps u_xx + f(t) sin(16 pi x (1 - x))`` with periodic boundaries.

    Rearranged as ``u' = i eps D u - i f(t) s``; ``u0 = exp(-100 (x - 1/2)^2)``.
    """
    n = check_positive_int(n, "n", minimum=8)
    x = np.arange(n) / n
    D = periodic_laplacian_1d(n)
    s = np.sin(16 * np.pi * x * (1 - x))
    src = SeparableProfile([(_forcing_profile(), -1j * s)])
    u0 = np.exp(-100 * (x - 0.5) ** 2).astype(complex)
    return BenchmarkProblem(A=SparseOperator.from_scipy(1j * epsilon * D), src=src, u0=u0,
                            T=float(T), label="schrodinger1d", epsilon=float(epsilon),
                            D=SparseOperator.from_scipy(D))


def schrodinger_2d(n_per_side=32, epsilon=5e-3, T=1.0):
    """2-D analogue on the ``n_per_side**2`` periodic grid (x index slowest)."""
    m = check_positive_int(n_per_side, "n_per_side", minimum=8)
    x = np.arange(m) / m
    X, Y = np.meshgrid(x, x, indexing="ij")
    D = periodic_laplacian_2d(m)
    s = np.sin(16 * np.pi * X * (1 - X) * Y * (1 - Y)).ravel()
    src = SeparableProfile([(_forcing_profile(), -1j * s)])
    u0 = np.exp(-100 * ((X - 0.5) ** 2 + (Y - 0.5) ** 2)).ravel().astype(complex)
    return BenchmarkProblem(A=SparseOperator.from_scipy(1j * epsilon * D), src=src, u0=u0,
                            T=float(T), label="schrodinger2d", epsilon=float(epsilon),
                            D=SparseOperator.from_scipy(D))


# -- reference solver --------------------------------------------------------

def rk4_solve(A, src, u0, t, steps):
    """Classical fixed-step RK4 for ``u' = A u + g(t)`` on ``[0, t]``."""
    M = as_operator(A).to_scipy()
    steps = check_positive_int(steps, "steps")
    h = t / steps
    u = np.array(u0, dtype=complex)
    g = src.evaluate if src is not None else (lambda s: 0.0)
    g_prev = g(0.0)
    for i in range(steps):
        s = i * h
        g_mid = g(s + h / 2)
        g_next = g(s + h)
        k1 = M @ u + g_prev
        k2 = M @ (u + h / 2 * k1) + g_mid
        k3 = M @ (u + h / 2 * k2) + g_mid
        k4 = M @ (u + h * k3) + g_next
        u = u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        g_prev = g_next
    return u


def augmented_expm_solution(A, src, u0, t, m=64, max_piece=1.0):
    """Solution from dense exponentials of the Monomial augmented matrix.

    ``[0, t]`` is split into pieces of length at most ``max_piece``; on each
    piece ``g`` is re-expanded in ``m`` Taylor terms and the tail block is
    rescaled geometrically so the bordered matrix stays well balanced.
    """
    A = as_operator(A)
    n = A.n
    Ad = A.toarray()
    u = np.array(u0, dtype=complex)
    pieces = max(1, math.ceil(t / max_piece))
    h = t / pieces
    for i in range(pieces):
        if src is None or src.is_zero:
            u = dense_expm(h * Ad) @ u
            continue
        G = src.derivatives(m, i * h)
        norms = np.linalg.norm(G, axis=0)
        ref = norms[:4].max() if norms[:4].max() > 0 else norms.max()
        if ref == 0:
            u = dense_expm(h * Ad) @ u
            continue
        ell = np.arange(1, m)
        r = max(1.0, float(np.max((norms[1:] / ref) ** (1.0 / ell))))
        gamma = 1.0 / r
        scale = gamma ** np.arange(m)
        M = np.zeros((n + m, n + m), dtype=complex)
        M[:n, :n] = Ad
        M[:n, n:] = G * scale
        M[n + np.arange(1, m), n + np.arange(m - 1)] = 1.0 / gamma
        b = np.zeros(n + m, dtype=complex)
        b[:n] = u
        b[n] = 1.0
        u = (dense_expm(h * M) @ b)[:n]
    return u


def reference_solution(p, t=None, tol=1e-9, max_doublings=18, cross_check=None):
    """Certified RK4 solution of ``p`` at time ``t`` (default ``p.T``).

    The step count is doubled until two successive RK4 answers agree to
    ``tol`` relative; the finer one is returned. For ``n <= 200`` it is also
    compared against :func:`augmented_expm_solution` at ``1e-8``.

    Raises
    ------
    OracleUncertified
        If the step-doubling test or the cross-check fails.
    """
    t = p.T if t is None else check_time(t)
    if t > p.T * (1 + 1e-12):
        raise ContractViolation(f"t = {t} is beyond the horizon T = {p.T}")
    if t == 0:
        return p.u0.copy()
    norm_A = p.A.norm1()
    steps = max(16, math.ceil(t * max(norm_A, 2.0) / 0.5))
    coarse = rk4_solve(p.A, p.src, p.u0, t, steps)
    fine, diff = coarse, math.inf
    for _ in range(max_doublings):
        steps *= 2
        fine = rk4_solve(p.A, p.src, p.u0, t, steps)
        diff = np.linalg.norm(fine - coarse) / max(np.linalg.norm(fine), 1e-300)
        if diff < tol:
            break
        coarse = fine
    else:
        raise OracleUncertified(f"RK4 step doubling did not reach {tol:g} (last change {diff:.2e})",
                                coarse=coarse, fine=fine)
    if cross_check is None:
        cross_check = p.n <= 200
    if cross_check:
        alt = augmented_expm_solution(p.A, p.src, p.u0, t)
        rel = np.linalg.norm(alt - fine) / max(np.linalg.norm(alt), 1e-300)
        if rel > 1e-8:
            raise OracleUncertified(f"RK4 and augmented expm disagree by {rel:.2e}",
                                    coarse=fine, fine=alt)
    return fine


# -- studies -----------------------------------------------------------------

@dataclass(frozen=True)
class StudyRow:
    family: str
    epsilon: float
    T: float
    N: int
    error: float
    seconds: float = None

    def as_list(self):
        secs = "" if self.seconds is None else repr(float(self.seconds))
        return [self.family, repr(float(self.epsilon)), repr(float(self.T)), str(self.N),
                repr(float(self.error)), secs]


@dataclass
class StudyResult:
    """Rows of a convergence or timing study, writable as CSV."""

    rows: list = field(default_factory=list)

    def series(self, family):
        family = BasisFamily.parse(family).value
        return [r for r in self.rows if r.family == family]

    def errors(self, family):
        return np.array([r.error for r in self.series(family)])

    def to_csv(self, path_or_file=None, header_lines=()):
        """Write CSV; returns the text when no target is given."""
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow(row.as_list())
        text = buf.getvalue()
        if path_or_file is None:
            return text
        if hasattr(path_or_file, "write"):
            path_or_file.write(text)
        else:
            Path(path_or_file).write_text(text)
        return text


def thread_count():
    """Worker count from ``EXPIK_THREADS`` (default 1)."""
    raw = os.environ.get("EXPIK_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ContractViolation(f"EXPIK_THREADS must be an integer, got {raw!r}") from None


def _check_increasing(Ns):
    Ns = [check_positive_int(N, "N") for N in Ns]
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ContractViolation("N list must be strictly increasing")
    return Ns


def _relative_error(u, ref):
    return float(np.linalg.norm(u - ref) / np.linalg.norm(ref))


def run_convergence_study(p, families, Ns, reference=None, threads=None):
    """Relative error of the infinite Arnoldi solution at ``p.T`` per family and ``N``."""
    Ns = _check_increasing(Ns)
    families = [BasisFamily.parse(f) for f in families]
    ref = reference_solution(p) if reference is None else reference
    cells = [(f, N) for f in families for N in Ns]

    def run(cell):
        f, N = cell
        res = infinite_arnoldi(p.A, p.src, f, p.u0, p.T, N)
        return StudyRow(f.value, p.epsilon, p.T, N, _relative_error(res.u, ref))

    threads = thread_count() if threads is None else threads
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run, cells))
    else:
        rows = [run(c) for c in cells]
    return StudyResult(rows)


def run_timing_study(p, family, Ns, reference=None, repeats=3):
    """Wall-clock seconds (median of ``repeats``) and error per ``N``.

    Timing covers the integrator call only; cells run sequentially so they
    do not compete for cores.
    """
    Ns = _check_increasing(Ns)
    family = BasisFamily.parse(family)
    ref = reference_solution(p) if reference is None else reference
    rows = []
    for N in Ns:
        times = []
        for _ in range(repeats):
            start = time.perf_counter()
            res = infinite_arnoldi(p.A, p.src, family, p.u0, p.T, N)
            times.append(time.perf_counter() - start)
        rows.append(StudyRow(family.value, p.epsilon, p.T, N,
                             _relative_error(res.u, ref), float(np.median(times))))
    return StudyResult(rows)


# -- external bundle ---------------------------------------------------------

def dump_problem(p, directory):
    """Write ``A.mtx``, ``u0.mtx``, ``dir<j>.mtx`` and ``problem.json`` into ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_matrix_market(d / "A.mtx", p.A, comment=p.label)
    write_matrix_market(d / "u0.mtx", p.u0)
    bundle = source_to_json(p.src)
    for j, term in enumerate(bundle["terms"]):
        name = f"dir{j}.mtx"
        write_matrix_market(d / name, p.src.terms[j][1])
        term["direction"] = name
    meta = {"label": p.label, "epsilon": p.epsilon, "T": p.T, "A": "A.mtx", "u0": "u0.mtx",
            "source": bundle}
    (d / "problem.json").write_text(json.dumps(meta, indent=1, sort_keys=True))
    return d / "problem.json"


def load_problem(path):
    """Inverse of :func:`dump_problem`; ``path`` is the JSON file or its directory."""
    path = Path(path)
    if path.is_dir():
        path = path / "problem.json"
    meta = json.loads(path.read_text())
    base = path.parent
    A = as_operator(read_matrix_market(base / meta["A"]))
    u0 = np.asarray(read_matrix_market(base / meta["u0"]), dtype=complex).reshape(-1)
    src = source_from_json(meta["source"], base_dir=base)
    return BenchmarkProblem(A=A, src=src, u0=u0, T=float(meta["T"]),
                            label=meta.get("label", "custom"),
                            epsilon=float(meta.get("epsilon", float("nan"))))
