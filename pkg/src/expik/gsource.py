"""Inhomogeneity sources ``g(t)`` and their derivative columns.

A source produces ``G_N = [g(t0), g'(t0), ..., g^{(N-1)}(t0)]`` at any
expansion point it supports. The main engine is truncated Taylor arithmetic
on a small expression tree (:class:`PowerSeriesProgram`), which is exact up
to rounding and can be re-centered anywhere.
"""
import json
import math
import threading
from pathlib import Path

import numpy as np

from .errors import ContractViolation, DerivativeOrderUnavailable
from .linalg import dense_expm, read_matrix_market
from .validation import check_positive_int, check_vector

__all__ = [
    "PowerSeriesProgram",
    "GSource",
    "SeparableProfile",
    "ExplicitDerivatives",
    "ProfileViaJordanTrick",
    "g_derivatives",
    "jordan_function",
    "source_from_json",
    "source_to_json",
    "MAX_DERIVATIVE_ORDER",
]

# 171! overflows a double
MAX_DERIVATIVE_ORDER = 171


# -- truncated Taylor arithmetic on coefficient arrays -----------------------

def _series_mul(a, b):
    return np.convolve(a, b)[: len(a)]


def _series_exp(a):
    n = len(a)
    out = np.zeros(n, dtype=complex)
    out[0] = np.exp(a[0])
    ja = np.arange(n) * a
    for k in range(1, n):
        out[k] = np.dot(ja[1:k + 1], out[k - 1::-1][:k]) / k
    return out


def _series_sincos(a):
    n = len(a)
    s = np.zeros(n, dtype=complex)
    c = np.zeros(n, dtype=complex)
    s[0], c[0] = np.sin(a[0]), np.cos(a[0])
    ja = np.arange(n) * a
    for k in range(1, n):
        s[k] = np.dot(ja[1:k + 1], c[k - 1::-1][:k]) / k
        c[k] = -np.dot(ja[1:k + 1], s[k - 1::-1][:k]) / k
    return s, c


_UNARY = ("sin", "cos", "exp", "square", "neg")
_NARY = ("add", "mul")


class PowerSeriesProgram:
    """Scalar profile ``p(t)`` as an expression tree evaluated in Taylor arithmetic.

    Nodes are plain JSON-like dicts::

        {"t": None}                      # the variable
        {"const": [re, im]}              # a complex constant
        {"op": "add" | "mul", "args": [...]}
        {"op": "sub", "args": [a, b]}
        {"op": "sin" | "cos" | "exp" | "square" | "neg", "args": [a]}

    The Python helpers :meth:`t`, :meth:`const` and the operators build the
    same trees.
    """

    def __init__(self, node):
        self.node = _validate_node(node)

    # construction helpers
    @classmethod
    def t(cls):
        return cls({"t": None})

    @classmethod
    def const(cls, value):
        value = complex(value)
        return cls({"const": [value.real, value.imag]})

    @staticmethod
    def _wrap(other):
        if isinstance(other, PowerSeriesProgram):
            return other.node
        return PowerSeriesProgram.const(other).node

    def __add__(self, other):
        return PowerSeriesProgram({"op": "add", "args": [self.node, self._wrap(other)]})

    __radd__ = __add__

    def __sub__(self, other):
        return PowerSeriesProgram({"op": "sub", "args": [self.node, self._wrap(other)]})

    def __rsub__(self, other):
        return PowerSeriesProgram({"op": "sub", "args": [self._wrap(other), self.node]})

    def __mul__(self, other):
        return PowerSeriesProgram({"op": "mul", "args": [self.node, self._wrap(other)]})

    __rmul__ = __mul__

    def __neg__(self):
        return PowerSeriesProgram({"op": "neg", "args": [self.node]})

    def apply(self, op):
        if op not in _UNARY:
            raise ContractViolation(f"unknown unary op {op!r}")
        return PowerSeriesProgram({"op": op, "args": [self.node]})

    def sin(self):
        return self.apply("sin")

    def cos(self):
        return self.apply("cos")

    def exp(self):
        return self.apply("exp")

    def square(self):
        return self.apply("square")

    # evaluation
    def taylor(self, t0, order):
        """Taylor coefficients ``p^{(k)}(t0) / k!`` for ``k < order``."""
        order = check_positive_int(order, "order")
        return _eval_node(self.node, complex(t0), order)

    def __call__(self, t):
        """Value at ``t``; arrays of (complex) points are evaluated elementwise."""
        if np.ndim(t) == 0:
            return complex(_eval_values(self.node, complex(t)))
        return _eval_values(self.node, np.asarray(t, dtype=complex))

    def is_zero(self):
        node = self.node
        return "const" in node and node["const"][0] == 0 and node["const"][1] == 0

    def to_json(self):
        return self.node

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(obj)

    def __repr__(self):
        return f"PowerSeriesProgram({json.dumps(self.node)})"


def _validate_node(node):
    if not isinstance(node, dict):
        raise ContractViolation(f"expression node must be a dict, got {node!r}")
    if "t" in node:
        return {"t": None}
    if "const" in node:
        val = node["const"]
        if isinstance(val, (int, float)):
            val = [val, 0.0]
        if len(val) != 2 or not all(math.isfinite(float(v)) for v in val):
            raise ContractViolation(f"const must be [re, im], got {val!r}")
        return {"const": [float(val[0]), float(val[1])]}
    op = node.get("op")
    args = node.get("args")
    if not isinstance(args, list):
        raise ContractViolation(f"node {node!r} needs an 'args' list")
    if op in _NARY:
        if not args:
            raise ContractViolation(f"{op} needs at least one argument")
    elif op == "sub":
        if len(args) != 2:
            raise ContractViolation("sub takes exactly two arguments")
    elif op in _UNARY:
        if len(args) != 1:
            raise ContractViolation(f"{op} takes exactly one argument")
    else:
        raise ContractViolation(f"unknown op {op!r}")
    return {"op": op, "args": [_validate_node(a) for a in args]}


def _eval_node(node, t0, order):
    if "t" in node:
        out = np.zeros(order, dtype=complex)
        out[0] = t0
        if order > 1:
            out[1] = 1.0
        return out
    if "const" in node:
        out = np.zeros(order, dtype=complex)
        out[0] = complex(*node["const"])
        return out
    op = node["op"]
    vals = [_eval_node(a, t0, order) for a in node["args"]]
    if op == "add":
        return np.sum(vals, axis=0)
    if op == "sub":
        return vals[0] - vals[1]
    if op == "mul":
        out = vals[0]
        for v in vals[1:]:
            out = _series_mul(out, v)
        return out
    a = vals[0]
    if op == "neg":
        return -a
    if op == "square":
        return _series_mul(a, a)
    if op == "exp":
        return _series_exp(a)
    s, c = _series_sincos(a)
    return s if op == "sin" else c


_POINTWISE = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "neg": np.negative,
              "square": np.square}


def _eval_values(node, z):
    if "t" in node:
        return z
    if "const" in node:
        return complex(*node["const"]) + 0 * z
    vals = [_eval_values(a, z) for a in node["args"]]
    op = node["op"]
    if op == "add":
        return sum(vals[1:], vals[0])
    if op == "sub":
        return vals[0] - vals[1]
    if op == "mul":
        out = vals[0]
        for v in vals[1:]:
            out = out * v
        return out
    return _POINTWISE[op](vals[0])


# -- sources --------------------------------------------------------------------

class GSource:
    """Base class: ``derivatives(N, t0)`` returns the ``n x N`` matrix ``G_N``.

    Subclasses implement :meth:`_compute`. Results are cached per expansion
    point so that growing ``N`` during an integration run is cheap; the cache
    is guarded by a lock so concurrent readers are safe.
    """

    n = None

    def __init__(self):
        self._cache = {}
        self._lock = threading.Lock()

    @property
    def is_zero(self):
        return False

    def supports(self, t0):
        return True

    def evaluate(self, t):
        """g(t) as a length-n vector (complex t allowed where meaningful)."""
        return self.derivatives(1, t)[:, 0]

    def evaluate_many(self, ts):
        return np.column_stack([self.evaluate(t) for t in np.asarray(ts).ravel()])

    def derivatives(self, N, t0=0.0):
        N = check_positive_int(N, "N")
        if N > MAX_DERIVATIVE_ORDER:
            raise ContractViolation(
                f"N={N} rejected: l! overflows for l > {MAX_DERIVATIVE_ORDER - 1}")
        key = complex(t0)
        with self._lock:
            cached = self._cache.get(key)
            if cached is not None and cached.shape[1] >= N:
                return cached[:, :N].copy()
        G = np.asarray(self._compute(N, t0), dtype=complex)
        if G.shape != (self.n, N):
            raise ContractViolation(f"source produced shape {G.shape}, expected {(self.n, N)}")
        if not np.all(np.isfinite(G)):
            raise ContractViolation(f"derivative columns at t0={t0} are not finite")
        with self._lock:
            cached = self._cache.get(key)
            if cached is None or cached.shape[1] < N:
                self._cache[key] = G
        return G.copy()

    def _compute(self, N, t0):
        raise NotImplementedError


def _factorials(N):
    return np.array([float(math.factorial(k)) for k in range(N)])


class SeparableProfile(GSource):
    """``g(t) = sum_j p_j(t) v_j`` with scalar profiles given as power-series programs."""

    def __init__(self, terms, n=None):
        super().__init__()
        parsed = []
        for profile, direction in terms:
            if not isinstance(profile, PowerSeriesProgram):
                profile = PowerSeriesProgram(profile)
            v = check_vector(direction, n=n, name="direction")
            n = v.shape[0]
            parsed.append((profile, v))
        if n is None:
            raise ContractViolation("an empty SeparableProfile needs an explicit n")
        self.n = check_positive_int(n, "n")
        self.terms = parsed

    @property
    def is_zero(self):
        return all(p.is_zero() or not np.any(v) for p, v in self.terms)

    def _compute(self, N, t0):
        G = np.zeros((self.n, N), dtype=complex)
        fact = _factorials(N)
        for profile, v in self.terms:
            G += np.outer(v, profile.taylor(t0, N) * fact)
        return G

    def evaluate(self, t):
        out = np.zeros(self.n, dtype=complex)
        for profile, v in self.terms:
            out += profile(t) * v
        return out

    def evaluate_many(self, ts):
        """``n x len(ts)`` matrix of values ``g(t_j)``."""
        ts = np.asarray(ts, dtype=complex).ravel()
        out = np.zeros((self.n, ts.size), dtype=complex)
        for profile, v in self.terms:
            out += np.outer(v, profile(ts))
        return out


class ExplicitDerivatives(GSource):
    """Caller-supplied derivative tables ``{t0: G}`` with ``G[:, l] = g^{(l)}(t0)``."""

    def __init__(self, table, n=None):
        super().__init__()
        if not isinstance(table, dict):
            table = {0.0: table}
        self.table = {}
        for t0, G in table.items():
            G = np.asarray(G, dtype=complex)
            if G.ndim == 1:
                G = G.reshape(-1, 1)
            if n is None:
                n = G.shape[0]
            if G.ndim != 2 or G.shape[0] != n:
                raise ContractViolation("all derivative tables must have n rows")
            if not np.all(np.isfinite(G)):
                raise ContractViolation("derivative table contains NaN or Inf")
            self.table[float(t0)] = G
        if n is None:
            raise ContractViolation("ExplicitDerivatives needs at least one table or n")
        self.n = int(n)

    @property
    def is_zero(self):
        return all(not np.any(G) for G in self.table.values())

    def supports(self, t0):
        return float(np.real(t0)) in self.table and np.imag(t0) == 0

    def _compute(self, N, t0):
        if not self.supports(t0):
            raise DerivativeOrderUnavailable(
                f"no derivative table at t0={t0}; available points: {sorted(self.table)}")
        G = self.table[float(np.real(t0))]
        if G.shape[1] < N:
            raise DerivativeOrderUnavailable(
                f"table at t0={t0} has {G.shape[1]} columns, {N} requested")
        return G[:, :N]

    def evaluate(self, t):
        # truncated Taylor polynomial about the nearest tabulated point
        t0 = min(self.table, key=lambda s: abs(t - s))
        G = self.table[t0]
        h = t - t0
        powers = np.array([h ** k / math.factorial(k) for k in range(G.shape[1])])
        return G @ powers


def jordan_function(name):
    """Matrix function ``M -> h(M)`` for ``name`` in {exp, sin, cos}, built on dense_expm."""
    if name == "exp":
        return dense_expm
    if name == "sin":
        return lambda M: (dense_expm(1j * M) - dense_expm(-1j * M)) / 2j
    if name == "cos":
        return lambda M: (dense_expm(1j * M) + dense_expm(-1j * M)) / 2
    raise ContractViolation(f"no matrix function named {name!r}")


class ProfileViaJordanTrick(GSource):
    """``g(t) = h(t) v`` with derivatives read off ``h(t0 I + H) e_1``.

    ``H`` is the ``N x N`` transposed Jordan block, so ``h(t0 I + H) e_1``
    holds the scaled derivatives ``h^{(k)}(t0) / k!``. ``h`` may be a callable
    on square matrices or one of the names accepted by :func:`jordan_function`.
    """

    def __init__(self, h, direction):
        super().__init__()
        self.name = h if isinstance(h, str) else getattr(h, "__name__", "h")
        self.h = jordan_function(h) if isinstance(h, str) else h
        self.v = check_vector(direction, name="direction")
        self.n = self.v.shape[0]

    def scaled_column(self, N, t0=0.0):
        """``h(t0 I + H) e_1``: entry k is ``h^{(k)}(t0) / k!``."""
        H = np.diag(np.ones(N - 1), -1).astype(complex)
        return np.asarray(self.h(t0 * np.eye(N) + H))[:, 0]

    def _compute(self, N, t0):
        return np.outer(self.v, self.scaled_column(N, t0) * _factorials(N))

    def evaluate(self, t):
        return complex(np.asarray(self.h(np.array([[complex(t)]])))[0, 0]) * self.v


def g_derivatives(src, N, t0=0.0):
    """``G_N`` for ``src`` about ``t0``: column l is ``g^{(l)}(t0)``."""
    if not isinstance(src, GSource):
        raise ContractViolation("src must be a GSource")
    return src.derivatives(N, t0)


# -- JSON bundle --------------------------------------------------------------------

def _load_direction(entry, base_dir):
    if isinstance(entry, str):
        path = Path(entry)
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        return np.asarray(read_matrix_market(path), dtype=complex).reshape(-1)
    arr = np.asarray(entry, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 2:
        return arr[:, 0] + 1j * arr[:, 1]
    return arr.astype(complex)


def source_from_json(obj, base_dir=None):
    """Build a :class:`SeparableProfile` from ``{"n": .., "terms": [{"profile": .., "direction": ..}]}``.

    ``direction`` is either a list of ``[re, im]`` pairs or a path to a Matrix
    Market dense vector (relative paths resolve against ``base_dir``).
    """
    if isinstance(obj, str) and obj.lstrip().startswith("{"):
        obj = json.loads(obj)
    elif isinstance(obj, (str, Path)):
        base_dir = Path(obj).parent if base_dir is None else base_dir
        obj = json.loads(Path(obj).read_text())
    if "terms" not in obj and isinstance(obj.get("source"), dict):
        obj = obj["source"]  # a problem bundle written by dump_problem
    terms = [(PowerSeriesProgram(t["profile"]), _load_direction(t["direction"], base_dir))
             for t in obj.get("terms", [])]
    return SeparableProfile(terms, n=obj.get("n"))


def source_to_json(src):
    if not isinstance(src, SeparableProfile):
        raise ContractViolation("only SeparableProfile sources serialize to JSON")
    return {
        "n": src.n,
        "terms": [{"profile": p.to_json(),
                   "direction": [[float(z.real), float(z.imag)] for z in v]}
                  for p, v in src.terms],
    }
