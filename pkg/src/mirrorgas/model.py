"""Core model: log-density of the mirror gas, pair kernel, and test functions.

The gas lives on the unit circle, parametrized by angles in (-pi, pi].
Each point interacts with the *reflections* of the others across the real
axis, so the pair weight couples ``theta_j`` to ``-theta_k`` and the
log-kernel depends on the pair only through the wrapped sum
``theta_j + theta_k``.

Configurations are plain float64 arrays of wrapped angles.  All operations
here are pure functions; log-weights may be ``-inf`` (mirror-coincident
pair) but never NaN.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ModelParams:
    """Number of points ``n`` and interaction exponent ``beta``."""

    n: int
    beta: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not (self.beta > 0):
            raise ValueError(f"beta must be strictly positive, got {self.beta}")

    @property
    def npairs(self) -> int:
        return self.n * (self.n - 1) // 2


def wrap_angle(x):
    """Wrap ``x`` (scalar or array) to the half-open interval (-pi, pi].

    Idempotent on in-range inputs (bit-exact), and ``-pi`` maps to ``pi``.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("wrap_angle requires finite input")
    wrapped = np.pi - np.remainder(np.pi - x, TWO_PI)
    return float(wrapped) if wrapped.ndim == 0 else wrapped


def validate_configuration(angles, n: int | None = None) -> np.ndarray:
    """Return ``angles`` as a float64 array, checking the (-pi, pi] contract."""
    cfg = np.asarray(angles, dtype=float)
    if cfg.ndim != 1:
        raise ValueError("a configuration is a 1-d sequence of angles")
    if not np.all(np.isfinite(cfg)):
        raise ValueError("angles must be finite")
    if np.any(cfg <= -np.pi) or np.any(cfg > np.pi):
        raise ValueError("angles must lie in (-pi, pi]")
    if n is not None and cfg.shape[0] != n:
        raise ValueError(f"configuration has length {cfg.shape[0]}, expected {n}")
    return cfg


def pair_log_kernel(a, b, beta: float):
    """beta * log|e^{ia} - e^{-ib}| = beta * log(2 |sin((a+b)/2)|).

    Returns ``-inf`` exactly when ``a + b = 0 (mod 2 pi)``; broadcasts over
    array inputs.
    """
    if not beta > 0:
        raise ValueError("beta must be strictly positive")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("pair_log_kernel requires finite angles")
    s = np.abs(np.sin(0.5 * (a + b)))
    with np.errstate(divide="ignore"):
        out = beta * (np.log(s) + math.log(2.0))
    return float(out) if out.ndim == 0 else out


def log_weight(cfg, p: ModelParams) -> float:
    """Unnormalized log-density: sum of the pair kernel over all j < k.

    ``-inf`` iff some pair is mirror-coincident; 0 for n = 1.
    """
    cfg = validate_configuration(cfg, p.n)
    if p.n == 1:
        return 0.0
    # One triangular pass over the pair-sum matrix; |sin| keeps the kernel even.
    sums = cfg[:, None] + cfg[None, :]
    iu = np.triu_indices(p.n, k=1)
    s = np.abs(np.sin(0.5 * sums[iu]))
    if np.any(s == 0.0):
        return float("-inf")
    return float(p.beta * (np.log(s).sum() + p.npairs * math.log(2.0)))


def log_weight_delta(cfg, j: int, new_angle: float, p: ModelParams) -> float:
    """Change in ``log_weight`` when ``theta_j`` moves to ``new_angle``.

    Touches only the n-1 pairs containing ``j``.  Saturating arithmetic:
    a move onto the zero set returns ``-inf``; a move off the zero set
    returns ``+inf``.
    """
    cfg = validate_configuration(cfg, p.n)
    if not 0 <= j < p.n:
        raise IndexError(f"site index {j} out of range for n={p.n}")
    new_angle = float(new_angle)
    if not (-np.pi < new_angle <= np.pi):
        raise ValueError("new_angle must lie in (-pi, pi]")
    if p.n == 1:
        return 0.0
    others = np.delete(cfg, j)
    s_new = np.abs(np.sin(0.5 * (others + new_angle)))
    s_old = np.abs(np.sin(0.5 * (others + cfg[j])))
    if np.any(s_new == 0.0):
        return float("-inf")
    if np.any(s_old == 0.0):
        return float("inf")
    return float(p.beta * (np.log(s_new).sum() - np.log(s_old).sum()))


def reflect(cfg) -> np.ndarray:
    """Mirror a configuration across the real axis: every angle negated.

    ``pi`` is a fixed point (``-pi`` wraps back to ``pi``); the log-weight
    is exactly preserved because the kernel is even in the pair sum.
    """
    cfg = validate_configuration(cfg)
    return wrap_angle(-cfg)


@dataclass(frozen=True)
class TrigPoly:
    """Real trigonometric polynomial a_0 + sum_k (a_k cos k t + b_k sin k t).

    ``a`` holds a_0..a_d and ``b`` holds b_1..b_d (padded with zeros if
    shorter).  Derivatives are exact and termwise, so these test functions
    are C-infinity with Holder data q = 1.
    """

    a: tuple = field(default=(0.0,))
    b: tuple = field(default=())

    def __post_init__(self):
        a = tuple(float(v) for v in self.a)
        if not a:
            a = (0.0,)
        b = tuple(float(v) for v in self.b)
        if len(b) > len(a) - 1:
            raise ValueError("sine coefficients b_1..b_d cannot exceed degree d")
        b = b + (0.0,) * (len(a) - 1 - len(b))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def degree(self) -> int:
        return len(self.a) - 1

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = np.full_like(theta, self.a[0])
        for k in range(1, self.degree + 1):
            out = out + self.a[k] * np.cos(k * theta) + self.b[k - 1] * np.sin(k * theta)
        return float(out) if out.ndim == 0 else out

    def derivative(self) -> "TrigPoly":
        """Exact termwise derivative, again a TrigPoly."""
        d = self.degree
        a = (0.0,) + tuple(k * self.b[k - 1] for k in range(1, d + 1))
        b = tuple(-k * self.a[k] for k in range(1, d + 1))
        return TrigPoly(a=a, b=b)

    def to_json(self) -> str:
        return json.dumps({"a": list(self.a), "b": list(self.b)})

    @classmethod
    def from_json(cls, text: str) -> "TrigPoly":
        obj = json.loads(text)
        return cls(a=tuple(obj.get("a", [0.0])), b=tuple(obj.get("b", [])))


#: One builtin test function per fluctuation regime of the linear statistic.
BUILTIN_TEST_FUNCTIONS = {
    "sin": TrigPoly(a=(0.0,), b=(1.0,)),
    "cos": TrigPoly(a=(0.0, 1.0)),
    "sin2": TrigPoly(a=(0.0, 0.0, 0.0), b=(0.0, 1.0)),
    "cos2": TrigPoly(a=(0.0, 0.0, 1.0)),
    # (1 + sin t) cos t  =  cos t + sin(2t)/2
    "case-c": TrigPoly(a=(0.0, 1.0, 0.0), b=(0.0, 0.5)),
}


def resolve_test_function(spec: "str | TrigPoly | None") -> TrigPoly | None:
    """Accept a TrigPoly, a builtin name, or inline JSON coefficients."""
    if spec is None or isinstance(spec, TrigPoly):
        return spec
    if spec in BUILTIN_TEST_FUNCTIONS:
        return BUILTIN_TEST_FUNCTIONS[spec]
    try:
        return TrigPoly.from_json(spec)
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise ValueError(
            f"unknown test function {spec!r}; expected one of "
            f"{sorted(BUILTIN_TEST_FUNCTIONS)} or TrigPoly JSON"
        ) from exc


@dataclass(frozen=True)
class LogComplex:
    """A complex number stored as (log-magnitude, phase).

    Represents ``exp(log_mag + i phase)`` without ever forming the value,
    so factors like 2^{beta n (n-1)/2} stay representable.  ``log_mag`` of
    ``-inf`` encodes exact zero.
    """

    log_mag: float
    phase: float = 0.0

    def __post_init__(self):
        if math.isnan(self.log_mag):
            raise ValueError("log_mag must not be NaN")
        phase = self.phase if self.log_mag != float("-inf") else 0.0
        object.__setattr__(self, "phase", float(wrap_angle(phase)))
        object.__setattr__(self, "log_mag", float(self.log_mag))

    @classmethod
    def from_complex(cls, z: complex) -> "LogComplex":
        z = complex(z)
        if z == 0:
            return cls(float("-inf"), 0.0)
        return cls(math.log(abs(z)), math.atan2(z.imag, z.real))

    def to_complex(self) -> complex:
        """Materialize the value; overflows for very large log_mag."""
        if self.log_mag == float("-inf"):
            return 0j
        return math.exp(self.log_mag) * complex(math.cos(self.phase), math.sin(self.phase))

    def __mul__(self, other: "LogComplex") -> "LogComplex":
        if self.log_mag == float("-inf") or other.log_mag == float("-inf"):
            return LogComplex(float("-inf"))
        return LogComplex(self.log_mag + other.log_mag, self.phase + other.phase)

    def add(self, other: "LogComplex") -> "LogComplex":
        """Log-sum-exp addition of two log-complex values."""
        if self.log_mag == float("-inf"):
            return other
        if other.log_mag == float("-inf"):
            return self
        big, small = (self, other) if self.log_mag >= other.log_mag else (other, self)
        rest = 1.0 + cmath_exp(small.log_mag - big.log_mag, small.phase - big.phase)
        if rest == 0:
            return LogComplex(float("-inf"))
        return LogComplex(
            big.log_mag + math.log(abs(rest)),
            big.phase + math.atan2(rest.imag, rest.real),
        )


def cmath_exp(log_mag: float, phase: float) -> complex:
    """exp(log_mag + i phase) for moderate log_mag."""
    return math.exp(log_mag) * complex(math.cos(phase), math.sin(phase))
