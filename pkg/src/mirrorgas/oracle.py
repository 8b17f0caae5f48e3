"""Ground-truth values of Z_n and I(f) at small n.

Independent of both the sampler and the asymptotic formulas:

* ``z2_closed_form``  - exact log Z_2 via the wrapped-sum reduction.
* ``quadrature_I``    - deterministic Gauss-Legendre evaluation of the
  n-fold integral I(f) for n <= 4, with doubling refinement.
* ``importance_log_Z`` - unbiased two-mode Gaussian importance estimate of
  Z_n for moderate n, with a delta-method standard error.
* ``marginal_n3``     - single-angle marginal at n = 3 by 2-d quadrature.

For n = 2 the integrand depends on the angles only through their sum, so
the quadrature integrates in rotated coordinates with panels graded toward
the kink of |sin(s/2)|^beta at s = 0; this reaches ~1e-10 relative accuracy
for all beta, which a plain tensor rule cannot do for non-even beta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .errors import QuadratureConvergenceError, UnsupportedSizeError
from .model import LogComplex, ModelParams, TrigPoly

PI = math.pi


@dataclass(frozen=True)
class QuadratureSpec:
    """Gauss-Legendre refinement schedule on (-pi, pi] per axis."""

    nodes_per_dim: int = 32
    refine_until: float = 1e-8
    max_nodes: int = 512

    def __post_init__(self):
        if self.nodes_per_dim < 2:
            raise ValueError("nodes_per_dim must be >= 2")
        if not 0 < self.refine_until < 1:
            raise ValueError("refine_until must be in (0, 1)")


@dataclass(frozen=True)
class QuadratureResult:
    value: LogComplex
    error_estimate: float
    nodes: int


@dataclass(frozen=True)
class ImportanceResult:
    log_value: float
    stderr: float
    ess: float
    m: int
    seed: int
    ess_warning: bool


def z2_closed_form(beta: float) -> float:
    """log Z_2 = log[2 pi 2^beta 2 sqrt(pi) Gamma((beta+1)/2) / Gamma(beta/2+1)].

    The pair density at n = 2 depends only on the wrapped sum s, whose
    kernel integral reduces to a Beta function.
    """
    if not beta > 0:
        raise ValueError("beta must be strictly positive")
    return (
        math.log(2 * PI)
        + beta * math.log(2.0)
        + math.log(2 * math.sqrt(PI))
        + math.lgamma((beta + 1) / 2)
        - math.lgamma(beta / 2 + 1)
    )


@lru_cache(maxsize=64)
def _leggauss(m: int):
    return np.polynomial.legendre.leggauss(m)


def _gl_panel(a: float, b: float, m: int):
    x, w = _leggauss(m)
    return 0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w


def _graded_sum_axis(budget: int):
    """Nodes/weights on (-pi, pi) for the kinked kernel axis.

    Panels shrink geometrically toward the kink at s = 0 so Gauss-Legendre
    sees the algebraic singularity only at panel endpoints.
    """
    edges = [PI]
    while edges[-1] > 1e-4:
        edges.append(edges[-1] / 8.0)
    edges.append(0.0)
    panels = [(lo, hi) for lo, hi in zip(edges[1:], edges[:-1])]
    panels = [(-hi, -lo) for lo, hi in panels] + panels
    per_panel = max(6, budget // len(panels))
    xs, ws = zip(*(_gl_panel(a, b, per_panel) for a, b in panels))
    return np.concatenate(xs), np.concatenate(ws)


def _f_values(g, t, theta):
    """f(theta) with f = i t g for a TrigPoly, 0 for None, else a callable."""
    if g is None:
        return np.zeros_like(np.asarray(theta, dtype=float), dtype=complex)
    if isinstance(g, TrigPoly):
        return 1j * t * np.asarray(g(theta), dtype=float)
    return np.asarray(g(theta), dtype=complex)


def _kernel_pow(s, beta):
    return (2.0 * np.abs(np.sin(0.5 * np.asarray(s)))) ** beta


def _eval_n1(g, t, m):
    x, w = _gl_panel(-PI, PI, m)
    return np.sum(w * np.exp(_f_values(g, t, x))), m


def _eval_n2(g, t, beta, m):
    # I = int K(s) C(s) ds with C(s) = int exp(f(s-u) + f(u)) du, by the
    # measure-preserving substitution theta1 = s - u (mod 2 pi).
    s, ws = _graded_sum_axis(m)
    u, wu = _gl_panel(-PI, PI, m)
    fu = np.exp(_f_values(g, t, u))
    fsu = np.exp(_f_values(g, t, s[:, None] - u[None, :]))
    inner = fsu @ (wu * fu)
    return np.sum(ws * _kernel_pow(s, beta) * inner), s.size + u.size


def _eval_n3(g, t, beta, m):
    x, w = _gl_panel(-PI, PI, m)
    A = _kernel_pow(x[:, None] + x[None, :], beta)
    W = w * np.exp(_f_values(g, t, x))
    total = 0.0 + 0.0j
    for i in range(m):
        v = W * A[i]
        total += W[i] * (v @ A @ v)
    return total, m


def _eval_n4(g, t, beta, m):
    x, w = _gl_panel(-PI, PI, m)
    A = _kernel_pow(x[:, None] + x[None, :], beta)
    W = w * np.exp(_f_values(g, t, x))
    total = 0.0 + 0.0j
    for i in range(m):
        vi = W * A[i]
        for j in range(m):
            u = vi * A[j]
            total += W[i] * W[j] * A[i, j] * (u @ A @ u)
    return total, m


_REFINE_CAP = {1: 512, 2: 512, 3: 256, 4: 96}


def quadrature_I(g, t: float, p: ModelParams, spec: QuadratureSpec = QuadratureSpec()):
    """I(f) with f = i t g, as a LogComplex with a refinement error estimate.

    ``g`` may be a TrigPoly, None (f = 0, so t = 0 gives log Z_n), or a
    callable returning complex f(theta) directly (then t is ignored).
    Deterministic quadrature is limited to n <= 4.
    """
    n = p.n
    if n > 4:
        raise UnsupportedSizeError(f"deterministic quadrature supports n <= 4, got n={n}")
    cap = min(_REFINE_CAP[n], spec.max_nodes)
    m = min(spec.nodes_per_dim, cap)
    prev = None
    history = []
    while True:
        if n == 1:
            raw, nodes = _eval_n1(g, t, m)
        elif n == 2:
            raw, nodes = _eval_n2(g, t, p.beta, m)
        elif n == 3:
            raw, nodes = _eval_n3(g, t, p.beta, m)
        else:
            raw, nodes = _eval_n4(g, t, p.beta, m)
        value = LogComplex.from_complex(raw)
        if prev is not None:
            ratio = 1.0 - np.exp(complex(prev.log_mag - value.log_mag,
                                         prev.phase - value.phase))
            err = abs(ratio)
            history.append(err)
            if err <= spec.refine_until:
                return QuadratureResult(value=value, error_estimate=err, nodes=nodes)
        prev = value
        if m >= cap:
            raise QuadratureConvergenceError(
                f"quadrature did not reach rel tol {spec.refine_until} by {cap} nodes "
                f"(last delta {history[-1] if history else 'n/a'})",
                best=prev,
                error_estimate=history[-1] if history else math.inf,
            )
        m = min(2 * m, cap)


def marginal_n3(theta_grid, beta: float, spec: QuadratureSpec = QuadratureSpec()):
    """Single-angle marginal density at n = 3 on ``theta_grid``.

    2-d quadrature per grid point, normalized to unit trapezoid integral
    over the grid.
    """
    grid = np.asarray(theta_grid, dtype=float)
    m = spec.nodes_per_dim
    cap = _REFINE_CAP[3]
    prev = None
    while True:
        x, w = _gl_panel(-PI, PI, m)
        A = _kernel_pow(x[:, None] + x[None, :], beta)
        M = (w[:, None] * w[None, :]) * A
        B = _kernel_pow(grid[:, None] + x[None, :], beta)
        vals = np.einsum("gi,ij,gj->g", B, M, B)
        norm = np.trapezoid(vals, grid)
        vals = vals / norm
        if prev is not None:
            err = float(np.max(np.abs(vals - prev)) / max(np.max(np.abs(vals)), 1e-300))
            if err <= spec.refine_until:
                return vals
        prev = vals
        if m >= cap:
            raise QuadratureConvergenceError(
                f"n=3 marginal did not converge by {cap} nodes", best=prev)
        m = min(2 * m, cap)


_BLOCK = 1 << 15


def importance_log_Z(p: ModelParams, m: int, seed: int) -> ImportanceResult:
    """Unbiased importance estimate of log Z_n with a Gaussian mode mixture.

    The reference picks a mode s in {+pi/2, -pi/2} with probability 1/2 and
    draws eta with covariance [beta(a I + J)/4]^{-1}, a = n-2, sampled
    exactly through its two eigenvalue branches (the all-ones direction and
    its complement).  Weights use the full symmetrized mixture density; a
    proposal leaving the angle box carries weight zero, which keeps the
    estimator exactly unbiased without truncating the Gaussian.

    n = 2 is allowed for testing with the floor a = max(n-2, 1), since the
    paper-shaped covariance is singular there.
    """
    n = p.n
    if n < 2:
        raise ValueError("importance sampling needs n >= 2")
    if m < 1000:
        raise ValueError("need at least 1000 samples")
    beta = p.beta
    a = max(n - 2, 1)
    # log det of the reference covariance [beta (a I + J) / 4]^{-1}
    logdet_cov = n * math.log(4.0 / beta) - ((n - 1) * math.log(a) + math.log(a + n))
    log_norm = -0.5 * (n * math.log(2 * PI) + logdet_cov)
    scale_ones = math.sqrt(4.0 / beta) / math.sqrt(a + n)
    scale_perp = math.sqrt(4.0 / beta) / math.sqrt(a)
    logw_const = beta * p.npairs * math.log(2.0)

    def log_ref(x):
        # mixture of the two mode Gaussians, evaluated in R^n
        out = np.empty((2, x.shape[0]))
        for i, c in enumerate((0.5 * PI, -0.5 * PI)):
            eta = x - c
            mu1 = eta.sum(axis=1)
            mu2 = np.einsum("ij,ij->i", eta, eta)
            out[i] = -0.125 * beta * (a * mu2 + mu1 ** 2) + log_norm
        return logsumexp(out, axis=0) + math.log(0.5)

    log_weights = np.empty(m)
    done = 0
    block = 0
    while done < m:
        b = min(_BLOCK, m - done)
        rng = np.random.default_rng([seed, block])
        signs = np.where(rng.random(b) < 0.5, 1.0, -1.0)
        z = rng.standard_normal((b, n))
        zbar = z.mean(axis=1, keepdims=True)
        eta = scale_ones * zbar + scale_perp * (z - zbar)
        x = signs[:, None] * 0.5 * PI + eta
        inside = np.all((x > -PI) & (x <= PI), axis=1)
        lt = np.full(b, -np.inf)
        if inside.any():
            lt[inside] = beta * _kernels.batch_logsin_sums(np.ascontiguousarray(x[inside])) + logw_const
        lw = np.where(inside, lt - log_ref(x), -np.inf)
        log_weights[done:done + b] = lw
        done += b
        block += 1

    lse1 = float(logsumexp(log_weights))
    lse2 = float(logsumexp(2.0 * log_weights))
    log_value = lse1 - math.log(m)
    ess = math.exp(2.0 * lse1 - lse2)
    var_ratio = max(math.exp(lse2 - 2.0 * lse1) - 1.0 / m, 0.0)
    stderr = math.sqrt(var_ratio * m / (m - 1))
    return ImportanceResult(
        log_value=log_value,
        stderr=stderr,
        ess=ess,
        m=m,
        seed=seed,
        ess_warning=ess < 50.0,
    )
