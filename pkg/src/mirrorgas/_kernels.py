"""Numba hot loops for the Metropolis chain and batched log-weights.

The chain kernel keeps per-site half-angle caches ``sh = sin(theta/2)``,
``ch = cos(theta/2)`` so a pair term costs two multiplies and an add:

    sin((a + b)/2) = sin(a/2) cos(b/2) + cos(a/2) sin(b/2)

Row sums of ``log|sin|`` are taken through chunked products (one ``log``
per 8 pairs).  All control flow is flag-based; ``-inf`` never enters the
fastmath regions.  RNG draws come from a ``numpy.random.Generator`` whose
streams numba reproduces bit-for-bit, so the pure-Python reference sampler
consumes the identical sequence.

Draw order contract (shared with :mod:`mirrorgas.sampler`): per site update
``j = integers(0, n)``, ``z = standard_normal()``, ``u = random()``; then
one ``random()`` per sweep for the flip decision.
"""

import numpy as np
from numba import njit, prange

_CHUNK = 8


@njit(cache=True, fastmath=True, nogil=True, inline="always")
def _range_logsin(sh, ch, sp, cp, k0, k1):
    """(sum_{k in [k0,k1)} log|sp*ch[k] + cp*sh[k]|, ok). ok=False on a zero."""
    total = 0.0
    prod = 1.0
    cnt = 0
    for k in range(k0, k1):
        prod *= sp * ch[k] + cp * sh[k]
        cnt += 1
        if cnt == _CHUNK:
            if prod == 0.0:
                return 0.0, False
            total += np.log(abs(prod))
            prod = 1.0
            cnt = 0
    if cnt > 0:
        if prod == 0.0:
            return 0.0, False
        total += np.log(abs(prod))
    return total, True


@njit(cache=True, fastmath=True, nogil=True, inline="always")
def _row_logsin(sh, ch, sp, cp, j, n):
    """Row sum over k != j for a point with half-angle data (sp, cp)."""
    left, ok1 = _range_logsin(sh, ch, sp, cp, 0, j)
    if not ok1:
        return 0.0, False
    right, ok2 = _range_logsin(sh, ch, sp, cp, j + 1, n)
    if not ok2:
        return 0.0, False
    return left + right, True


@njit(cache=True, fastmath=True, nogil=True)
def full_logsin_sum(sh, ch):
    """Sum of log|sin((theta_j + theta_k)/2)| over all pairs j < k.

    Returns (value, ok); ok=False means some pair is mirror-coincident.
    """
    n = sh.shape[0]
    total = 0.0
    for j in range(n - 1):
        row, ok = _range_logsin(sh, ch, sh[j], ch[j], j + 1, n)
        if not ok:
            return 0.0, False
        total += row
    return total, True


@njit(cache=True, nogil=True)
def advance(theta, sh, ch, io, beta, sigma, flip_prob, rng, nsweeps, resync_every, counters):
    """Advance the chain ``nsweeps`` sweeps in place.

    io[0] = running pair sum of log|sin| (synced to the full sum every
    ``resync_every`` sweeps), io[1] = max log-weight drift seen at resync.
    counters = [proposals, accepts, flips, sweeps_since_resync].
    """
    n = theta.shape[0]
    fsin = io[0]
    for _ in range(nsweeps):
        for _site in range(n):
            j = rng.integers(0, n)
            z = rng.standard_normal()
            u = rng.random()
            prop = theta[j] + sigma * z
            prop = np.pi - (np.pi - prop) % (2.0 * np.pi)
            counters[0] += 1
            sp = np.sin(0.5 * prop)
            cp = np.cos(0.5 * prop)
            new, ok = _row_logsin(sh, ch, sp, cp, j, n)
            if not ok:
                continue
            old, _okold = _row_logsin(sh, ch, sh[j], ch[j], j, n)
            d = beta * (new - old)
            if d >= 0.0 or (u > 0.0 and np.log(u) < d):
                theta[j] = prop
                sh[j] = sp
                ch[j] = cp
                fsin += new - old
                counters[1] += 1
        uf = rng.random()
        if uf < flip_prob:
            for j in range(n):
                if theta[j] != np.pi:
                    theta[j] = -theta[j]
                    sh[j] = -sh[j]
            counters[2] += 1
        counters[3] += 1
        if counters[3] >= resync_every:
            true_fsin, _ok = full_logsin_sum(sh, ch)
            drift = abs(fsin - true_fsin) * beta
            if drift > io[1]:
                io[1] = drift
            fsin = true_fsin
            counters[3] = 0
    io[0] = fsin


@njit(cache=True, parallel=True, fastmath=True, nogil=True)
def batch_logsin_sums(thetas):
    """Pair sums of log|sin| for each row of ``thetas`` (-inf on a zero pair)."""
    m, n = thetas.shape
    out = np.empty(m)
    for i in prange(m):
        sh = np.sin(0.5 * thetas[i])
        ch = np.cos(0.5 * thetas[i])
        val, ok = full_logsin_sum(sh, ch)
        out[i] = val if ok else -np.inf
    return out
