"""Metropolis-Hastings sampler with a global reflection move.

Single-site wrapped-Gaussian proposals target the mirror-gas density; a
global reflection (always accepted, by symmetry of the weight) mixes
between the two modes at +i and -i, which local moves alone cannot do at
large n.

Two implementations share one RNG-draw contract: the pure-Python reference
operations below (`single_site_update`, `flip_update`, `sweep`) and the
numba kernel in :mod:`mirrorgas._kernels` used by `run_chain`.  Given the
same seed they produce the same trajectory, which the test suite checks.

Draw order per sweep: for each of the n site updates
``j = integers(0, n)``, ``z = standard_normal()``, ``u = random()``;
then one ``random()`` for the flip decision.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .model import (
    ModelParams,
    TrigPoly,
    log_weight,
    log_weight_delta,
    reflect,
    validate_configuration,
    wrap_angle,
)

ADAPT_WINDOW = 100      # sweeps per step-size adaptation window (burn-in only)
RESYNC_EVERY = 1000     # sweeps between full log-weight recomputations
SIGMA_MIN, SIGMA_MAX = 1e-5, math.pi


@dataclass(frozen=True)
class SamplerConfig:
    """Chain schedule and proposal parameters.

    ``step_sigma=None`` resolves to 2/sqrt(beta*n) (the local mode width);
    ``burnin=None`` resolves to max(1000, 20*n).
    """

    sweeps: int
    burnin: int | None = None
    thin: int = 5
    step_sigma: float | None = None
    flip_prob: float = 0.5
    seed: int = 0
    adapt: bool = True
    target_accept: float = 0.4

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError("sweeps must be positive")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.burnin is not None and not 0 <= self.burnin < self.sweeps:
            raise ValueError("need 0 <= burnin < sweeps")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError("flip_prob must be in [0, 1]")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must be in (0, 1)")
        if self.step_sigma is not None and not self.step_sigma > 0:
            raise ValueError("step_sigma must be positive")

    def resolved(self, p: ModelParams) -> "SamplerConfig":
        """Fill in the n- and beta-dependent defaults."""
        sigma = self.step_sigma if self.step_sigma is not None else 2.0 / math.sqrt(self.beta_n(p))
        burnin = self.burnin if self.burnin is not None else min(max(1000, 20 * p.n), self.sweeps - 1)
        return replace(self, step_sigma=sigma, burnin=burnin)

    @staticmethod
    def beta_n(p: ModelParams) -> float:
        return p.beta * p.n


@dataclass
class ChainState:
    """Mutable-by-replacement chain state for the reference operations."""

    cfg: np.ndarray
    cached_log_weight: float
    rng: np.random.Generator
    accept_count: int = 0
    propose_count: int = 0
    flip_count: int = 0


def init_state(p: ModelParams, seed: int) -> ChainState:
    """All angles at +pi/2 (inside the + mode), weight cached."""
    cfg = np.full(p.n, 0.5 * math.pi)
    return ChainState(cfg=cfg, cached_log_weight=log_weight(cfg, p), rng=np.random.default_rng(seed))


def single_site_update(state: ChainState, p: ModelParams, sigma: float) -> ChainState:
    """One random-scan Metropolis site update (reference implementation).

    Accepts with probability min(1, exp(delta)); a move onto the zero set
    (delta = -inf) is always rejected.
    """
    rng = state.rng
    j = int(rng.integers(0, p.n))
    z = rng.standard_normal()
    u = rng.random()
    prop = wrap_angle(state.cfg[j] + sigma * z)
    delta = log_weight_delta(state.cfg, j, prop, p)
    accept = delta >= 0.0 or (u > 0.0 and math.log(u) < delta)
    cfg = state.cfg
    cached = state.cached_log_weight
    if accept:
        cfg = cfg.copy()
        cfg[j] = prop
        cached = cached + delta
    return ChainState(
        cfg=cfg,
        cached_log_weight=cached,
        rng=rng,
        accept_count=state.accept_count + int(accept),
        propose_count=state.propose_count + 1,
        flip_count=state.flip_count,
    )


def flip_update(state: ChainState) -> ChainState:
    """Global reflection; always accepted since the weight is invariant."""
    return ChainState(
        cfg=reflect(state.cfg),
        cached_log_weight=state.cached_log_weight,
        rng=state.rng,
        accept_count=state.accept_count,
        propose_count=state.propose_count,
        flip_count=state.flip_count + 1,
    )


def sweep(state: ChainState, p: ModelParams, sc: SamplerConfig) -> ChainState:
    """n site updates (random scan) then a flip attempt with prob flip_prob."""
    sc = sc.resolved(p)
    for _ in range(p.n):
        state = single_site_update(state, p, sc.step_sigma)
    uf = state.rng.random()
    if uf < sc.flip_prob:
        state = flip_update(state)
    return state


def adapt_step(sigma: float, window_accept_rate: float, sc: SamplerConfig) -> float:
    """Multiplicative step-size update, clamped to [1e-5, pi].

    Only meant for burn-in; run_chain freezes sigma afterwards so the
    measurement phase keeps detailed balance.
    """
    sigma = sigma * math.exp(0.5 * (window_accept_rate - sc.target_accept))
    return min(max(sigma, SIGMA_MIN), SIGMA_MAX)


MODE_LABELS = {1: "+", -1: "-", 0: "mixed"}
MODE_CODES = {v: k for k, v in MODE_LABELS.items()}


@dataclass
class SampleSet:
    """Retained per-sweep records plus run provenance.

    Arrays are aligned and chain-major.  ``stats`` is NaN when no test
    function was supplied; ``modes`` uses +1/-1/0 for "+"/"-"/"mixed".
    """

    meta: dict
    chain: np.ndarray
    sweep: np.ndarray
    stats: np.ndarray
    modes: np.ndarray
    conc: np.ndarray
    logw: np.ndarray
    configs: np.ndarray | None = None
    diagnostics: list = field(default_factory=list)

    def __len__(self):
        return self.sweep.shape[0]

    @property
    def values(self) -> np.ndarray:
        """Linear-statistic values (requires the run to have had a g)."""
        if np.isnan(self.stats).all():
            raise ValueError("this sample set was produced without a test function")
        return self.stats

    def to_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            header = {"v": 1, "kind": "header", **self.meta, "records": len(self)}
            fh.write(json.dumps(header) + "\n")
            keep = self.configs is not None
            for i in range(len(self)):
                rec = {
                    "sweep": int(self.sweep[i]),
                    "stat": None if math.isnan(self.stats[i]) else float(self.stats[i]),
                    "mode": MODE_LABELS[int(self.modes[i])],
                    "conc": bool(self.conc[i]),
                    "logw": float(self.logw[i]),
                }
                if keep:
                    rec["angles"] = [float(a) for a in self.configs[i]]
                fh.write(json.dumps(rec) + "\n")

    @classmethod
    def from_jsonl(cls, path) -> "SampleSet":
        with open(path, "r", encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            if header.get("v") != 1 or header.get("kind") != "header":
                raise ValueError(f"{path}: not a v1 sample file")
            records = [json.loads(line) for line in fh if line.strip()]
        meta = {k: v for k, v in header.items() if k not in ("kind", "records")}
        m = len(records)
        stats = np.array([math.nan if r["stat"] is None else r["stat"] for r in records])
        out = cls(
            meta=meta,
            chain=np.zeros(m, dtype=np.int16),
            sweep=np.array([r["sweep"] for r in records], dtype=np.int64),
            stats=stats,
            modes=np.array([MODE_CODES[r["mode"]] for r in records], dtype=np.int8),
            conc=np.array([r["conc"] for r in records], dtype=bool),
            logw=np.array([r["logw"] for r in records]),
        )
        if records and "angles" in records[0]:
            out.configs = np.array([r["angles"] for r in records])
        counts = meta.get("records_per_chain")
        if counts:
            out.chain = np.repeat(np.arange(len(counts), dtype=np.int16), counts)
        return out


def _max_threads() -> int:
    env = os.environ.get("MIRRORGAS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _run_single_chain(p, sc, g, keep_configs, conc_epsilon, chain_seed):
    """One chain on the numba kernel; returns record arrays + diagnostics."""
    n = p.n
    rng = np.random.default_rng(chain_seed)
    theta = np.full(n, 0.5 * math.pi)
    sh = np.sin(0.5 * theta)
    ch = np.cos(0.5 * theta)
    fsin0, ok = _kernels.full_logsin_sum(sh, ch)
    if not ok:
        raise RuntimeError("initial configuration lies on the zero set")
    io = np.array([fsin0, 0.0])
    counters = np.zeros(4, dtype=np.int64)
    sigma = sc.step_sigma
    sigma_history = [(0, sigma)]
    logw_const = p.beta * p.npairs * math.log(2.0)
    conc_radius = n ** (-0.5 + conc_epsilon)

    def go(nsweeps):
        _kernels.advance(theta, sh, ch, io, p.beta, sigma, sc.flip_prob, rng,
                         nsweeps, RESYNC_EVERY, counters)

    # burn-in, with windowed adaptation
    done = 0
    while done < sc.burnin:
        step = min(ADAPT_WINDOW, sc.burnin - done)
        acc0, prop0 = counters[1], counters[0]
        go(step)
        done += step
        if sc.adapt and counters[0] > prop0:
            rate = (counters[1] - acc0) / (counters[0] - prop0)
            sigma = adapt_step(sigma, rate, sc)
            sigma_history.append((done, sigma))
    burnin_accepts, burnin_proposals = int(counters[1]), int(counters[0])

    # measurement phase: sigma frozen
    remaining = sc.sweeps - sc.burnin
    retained = remaining // sc.thin
    stats = np.full(retained, math.nan)
    modes = np.zeros(retained, dtype=np.int8)
    conc = np.zeros(retained, dtype=bool)
    logw = np.zeros(retained)
    sweeps_out = np.zeros(retained, dtype=np.int64)
    configs = np.zeros((retained, n)) if keep_configs else None
    for r in range(retained):
        go(sc.thin)
        sweeps_out[r] = sc.burnin + (r + 1) * sc.thin
        if g is not None:
            stats[r] = float(np.sum(g(theta)))
        sin_theta = 2.0 * sh * ch
        if np.all(sin_theta > 0.0):
            modes[r] = 1
        elif np.all(sin_theta < 0.0):
            modes[r] = -1
        chord_plus = math.sqrt(2.0) * np.max(np.abs(sh - ch))
        chord_minus = math.sqrt(2.0) * np.max(np.abs(sh + ch))
        conc[r] = chord_plus <= conc_radius or chord_minus <= conc_radius
        logw[r] = p.beta * io[0] + logw_const
        if keep_configs:
            configs[r] = theta
    go(remaining - retained * sc.thin)  # trailing unretained sweeps

    meas_prop = int(counters[0]) - burnin_proposals
    meas_acc = int(counters[1]) - burnin_accepts
    diag = {
        "seed": int(chain_seed),
        "final_sigma": sigma,
        "sigma_history": sigma_history,
        "burnin_accept_rate": burnin_accepts / max(burnin_proposals, 1),
        "accept_rate": meas_acc / max(meas_prop, 1),
        "flips": int(counters[2]),
        "max_logw_drift": float(io[1]),
    }
    return sweeps_out, stats, modes, conc, logw, configs, diag


def run_chain(p: ModelParams, sc: SamplerConfig, g: TrigPoly | None = None, *,
              keep_configs: bool = False, conc_epsilon: float = 1.0 / 15.0,
              chains: int = 1) -> SampleSet:
    """Run one or more chains and return the retained records.

    Chains use seeds ``sc.seed + i`` and are merged chain-major, so output
    is deterministic regardless of scheduling.  By default only the linear
    statistic, mode indicator, concentration flag, and log-weight are kept
    per retained sweep; ``keep_configs=True`` also stores the angles.
    """
    sc = sc.resolved(p)
    if chains < 1:
        raise ValueError("chains must be >= 1")
    seeds = [sc.seed + i for i in range(chains)]
    args = [(p, sc, g, keep_configs, conc_epsilon, s) for s in seeds]
    if chains == 1:
        results = [_run_single_chain(*args[0])]
    else:
        with ThreadPoolExecutor(max_workers=min(chains, _max_threads())) as ex:
            results = list(ex.map(lambda a: _run_single_chain(*a), args))

    per_chain = [r[0].shape[0] for r in results]
    meta = {
        "n": p.n,
        "beta": p.beta,
        "sweeps": sc.sweeps,
        "burnin": sc.burnin,
        "thin": sc.thin,
        "step_sigma": sc.step_sigma,
        "flip_prob": sc.flip_prob,
        "adapt": sc.adapt,
        "target_accept": sc.target_accept,
        "seed": sc.seed,
        "chains": chains,
        "records_per_chain": per_chain,
        "g": None if g is None else {"a": list(g.a), "b": list(g.b)},
        "conc_epsilon": conc_epsilon,
    }
    return SampleSet(
        meta=meta,
        chain=np.repeat(np.arange(chains, dtype=np.int16), per_chain),
        sweep=np.concatenate([r[0] for r in results]),
        stats=np.concatenate([r[1] for r in results]),
        modes=np.concatenate([r[2] for r in results]),
        conc=np.concatenate([r[3] for r in results]),
        logw=np.concatenate([r[4] for r in results]),
        configs=np.concatenate([r[5] for r in results]) if keep_configs else None,
        diagnostics=[r[6] for r in results],
    )
