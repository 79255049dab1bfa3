"""Exchange (AVM/DMH), delayed-acceptance and pseudo-marginal samplers.

Every chain spawns a fixed set of role streams from the generator it is given
(proposal, stage-1 uniform, auxiliary, stage-2 uniform, subsample choice,
subsample auxiliary), so variants that share a seed consume identical random
numbers for the steps they have in common.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .core import ExponentialFamilyModel, IntractableModel, PriorSpec, ProposalSpec
from .pointproc import InfeasibleParams
from .sir import ObsSeries, bootstrap_pf
from .surrogate import Surrogate

__all__ = [
    "Trace",
    "RunConfig",
    "avm_run",
    "daavm_run",
    "daavm_s_run",
    "mh_surrogate_run",
    "pmcmc_run",
    "da_pmcmc_run",
    "config_hash",
]

ROLES = ("proposal", "stage1", "aux", "stage2", "subsample", "subaux")


def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, default=_json_default).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer, np.floating)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# --------------------------------------------------------------------------
# trace


@dataclass
class Trace:
    """Per-iteration record of a chain.

    ``stage2_accept`` is ``-1`` where stage 2 never ran; for plain AVM and
    PMCMC the single MH decision is stored there and ``stage1_pass`` marks
    proposals that survived the prior-support check.
    """

    draws: np.ndarray
    stage1_pass: np.ndarray
    stage2_accept: np.ndarray
    aux_sims: np.ndarray
    wall_ms: np.ndarray
    variant: str
    names: tuple = ()
    seed: int | None = None
    config_hash: str = ""
    setup_ms: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.draws = np.atleast_2d(np.asarray(self.draws, dtype=float))
        if self.draws.shape[0] == 1 and len(self.stage1_pass) != 1:
            self.draws = self.draws.T
        self.stage1_pass = np.asarray(self.stage1_pass, dtype=bool)
        self.stage2_accept = np.asarray(self.stage2_accept, dtype=np.int8)
        self.aux_sims = np.asarray(self.aux_sims, dtype=np.int64)
        self.wall_ms = np.asarray(self.wall_ms, dtype=float)
        if not self.names:
            self.names = tuple(f"theta_{i + 1}" for i in range(self.draws.shape[1]))
        if np.any((self.stage2_accept >= 0) & ~self.stage1_pass):
            raise ValueError("stage2_accept set on an iteration that failed stage 1")

    def __len__(self) -> int:
        return self.draws.shape[0]

    @property
    def accepted(self) -> np.ndarray:
        return self.stage2_accept == 1

    @property
    def is_delayed(self) -> bool:
        return self.variant.startswith("da")

    @property
    def total_ms(self) -> float:
        return float(self.wall_ms[-1]) + self.setup_ms if len(self) else self.setup_ms

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", *self.names, "stage1_pass", "stage2_accept", "aux_sims", "wall_ms"])
            for i in range(len(self)):
                w.writerow([i, *(repr(float(v)) for v in self.draws[i]), int(self.stage1_pass[i]),
                            "" if self.stage2_accept[i] < 0 else int(self.stage2_accept[i]),
                            int(self.aux_sims[i]), f"{self.wall_ms[i]:.3f}"])

    def metadata(self) -> dict:
        return {"variant": self.variant, "names": list(self.names), "seed": self.seed,
                "config_hash": self.config_hash, "setup_ms": self.setup_ms, "iterations": len(self), **self.meta}

    def save(self, path) -> None:
        """Write ``path`` (CSV) and ``path`` with suffix ``.json`` (metadata)."""
        path = Path(path)
        self.to_csv(path)
        path.with_suffix(".json").write_text(json.dumps(self.metadata(), indent=1, default=_json_default))

    @classmethod
    def load(cls, path) -> "Trace":
        path = Path(path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        head, body = rows[0], rows[1:]
        p = len(head) - 5
        arr = [[r[k] for r in body] for k in range(len(head))]
        meta_path = path.with_suffix(".json")
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        extra = {k: v for k, v in meta.items()
                 if k not in ("variant", "names", "seed", "config_hash", "setup_ms", "iterations")}
        return cls(
            draws=np.array(arr[1:1 + p], dtype=float).T.reshape(len(body), p),
            stage1_pass=np.array(arr[1 + p], dtype=int).astype(bool),
            stage2_accept=np.array([-1 if v == "" else int(v) for v in arr[2 + p]], dtype=np.int8),
            aux_sims=np.array(arr[3 + p], dtype=np.int64),
            wall_ms=np.array(arr[4 + p], dtype=float),
            variant=meta.get("variant", "unknown"),
            names=tuple(head[1:1 + p]),
            seed=meta.get("seed"),
            config_hash=meta.get("config_hash", ""),
            setup_ms=meta.get("setup_ms", 0.0),
            meta=extra,
        )


@dataclass
class RunConfig:
    iterations: int
    burnin: int = 0
    m: int = 10
    m1: int | None = None
    m2: int | None = None
    K: int | None = None
    scale: tuple = (0.1,)
    cov: list | None = None
    surrogate: str = "flat"
    seed: int = 0
    adapt: bool = True
    target_accept: float = 0.25

    def __post_init__(self):
        if not 0 <= self.burnin < self.iterations:
            raise ValueError("burn-in must lie in [0, iterations)")
        if self.m < 1:
            raise ValueError("inner length m must be >= 1")
        if self.m1 is not None and self.m2 is not None and self.m1 > self.m2:
            raise ValueError("m1 must not exceed m2")

    def proposal(self) -> ProposalSpec:
        return ProposalSpec(np.asarray(self.scale, dtype=float), None if self.cov is None else np.asarray(self.cov))

    def to_dict(self) -> dict:
        return asdict(self)


# --------------------------------------------------------------------------
# chain bookkeeping


class _Recorder:
    def __init__(self, iters: int, p: int, burnin: int, adapt: bool, target: float):
        if iters < 1:
            raise ValueError("need at least one iteration")
        self.draws = np.empty((iters, p))
        self.s1 = np.zeros(iters, dtype=bool)
        self.s2 = np.full(iters, -1, dtype=np.int8)
        self.aux = np.zeros(iters, dtype=np.int64)
        self.wall = np.empty(iters)
        self.burnin = burnin
        self.adapt = adapt and burnin > 0
        self.target = target
        self.log_factor = 0.0
        self.t0 = time.perf_counter()

    @property
    def factor(self) -> float:
        return math.exp(self.log_factor)

    def record(self, i, theta, s1, s2, aux):
        self.draws[i] = theta
        self.s1[i] = s1
        self.s2[i] = s2
        self.aux[i] = aux
        self.wall[i] = (time.perf_counter() - self.t0) * 1e3
        if self.adapt and i < self.burnin:
            # Robbins-Monro on the global step multiplier, frozen after burn-in
            self.log_factor += ((s2 == 1) - self.target) / (i + 1) ** 0.6

    def trace(self, variant, names, seed, meta=None) -> Trace:
        m = dict(meta or {})
        m["final_scale_factor"] = self.factor
        return Trace(self.draws, self.s1, self.s2, self.aux, self.wall, variant, tuple(names), seed, meta=m)


def _streams(rng: np.random.Generator) -> dict:
    return dict(zip(ROLES, rng.spawn(len(ROLES))))


def _seed_of(rng) -> int | None:
    ss = getattr(rng.bit_generator, "seed_seq", None)
    return getattr(ss, "entropy", None)


def _log_u(g: np.random.Generator) -> float:
    u = g.random()
    return math.log(u) if u > 0 else -math.inf


class _AuxRatio:
    """``log [h(x|t*) h(y|t)] / [h(x|t) h(y|t*)]`` with the sufficient-statistic fast path.

    For models without sufficient statistics ``log h(x|.)`` is memoized for the
    last few parameter values, so the current state is never re-evaluated.
    """

    def __init__(self, model: IntractableModel, x):
        self.model = model
        self.x = x
        self.ef = isinstance(model, ExponentialFamilyModel)
        if self.ef:
            self.sx = np.asarray(model.sufficient_stats(x), dtype=float)
        self._memo: dict = {}

    def _hx(self, t) -> float:
        key = t.tobytes()
        v = self._memo.get(key)
        if v is None:
            if len(self._memo) >= 4:
                self._memo.pop(next(iter(self._memo)))
            v = self._memo[key] = self.model.log_unnorm(self.x, t)
        return v

    def __call__(self, y, th, th_star) -> float:
        if self.ef:
            sy = np.asarray(self.model.sufficient_stats(y), dtype=float)
            return float(np.dot(th_star - th, self.sx - sy))
        hy, hy_s = self.model.log_unnorm_pair(y, th, th_star)
        return (self._hx(th_star) - self._hx(th)) + (hy - hy_s)


def _admissible(model, prior, theta) -> float:
    """Log prior, or ``-inf`` where the prior or the model rules ``theta`` out."""
    lp = prior.log_prior(theta) if prior is not None else 0.0
    if lp == -math.inf:
        return lp
    if model is not None:
        try:
            if not model.feasible(theta):
                return -math.inf
        except InfeasibleParams:
            return -math.inf
    return lp


def _check(v, what):
    if math.isnan(v):
        raise FloatingPointError(f"NaN in {what}")
    return v


def _theta0(theta0, prior, model):
    if theta0 is not None:
        return np.atleast_1d(np.asarray(theta0, dtype=float)).copy()
    if prior is None:
        raise ValueError("theta0 required when no prior is given")
    return prior.center()


def _names(model, prior, p):
    if model is not None and len(getattr(model, "param_names", ())) == p:
        return model.param_names
    if prior is not None:
        return prior.names
    return tuple(f"theta_{i + 1}" for i in range(p))


# --------------------------------------------------------------------------
# samplers


def avm_run(model: IntractableModel, x, prior: PriorSpec, proposal: ProposalSpec, m: int, iters: int,
            rng: np.random.Generator, theta0=None, burnin: int = 0, adapt: bool = False,
            target_accept: float = 0.25, aux_start: str = "canonical") -> Trace:
    """Exchange algorithm with an ``m``-cycle inner sampler (double Metropolis-Hastings).

    ``aux_start="data"`` starts every inner run at ``x`` instead of the
    model's canonical state.
    """
    st = _streams(rng)
    theta = _theta0(theta0, prior, model)
    lp = _admissible(model, prior, theta)
    if lp == -math.inf:
        raise ValueError("theta0 outside the prior or model support")
    ratio = _AuxRatio(model, x)
    start = x if aux_start == "data" else None
    rec = _Recorder(iters, theta.size, burnin, adapt, target_accept)
    for i in range(iters):
        th_s, lq = proposal.propose(theta, st["proposal"], rec.factor)
        lp_s = _admissible(model, prior, th_s)
        if lp_s == -math.inf:
            rec.record(i, theta, False, -1, 0)
            continue
        y = model.simulate_aux(th_s, m, st["aux"], start=start)
        la = _check(lp_s - lp + lq + ratio(y, theta, th_s), "AVM log acceptance ratio")
        acc = _log_u(st["stage2"]) < la
        if acc:
            theta, lp = th_s, lp_s
        rec.record(i, theta, True, int(acc), 1)
    return rec.trace("avm", _names(model, prior, theta.size), _seed_of(rng), {"m": m, "burnin": burnin})


def daavm_run(model: IntractableModel, x, prior: PriorSpec, proposal: ProposalSpec, surrogate: Surrogate,
              m: int, iters: int, rng: np.random.Generator, theta0=None, burnin: int = 0, adapt: bool = False,
              target_accept: float = 0.25, aux_start: str = "canonical", variant: str | None = None) -> Trace:
    """Delayed-acceptance exchange algorithm with a fixed surrogate in stage 1."""
    st = _streams(rng)
    theta = _theta0(theta0, prior, model)
    lp = _admissible(model, prior, theta)
    if lp == -math.inf:
        raise ValueError("theta0 outside the prior or model support")
    s_cur = surrogate(theta)
    if not math.isfinite(s_cur):
        raise ValueError("surrogate is not finite at theta0")
    ratio = _AuxRatio(model, x)
    start = x if aux_start == "data" else None
    rec = _Recorder(iters, theta.size, burnin, adapt, target_accept)
    for i in range(iters):
        th_s, lq = proposal.propose(theta, st["proposal"], rec.factor)
        lp_s = _admissible(model, prior, th_s)
        if lp_s == -math.inf:
            rec.record(i, theta, False, -1, 0)
            continue
        s_new = _check(surrogate(th_s), "surrogate")
        l1 = s_new - s_cur + lq
        if not _log_u(st["stage1"]) < l1:
            rec.record(i, theta, False, -1, 0)
            continue
        y = model.simulate_aux(th_s, m, st["aux"], start=start)
        la = _check(lp_s - lp + lq + ratio(y, theta, th_s), "AVM log acceptance ratio")
        acc = _log_u(st["stage2"]) < la - l1
        if acc:
            theta, lp, s_cur = th_s, lp_s, s_new
        rec.record(i, theta, True, int(acc), 1)
    name = variant or {"flat": "daavm_flat", "gp": "daavm_gp", "gaussian-frequentist": "daavm_f"}.get(
        surrogate.kind, "daavm")
    return rec.trace(name, _names(model, prior, theta.size), _seed_of(rng),
                     {"m": m, "burnin": burnin, "surrogate": surrogate.kind})


def daavm_s_run(model: IntractableModel, x, prior: PriorSpec, proposal: ProposalSpec, K: int, m1: int, m2: int,
                iters: int, rng: np.random.Generator, theta0=None, burnin: int = 0, adapt: bool = False,
                target_accept: float = 0.25, sub_aux: str = "proposal") -> Trace:
    """Delayed acceptance with a fresh spatial subsample screening each proposal.

    Stage 1 is an exchange move on one of ``K`` subregions with an ``m1``-cycle
    inner run; stage 2 divides the full-data exchange ratio (``m2`` cycles) by
    the stage-1 ratio.

    ``sub_aux`` sets where the subregion auxiliary draw is simulated:
    ``"proposal"`` (at ``theta*``) or ``"midpoint"`` (at ``(theta + theta*)/2``).
    The midpoint draw has the same law for the forward and reverse move, which
    makes the two-stage kernel exactly reversible; drawing at ``theta*`` leaves
    a small bias in the stationary law.
    """
    if sub_aux not in ("proposal", "midpoint"):
        raise ValueError(f"sub_aux must be 'proposal' or 'midpoint', got {sub_aux!r}")
    if not model.supports_subsampling:
        raise ValueError(f"{type(model).__name__} does not support subsampling")
    if m1 > m2:
        raise ValueError("m1 must not exceed m2")
    st = _streams(rng)
    theta = _theta0(theta0, prior, model)
    lp = _admissible(model, prior, theta)
    if lp == -math.inf:
        raise ValueError("theta0 outside the prior or model support")
    ratio = _AuxRatio(model, x)
    rec = _Recorder(iters, theta.size, burnin, adapt, target_accept)
    for i in range(iters):
        th_s, lq = proposal.propose(theta, st["proposal"], rec.factor)
        lp_s = _admissible(model, prior, th_s)
        if lp_s == -math.inf:
            rec.record(i, theta, False, -1, 0)
            continue
        x_sub, sub = model.subsample(x, K, st["subsample"])
        at = th_s if sub_aux == "proposal" else 0.5 * (theta + th_s)
        y_sub = sub.simulate_aux(at, m1, st["subaux"])
        sub_ratio = _AuxRatio(sub, x_sub)(y_sub, theta, th_s)
        l1 = _check(lp_s - lp + lq + sub_ratio, "stage-1 log ratio")
        if not _log_u(st["stage1"]) < l1:
            rec.record(i, theta, False, -1, 1)
            continue
        y = model.simulate_aux(th_s, m2, st["aux"])
        la = _check(lp_s - lp + lq + ratio(y, theta, th_s), "AVM log acceptance ratio")
        acc = _log_u(st["stage2"]) < la - l1
        if acc:
            theta, lp = th_s, lp_s
        rec.record(i, theta, True, int(acc), 2)
    return rec.trace("daavm_s", _names(model, prior, theta.size), _seed_of(rng),
                     {"K": K, "m1": m1, "m2": m2, "burnin": burnin, "sub_aux": sub_aux})


def mh_surrogate_run(surrogate: Surrogate, proposal: ProposalSpec, iters: int, rng: np.random.Generator,
                     theta0, prior: PriorSpec | None = None, burnin: int = 0, adapt: bool = False,
                     target_accept: float = 0.25) -> Trace:
    """Random-walk Metropolis targeting ``exp(surrogate)`` (times the prior if given)."""
    st = _streams(rng)
    theta = np.atleast_1d(np.asarray(theta0, dtype=float)).copy()

    def target(t):
        lp = prior.log_prior(t) if prior is not None else 0.0
        return lp if lp == -math.inf else lp + surrogate(t)

    cur = target(theta)
    if not math.isfinite(cur):
        raise ValueError("target not finite at theta0")
    rec = _Recorder(iters, theta.size, burnin, adapt, target_accept)
    for i in range(iters):
        th_s, lq = proposal.propose(theta, st["proposal"], rec.factor)
        new = target(th_s)
        if new == -math.inf:
            rec.record(i, theta, False, -1, 0)
            continue
        acc = _log_u(st["stage2"]) < _check(new - cur + lq, "surrogate")
        if acc:
            theta, cur = th_s, new
        rec.record(i, theta, True, int(acc), 0)
    names = prior.names if prior is not None else ()
    return rec.trace("mh_surrogate", names, _seed_of(rng), {"surrogate": surrogate.kind})


_SIR_NAMES = ("beta", "gamma", "rho")


def _sir_ok(t) -> bool:
    return t[0] > 0 and t[1] > 0 and 0 < t[2] < 1


def pmcmc_run(obs: ObsSeries, prior: PriorSpec, proposal: ProposalSpec, P: int, iters: int,
              rng: np.random.Generator, theta0=None, burnin: int = 0, adapt: bool = False,
              target_accept: float = 0.25, loglik: Callable | None = None) -> Trace:
    """Pseudo-marginal Metropolis-Hastings; the current likelihood estimate is reused."""
    return _pm_run(obs, prior, proposal, None, P, iters, rng, theta0, burnin, adapt, target_accept, loglik)


def da_pmcmc_run(obs: ObsSeries, prior: PriorSpec, proposal: ProposalSpec, surrogate: Surrogate, P: int,
                 iters: int, rng: np.random.Generator, theta0=None, burnin: int = 0, adapt: bool = False,
                 target_accept: float = 0.25, loglik: Callable | None = None) -> Trace:
    """Pseudo-marginal MH with a surrogate screen; the filter runs only on stage-1 pass."""
    return _pm_run(obs, prior, proposal, surrogate, P, iters, rng, theta0, burnin, adapt, target_accept, loglik)


def _pm_run(obs, prior, proposal, surrogate, P, iters, rng, theta0, burnin, adapt, target, loglik):
    if P < 2:
        raise ValueError("particle filter needs P >= 2")
    est = loglik or (lambda t, g: bootstrap_pf(t, obs, P, g))
    st = _streams(rng)
    theta = _theta0(theta0, prior, None)
    lp = prior.log_prior(theta)
    if lp == -math.inf or not _sir_ok(theta):
        raise ValueError("theta0 outside the prior support")
    ll = est(theta, st["aux"])
    if ll == -math.inf:
        raise ValueError("particle filter degenerate at theta0; try more particles or another start")
    s_cur = surrogate(theta) if surrogate is not None else 0.0
    rec = _Recorder(iters, theta.size, burnin, adapt, target)
    n_fail = 0
    for i in range(iters):
        th_s, lq = proposal.propose(theta, st["proposal"], rec.factor)
        lp_s = prior.log_prior(th_s) if _sir_ok(th_s) else -math.inf
        if lp_s == -math.inf:
            rec.record(i, theta, False, -1, 0)
            continue
        l1 = 0.0
        if surrogate is not None:
            s_new = _check(surrogate(th_s), "surrogate")
            l1 = s_new - s_cur + lq
            if not _log_u(st["stage1"]) < l1:
                rec.record(i, theta, False, -1, 0)
                continue
        ll_s = est(th_s, st["aux"])
        if ll_s == -math.inf:
            n_fail += 1
            rec.record(i, theta, True, 0, 1)
            continue
        la = _check(lp_s - lp + lq + ll_s - ll, "pseudo-marginal log ratio")
        acc = _log_u(st["stage2"]) < la - l1
        if acc:
            theta, lp, ll = th_s, lp_s, ll_s
            if surrogate is not None:
                s_cur = s_new
        rec.record(i, theta, True, int(acc), 1)
    variant = "pmcmc" if surrogate is None else "da_pmcmc"
    meta = {"P": P, "burnin": burnin, "degenerate_filters": n_fail}
    return rec.trace(variant, _SIR_NAMES, _seed_of(rng), meta)
