"""Discrete-time stochastic SIR model with binomial case reporting.

Weekly dynamics from ``(S, I, R) = (N - 1, 1, 0)``::

    dSI ~ Pois(beta S I / N)   (truncated at S)
    dIR ~ Pois(gamma I)        (truncated at I)

Week ``t = 1..T`` is observed after the ``t``-th step as ``cases_t ~ Bin(I_t, rho)``.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import optimize, special, stats

__all__ = [
    "SirParams",
    "ObsSeries",
    "PfResult",
    "FreqFit",
    "sir_step",
    "simulate_sir",
    "bootstrap_pf",
    "pf_run",
    "sir_freq_fit",
    "sir_exact_loglik",
    "read_cases",
    "write_cases",
    "to_unconstrained",
    "from_unconstrained",
]


@dataclass(frozen=True)
class SirParams:
    beta: float
    gamma: float
    rho: float

    def __post_init__(self):
        if not (self.beta >= 0 and self.gamma >= 0 and 0.0 <= self.rho <= 1.0):
            raise ValueError(f"invalid SIR parameters {self}")

    @classmethod
    def from_vector(cls, v) -> "SirParams":
        b, g, r = (float(t) for t in v)
        return cls(b, g, r)

    def as_vector(self) -> np.ndarray:
        return np.array([self.beta, self.gamma, self.rho])


@dataclass(frozen=True)
class ObsSeries:
    cases: np.ndarray
    N: int

    def __post_init__(self):
        c = np.asarray(self.cases)
        if c.ndim != 1 or np.any(c < 0) or np.any(c > self.N):
            raise ValueError("cases must be a 1-d series of counts in [0, N]")
        object.__setattr__(self, "cases", c.astype(np.int64))

    @property
    def T(self) -> int:
        return len(self.cases)


def sir_step(state, params, rng: np.random.Generator, N: int | None = None, truncate: bool = True):
    """One week of the latent process; ``state`` may hold arrays of particles."""
    S, I, R = (np.asarray(v, dtype=np.int64) for v in state)
    if N is None:
        N = S + I + R
    b, g = (params.beta, params.gamma) if isinstance(params, SirParams) else (params[0], params[1])
    d_si = rng.poisson(b * S * I / N)
    d_ir = rng.poisson(g * I)
    if truncate:
        d_si = np.minimum(d_si, S)
        d_ir = np.minimum(d_ir, I)
    elif np.any(d_si > S) or np.any(d_ir > I):
        raise FloatingPointError("untruncated SIR increments made a compartment negative")
    return S - d_si, I + d_si - d_ir, R + d_ir


def simulate_sir(params, N: int, T: int, rng: np.random.Generator, min_total: int = 0):
    """Simulate ``(ObsSeries, I_path)``; redraw until total cases reach ``min_total``."""
    p = params if isinstance(params, SirParams) else SirParams.from_vector(params)
    for _ in range(1000):
        state = (N - 1, 1, 0)
        I_path = np.empty(T, dtype=np.int64)
        cases = np.empty(T, dtype=np.int64)
        for t in range(T):
            state = sir_step(state, p, rng, N)
            I_path[t] = state[1]
            cases[t] = rng.binomial(int(state[1]), p.rho)
        if cases.sum() >= min_total:
            return ObsSeries(cases, N), I_path
    raise RuntimeError("no simulated epidemic reached min_total cases")


class PfResult(NamedTuple):
    loglik: float
    degenerate: bool


def pf_run(params, obs: ObsSeries, P: int, rng: np.random.Generator) -> PfResult:
    """Bootstrap particle filter with multinomial resampling every week.

    ``degenerate`` is set when every particle had zero weight at some week,
    in which case ``loglik`` is ``-inf``.
    """
    if P < 2:
        raise ValueError("particle filter needs P >= 2")
    b, g, r = (float(v) for v in (params.as_vector() if isinstance(params, SirParams) else params))
    N = obs.N
    S = np.full(P, N - 1, dtype=np.int64)
    I = np.ones(P, dtype=np.int64)
    R = np.zeros(P, dtype=np.int64)
    total = 0.0
    for c in obs.cases:
        S, I, R = sir_step((S, I, R), (b, g), rng, N)
        ok = I >= c
        lw = np.full(P, -np.inf)
        if np.any(ok):
            Io = I[ok]
            lw[ok] = (special.gammaln(Io + 1) - special.gammaln(Io - c + 1) - special.gammaln(c + 1)
                      + special.xlogy(c, r) + special.xlog1py(Io - c, -r))
        mx = lw.max()
        if not np.isfinite(mx):
            return PfResult(-math.inf, True)
        w = np.exp(lw - mx)
        sw = w.sum()
        total += mx + math.log(sw / P)
        idx = rng.choice(P, size=P, p=w / sw)
        S, I, R = S[idx], I[idx], R[idx]
    return PfResult(total, False)


def bootstrap_pf(params, obs: ObsSeries, P: int, rng: np.random.Generator) -> float:
    """Unbiased likelihood estimate on the log scale; ``-inf`` on a degenerate step."""
    return pf_run(params, obs, P, rng).loglik


def sir_exact_loglik(params, obs: ObsSeries) -> float:
    """Exact log-likelihood by summing over every latent path (tiny ``N`` and ``T`` only)."""
    b, g, r = (float(v) for v in (params.as_vector() if isinstance(params, SirParams) else params))
    N = obs.N
    if N > 10 or obs.T > 6:
        raise ValueError("exact enumeration limited to N <= 10, T <= 6")
    dist = {(N - 1, 1): 1.0}
    for c in obs.cases:
        new: dict = {}
        for (S, I), pr in dist.items():
            for (S2, I2), q in _transitions(S, I, N, b, g):
                p_obs = stats.binom.pmf(c, I2, r)
                if p_obs > 0:
                    new[(S2, I2)] = new.get((S2, I2), 0.0) + pr * q * p_obs
        dist = new
        if not dist:
            return -math.inf
    return math.log(sum(dist.values()))


def _truncated_poisson(mu, cap):
    """pmf of min(Pois(mu), cap) on 0..cap."""
    if cap == 0:
        return np.array([1.0])
    p = stats.poisson.pmf(np.arange(cap), mu)
    return np.append(p, stats.poisson.sf(cap - 1, mu))


def _transitions(S, I, N, b, g):
    p_si = _truncated_poisson(b * S * I / N, S)
    p_ir = _truncated_poisson(g * I, I)
    out = []
    for a, pa in enumerate(p_si):
        for d, pd in enumerate(p_ir):
            out.append(((S - a, I + a - d), pa * pd))
    return out


def to_unconstrained(theta) -> np.ndarray:
    b, g, r = (float(v) for v in theta)
    return np.array([math.log(b), math.log(g), math.log(r / (1.0 - r))])


def from_unconstrained(phi) -> np.ndarray:
    return np.array([math.exp(phi[0]), math.exp(phi[1]), special.expit(phi[2])])


def _nearest_spd(A: np.ndarray, floor: float = 1e-10) -> np.ndarray:
    A = 0.5 * (A + A.T)
    vals, vecs = np.linalg.eigh(A)
    scale = max(float(np.max(np.abs(vals))), 1.0)
    vals = np.maximum(vals, floor * scale)
    return (vecs * vals) @ vecs.T


def _mean_field_path(b, g, I0, N, T):
    S, I = N - I0, I0
    out = np.empty(T)
    for t in range(T):
        a = min(b * S * I / N, S)
        d = min(g * I, I)
        S, I = S - a, I + a - d
        out[t] = max(I, 0.0)
    return out


def mean_field_start(obs: ObsSeries) -> np.ndarray:
    """Least-squares fit of the deterministic recursion to root counts.

    The initial number infected is a free nuisance parameter, which absorbs the
    random timing of the early stochastic phase. Returns ``(beta, gamma, rho)``.
    """
    c = np.sqrt(obs.cases.astype(float))

    def resid(p):
        b, g, r, i0 = math.exp(p[0]), math.exp(p[1]), special.expit(p[2]), math.exp(p[3])
        return np.sqrt(r * _mean_field_path(b, g, i0, obs.N, obs.T)) - c

    best = None
    for b0 in (0.5, 1.0, 2.0, 4.0):
        for g0 in (0.2, 0.5, 1.0):
            for r0 in (0.05, 0.3):
                with np.errstate(all="ignore"):
                    res = optimize.least_squares(resid, [math.log(b0), math.log(g0), special.logit(r0), 0.0])
                if best is None or res.cost < best.cost:
                    best = res
    p = best.x
    return np.array([math.exp(p[0]), math.exp(p[1]), float(special.expit(p[2]))])


class FreqFit(NamedTuple):
    theta: np.ndarray
    cov: np.ndarray
    repaired: bool
    loglik: float


def sir_freq_fit(obs: ObsSeries, P: int, rng: np.random.Generator, x0=None,
                 box=((0.2, 10.0), (0.05, 5.0), (0.01, 0.95)), n_screen: int = 128, n_starts: int = 3,
                 h: float = 0.02, crn_seed: int | None = None, maxiter: int = 2000) -> FreqFit:
    """Approximate MLE of ``(beta, gamma, rho)`` from the particle-filter likelihood.

    Every objective evaluation reuses one random seed (common random numbers)
    so Nelder-Mead sees a deterministic surface. Starts are the best
    ``n_starts`` of a log-uniform screening design over ``box`` (plus ``x0`` if
    given, and the mean-field least-squares fit). The covariance is the inverse central finite-difference Hessian on
    ``(log beta, log gamma, logit rho)`` carried back by the delta method; a
    non-SPD Hessian is repaired by eigenvalue flooring and flagged.
    """
    seed = int(rng.integers(2**63)) if crn_seed is None else int(crn_seed)

    def nll(phi):
        v = pf_run(from_unconstrained(phi), obs, P, np.random.default_rng(seed)).loglik
        return 1e300 if not np.isfinite(v) else -v

    lo = to_unconstrained([b[0] for b in box])
    hi = to_unconstrained([b[1] for b in box])
    starts = lo + (hi - lo) * stats.qmc.LatinHypercube(d=3, rng=rng).random(n_screen)
    extra = [mean_field_start(obs)] + ([] if x0 is None else [x0])
    starts = np.vstack([to_unconstrained(np.clip(v, 1e-6, [np.inf, np.inf, 1 - 1e-6])) for v in extra] + [starts])
    vals = np.array([nll(s) for s in starts])
    best = None
    for k in np.argsort(vals)[:n_starts]:
        res = optimize.minimize(nll, starts[k], method="Nelder-Mead",
                                options={"xatol": 1e-5, "fatol": 1e-4, "maxiter": maxiter})
        res = optimize.minimize(nll, res.x, method="Nelder-Mead",
                                options={"xatol": 1e-6, "fatol": 1e-5, "maxiter": maxiter})
        if best is None or res.fun < best.fun:
            best = res
    phi_hat = best.x
    H = _fd_hessian(nll, phi_hat, h)
    repaired = False
    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        H = _nearest_spd(H)
        repaired = True
        warnings.warn("finite-difference Hessian not positive definite; repaired to nearest SPD", RuntimeWarning)
    cov_phi = np.linalg.inv(H)
    theta = from_unconstrained(phi_hat)
    J = np.diag([theta[0], theta[1], theta[2] * (1.0 - theta[2])])
    cov = J @ cov_phi @ J.T
    return FreqFit(theta, 0.5 * (cov + cov.T), repaired, -float(best.fun))


def _fd_hessian(f, x, h):
    p = len(x)
    H = np.empty((p, p))
    f0 = f(x)
    E = np.eye(p) * h
    for i in range(p):
        H[i, i] = (f(x + E[i]) - 2 * f0 + f(x - E[i])) / h**2
        for j in range(i):
            v = (f(x + E[i] + E[j]) - f(x + E[i] - E[j]) - f(x - E[i] + E[j]) + f(x - E[i] - E[j])) / (4 * h**2)
            H[i, j] = H[j, i] = v
    return H


def read_cases(path, N: int) -> ObsSeries:
    with open(path, newline="") as fh:
        rows = sorted(csv.DictReader(fh), key=lambda r: int(r["week"]))
    return ObsSeries(np.array([int(r["cases"]) for r in rows], dtype=np.int64), int(N))


def write_cases(path, obs: ObsSeries) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["week", "cases"])
        for t, c in enumerate(obs.cases, start=1):
            w.writerow([t, int(c)])
