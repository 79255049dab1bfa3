"""Particle designs for the Gaussian-process emulator."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import qmc

from .core import IntractableModel, PriorSpec

__all__ = ["Box", "lhs", "abc_particles", "shortrun_particles", "read_particles", "write_particles"]


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or not np.all(lo < hi):
            raise ValueError("box needs lo < hi in every coordinate")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    def intersect(self, other: "Box") -> "Box":
        return Box(np.maximum(self.lo, other.lo), np.minimum(self.hi, other.hi))

    def contains(self, P) -> np.ndarray:
        P = np.atleast_2d(P)
        return np.all((P >= self.lo) & (P <= self.hi), axis=1)

    @classmethod
    def from_prior(cls, prior: PriorSpec) -> "Box":
        return cls(*prior.box())


def lhs(n: int, box: Box, rng: np.random.Generator) -> np.ndarray:
    """Latin hypercube of ``n`` points: one jittered point per stratum in each coordinate."""
    if n < 1:
        raise ValueError("lhs needs n >= 1")
    if not (np.all(np.isfinite(box.lo)) and np.all(np.isfinite(box.hi))):
        raise ValueError("lhs needs a bounded box")
    u = qmc.LatinHypercube(d=box.dim, rng=rng).random(n)
    return box.lo + u * (box.hi - box.lo)


def _prior_clip(box: Box, prior: PriorSpec | None) -> Box:
    return box if prior is None else box.intersect(Box.from_prior(prior))


def abc_particles(model: IntractableModel, x, theta_hat, sigma_hat, D: int, eps, d: int,
                  rng: np.random.Generator, m: int = 10, prior: PriorSpec | None = None,
                  standardize: bool = True, auto_quantile: float = 0.1) -> np.ndarray:
    """ABC-screened Latin hypercube design.

    ``D`` candidates are spread over ``theta_hat +/- 10 sigma_hat`` (clipped to
    the prior box); each is kept when its simulated summary lies within ``eps``
    of the observed one. ``eps="auto"`` uses the ``auto_quantile`` quantile of
    the candidate discrepancies. ``d`` particles are then spread over the
    bounding box of the kept candidates.
    """
    if D < d:
        raise ValueError("need D >= d candidates")
    theta_hat = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    sigma_hat = np.atleast_1d(np.asarray(sigma_hat, dtype=float))
    box = _prior_clip(Box(theta_hat - 10 * sigma_hat, theta_hat + 10 * sigma_hat), prior)
    V = lhs(D, box, rng)
    s_obs = model.summary_stats(x)
    S = np.full((D, s_obs.size), np.nan)
    for n, v in enumerate(V):
        if model.feasible(v):
            S[n] = model.summary_stats(model.simulate_aux(v, m, rng))
    ok = np.all(np.isfinite(S), axis=1)
    diff = S - s_obs
    if standardize:
        sd = np.nanstd(S[ok], axis=0) if ok.any() else np.ones(s_obs.size)
        sd[~(sd > 0)] = 1.0
        diff = diff / sd
    dist = np.where(ok, np.sqrt(np.nansum(diff**2, axis=1)), np.inf)
    if isinstance(eps, str):
        if eps != "auto":
            raise ValueError(f"eps must be a number or 'auto', got {eps!r}")
        eps = float(np.quantile(dist[ok], auto_quantile)) if ok.any() else np.inf
        keep = dist <= eps
    else:
        keep = dist < eps
    if not keep.any():
        raise ValueError(f"no candidate within eps={eps:.4g}; use a larger eps or eps='auto'")
    A = V[keep]
    lo, hi = A.min(axis=0), A.max(axis=0)
    flat = hi <= lo
    lo[flat] = box.lo[flat]
    hi[flat] = box.hi[flat]
    return lhs(d, Box(lo, hi), rng)


def shortrun_particles(draws, d: int, rng: np.random.Generator, burnin: int = 0,
                       prior: PriorSpec | None = None, expand: float = 0.2) -> np.ndarray:
    """Latin hypercube over a pilot trace's bounding box widened by ``expand`` per side."""
    X = np.asarray(draws, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    X = X[burnin:]
    if len(X) < 10 * d:
        raise ValueError(f"pilot trace has {len(X)} post-burn-in draws; need at least 10 d = {10 * d}")
    X = X[np.linspace(0, len(X) - 1, d).round().astype(int)]
    lo, hi = X.min(axis=0), X.max(axis=0)
    if np.any(hi <= lo):
        raise ValueError("pilot trace has zero spread in some coordinate")
    w = hi - lo
    box = _prior_clip(Box(lo - expand * w, hi + expand * w), prior)
    return lhs(d, box, rng)


def write_particles(path, P: np.ndarray, names=None) -> None:
    P = np.atleast_2d(np.asarray(P, dtype=float))
    names = names or [f"theta_{i + 1}" for i in range(P.shape[1])]
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        w.writerows((repr(float(v)) for v in row) for row in P)


def read_particles(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
