"""Chain summaries: effective sample size, HPD intervals, early-rejection ratio."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .samplers import Trace

__all__ = ["EssResult", "Summary", "ess", "ess_flagged", "mcse", "hpd", "eff", "summarize", "kolmogorov_distance",
           "format_table"]


class EssResult(NamedTuple):
    ess: float
    degenerate: bool


def _autocov(x: np.ndarray) -> np.ndarray:
    n = x.size
    f = np.fft.rfft(x - x.mean(), n=2 * n)
    return np.fft.irfft(f * np.conj(f))[:n] / n


def ess_flagged(chain) -> EssResult:
    """Geyer initial-positive-sequence ESS, clamped to ``(0, 1.5 n]``.

    A zero-variance chain gives ``EssResult(0.0, True)``.
    """
    x = np.asarray(chain, dtype=float).ravel()
    n = x.size
    if n < 10:
        raise ValueError("ESS needs at least 10 draws")
    acov = _autocov(x)
    if not acov[0] > 0:
        return EssResult(0.0, True)
    rho = acov / acov[0]
    # Sums of adjacent pairs, truncated at the first non-positive pair
    m = (n - 1) // 2
    pairs = rho[0:2 * m:2] + rho[1:2 * m:2]
    neg = np.nonzero(pairs <= 0)[0]
    k = neg[0] if neg.size else pairs.size
    tau = -1.0 + 2.0 * float(pairs[:k].sum())
    tau = max(tau, 1.0 / 1.5)
    return EssResult(min(n / tau, 1.5 * n), False)


def ess(chain) -> float:
    return ess_flagged(chain).ess


def mcse(chain) -> float:
    """Monte Carlo standard error of the chain mean."""
    x = np.asarray(chain, dtype=float).ravel()
    e = ess(x)
    return math.inf if e == 0 else float(np.std(x, ddof=1) / math.sqrt(e))


def hpd(chain, level: float = 0.95) -> tuple[float, float]:
    """Shortest interval containing ``ceil(level n)`` of the sorted draws."""
    x = np.sort(np.asarray(chain, dtype=float).ravel())
    n = x.size
    if n < 1:
        raise ValueError("empty chain")
    k = max(int(math.ceil(level * n)), 1)
    if k >= n:
        return float(x[0]), float(x[-1])
    widths = x[k - 1:] - x[:n - k + 1]
    j = int(np.argmin(widths))
    return float(x[j]), float(x[j + k - 1])


def eff(trace: Trace) -> float:
    """Stage-1 rejections over all rejections; ``nan`` (with a warning) if nothing was rejected."""
    if not trace.is_delayed:
        raise ValueError(f"Eff is not defined for a {trace.variant!r} trace")
    early = int(np.count_nonzero(~trace.stage1_pass))
    late = int(np.count_nonzero(trace.stage2_accept == 0))
    if early + late == 0:
        warnings.warn("no rejections; Eff undefined", RuntimeWarning)
        return math.nan
    return early / (early + late)


def kolmogorov_distance(samples, grid, cdf) -> float:
    """``max |F_n - F|`` over the grid points."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    Fn = np.searchsorted(x, np.asarray(grid), side="right") / x.size
    return float(np.max(np.abs(Fn - np.asarray(cdf))))


@dataclass
class Summary:
    variant: str
    names: list
    mean: list
    hpd: list
    ess: list
    mcse: list
    n_draws: int
    wall_min: float
    aux_sims: int
    eff: float | None
    ess_per_min: float
    accept_rate: float
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path=None) -> str:
        s = json.dumps(self.to_dict(), indent=1, default=lambda o: None)
        if path is not None:
            Path(path).write_text(s)
        return s

    @classmethod
    def from_json(cls, path) -> "Summary":
        return cls(**json.loads(Path(path).read_text()))


def summarize(trace: Trace, burnin: int = 0, coord: int | None = None) -> Summary:
    """Posterior summaries on the post-burn-in draws.

    ESS/time divides the minimum coordinate ESS (or coordinate ``coord``) by
    total wall-clock minutes including surrogate set-up time.
    """
    n = len(trace)
    if not 0 <= burnin < n:
        raise ValueError("burn-in must lie in [0, len(trace))")
    X = trace.draws[burnin:]
    flags = []
    means = X.mean(axis=0).tolist()
    intervals, esses, errs = [], [], []
    for k in range(X.shape[1]):
        col = X[:, k]
        intervals.append(list(hpd(col)))
        if col.size < 10:
            esses.append(None)
            errs.append(None)
            flags.append(f"{trace.names[k]}: too few draws for ESS")
            continue
        r = ess_flagged(col)
        if r.degenerate:
            flags.append(f"{trace.names[k]}: constant chain")
        esses.append(r.ess)
        errs.append(math.inf if r.ess == 0 else float(np.std(col, ddof=1) / math.sqrt(r.ess)))
    minutes = trace.total_ms / 6e4
    valid = [e for e in esses if e is not None]
    if coord is not None:
        base = esses[coord]
    else:
        base = min(valid) if valid else None
    epm = (base / minutes) if (base is not None and minutes > 0) else math.nan
    e = None
    if trace.is_delayed:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            e = eff(trace)
        if math.isnan(e):
            flags.append("Eff undefined (no rejections)")
            e = None
    return Summary(trace.variant, list(trace.names), means, intervals, esses, errs, int(X.shape[0]), minutes,
                   int(trace.aux_sims.sum()), e, epm, float(trace.accepted[burnin:].mean()), flags)


def format_table(rows: list[Summary]) -> str:
    """Aligned text table, one line per (run, coordinate)."""
    head = ["method", "param", "mean", "95% HPD", "time(min)", "#AV sims", "Eff", "ESS/min"]
    lines = []
    for s in rows:
        for k, name in enumerate(s.names):
            lo, hi = s.hpd[k]
            first = k == 0
            lines.append([
                s.variant if first else "", name, f"{s.mean[k]:.4g}", f"({lo:.4g}, {hi:.4g})",
                f"{s.wall_min:.2f}" if first else "", str(s.aux_sims) if first else "",
                ("-" if s.eff is None else f"{s.eff:.2f}") if first else "",
                f"{s.ess_per_min:.2f}" if first else "",
            ])
    widths = [max(len(r[i]) for r in [head, *lines]) for i in range(len(head))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    return "\n".join(fmt.format(*r) for r in [head, *lines])
