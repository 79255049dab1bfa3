"""Attraction-repulsion interaction point process with a hard core.

Pair interaction::

    phi(d) = 0                                      d <= R
           = t1 - (sqrt(t1) / (t2 - R) * (d - t2))^2  R < d <= d1
           = 1 + 1 / (t3 * (d - d2))^2              d > d1

and ``log h(x|theta) = n log(lam) + sum_i min(sum_{j != i} log phi(d_ij), cap)``
with ``theta = (lam, t1, t2, t3)``. The breakpoints ``d1, d2`` are chosen so
that ``phi`` and ``phi'`` are continuous at ``d1``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numba as nb
import numpy as np
from scipy import optimize

from .core import IntractableModel

__all__ = [
    "InfeasibleParams",
    "InteractionParams",
    "PointProcessModel",
    "solve_breakpoints",
    "phi",
    "log_unnorm_pp",
    "bdmcmc_cycle",
    "subsample_window",
    "read_points",
    "write_points",
]

# layout of the packed parameter vector handed to the kernels
_LAM, _T1, _T2, _T3, _R, _D1, _D2, _CAP, _PW, _IDEAL = range(10)


class InfeasibleParams(ValueError):
    """No breakpoint pair makes phi smooth for these parameters."""


def _mid(d, t1, t2, R):
    a2 = t1 / (t2 - R) ** 2
    return t1 - a2 * (d - t2) ** 2, -2.0 * a2 * (d - t2)


def _tail(d, t3, d2):
    u = d - d2
    return 1.0 + 1.0 / (t3 * u) ** 2, -2.0 / (t3**2 * u**3)


@lru_cache(maxsize=4096)
def solve_breakpoints(t1: float, t2: float, t3: float, R: float) -> tuple[float, float]:
    """Breakpoints ``(d1, d2)`` giving value and slope continuity at ``d1``.

    Writing ``s = d1 - t2`` and ``u = d1 - d2``, slope matching fixes
    ``u(s)`` and value matching reduces to a single monotone equation in ``s``
    that is bracketed and solved first; a two-equation Newton pass then
    polishes ``(d1, d2)`` jointly.
    """
    if not (t1 > 1.0 and t2 > R and t3 > 0.0):
        raise InfeasibleParams(f"need t1 > 1, t2 > R, t3 > 0 (got t1={t1}, t2={t2}, t3={t3}, R={R})")
    c = t1 - 1.0
    a2 = t1 / (t2 - R) ** 2
    s_max = math.sqrt(c / a2)

    def reduced(log_s):
        s = math.exp(log_s)
        u = (c - a2 * s * s) / (a2 * s)
        return math.log(a2 * t3 * t3 * s) + 3.0 * math.log(u)

    lo, hi = math.log(s_max) - 60.0, math.log(s_max * (1.0 - 1e-13))
    if not reduced(lo) > 0 > reduced(hi):
        raise InfeasibleParams(f"breakpoint equation not bracketed for t1={t1}, t2={t2}, t3={t3}")
    s = math.exp(optimize.brentq(reduced, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500))
    d1 = t2 + s
    d2 = d1 - (c - a2 * s * s) / (a2 * s)

    for _ in range(8):
        f_mid, g_mid = _mid(d1, t1, t2, R)
        f_tail, g_tail = _tail(d1, t3, d2)
        F = np.array([f_mid - f_tail, g_mid - g_tail])
        if np.max(np.abs(F)) < 1e-14:
            break
        u = d1 - d2
        # d/d(d1) and d/d(d2) of the tail value and slope
        dft_dd1 = -2.0 / (t3**2 * u**3)
        dgt_dd1 = 6.0 / (t3**2 * u**4)
        J = np.array([
            [g_mid - dft_dd1, dft_dd1],
            [-2.0 * a2 - dgt_dd1, dgt_dd1],
        ])
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            break
        if not (d1 + step[0] > t2 and d1 + step[0] - d2 - step[1] > 0):
            break
        d1, d2 = d1 + step[0], d2 + step[1]
    return float(d1), float(d2)


@dataclass(frozen=True)
class InteractionParams:
    lam: float
    t1: float
    t2: float
    t3: float
    R: float = 2.0
    cap: float = 1.2
    pair_weight: float = 1.0
    ideal: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise InfeasibleParams("intensity must be positive")

    @property
    def breakpoints(self) -> tuple[float, float]:
        if self.ideal:
            return math.inf, 0.0
        return solve_breakpoints(float(self.t1), float(self.t2), float(self.t3), float(self.R))

    @property
    def d1(self) -> float:
        return self.breakpoints[0]

    @property
    def d2(self) -> float:
        return self.breakpoints[1]

    def packed(self) -> np.ndarray:
        d1, d2 = self.breakpoints
        return np.array([self.lam, self.t1, self.t2, self.t3, self.R, d1, d2, self.cap,
                         self.pair_weight, 1.0 if self.ideal else 0.0])


@nb.njit(cache=True)
def _log_phi(d, p):
    if p[_IDEAL] != 0.0:
        return 0.0
    if d <= p[_R]:
        return -np.inf
    if d <= p[_D1]:
        z = math.sqrt(p[_T1]) / (p[_T2] - p[_R]) * (d - p[_T2])
        v = p[_T1] - z * z
        return math.log(v) if v > 0.0 else -np.inf
    z = p[_T3] * (d - p[_D2])
    return math.log1p(1.0 / (z * z))


def phi(d, params: InteractionParams) -> float:
    return math.exp(_log_phi(float(d), params.packed()))


@nb.njit(cache=True)
def _point_sums(pts, n, p):
    sums = np.zeros(n)
    for i in range(n):
        for j in range(i + 1, n):
            dx = pts[i, 0] - pts[j, 0]
            dy = pts[i, 1] - pts[j, 1]
            lp = _log_phi(math.sqrt(dx * dx + dy * dy), p)
            if lp == -np.inf:
                return sums, False
            sums[i] += p[_PW] * lp
            sums[j] += p[_PW] * lp
    return sums, True


@nb.njit(cache=True)
def _log_unnorm_multi(pts, P):
    """log h for one pattern under each row of the packed parameter matrix."""
    n = pts.shape[0]
    k = P.shape[0]
    sums = np.zeros((k, n))
    out = np.empty(k)
    dead = np.zeros(k, dtype=np.bool_)
    for i in range(n):
        for j in range(i + 1, n):
            dx = pts[i, 0] - pts[j, 0]
            dy = pts[i, 1] - pts[j, 1]
            d = math.sqrt(dx * dx + dy * dy)
            for r in range(k):
                if dead[r]:
                    continue
                lp = _log_phi(d, P[r])
                if lp == -np.inf:
                    dead[r] = True
                    continue
                sums[r, i] += P[r, _PW] * lp
                sums[r, j] += P[r, _PW] * lp
    for r in range(k):
        if dead[r]:
            out[r] = -np.inf
            continue
        tot = n * math.log(P[r, _LAM])
        for i in range(n):
            tot += min(sums[r, i], P[r, _CAP])
        out[r] = tot
    return out


def log_unnorm_pp(x: np.ndarray, params: InteractionParams) -> float:
    pts = np.ascontiguousarray(np.asarray(x, dtype=float).reshape(-1, 2))
    return float(_log_unnorm_multi(pts, params.packed()[None, :])[0])


@nb.njit(cache=True)
def _birth_death(pts_in, n_props, u, p, x0, x1, y0, y1):
    n = pts_in.shape[0]
    cap_n = n + n_props + 1
    pts = np.empty((cap_n, 2))
    pts[:n] = pts_in
    sums, ok = _point_sums(pts, n, p)
    if not ok:
        return pts_in.copy(), -1
    S = np.empty(cap_n)
    S[:n] = sums
    area = (x1 - x0) * (y1 - y0)
    cap = p[_CAP]
    pw = p[_PW]
    loglam = math.log(p[_LAM])
    l = np.empty(cap_n)
    n_acc = 0
    for t in range(n_props):
        u0 = u[4 * t]
        u1 = u[4 * t + 1]
        u2 = u[4 * t + 2]
        u3 = u[4 * t + 3]
        if u0 < 0.5:
            # birth
            bx = x0 + u1 * (x1 - x0)
            by = y0 + u2 * (y1 - y0)
            snew = 0.0
            delta = loglam
            blocked = False
            for j in range(n):
                dx = pts[j, 0] - bx
                dy = pts[j, 1] - by
                lp = _log_phi(math.sqrt(dx * dx + dy * dy), p)
                if lp == -np.inf:
                    blocked = True
                    break
                l[j] = pw * lp
                snew += pw * lp
            if blocked:
                continue
            for j in range(n):
                delta += min(S[j] + l[j], cap) - min(S[j], cap)
            delta += min(snew, cap)
            log_acc = delta + math.log(area / (n + 1))
            if log_acc >= 0.0 or math.log(u3) < log_acc:
                for j in range(n):
                    S[j] += l[j]
                pts[n, 0] = bx
                pts[n, 1] = by
                S[n] = snew
                n += 1
                n_acc += 1
        else:
            if n == 0:
                continue
            k = min(int(u1 * n), n - 1)
            delta = -loglam - min(S[k], cap)
            for j in range(n):
                if j == k:
                    continue
                dx = pts[j, 0] - pts[k, 0]
                dy = pts[j, 1] - pts[k, 1]
                l[j] = pw * _log_phi(math.sqrt(dx * dx + dy * dy), p)
                delta += min(S[j] - l[j], cap) - min(S[j], cap)
            log_acc = delta + math.log(n / area)
            if log_acc >= 0.0 or math.log(u3) < log_acc:
                for j in range(n):
                    if j != k:
                        S[j] -= l[j]
                n -= 1
                pts[k, 0] = pts[n, 0]
                pts[k, 1] = pts[n, 1]
                S[k] = S[n]
                n_acc += 1
    return pts[:n].copy(), n_acc


def _window_area(window) -> float:
    x0, x1, y0, y1 = window
    return (x1 - x0) * (y1 - y0)


def bdmcmc_cycle(x: np.ndarray, params: InteractionParams, window, rng: np.random.Generator,
                 n_proposals: int | None = None) -> np.ndarray:
    """One birth-death cycle: ``max(n, 1)`` proposals unless told otherwise."""
    pts = np.ascontiguousarray(np.asarray(x, dtype=float).reshape(-1, 2))
    k = max(pts.shape[0], 1) if n_proposals is None else int(n_proposals)
    u = rng.random(4 * k)
    out, _ = _birth_death(pts, k, u, params.packed(), *map(float, window))
    return out


def _split_counts(K: int, window) -> tuple[int, int]:
    """Factor ``K = kx * ky`` as close to square as possible, long side split more."""
    r = int(math.isqrt(K))
    while K % r:
        r -= 1
    a, b = K // r, r  # a >= b
    x0, x1, y0, y1 = window
    return (a, b) if (x1 - x0) >= (y1 - y0) else (b, a)


def subsample_window(x: np.ndarray, window, K: int, rng: np.random.Generator):
    """Restrict a pattern to one of ``K`` congruent tiles of the window.

    Returns ``(points_in_tile, tile)``.
    """
    if int(K) != K or K < 1:
        raise ValueError(f"K must be a positive integer, got {K}")
    K = int(K)
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    if K == 1:
        return x.copy(), tuple(window)
    kx, ky = _split_counts(K, window)
    x0, x1, y0, y1 = window
    wx, wy = (x1 - x0) / kx, (y1 - y0) / ky
    b = int(rng.integers(K))
    i, j = b % kx, b // kx
    tile = (x0 + i * wx, x0 + (i + 1) * wx, y0 + j * wy, y0 + (j + 1) * wy)
    inside = (x[:, 0] >= tile[0]) & (x[:, 0] < tile[1]) & (x[:, 1] >= tile[2]) & (x[:, 1] < tile[3])
    return x[inside].copy(), tile


class PointProcessModel(IntractableModel):
    """Interaction point process on a rectangular window ``(x0, x1, y0, y1)``.

    ``n_ref`` fixes the number of birth-death proposals per inner-sampler
    cycle (the observed sample size in practice).
    """

    param_names = ("lam", "theta1", "theta2", "theta3")

    def __init__(self, window=(0.0, 1.0, 0.0, 1.0), R: float = 2.0, n_ref: int = 100, cap: float = 1.2,
                 pair_weight: float = 1.0, ideal: bool = False):
        x0, x1, y0, y1 = map(float, window)
        if not (x1 > x0 and y1 > y0):
            raise ValueError("window must have positive area")
        if pair_weight not in (0.5, 1.0):
            raise ValueError("pair_weight is 1.0 (each pair in both point sums) or 0.5")
        self.window = (x0, x1, y0, y1)
        self.R = float(R)
        self.n_ref = max(int(n_ref), 1)
        self.cap = float(cap)
        self.pair_weight = float(pair_weight)
        self.ideal = bool(ideal)

    def __repr__(self):
        return (f"PointProcessModel(window={self.window}, R={self.R}, n_ref={self.n_ref}, cap={self.cap}, "
                f"pair_weight={self.pair_weight}, ideal={self.ideal})")

    @property
    def area(self) -> float:
        return _window_area(self.window)

    def params(self, theta) -> InteractionParams:
        lam, t1, t2, t3 = (float(v) for v in theta)
        return InteractionParams(lam, t1, t2, t3, self.R, self.cap, self.pair_weight, self.ideal)

    def feasible(self, theta) -> bool:
        lam, t1, t2, t3 = (float(v) for v in theta)
        return lam > 0 and (self.ideal or (t1 > 1.0 and t2 > self.R and t3 > 0.0))

    def packed(self, theta) -> np.ndarray:
        return self.params(theta).packed()

    def check_state(self, x) -> None:
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        if np.isnan(x).any():
            raise ValueError("NaN coordinates")
        x0, x1, y0, y1 = self.window
        if x.size and ((x[:, 0] < x0).any() or (x[:, 0] > x1).any() or (x[:, 1] < y0).any() or (x[:, 1] > y1).any()):
            raise ValueError("points outside the window")

    def log_unnorm(self, x, theta) -> float:
        self._check_theta(theta)
        return log_unnorm_pp(x, self.params(theta))

    def log_unnorm_pair(self, x, theta_a, theta_b):
        pts = np.ascontiguousarray(np.asarray(x, dtype=float).reshape(-1, 2))
        out = _log_unnorm_multi(pts, np.stack([self.packed(theta_a), self.packed(theta_b)]))
        return float(out[0]), float(out[1])

    def log_unnorm_many(self, x, thetas) -> np.ndarray:
        pts = np.ascontiguousarray(np.asarray(x, dtype=float).reshape(-1, 2))
        return _log_unnorm_multi(pts, np.stack([self.packed(t) for t in thetas]))

    def initial_state(self) -> np.ndarray:
        return np.empty((0, 2))

    def run_cycles(self, state, theta, m, rng):
        pts = np.ascontiguousarray(np.asarray(state, dtype=float).reshape(-1, 2))
        k = int(m) * self.n_ref
        u = rng.random(4 * k)
        out, _ = _birth_death(pts, k, u, self.packed(theta), *self.window)
        return out

    @property
    def supports_subsampling(self) -> bool:
        return True

    def subsample(self, x, K, rng):
        pts, tile = subsample_window(x, self.window, K, rng)
        sub = PointProcessModel(tile, self.R, max(1, round(self.n_ref / K)), self.cap, self.pair_weight, self.ideal)
        return pts, sub


def read_points(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([[float(r["x"]), float(r["y"])] for r in rows], dtype=float).reshape(-1, 2)


def write_points(path, x: np.ndarray) -> None:
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"])
        for px, py in x:
            w.writerow([repr(float(px)), repr(float(py))])
