"""q-state Potts lattice model.

``h(x|theta) = exp(theta * S(x))`` where ``S`` counts unordered neighbouring
pairs in the same state. Cells hold values ``1..q``.
"""
from __future__ import annotations

import math
from functools import lru_cache
from pathlib import Path
from typing import NamedTuple

import numba as nb
import numpy as np
from scipy.special import logsumexp

from .core import ExponentialFamilyModel

__all__ = [
    "PottsModel",
    "potts_stat",
    "potts_gibbs_cycle",
    "potts_log_pl",
    "potts_mple",
    "potts_exact_log_z",
    "potts_stat_distribution",
    "MpleResult",
    "read_lattice",
    "write_lattice",
]


def potts_stat(x: np.ndarray, boundary: str = "free") -> int:
    x = np.asarray(x)
    s = int(np.count_nonzero(x[:, 1:] == x[:, :-1]) + np.count_nonzero(x[1:, :] == x[:-1, :]))
    if boundary == "toroidal":
        if x.shape[1] > 2:
            s += int(np.count_nonzero(x[:, 0] == x[:, -1]))
        if x.shape[0] > 2:
            s += int(np.count_nonzero(x[0, :] == x[-1, :]))
    return s


@nb.njit(cache=True)
def _gibbs_sweeps(cells, q, theta, n_cycles, u, toroidal):
    rows, cols = cells.shape
    w = np.empty(5)
    for c in range(5):
        w[c] = math.exp(theta * c)
    counts = np.zeros(q + 1, dtype=np.int64)
    p = np.empty(q)
    k = 0
    wrap_r = toroidal and rows > 2
    wrap_c = toroidal and cols > 2
    for _ in range(n_cycles):
        for i in range(rows):
            for j in range(cols):
                for s in range(q + 1):
                    counts[s] = 0
                if i > 0:
                    counts[cells[i - 1, j]] += 1
                elif wrap_r:
                    counts[cells[rows - 1, j]] += 1
                if i < rows - 1:
                    counts[cells[i + 1, j]] += 1
                elif wrap_r:
                    counts[cells[0, j]] += 1
                if j > 0:
                    counts[cells[i, j - 1]] += 1
                elif wrap_c:
                    counts[cells[i, cols - 1]] += 1
                if j < cols - 1:
                    counts[cells[i, j + 1]] += 1
                elif wrap_c:
                    counts[cells[i, 0]] += 1
                total = 0.0
                for s in range(q):
                    total += w[counts[s + 1]]
                    p[s] = total
                target = u[k] * total
                k += 1
                new = q
                for s in range(q):
                    if target < p[s]:
                        new = s + 1
                        break
                cells[i, j] = new
    return cells


def _neighbour_counts(x: np.ndarray, q: int, boundary: str) -> np.ndarray:
    """``out[i, j, k]`` = number of neighbours of site (i, j) in state k+1."""
    x = np.asarray(x)
    rows, cols = x.shape
    onehot = (x[..., None] == np.arange(1, q + 1)).astype(np.int64)
    out = np.zeros((rows, cols, q), dtype=np.int64)
    out[1:] += onehot[:-1]
    out[:-1] += onehot[1:]
    out[:, 1:] += onehot[:, :-1]
    out[:, :-1] += onehot[:, 1:]
    if boundary == "toroidal":
        if rows > 2:
            out[0] += onehot[-1]
            out[-1] += onehot[0]
        if cols > 2:
            out[:, 0] += onehot[:, -1]
            out[:, -1] += onehot[:, 0]
    return out


def potts_gibbs_cycle(x: np.ndarray, theta: float, rng: np.random.Generator, q: int = 4, boundary: str = "free"):
    """One raster-order Gibbs sweep; returns a new lattice."""
    cells = np.array(x, dtype=np.int8, copy=True)
    u = rng.random(cells.size)
    return _gibbs_sweeps(cells, q, float(theta), 1, u, boundary == "toroidal")


def _pl_terms(x, q, boundary):
    counts = _neighbour_counts(x, q, boundary).reshape(-1, q)
    own = np.take_along_axis(counts, (np.asarray(x).reshape(-1, 1) - 1).astype(np.int64), axis=1)[:, 0]
    return counts, own


def potts_log_pl(x: np.ndarray, theta: float, q: int = 4, boundary: str = "free") -> float:
    counts, own = _pl_terms(x, q, boundary)
    return float(np.sum(theta * own - logsumexp(theta * counts, axis=1)))


def _pl_derivs(counts, own, theta):
    a = theta * counts
    a -= a.max(axis=1, keepdims=True)
    p = np.exp(a)
    p /= p.sum(axis=1, keepdims=True)
    mean = (p * counts).sum(axis=1)
    var = (p * counts**2).sum(axis=1) - mean**2
    return float(np.sum(own - mean)), float(-np.sum(var))


class MpleResult(NamedTuple):
    theta: float
    fisher: float
    degenerate: bool


def potts_mple(x: np.ndarray, q: int = 4, boundary: str = "free", lo: float = 0.0, hi: float = 2.0,
               tol: float = 1e-12, max_iter: int = 100) -> MpleResult:
    """Maximize the log pseudo-likelihood over ``[lo, hi]``.

    Newton steps that leave the bracket fall back to bisection. If the
    pseudo-likelihood is monotone on the box the boundary is returned with
    ``degenerate=True``.
    """
    counts, own = _pl_terms(x, q, boundary)
    g_lo, _ = _pl_derivs(counts, own, lo)
    g_hi, _ = _pl_derivs(counts, own, hi)
    if g_lo <= 0:
        return MpleResult(lo, -_pl_derivs(counts, own, lo)[1], True)
    if g_hi >= 0:
        return MpleResult(hi, -_pl_derivs(counts, own, hi)[1], True)
    a, b = lo, hi
    t = 0.5 * (a + b)
    for _ in range(max_iter):
        g, h = _pl_derivs(counts, own, t)
        if g > 0:
            a = t
        else:
            b = t
        if abs(g) < tol * max(1.0, counts.shape[0]):
            break
        t_new = t - g / h if h < 0 else 0.5 * (a + b)
        if not a < t_new < b:
            t_new = 0.5 * (a + b)
        if abs(t_new - t) < 1e-15:
            t = t_new
            break
        t = t_new
    _, h = _pl_derivs(counts, own, t)
    return MpleResult(float(t), float(-h), False)


@nb.njit(cache=True)
def _enumerate_stats(rows, cols, q, toroidal):
    n = rows * cols
    total = q**n
    max_s = 2 * n + 1
    hist = np.zeros(max_s, dtype=np.int64)
    cells = np.zeros(n, dtype=np.int64)
    wrap_r = toroidal and rows > 2
    wrap_c = toroidal and cols > 2
    for code in range(total):
        c = code
        for i in range(n):
            cells[i] = c % q
            c //= q
        s = 0
        for i in range(rows):
            for j in range(cols):
                v = cells[i * cols + j]
                if j < cols - 1 and cells[i * cols + j + 1] == v:
                    s += 1
                if i < rows - 1 and cells[(i + 1) * cols + j] == v:
                    s += 1
                if wrap_c and j == cols - 1 and cells[i * cols] == v:
                    s += 1
                if wrap_r and i == rows - 1 and cells[j] == v:
                    s += 1
        hist[s] += 1
    return hist


@lru_cache(maxsize=32)
def potts_stat_distribution(m: int, q: int, boundary: str = "free") -> tuple[np.ndarray, np.ndarray]:
    """Values of ``S`` and the number of configurations attaining each."""
    if q ** (m * m) > 2**24:
        raise ValueError(f"{q}^{m * m} configurations is too many to enumerate")
    hist = _enumerate_stats(m, m, q, boundary == "toroidal")
    s = np.nonzero(hist)[0]
    return s.astype(float), hist[s].astype(float)


def potts_exact_log_z(m: int, q: int, theta, boundary: str = "free"):
    """``log sum_x exp(theta S(x))`` by exhaustive enumeration (m <= 4, q <= 4)."""
    if m > 4 or q > 4:
        raise ValueError("exact enumeration limited to m <= 4 and q <= 4")
    s, counts = potts_stat_distribution(m, q, boundary)
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    out = logsumexp(th[:, None] * s[None, :] + np.log(counts)[None, :], axis=1)
    return float(out[0]) if np.ndim(theta) == 0 else out


def _factor_grid(K: int) -> tuple[int, int]:
    r = int(math.isqrt(K))
    while K % r:
        r -= 1
    return K // r, r


class PottsModel(ExponentialFamilyModel):
    """Potts model on a ``rows x cols`` lattice (square by default)."""

    param_names = ("theta",)

    def __init__(self, m: int = 32, q: int = 4, boundary: str = "free", cols: int | None = None):
        if boundary not in ("free", "toroidal"):
            raise ValueError(f"unknown boundary {boundary!r}")
        rows, cols = int(m), int(m if cols is None else cols)
        if q < 2 or min(rows, cols) < 1 or rows * cols < 2:
            raise ValueError("Potts lattice needs q >= 2 and at least two sites")
        self.shape = (rows, cols)
        self.q = int(q)
        self.boundary = boundary

    @property
    def m(self) -> int:
        return self.shape[0]

    def __repr__(self):
        return f"PottsModel(shape={self.shape}, q={self.q}, boundary={self.boundary!r})"

    def check_state(self, x) -> None:
        x = np.asarray(x)
        if x.shape != self.shape:
            raise ValueError(f"lattice shape {x.shape} != model shape {self.shape}")
        if x.min() < 1 or x.max() > self.q:
            raise ValueError(f"cells must lie in 1..{self.q}")

    def sufficient_stats(self, x) -> np.ndarray:
        return np.array([potts_stat(x, self.boundary)], dtype=float)

    def initial_state(self) -> np.ndarray:
        return np.ones(self.shape, dtype=np.int8)

    def run_cycles(self, state, theta, m, rng):
        cells = np.array(state, dtype=np.int8, copy=True)
        u = rng.random(m * cells.size)
        return _gibbs_sweeps(cells, self.q, float(theta[0]), int(m), u, self.boundary == "toroidal")

    def log_pl(self, x, theta) -> float:
        return potts_log_pl(x, float(np.ravel(theta)[0]), self.q, self.boundary)

    def mple(self, x) -> MpleResult:
        return potts_mple(x, self.q, self.boundary)

    @property
    def supports_subsampling(self) -> bool:
        return True

    def subsample(self, x, K, rng):
        """Pick one block of a ``kr x kc`` contiguous partition of the lattice."""
        kr, kc = _factor_grid(int(K))
        if kr > self.shape[0] or kc > self.shape[1]:
            raise ValueError(f"K={K} does not tile a {self.shape} lattice")
        row_blocks = np.array_split(np.arange(self.shape[0]), kr)
        col_blocks = np.array_split(np.arange(self.shape[1]), kc)
        b = int(rng.integers(kr * kc))
        rb, cb = row_blocks[b // kc], col_blocks[b % kc]
        sub = np.asarray(x)[rb[0]:rb[-1] + 1, cb[0]:cb[-1] + 1]
        return sub, PottsModel(len(rb), self.q, "free", cols=len(cb))


def read_lattice(path) -> tuple[np.ndarray, int]:
    lines = Path(path).read_text().split("\n")
    m, q = (int(v) for v in lines[0].split())
    cells = np.array([[int(v) for v in ln.split()] for ln in lines[1:1 + m]], dtype=np.int8)
    if cells.shape != (m, m):
        raise ValueError(f"{path}: expected {m}x{m} cells, got {cells.shape}")
    return cells, q


def write_lattice(path, x: np.ndarray, q: int) -> None:
    x = np.asarray(x)
    rows = "\n".join(" ".join(str(int(v)) for v in row) for row in x)
    Path(path).write_text(f"{x.shape[0]} {q}\n{rows}\n")
