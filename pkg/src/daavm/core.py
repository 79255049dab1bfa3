"""Shared building blocks: parameter vectors, priors, proposals and the model contract.

Every intractable model exposes an unnormalized log-density ``log h(x|theta)``,
an inner sampler producing approximate draws from ``h(.|theta)/Z(theta)`` and,
where it makes sense, sufficient statistics and spatial subsampling.
"""
from __future__ import annotations

import math
import zlib
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

__all__ = [
    "ParamVector",
    "Uniform",
    "Normal",
    "LogNormal",
    "Beta",
    "PriorSpec",
    "ProposalSpec",
    "IntractableModel",
    "ExponentialFamilyModel",
    "named_stream",
    "spawn_streams",
    "log_prior",
    "propose",
]


class ParamVector(np.ndarray):
    """A float vector carrying coordinate names.

    Behaves as a plain ``ndarray``; ``names`` survives slicing-free arithmetic
    only where numpy keeps the subclass, so treat it as metadata.
    """

    def __new__(cls, values, names: Sequence[str] | None = None):
        arr = np.asarray(values, dtype=float).reshape(-1).view(cls)
        if names is None:
            names = tuple(f"theta_{i + 1}" for i in range(arr.size))
        if len(names) != arr.size:
            raise ValueError(f"{len(names)} names for a {arr.size}-vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("parameter coordinates must be finite")
        arr.names = tuple(names)
        return arr

    def __array_finalize__(self, obj):
        self.names = getattr(obj, "names", None)


# --------------------------------------------------------------------------
# priors


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"uniform prior needs lo < hi, got [{self.lo}, {self.hi}]")

    def logpdf(self, v: float) -> float:
        if self.lo <= v <= self.hi:
            return -math.log(self.hi - self.lo)
        return -math.inf

    def support(self) -> tuple[float, float]:
        return self.lo, self.hi

    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class Normal:
    mean: float
    var: float

    def __post_init__(self):
        if not self.var > 0:
            raise ValueError("normal prior needs var > 0")

    def logpdf(self, v: float) -> float:
        return -0.5 * math.log(2 * math.pi * self.var) - 0.5 * (v - self.mean) ** 2 / self.var

    def support(self) -> tuple[float, float]:
        return -math.inf, math.inf

    def center(self) -> float:
        return self.mean


@dataclass(frozen=True)
class LogNormal:
    logmean: float
    sdlog: float

    def __post_init__(self):
        if not self.sdlog > 0:
            raise ValueError("lognormal prior needs sdlog > 0")

    def logpdf(self, v: float) -> float:
        if v <= 0:
            return -math.inf
        z = (math.log(v) - self.logmean) / self.sdlog
        return -0.5 * z * z - math.log(v * self.sdlog * math.sqrt(2 * math.pi))

    def support(self) -> tuple[float, float]:
        return 0.0, math.inf

    def center(self) -> float:
        return math.exp(self.logmean)


@dataclass(frozen=True)
class Beta:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("beta prior needs a, b > 0")

    def logpdf(self, v: float) -> float:
        if not 0.0 < v < 1.0:
            return -math.inf
        return (self.a - 1) * math.log(v) + (self.b - 1) * math.log1p(-v) - special.betaln(self.a, self.b)

    def support(self) -> tuple[float, float]:
        return 0.0, 1.0

    def center(self) -> float:
        return self.a / (self.a + self.b)


_PRIOR_KINDS = {"uniform": Uniform, "normal": Normal, "lognormal": LogNormal, "beta": Beta}


@dataclass(frozen=True)
class PriorSpec:
    """Independent per-coordinate prior."""

    coords: tuple
    names: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        if not self.names:
            object.__setattr__(self, "names", tuple(f"theta_{i + 1}" for i in range(len(self.coords))))
        if len(self.names) != len(self.coords):
            raise ValueError("prior names and coordinates differ in length")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def log_prior(self, theta) -> float:
        if len(theta) != len(self.coords):
            raise ValueError(f"theta has dimension {len(theta)}, prior has {len(self.coords)}")
        total = 0.0
        for c, v in zip(self.coords, theta):
            lp = c.logpdf(float(v))
            if lp == -math.inf:
                return -math.inf
            total += lp
        return total

    def box(self) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = zip(*(c.support() for c in self.coords))
        return np.array(lo, dtype=float), np.array(hi, dtype=float)

    def center(self) -> np.ndarray:
        return np.array([c.center() for c in self.coords])

    @classmethod
    def from_config(cls, entries: Sequence[dict]) -> "PriorSpec":
        """Build from ``[{"name": .., "kind": "uniform", "lo": 0, "hi": 2}, ...]``."""
        coords, names = [], []
        for i, e in enumerate(entries):
            e = dict(e)
            kind = e.pop("kind")
            names.append(e.pop("name", f"theta_{i + 1}"))
            try:
                coords.append(_PRIOR_KINDS[kind](**e))
            except KeyError:
                raise ValueError(f"unknown prior kind {kind!r}") from None
        return cls(tuple(coords), tuple(names))

    def to_config(self) -> list[dict]:
        out = []
        for name, c in zip(self.names, self.coords):
            kind = {v: k for k, v in _PRIOR_KINDS.items()}[type(c)]
            out.append({"name": name, "kind": kind, **c.__dict__})
        return out


def log_prior(prior: PriorSpec, theta) -> float:
    return prior.log_prior(theta)


# --------------------------------------------------------------------------
# proposals


@dataclass
class ProposalSpec:
    """Symmetric Gaussian random walk.

    ``scale`` holds per-coordinate step sizes; if ``cov`` is given the step is
    ``scale_factor * chol(cov) @ z`` and ``scale`` is ignored.
    """

    scale: np.ndarray
    cov: np.ndarray | None = None
    kind: str = "random-walk-normal"
    _chol: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.scale = np.atleast_1d(np.asarray(self.scale, dtype=float))
        if self.kind != "random-walk-normal":
            raise ValueError(f"unsupported proposal kind {self.kind!r}")
        if np.any(self.scale <= 0):
            raise ValueError("proposal scales must be positive")
        if self.cov is not None:
            self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
            if not np.allclose(self.cov, self.cov.T):
                raise ValueError("proposal covariance must be symmetric")
            self._chol = np.linalg.cholesky(self.cov)  # raises if not SPD

    @property
    def dim(self) -> int:
        return self._chol.shape[0] if self._chol is not None else self.scale.size

    def step(self, z: np.ndarray) -> np.ndarray:
        if self._chol is not None:
            return self._chol @ z
        return self.scale * z

    def propose(self, theta, rng: np.random.Generator, factor: float = 1.0):
        z = rng.standard_normal(self.dim)
        return np.asarray(theta, dtype=float) + factor * self.step(z), 0.0


def propose(spec: ProposalSpec, theta, rng: np.random.Generator):
    """Random-walk draw; returns ``(theta_star, log q(theta|theta*) - log q(theta*|theta))``."""
    return spec.propose(theta, rng)


# --------------------------------------------------------------------------
# random streams


def named_stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named pipeline stage derived from one 64-bit seed."""
    key = zlib.crc32(name.encode())
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(key,))))


def spawn_streams(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    return list(rng.spawn(n))


# --------------------------------------------------------------------------
# model contract


class IntractableModel(ABC):
    """Unnormalized model ``h(x|theta)`` with an inner sampler.

    Model objects are immutable after construction; chains own their rngs
    and states.
    """

    param_names: tuple[str, ...] = ()

    @property
    def dim(self) -> int:
        return len(self.param_names)

    @abstractmethod
    def log_unnorm(self, x, theta) -> float:
        """``log h(x|theta)``; may be ``-inf`` but never ``+inf`` or NaN."""

    @abstractmethod
    def initial_state(self):
        """Canonical deterministic start of the inner sampler."""

    @abstractmethod
    def run_cycles(self, state, theta, m: int, rng: np.random.Generator):
        """Apply ``m`` inner-sampler cycles to a copy of ``state``."""

    def check_state(self, x) -> None:
        pass

    def feasible(self, theta) -> bool:
        """Whether the model is defined at ``theta`` (beyond prior support)."""
        return True

    def simulate_aux(self, theta, m: int, rng: np.random.Generator, start=None):
        """Approximate draw from ``h(.|theta)/Z(theta)`` after ``m`` cycles."""
        if m < 1:
            raise ValueError("inner sampler needs m >= 1 cycles")
        self._check_theta(theta)
        init = self.initial_state() if start is None else start
        return self.run_cycles(init, theta, m, rng)

    def log_unnorm_pair(self, x, theta_a, theta_b) -> tuple[float, float]:
        return self.log_unnorm(x, theta_a), self.log_unnorm(x, theta_b)

    def sufficient_stats(self, x) -> np.ndarray | None:
        return None

    def summary_stats(self, x) -> np.ndarray:
        s = self.sufficient_stats(x)
        if s is None:
            raise NotImplementedError(f"{type(self).__name__} has no summary statistics")
        return np.atleast_1d(s)

    @property
    def supports_subsampling(self) -> bool:
        return False

    def subsample(self, x, K: int, rng: np.random.Generator):
        """Return ``(x_sub, submodel)`` for one randomly chosen region out of ``K``."""
        raise NotImplementedError(f"{type(self).__name__} does not support subsampling")

    def _check_theta(self, theta) -> None:
        if len(theta) != self.dim:
            raise ValueError(f"theta has dimension {len(theta)}, model expects {self.dim}")


class ExponentialFamilyModel(IntractableModel):
    """``h(x|theta) = exp(theta . s(x))``."""

    @abstractmethod
    def sufficient_stats(self, x) -> np.ndarray: ...

    def log_unnorm(self, x, theta) -> float:
        self._check_theta(theta)
        return float(np.dot(np.asarray(theta, dtype=float), self.sufficient_stats(x)))

    def log_unnorm_pair(self, x, theta_a, theta_b):
        s = self.sufficient_stats(x)
        return float(np.dot(theta_a, s)), float(np.dot(theta_b, s))

    def sample_stats(self, theta, N: int, m: int, rng: np.random.Generator, burn: int | None = None,
                     start=None) -> np.ndarray:
        """Statistics of ``N`` states of one inner-sampler chain, ``m`` cycles apart.

        The chain starts from ``start`` (canonical state by default) and first
        runs ``burn`` cycles (``10 m`` by default).
        """
        if N < 1 or m < 1:
            raise ValueError("need N >= 1 draws and m >= 1 cycles")
        state = self.initial_state() if start is None else start
        state = self.run_cycles(state, theta, 10 * m if burn is None else max(int(burn), 1), rng)
        out = np.empty((N, self.dim))
        for k in range(N):
            state = self.run_cycles(state, theta, m, rng)
            out[k] = self.sufficient_stats(state)
        return out
