"""First-stage posterior approximations.

Three kinds are built here:

* ``gp``: ``log p(theta) + log h(x|theta) - m(theta)`` where ``m`` is the kriging
  mean of a Matern-3/2 Gaussian process fitted to importance-sampling
  estimates of ``log Z(theta) - log Z(theta_ref)``;
* ``gaussian-frequentist``: ``-(theta - theta_hat)' F (theta - theta_hat) / 2``;
* ``flat``: identically zero.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import linalg, optimize
from scipy.spatial import distance
from scipy.special import logsumexp

from .core import ExponentialFamilyModel, IntractableModel, PriorSpec

__all__ = [
    "NUGGET_FLOOR",
    "IsEstimate",
    "GPEmulator",
    "GPFitError",
    "Surrogate",
    "reference_draws",
    "is_logz",
    "matern32",
    "gp_fit",
    "gp_predict",
    "gp_surrogate",
    "freq_surrogate",
    "flat_surrogate",
    "nearest_spd",
    "save_emulator",
    "load_emulator",
]

NUGGET_FLOOR = 1e-8


class GPFitError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# importance sampling


@dataclass(frozen=True)
class IsEstimate:
    """Reference draws at ``theta_ref``: statistics (exponential family) or full states."""

    theta_ref: np.ndarray
    draws: object

    @property
    def n_draws(self) -> int:
        return len(self.draws)


def reference_draws(model: IntractableModel, theta_ref, N: int, m: int, rng: np.random.Generator,
                    burn: int | None = None, start=None) -> IsEstimate:
    """``N`` draws from ``h(.|theta_ref)`` taken ``m`` inner cycles apart along one chain."""
    theta_ref = np.asarray(theta_ref, dtype=float)
    if isinstance(model, ExponentialFamilyModel):
        return IsEstimate(theta_ref, model.sample_stats(theta_ref, N, m, rng, burn=burn, start=start))
    if N < 1:
        raise ValueError("need N >= 1 reference draws")
    state = model.initial_state() if start is None else start
    state = model.run_cycles(state, theta_ref, 10 * m if burn is None else max(int(burn), 1), rng)
    states = []
    for _ in range(N):
        state = model.run_cycles(state, theta_ref, m, rng)
        states.append(state)
    return IsEstimate(theta_ref, states)


def is_logz(model: IntractableModel, draws, theta_ref, particles) -> np.ndarray:
    """``log (1/N) sum_l h(x_l|theta_i) / h(x_l|theta_ref)`` for every particle row.

    ``draws`` is an :class:`IsEstimate`, an ``N x p`` statistics array for an
    exponential-family model, or a sequence of states.
    """
    if isinstance(draws, IsEstimate):
        draws = draws.draws
    theta_ref = np.asarray(theta_ref, dtype=float)
    P = np.atleast_2d(np.asarray(particles, dtype=float))
    if len(draws) == 0:
        raise ValueError("is_logz needs at least one reference draw")
    if isinstance(model, ExponentialFamilyModel):
        S = np.atleast_2d(np.asarray(draws, dtype=float))
        L = (P - theta_ref) @ S.T  # d x N
    else:
        thetas = np.vstack([P, theta_ref[None, :]])
        if hasattr(model, "log_unnorm_many"):
            H = np.array([model.log_unnorm_many(x, thetas) for x in draws])
        else:
            H = np.array([[model.log_unnorm(x, t) for t in thetas] for x in draws])
        L = (H[:, :-1] - H[:, -1:]).T
    return logsumexp(L, axis=1) - math.log(L.shape[1])


# --------------------------------------------------------------------------
# Gaussian process emulator


def matern32(r, sigma2: float, phi: float):
    a = math.sqrt(3.0) * np.asarray(r, dtype=float) / phi
    return sigma2 * (1.0 + a) * np.exp(-a)


def _basis(P: np.ndarray, trend: str) -> np.ndarray:
    ones = np.ones((P.shape[0], 1))
    return ones if trend == "constant" else np.hstack([ones, P])


@dataclass
class GPEmulator:
    """Fitted Matern-3/2 emulator.

    Distances are measured after scaling each coordinate by ``scale`` (the
    particle range), so one range parameter serves coordinates of different
    magnitude.
    """

    particles: np.ndarray
    z: np.ndarray
    sigma2: float
    phi: float
    tau2: float
    beta: np.ndarray
    trend: str = "linear"
    center: np.ndarray | None = None
    scale: np.ndarray | None = None
    neg_loglik: float = float("nan")
    chol: tuple = field(default=None, repr=False)
    alpha: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.particles = np.atleast_2d(np.asarray(self.particles, dtype=float))
        self.z = np.asarray(self.z, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        if self.center is None:
            self.center, self.scale = _standardizer(self.particles)
        self.center = np.asarray(self.center, dtype=float)
        self.scale = np.asarray(self.scale, dtype=float)
        if not (self.sigma2 > 0 and self.phi > 0 and self.tau2 >= NUGGET_FLOOR * (1 - 1e-9)):
            raise ValueError("emulator needs sigma2 > 0, phi > 0 and tau2 >= nugget floor")
        if self.chol is None:
            C = self._train_cov()
            self.chol = linalg.cho_factor(C, lower=True)
            r = self.z - _basis(self.particles, self.trend) @ self.beta
            self.alpha = linalg.cho_solve(self.chol, r)

    @property
    def dim(self) -> int:
        return self.particles.shape[1]

    def _u(self, P):
        return (np.atleast_2d(P) - self.center) / self.scale

    def _train_cov(self):
        U = self._u(self.particles)
        C = matern32(_pdist(U), self.sigma2, self.phi)
        C[np.diag_indices_from(C)] += self.tau2
        return C

    def cross_cov(self, theta) -> np.ndarray:
        # the nugget is micro-scale variation, so it is shared at zero distance and
        # the predictor reproduces z at the training particles
        r = distance.cdist(self._u(theta), self._u(self.particles))
        return matern32(r, self.sigma2, self.phi) + np.where(r == 0.0, self.tau2, 0.0)

    def to_dict(self) -> dict:
        return {
            "particles": self.particles.tolist(), "z": self.z.tolist(), "sigma2": self.sigma2,
            "phi": self.phi, "tau2": self.tau2, "beta": self.beta.tolist(), "trend": self.trend,
            "center": self.center.tolist(), "scale": self.scale.tolist(), "neg_loglik": self.neg_loglik,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GPEmulator":
        return cls(np.array(d["particles"]), np.array(d["z"]), d["sigma2"], d["phi"], d["tau2"],
                   np.array(d["beta"]), d.get("trend", "linear"), np.array(d["center"]),
                   np.array(d["scale"]), d.get("neg_loglik", float("nan")))


def _standardizer(P):
    center = P.mean(axis=0)
    scale = P.max(axis=0) - P.min(axis=0)
    scale[scale <= 0] = 1.0
    return center, scale


def _pdist(U):
    return distance.cdist(U, U)


def _profile_nll(log_h, D, X, z, fixed_tau2):
    sigma2, phi = math.exp(log_h[0]), math.exp(log_h[1])
    tau2 = fixed_tau2 if fixed_tau2 is not None else NUGGET_FLOOR + math.exp(log_h[2])
    C = matern32(D, sigma2, phi)
    C[np.diag_indices_from(C)] += tau2
    try:
        cf = linalg.cho_factor(C, lower=True)
    except linalg.LinAlgError:
        return math.inf, None
    CiX = linalg.cho_solve(cf, X)
    A = X.T @ CiX
    try:
        beta = np.linalg.solve(A, CiX.T @ z)
    except np.linalg.LinAlgError:
        return math.inf, None
    r = z - X @ beta
    quad = float(r @ linalg.cho_solve(cf, r))
    logdet = 2.0 * float(np.sum(np.log(np.diag(cf[0]))))
    nll = 0.5 * (logdet + quad + len(z) * math.log(2 * math.pi))
    return (nll if np.isfinite(nll) else math.inf), (sigma2, phi, tau2, beta)


def gp_fit(particles, z, trend: str = "linear", n_starts: int = 8, fix_nugget: bool = False,
           rng: np.random.Generator | None = None) -> GPEmulator:
    """Maximum-likelihood Matern-3/2 fit with the trend profiled out by GLS.

    Hyperparameters ``(sigma2, phi, tau2)`` are optimized on the log scale by
    Nelder-Mead from ``n_starts`` starts whose ranges are log-spaced over the
    spread of inter-particle distances. ``fix_nugget`` pins ``tau2`` at the
    floor, which makes the predictor interpolate.
    """
    P = np.asarray(particles, dtype=float)
    P = P[:, None] if P.ndim == 1 else P
    z = np.asarray(z, dtype=float)
    d, p = P.shape
    if trend not in ("linear", "constant"):
        raise ValueError(f"unknown trend {trend!r}")
    if len(z) != d:
        raise ValueError("one z value per particle required")
    if d < p + 2:
        raise ValueError(f"need at least p + 2 = {p + 2} particles, got {d}")
    center, scale = _standardizer(P)
    U = (P - center) / scale
    X = _basis(P, trend)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise ValueError("particles are collinear; the trend is not identifiable")
    D = _pdist(U)
    pos = D[np.triu_indices(d, 1)]
    pos = pos[pos > 0]
    dmin, dmax = (pos.min(), pos.max()) if pos.size else (1.0, 1.0)
    zvar = max(float(np.var(z)), 1e-12)
    fixed = NUGGET_FLOOR if fix_nugget else None
    best_val, best = math.inf, None
    for phi0 in np.geomspace(max(dmin, 1e-3 * dmax), dmax, n_starts):
        x0 = [math.log(zvar), math.log(phi0)]
        if not fix_nugget:
            x0.append(math.log(1e-4 * zvar))
        f = lambda h: _profile_nll(h, D, X, z, fixed)[0]
        if not np.isfinite(f(np.array(x0))):
            continue
        res = optimize.minimize(f, np.array(x0), method="Nelder-Mead",
                                options={"xatol": 1e-6, "fatol": 1e-8, "maxiter": 4000, "maxfev": 8000})
        val, hyp = _profile_nll(res.x, D, X, z, fixed)
        if hyp is not None and val < best_val:
            best_val, best = val, hyp
    if best is None:
        raise GPFitError("Cholesky failed at every start; raise the nugget floor or thin duplicated particles")
    sigma2, phi, tau2, beta = best
    em = GPEmulator(P, z, sigma2, phi, tau2, beta, trend, center, scale, best_val)
    return em


def gp_predict(em: GPEmulator, theta, return_raw: bool = False):
    """Kriging mean and variance (clamped at zero) at one or more points."""
    T = np.asarray(theta, dtype=float)
    single = T.ndim == 0 or (T.ndim == 1 and em.dim > 1)
    T = T.reshape(-1, em.dim)
    c = em.cross_cov(T)
    mean = _basis(T, em.trend) @ em.beta + c @ em.alpha
    v = linalg.cho_solve(em.chol, c.T)
    raw = em.sigma2 + em.tau2 - np.einsum("ij,ji->i", c, v)
    if np.any(raw < -1e-6 * em.sigma2):
        warnings.warn(f"negative kriging variance {raw.min():.3g} before clamping", RuntimeWarning)
    var = np.maximum(raw, 0.0)
    if single:
        out = float(mean[0]), float(var[0])
        return (*out, float(raw[0])) if return_raw else out
    return (mean, var, raw) if return_raw else (mean, var)


def _gp_mean_fast(em: GPEmulator, theta) -> float:
    u = (np.asarray(theta, dtype=float) - em.center) / em.scale
    Up = (em.particles - em.center) / em.scale
    r = np.sqrt(((Up - u) ** 2).sum(axis=1))
    c = matern32(r, em.sigma2, em.phi)
    f = em.beta[0] if em.trend == "constant" else em.beta[0] + float(np.dot(em.beta[1:], theta))
    return float(f + c @ em.alpha)


def save_emulator(path, em: GPEmulator, extra: dict | None = None) -> None:
    d = {"kind": "gp", "emulator": em.to_dict()}
    if extra:
        d.update(extra)
    Path(path).write_text(json.dumps(d, indent=1))


def load_emulator(path) -> GPEmulator:
    d = json.loads(Path(path).read_text())
    return GPEmulator.from_dict(d["emulator"] if "emulator" in d else d)


# --------------------------------------------------------------------------
# surrogates


@dataclass(frozen=True)
class Surrogate:
    """Callable ``theta -> log pi_hat(theta | x) + const``."""

    kind: str
    fn: Callable[[np.ndarray], float]
    info: dict = field(default_factory=dict)

    def __call__(self, theta) -> float:
        v = float(self.fn(np.asarray(theta, dtype=float)))
        if math.isnan(v):
            raise FloatingPointError(f"{self.kind} surrogate returned NaN at theta={np.asarray(theta).tolist()}")
        return v

    def shifted(self, c: float) -> "Surrogate":
        fn = self.fn
        return Surrogate(self.kind, lambda t: fn(t) + c, dict(self.info))


def flat_surrogate() -> Surrogate:
    return Surrogate("flat", lambda t: 0.0)


def nearest_spd(A, floor: float = 1e-10) -> tuple[np.ndarray, bool]:
    """Symmetrize and floor eigenvalues; returns ``(matrix, repaired)``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    S = 0.5 * (A + A.T)
    try:
        np.linalg.cholesky(S)
        return S, False
    except np.linalg.LinAlgError:
        pass
    vals, vecs = np.linalg.eigh(S)
    top = float(np.max(np.abs(vals)))
    if top == 0.0:
        raise ValueError("matrix is zero; cannot repair")
    vals = np.maximum(vals, floor * top)
    return (vecs * vals) @ vecs.T, True


def freq_surrogate(theta_hat, fisher) -> Surrogate:
    """Gaussian surrogate with mean ``theta_hat`` and precision ``fisher``."""
    th = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    F, repaired = nearest_spd(np.atleast_2d(fisher))
    if F.shape != (th.size, th.size):
        raise ValueError("fisher shape does not match theta_hat")
    if repaired:
        warnings.warn("Fisher information repaired to nearest SPD matrix", RuntimeWarning)

    def fn(t):
        d = t - th
        return -0.5 * float(d @ F @ d)

    return Surrogate("gaussian-frequentist", fn, {"theta_hat": th.tolist(), "fisher": F.tolist(), "repaired": repaired})


def gp_surrogate(em: GPEmulator, prior: PriorSpec | None, model: IntractableModel, x) -> Surrogate:
    """``log p(theta) + log h(x|theta) - m_GP(theta)``; ``-inf`` outside the prior or model support."""

    def fn(t):
        lp = prior.log_prior(t) if prior is not None else 0.0
        if lp == -math.inf or not model.feasible(t):
            return -math.inf
        return lp + model.log_unnorm(x, t) - _gp_mean_fast(em, t)

    return Surrogate("gp", fn, {"d": int(em.particles.shape[0])})
