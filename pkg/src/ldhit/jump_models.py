"""Jump distributions for random walks in R^d.

A model exposes the cumulant ``K(lam) = ln E exp<lam, xi>``, its gradient and
Hessian, and samplers for the plain and the exponentially tilted (Cramér
transformed) jump law.  Models are immutable once built; random state is
always passed in by the caller.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError, UnsupportedTilt

__all__ = [
    "ScalarDistribution",
    "Exponential",
    "Gamma",
    "Degenerate",
    "JumpModel",
    "GaussianJumpModel",
    "ProportionalClaims",
    "IndependentClaims",
    "SparreAndersenModel",
    "AnalyticJumpModel",
    "build_sparre_andersen",
    "psi",
    "cumulant_grad",
    "cumulant_hess",
    "sample_tilted",
    "fd_step",
]

_EPS = np.finfo(float).eps


def fd_step(x) -> float:
    """Central-difference step balancing truncation and round-off."""
    return _EPS ** (1.0 / 3.0) * (1.0 + float(np.linalg.norm(x)))


def _as_size(size) -> tuple:
    if size is None:
        return ()
    if isinstance(size, (int, np.integer)):
        return (int(size),)
    return tuple(size)


# ---------------------------------------------------------------------------
# positive scalar laws (claim amounts, interarrival times)
# ---------------------------------------------------------------------------


class ScalarDistribution(ABC):
    """Nonnegative scalar law with an MGF finite on ``theta < upper``."""

    upper: float = math.inf

    @property
    @abstractmethod
    def mean(self) -> float: ...

    def in_domain(self, theta):
        return np.asarray(theta) < self.upper

    @abstractmethod
    def cgf(self, theta): ...

    @abstractmethod
    def cgf1(self, theta): ...

    @abstractmethod
    def cgf2(self, theta): ...

    @abstractmethod
    def sample_tilted(self, theta, rng: np.random.Generator, size=None): ...

    def sample(self, rng: np.random.Generator, size=None):
        return self.sample_tilted(0.0, rng, size)


class Gamma(ScalarDistribution):
    def __init__(self, shape: float, rate: float):
        if not (shape > 0 and rate > 0):
            raise ConfigError(f"gamma needs shape > 0 and rate > 0, got {shape}, {rate}")
        self.shape = float(shape)
        self.rate = float(rate)
        self.upper = self.rate

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    def cgf(self, theta):
        theta = np.asarray(theta, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = -self.shape * np.log1p(-theta / self.rate)
        return np.where(theta < self.rate, out, np.inf)

    def cgf1(self, theta):
        return self.shape / (self.rate - theta)

    def cgf2(self, theta):
        return self.shape / (self.rate - theta) ** 2

    def sample_tilted(self, theta, rng, size=None):
        # exponential tilt of Gamma(k, rate) is Gamma(k, rate - theta)
        if not theta < self.rate:
            raise DomainError(f"tilt {theta} outside (-inf, {self.rate})")
        return rng.gamma(self.shape, 1.0 / (self.rate - theta), size=size)

    def __repr__(self):
        return f"Gamma(shape={self.shape}, rate={self.rate})"


class Exponential(Gamma):
    def __init__(self, rate: float):
        super().__init__(1.0, rate)

    def sample_tilted(self, theta, rng, size=None):
        if not theta < self.rate:
            raise DomainError(f"tilt {theta} outside (-inf, {self.rate})")
        return rng.exponential(1.0 / (self.rate - theta), size=size)

    def __repr__(self):
        return f"Exponential(rate={self.rate})"


class Degenerate(ScalarDistribution):
    def __init__(self, value: float):
        if value < 0:
            raise ConfigError(f"degenerate value must be >= 0, got {value}")
        self.value = float(value)

    @property
    def mean(self) -> float:
        return self.value

    def cgf(self, theta):
        return self.value * np.asarray(theta, dtype=float)

    def cgf1(self, theta):
        return self.value

    def cgf2(self, theta):
        return 0.0

    def sample_tilted(self, theta, rng, size=None):
        return np.full(_as_size(size), self.value) if size is not None else self.value

    def __repr__(self):
        return f"Degenerate({self.value})"


# ---------------------------------------------------------------------------
# d-dimensional jump models
# ---------------------------------------------------------------------------


class JumpModel(ABC):
    """Light-tailed jump law on R^d.

    ``in_domain`` is the membership predicate for the set where the MGF is
    finite; ``interior_point`` certifies that this set has non-empty
    interior.  ``cgf`` accepts arrays of shape ``(..., d)`` and returns
    ``inf`` outside the domain.
    """

    dim: int

    @property
    def interior_point(self) -> np.ndarray:
        return np.zeros(self.dim)

    @property
    def mean(self) -> np.ndarray:
        return self.cgf_grad(np.zeros(self.dim))

    @abstractmethod
    def in_domain(self, lam): ...

    @abstractmethod
    def cgf(self, lam): ...

    @abstractmethod
    def cgf_grad(self, lam) -> np.ndarray: ...

    @abstractmethod
    def cgf_hess(self, lam) -> np.ndarray: ...

    def psi(self, lam):
        return np.exp(self.cgf(lam))

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        return self.sample_tilted(np.zeros(self.dim), rng, size)

    def sample_tilted(self, lam, rng: np.random.Generator, size=None) -> np.ndarray:
        raise UnsupportedTilt(f"{type(self).__name__} has no tilted sampler")


class GaussianJumpModel(JumpModel):
    def __init__(self, mu: Sequence[float], sigma):
        mu = np.array(mu, dtype=float)
        sigma = np.array(sigma, dtype=float)
        if mu.ndim != 1 or sigma.shape != (mu.size, mu.size):
            raise ConfigError(f"sigma shape {sigma.shape} does not match mu of length {mu.size}")
        if not np.allclose(sigma, sigma.T, rtol=0, atol=1e-12):
            raise ConfigError("sigma must be symmetric")
        try:
            chol = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError as exc:
            raise ConfigError("sigma must be positive definite") from exc
        self.dim = mu.size
        self.mu = mu
        self.sigma = sigma
        self.chol = chol
        for arr in (self.mu, self.sigma, self.chol):
            arr.setflags(write=False)

    @property
    def mean(self) -> np.ndarray:
        return self.mu.copy()

    def in_domain(self, lam):
        lam = np.asarray(lam, dtype=float)
        return np.all(np.isfinite(lam), axis=-1)

    def cgf(self, lam):
        lam = np.asarray(lam, dtype=float)
        return lam @ self.mu + 0.5 * np.einsum("...i,ij,...j->...", lam, self.sigma, lam)

    def cgf_grad(self, lam):
        return self.mu + self.sigma @ np.asarray(lam, dtype=float)

    def cgf_hess(self, lam):
        return self.sigma.copy()

    def sample_tilted(self, lam, rng, size=None):
        # Cramér transform of N(mu, S) at lam is N(mu + S lam, S)
        shape = _as_size(size) + (self.dim,)
        z = rng.standard_normal(shape)
        return z @ self.chol.T + self.cgf_grad(lam)

    def __repr__(self):
        return f"GaussianJumpModel(mu={self.mu.tolist()}, sigma={self.sigma.tolist()})"


class ProportionalClaims(JumpModel):
    """Claim vector ``split * X`` with a single scalar amount ``X``."""

    def __init__(self, split: Sequence[float], amount: ScalarDistribution):
        split = np.array(split, dtype=float)
        if split.ndim != 1 or np.any(split < 0):
            raise ConfigError("split must be a nonnegative vector")
        self.split = split
        self.amount = amount
        self.dim = split.size

    @property
    def mean(self):
        return self.split * self.amount.mean

    def in_domain(self, lam):
        return self.amount.in_domain(np.asarray(lam, dtype=float) @ self.split)

    def cgf(self, lam):
        return self.amount.cgf(np.asarray(lam, dtype=float) @ self.split)

    def cgf_grad(self, lam):
        return self.split * self.amount.cgf1(float(np.dot(lam, self.split)))

    def cgf_hess(self, lam):
        return np.outer(self.split, self.split) * self.amount.cgf2(float(np.dot(lam, self.split)))

    def sample_tilted(self, lam, rng, size=None):
        x = self.amount.sample_tilted(float(np.dot(lam, self.split)), rng, size)
        return np.multiply.outer(x, self.split)


class IndependentClaims(JumpModel):
    """Claim vector with independent components."""

    def __init__(self, marginals: Sequence[ScalarDistribution]):
        if not marginals:
            raise ConfigError("need at least one marginal")
        self.marginals = tuple(marginals)
        self.dim = len(self.marginals)

    @property
    def mean(self):
        return np.array([m.mean for m in self.marginals])

    def in_domain(self, lam):
        lam = np.asarray(lam, dtype=float)
        ok = [m.in_domain(lam[..., i]) for i, m in enumerate(self.marginals)]
        return np.logical_and.reduce(ok)

    def cgf(self, lam):
        lam = np.asarray(lam, dtype=float)
        return sum(m.cgf(lam[..., i]) for i, m in enumerate(self.marginals))

    def cgf_grad(self, lam):
        return np.array([m.cgf1(lam[i]) for i, m in enumerate(self.marginals)], dtype=float)

    def cgf_hess(self, lam):
        return np.diag([m.cgf2(lam[i]) for i, m in enumerate(self.marginals)]).astype(float)

    def sample_tilted(self, lam, rng, size=None):
        cols = [m.sample_tilted(float(lam[i]), rng, size) for i, m in enumerate(self.marginals)]
        return np.stack(np.broadcast_arrays(*cols), axis=-1).astype(float)


class SparreAndersenModel(JumpModel):
    """Embedded jump ``xi = J - c * tau`` of a d-dimensional Sparre Andersen model.

    Claim vector ``J`` and interarrival time ``tau`` are independent, so
    ``psi_xi(lam) = psi_J(lam) * M_tau(-<lam, c>)``.
    """

    def __init__(self, premium, claims: JumpModel, interarrival: ScalarDistribution):
        self.premium = np.array(premium, dtype=float)
        self.claims = claims
        self.interarrival = interarrival
        self.dim = claims.dim

    @property
    def mean(self):
        return self.claims.mean - self.premium * self.interarrival.mean

    def _theta(self, lam):
        return -(np.asarray(lam, dtype=float) @ self.premium)

    def in_domain(self, lam):
        return np.logical_and(self.claims.in_domain(lam), self.interarrival.in_domain(self._theta(lam)))

    def cgf(self, lam):
        lam = np.asarray(lam, dtype=float)
        ok = self.in_domain(lam)
        with np.errstate(invalid="ignore", over="ignore"):
            out = self.claims.cgf(lam) + self.interarrival.cgf(self._theta(lam))
        return np.where(ok, out, np.inf)

    def cgf_grad(self, lam):
        theta = float(self._theta(lam))
        return self.claims.cgf_grad(lam) - self.premium * self.interarrival.cgf1(theta)

    def cgf_hess(self, lam):
        theta = float(self._theta(lam))
        return self.claims.cgf_hess(lam) + np.outer(self.premium, self.premium) * self.interarrival.cgf2(theta)

    def sample_tilted(self, lam, rng, size=None):
        # independence makes the tilted joint law factor: J tilted by lam,
        # tau tilted by -<lam, c>
        lam = np.asarray(lam, dtype=float)
        claims = self.claims.sample_tilted(lam, rng, size)
        tau = np.asarray(self.interarrival.sample_tilted(float(self._theta(lam)), rng, size))
        return claims - tau[..., None] * self.premium

    def sample_pairs(self, rng, size=None):
        """Draw ``(J, tau)`` pairs; the jump is ``J - c * tau``."""
        claims = self.claims.sample(rng, size)
        tau = np.asarray(self.interarrival.sample(rng, size))
        return claims, tau


class AnalyticJumpModel(JumpModel):
    """Model defined by user callables.

    Only ``cgf`` is mandatory.  Missing derivatives fall back to central
    differences; a missing tilted sampler makes tilting unsupported.
    """

    def __init__(
        self,
        dim: int,
        cgf: Callable,
        grad: Optional[Callable] = None,
        hess: Optional[Callable] = None,
        sampler: Optional[Callable] = None,
        tilted_sampler: Optional[Callable] = None,
        domain: Optional[Callable] = None,
        interior_point=None,
    ):
        self.dim = int(dim)
        self._cgf = cgf
        self._grad = grad
        self._hess = hess
        self._sampler = sampler
        self._tilted = tilted_sampler
        self._domain = domain
        self._interior = np.zeros(self.dim) if interior_point is None else np.asarray(interior_point, float)

    @property
    def interior_point(self):
        return self._interior.copy()

    def in_domain(self, lam):
        if self._domain is not None:
            return self._domain(lam)
        with np.errstate(all="ignore"):
            return np.isfinite(self._cgf(lam))

    def cgf(self, lam):
        with np.errstate(all="ignore"):
            out = np.asarray(self._cgf(lam), dtype=float)
        return np.where(self.in_domain(lam), out, np.inf)

    def cgf_grad(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self._grad is not None:
            return np.asarray(self._grad(lam), dtype=float)
        h = fd_step(lam)
        eye = np.eye(self.dim) * h
        return np.array([(self._cgf(lam + e) - self._cgf(lam - e)) / (2 * h) for e in eye])

    def cgf_hess(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self._hess is not None:
            return np.asarray(self._hess(lam), dtype=float)
        h = fd_step(lam)
        cols = [(self.cgf_grad(lam + e) - self.cgf_grad(lam - e)) / (2 * h) for e in np.eye(self.dim) * h]
        hess = np.array(cols)
        return 0.5 * (hess + hess.T)

    def sample(self, rng, size=None):
        if self._sampler is None:
            raise UnsupportedTilt("no sampler supplied")
        return np.asarray(self._sampler(rng, size), dtype=float)

    def sample_tilted(self, lam, rng, size=None):
        if not np.any(lam):
            return self.sample(rng, size)
        if self._tilted is None:
            raise UnsupportedTilt("no tilted sampler supplied")
        return np.asarray(self._tilted(np.asarray(lam, float), rng, size), dtype=float)


def build_sparre_andersen(c, claim_model: JumpModel, interarrival_model: ScalarDistribution,
                          independent: bool = True) -> SparreAndersenModel:
    c = np.array(c, dtype=float)
    if not independent:
        raise ConfigError("only independent claims and interarrival times are supported")
    if c.ndim != 1 or c.size != claim_model.dim:
        raise ConfigError(f"premium has {c.size} entries, claims have dimension {claim_model.dim}")
    if np.any(c <= 0):
        raise ConfigError("premium rates must be strictly positive")
    if not isinstance(interarrival_model, ScalarDistribution):
        raise ConfigError("interarrival model must be a scalar distribution")
    return SparreAndersenModel(c, claim_model, interarrival_model)


# ---------------------------------------------------------------------------
# checked entry points
# ---------------------------------------------------------------------------


def _check(model: JumpModel, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (model.dim,):
        raise DomainError(f"expected a vector of length {model.dim}, got shape {lam.shape}")
    if not bool(model.in_domain(lam)):
        raise DomainError(f"{lam.tolist()} is outside the MGF domain")
    return lam


def psi(model: JumpModel, lam) -> float:
    """``E exp<lam, xi>``."""
    return float(np.exp(model.cgf(_check(model, lam))))


def cumulant_grad(model: JumpModel, lam) -> np.ndarray:
    """Mean of the Cramér transform at ``lam``."""
    return model.cgf_grad(_check(model, lam))


def cumulant_hess(model: JumpModel, lam) -> np.ndarray:
    """Covariance of the Cramér transform at ``lam``."""
    return model.cgf_hess(_check(model, lam))


def sample_tilted(model: JumpModel, lam, rng: np.random.Generator, size=None) -> np.ndarray:
    return model.sample_tilted(_check(model, lam), rng, size)
