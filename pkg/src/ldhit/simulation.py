"""Monte Carlo estimators of ``P(eta(sG) < inf)``.

The importance-sampling estimator runs each trajectory under the law tilted
by ``lam`` with ``psi(lam) = 1``; the likelihood ratio at the hitting time
is then ``exp(-<lam, S(eta)>)``.  One trajectory serves every ``s`` on the
grid: the running maximum ``M(n)`` of ``min_i S_i(n) / g_i`` is
non-decreasing, and ``eta(sG)`` is the first ``n`` with ``M(n) >= s``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .asymptotics import _coordinate_exponents, _hopeless
from .errors import BudgetWarning, ConfigError, InvalidTilt
from .geometry import HalfSpaceGeom, OrthantTarget, half_space_geometry
from .jump_models import JumpModel, SparreAndersenModel
from .parallel import block_rng, map_blocks
from .rates import RateEvaluator

__all__ = [
    "Z99",
    "McRun",
    "TiltSpec",
    "RuinSettings",
    "validate_tilt",
    "is_hitting_prob",
    "naive_hitting_prob",
    "default_tilt",
    "simulate_ruin",
]

Z99 = 2.5758293035489004
PSI_TOL = 1e-4
_IS_TAG, _NAIVE_TAG = 201, 202


@dataclass(frozen=True)
class McRun:
    s: float
    estimate: float
    std_error: float
    ci_low: float
    ci_high: float
    n_traj: int
    n_hit: int
    seed: int

    @classmethod
    def from_sums(cls, s, total, total_sq, n, n_hit, seed):
        mean = total / n
        var = max(total_sq / n - mean * mean, 0.0) * n / (n - 1) if n > 1 else 0.0
        se = math.sqrt(var / n)
        return cls(float(s), mean, se, max(mean - Z99 * se, 0.0), mean + Z99 * se, int(n), int(n_hit), int(seed))

    def row(self) -> list:
        return [self.s, self.estimate, self.std_error, self.ci_low, self.ci_high, self.n_traj, self.n_hit, self.seed]


@dataclass(frozen=True)
class TiltSpec:
    lam: np.ndarray
    source: str = "user_supplied"

    def __post_init__(self):
        object.__setattr__(self, "lam", np.asarray(self.lam, dtype=float))
        if self.source not in ("dual_optimal", "user_supplied"):
            raise ConfigError(f"unknown tilt source {self.source!r}")


def validate_tilt(model: JumpModel, tilt: TiltSpec) -> TiltSpec:
    """Reject tilts that would bias the estimator or never hit the target."""
    lam = tilt.lam
    if lam.shape != (model.dim,):
        raise InvalidTilt(f"tilt has shape {lam.shape}, model dimension is {model.dim}")
    if not bool(model.in_domain(lam)):
        raise InvalidTilt(f"tilt {lam.tolist()} lies outside the MGF domain")
    gap = float(model.psi(lam)) - 1.0
    if abs(gap) > PSI_TOL:
        raise InvalidTilt(f"psi(lam) - 1 = {gap:.3e}; the likelihood ratio would be biased")
    drift = model.cgf_grad(lam)
    if not np.all(drift > 0):
        raise InvalidTilt(f"tilted mean {drift.tolist()} is not in the open orthant")
    return tilt


def _vertex(target) -> np.ndarray:
    g = target.g if isinstance(target, (OrthantTarget, HalfSpaceGeom)) else np.asarray(target, dtype=float)
    g = np.asarray(g, dtype=float)
    if np.any(g <= 0):
        raise ConfigError("target vertex g must have strictly positive components")
    return g


def _check_grid(s_grid) -> np.ndarray:
    s = np.asarray(s_grid, dtype=float).ravel()
    if s.size == 0 or np.any(s < 0) or np.any(np.diff(s) < 0):
        raise ConfigError("s grid must be non-empty, non-negative and sorted ascending")
    return s


def is_hitting_prob(model: JumpModel, target, tilt: TiltSpec, s_grid, n_traj: int, max_steps: int = 350,
                    seed: int = 0, threads: Optional[int] = None, block: int = 1024) -> list:
    """Importance-sampling estimates over an ascending ``s`` grid.

    Trajectory ``j`` draws from its own stream ``(seed, j)``; work is split
    into fixed blocks whose sums are reduced in block order, so the output
    does not depend on ``threads``.  Trajectories that miss a grid value
    within ``max_steps`` contribute zero to it.
    """
    g = _vertex(target)
    s = _check_grid(s_grid)
    validate_tilt(model, tilt)
    if n_traj < 1 or max_steps < 0:
        raise ConfigError("n_traj must be positive and max_steps non-negative")
    lam = tilt.lam
    lam_g = float(lam @ g)
    bound_slack = 1e-9
    n_blocks = -(-n_traj // block)

    def run(b):
        first = b * block
        n = min(block, n_traj - first)
        tot = np.zeros(s.size)
        tot_sq = np.zeros(s.size)
        hits = np.zeros(s.size, dtype=np.int64)
        for j in range(first, first + n):
            rng = block_rng(seed, j, _IS_TAG)
            steps = model.sample_tilted(lam, rng, max_steps).reshape(max_steps, model.dim)
            path = np.vstack([np.zeros((1, model.dim)), np.cumsum(steps, axis=0)])
            reach = np.maximum.accumulate(np.min(path / g, axis=1))
            n_hit_at = np.searchsorted(reach, s, side="left")
            hit = n_hit_at < path.shape[0]
            idx = n_hit_at[hit]
            w = np.exp(-(path[idx] @ lam))
            if lam_g > 0 and np.any(w > np.exp(-s[hit] * lam_g) * (1.0 + bound_slack) + 1e-300):
                raise AssertionError("recorded weight exceeds exp(-s <lam, g>)")
            tot[hit] += w
            tot_sq[hit] += w * w
            hits[hit] += 1
        return tot, tot_sq, hits

    parts = map_blocks(run, n_blocks, threads)
    tot = np.zeros(s.size)
    tot_sq = np.zeros(s.size)
    hits = np.zeros(s.size, dtype=np.int64)
    for a, b2, h in parts:
        tot += a
        tot_sq += b2
        hits += h
    runs = [McRun.from_sums(si, tot[k], tot_sq[k], n_traj, hits[k], seed) for k, si in enumerate(s)]
    frac = hits / n_traj
    if np.any(frac < 0.999):
        k = int(np.argmin(frac))
        warnings.warn(f"only {frac[k]:.2%} of trajectories hit s={s[k]:g} within {max_steps} steps",
                      BudgetWarning, stacklevel=2)
    return runs


def naive_hitting_prob(model: JumpModel, target, s: float, n_traj: int, horizon: int = 1000, seed: int = 0,
                       threads: Optional[int] = None, drop_tol: float = 1e-12, block: int = 4096) -> McRun:
    """Fraction of untilted trajectories that enter ``sG`` within ``horizon`` steps.

    A path stops early once a Lundberg bound puts its remaining chance of
    entry below ``drop_tol``.  Streams are per block of ``block`` paths.
    """
    g = _vertex(target)
    if s < 0:
        raise ConfigError("s must be non-negative")
    if s == 0:
        return McRun(0.0, 1.0, 0.0, 1.0, 1.0, int(n_traj), int(n_traj), int(seed))
    level = s * g
    nus = _coordinate_exponents(model)
    n_blocks = -(-n_traj // block)

    def run(b):
        rng = block_rng(seed, b, _NAIVE_TAG)
        n = min(block, n_traj - b * block)
        hit = np.zeros(n, dtype=bool)
        active = np.arange(n)
        current = np.zeros((n, model.dim))
        steps = 0
        while active.size and steps < horizon:
            c = min(64, horizon - steps)
            pos = current[active, None, :] + np.cumsum(model.sample(rng, (active.size, c)), axis=1)
            entered = np.any(np.all(pos >= level, axis=-1), axis=1)
            hit[active[entered]] = True
            current[active] = pos[:, -1, :]
            steps += c
            active = active[~entered & ~_hopeless(pos[:, -1, :], -level, nus, drop_tol)]
        return int(hit.sum())

    n_hit = sum(map_blocks(run, n_blocks, threads))
    return McRun.from_sums(s, float(n_hit), float(n_hit), n_traj, n_hit, seed)


def default_tilt(geom: HalfSpaceGeom) -> TiltSpec:
    """The dual optimiser ``N(r_G)``: it maximises ``<lam, g>`` on ``psi = 1``."""
    geom.report.require_c3()
    return validate_tilt(geom.rates.model, TiltSpec(geom.N.copy(), "dual_optimal"))


@dataclass
class RuinSettings:
    n_traj: int = 50_000
    max_steps: int = 350
    seed: int = 0
    s: float = 1.0
    tilt: Optional[TiltSpec] = None
    threads: Optional[int] = None


def simulate_ruin(sa_model: SparreAndersenModel, u, settings: Optional[RuinSettings] = None) -> McRun:
    """Simultaneous-ruin probability with initial reserves ``u``.

    Ruin of every line happens at a claim epoch, so it is the event that the
    embedded walk enters ``u + cl(Q+)``; the target vertex is ``u / s``.
    """
    settings = settings or RuinSettings()
    u = np.asarray(u, dtype=float)
    if u.shape != (sa_model.dim,):
        raise ConfigError(f"reserve vector has shape {u.shape}, model dimension is {sa_model.dim}")
    if np.all(u == 0):
        n = settings.n_traj
        return McRun(0.0, 1.0, 0.0, 1.0, 1.0, n, n, settings.seed)
    if np.any(u <= 0):
        raise ConfigError("reserves must be all zero or all strictly positive")
    g = u / settings.s
    tilt = settings.tilt
    if tilt is None:
        tilt = default_tilt(half_space_geometry(OrthantTarget(g, RateEvaluator(sa_model))))
    (run,) = is_hitting_prob(sa_model, g, tilt, [settings.s], settings.n_traj, settings.max_steps,
                             settings.seed, settings.threads)
    return run
