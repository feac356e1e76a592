"""Orthant target geometry: most probable time and point, the tangent
half-space at the vertex, and the drift vector of the half-space MPPs."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    C3Marginal,
    C3Violated,
    ConfigError,
    ConstrainedSolveFailed,
    NoLargeDeviationRegime,
    NotInCramerRange,
    SingularFrame,
)
from .rates import RateEvaluator

__all__ = [
    "C3_MARGIN",
    "OrthantTarget",
    "MppReport",
    "HalfSpaceGeom",
    "mpp_orthant",
    "tangent_frame",
    "half_space_geometry",
    "half_space_mpp",
    "kappa_vector",
]

C3_MARGIN = 1e-8


@dataclass(frozen=True)
class OrthantTarget:
    """The set ``g + cl(Q+)``."""

    g: np.ndarray
    rates: RateEvaluator

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.shape != (self.rates.model.dim,):
            raise ConfigError(f"target vertex has shape {g.shape}, model dimension is {self.rates.model.dim}")
        if np.any(g <= 0):
            raise ConfigError("target vertex g must have strictly positive components")
        object.__setattr__(self, "g", g)

    @property
    def model(self):
        return self.rates.model


@dataclass(frozen=True)
class MppReport:
    u_G: float
    r_G: float
    alpha_star: np.ndarray
    N: np.ndarray
    zeta: np.ndarray
    D_G: float
    c3: dict = field(default_factory=dict)

    @property
    def c3_ok(self) -> bool:
        return all(self.c3.values())

    def require_c3(self):
        if not self.c3_ok:
            failed = [k for k, ok in self.c3.items() if not ok]
            raise C3Violated(f"vertex condition fails: {', '.join(failed)}")
        return self

    def to_dict(self) -> dict:
        return {
            "u_G": self.u_G,
            "r_G": self.r_G,
            "alpha_star": self.alpha_star.tolist(),
            "N": self.N.tolist(),
            "zeta": self.zeta.tolist(),
            "D_G": self.D_G,
            "c3": dict(self.c3),
        }


@dataclass(frozen=True)
class HalfSpaceGeom:
    target: OrthantTarget
    report: MppReport
    J: np.ndarray
    kappa: np.ndarray

    @property
    def g(self):
        return self.target.g

    @property
    def N(self):
        return self.report.N

    @property
    def zeta(self):
        return self.report.zeta

    @property
    def rates(self):
        return self.target.rates


def mpp_orthant(target: OrthantTarget) -> MppReport:
    """Most probable time/point of the orthant and the vertex condition flags.

    Flags that hold only within ``C3_MARGIN`` count as failed and emit a
    ``C3Marginal`` warning.
    """
    model, ev = target.model, target.rates
    mean = model.mean
    if np.all(mean >= 0):
        raise NoLargeDeviationRegime(f"mean jump {mean.tolist()} lies in the closed orthant")

    res = ev.second_rate_D(target.g)
    r_G = res.t
    alpha_star = r_G * target.g
    try:
        N = ev.lambda_of_alpha(alpha_star)
        in_range = True
    except NotInCramerRange:
        N = np.full(model.dim, np.nan)
        in_range = False
    drift = float(mean @ N)
    c3 = {
        "N_in_Q_plus": bool(np.all(N > C3_MARGIN)),
        "in_cramer_range": in_range,
        "negative_drift_projection": bool(drift < -C3_MARGIN),
    }
    marginal = [abs(x) <= C3_MARGIN for x in N] + [abs(drift) <= C3_MARGIN]
    if in_range and any(marginal):
        warnings.warn(
            f"vertex condition is marginal: N={N.tolist()}, <E xi, N>={drift:.3e}",
            C3Marginal,
            stacklevel=2,
        )
    zeta = N / np.linalg.norm(N) if in_range else N
    return MppReport(u_G=res.u, r_G=r_G, alpha_star=alpha_star, N=N, zeta=zeta, D_G=res.D, c3=c3)


def tangent_frame(zeta) -> np.ndarray:
    """Orthonormal rows spanning the complement of ``zeta``.

    Gram-Schmidt over the standard basis in index order, skipping the
    vector most aligned with ``zeta``.
    """
    zeta = np.asarray(zeta, dtype=float)
    d = zeta.size
    basis = [zeta / np.linalg.norm(zeta)]
    skip = int(np.argmax(np.abs(zeta)))
    for i in range(d):
        if i == skip:
            continue
        e = np.zeros(d)
        e[i] = 1.0
        for b in basis:
            e -= (e @ b) * b
        e /= np.linalg.norm(e)
        basis.append(e)
    return np.array(basis[1:])


def _kappa_closed_form(report: MppReport, g, rates: RateEvaluator, J=None) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    zeta, r_G = report.zeta, report.r_G
    if J is None:
        J = tangent_frame(zeta)
    A = rates.rate_hess(report.alpha_star)
    jaj = J @ A @ J.T
    try:
        inner = np.linalg.solve(jaj, J)
    except np.linalg.LinAlgError as exc:
        raise SingularFrame(str(exc)) from exc
    return r_G * ((zeta @ A @ J.T @ inner - zeta) * float(g @ zeta) + g)


def half_space_geometry(target: OrthantTarget, report: MppReport | None = None) -> HalfSpaceGeom:
    if report is None:
        report = mpp_orthant(target)
    report.require_c3()
    J = tangent_frame(report.zeta)
    kappa = _kappa_closed_form(report, target.g, target.rates, J)
    return HalfSpaceGeom(target=target, report=report, J=J, kappa=kappa)


def kappa_vector(geom: HalfSpaceGeom) -> np.ndarray:
    """Linear drift of ``n * beta(s / n) - s * g`` in ``n - s / r_G``."""
    return _kappa_closed_form(geom.report, geom.g, geom.rates, geom.J)


def half_space_mpp(geom: HalfSpaceGeom, u: float, tol: float = 1e-13, max_iter: int = 100) -> np.ndarray:
    """Minimiser of Lambda over the hyperplane ``<v - g/u, N> = 0``.

    At the optimum ``lam(beta) = c N``, so ``beta = grad K(c N)`` where ``c``
    solves the scalar equation ``<grad K(c N), N> = <g, N> / u``.
    """
    model = geom.rates.model
    N = geom.N
    level = float(geom.g @ N) / u

    def f(c):
        return float(model.cgf_grad(c * N) @ N) - level

    c = 1.0
    if not bool(model.in_domain(c * N)):
        raise ConstrainedSolveFailed("normal vector outside the MGF domain")
    val = f(c)
    for _ in range(max_iter):
        if abs(val) <= tol * (1.0 + abs(level)):
            return model.cgf_grad(c * N)
        slope = float(N @ model.cgf_hess(c * N) @ N)
        if not slope > 0:
            raise ConstrainedSolveFailed("non-positive curvature along the normal")
        step = val / slope
        damp = 1.0
        while damp > 1e-12:
            trial = c - damp * step
            if bool(model.in_domain(trial * N)):
                v_trial = f(trial)
                if abs(v_trial) < abs(val):
                    break
            damp *= 0.5
        else:
            raise ConstrainedSolveFailed(f"line search stalled at u={u}")
        c, val = trial, v_trial
    raise ConstrainedSolveFailed(f"no convergence at u={u}")
