"""Exact asymptotics ``P(eta(sG) < inf) ~ A s^{-(d-1)/2} exp(-s D(G))``.

The constant ``A`` is assembled from Laplace-method quantities along the
most probable time and from the integral

    E = int_{<v, N> >= 0} exp(-<N, v>) p(v) q(v) dv,

where ``p(z)`` is the probability that the walk started at ``z`` ever enters
the orthant and ``q(z)`` the probability that the walk tilted by ``N`` keeps
its ``N``-projection at or above ``<N, z>`` forever.  Both are Monte Carlo
estimates, so the direct ``A`` is a best-effort figure; fitting simulation
output is the primary route.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import DegenerateFit, NonPositiveCurvature, TruncationBudgetExceeded
from .geometry import HalfSpaceGeom, half_space_mpp
from .jump_models import JumpModel
from .parallel import block_rng, map_blocks

__all__ = [
    "LaplaceQuantities",
    "ProbEstimate",
    "EIntegralSettings",
    "EIntegralEstimate",
    "AsymptoticModel",
    "FitResult",
    "halfspace_D_u",
    "sigma2_D",
    "a_coeff",
    "laplace_quantities",
    "lundberg_exponent",
    "estimate_p",
    "estimate_q",
    "q_horizon",
    "estimate_E_integral",
    "constant_A",
    "predict",
    "fit_asymptote",
    "ratio_table",
]

_P_TAG, _Q_TAG = 101, 102


# ---------------------------------------------------------------------------
# Laplace-method quantities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LaplaceQuantities:
    sigma2_D: float
    a_uG: float
    sigma_star_D: float
    sigma_alpha: float


def halfspace_D_u(geom: HalfSpaceGeom, u: float) -> float:
    """``u * Lambda(beta(1/u))``: the time-scaled rate of the tangent half-space."""
    beta = half_space_mpp(geom, u)
    return u * geom.rates.rate_Lambda(beta)


def _second_difference(geom: HalfSpaceGeom, h: float) -> float:
    u0 = geom.report.u_G
    f = [halfspace_D_u(geom, u0 + k * h) for k in (-1, 0, 1)]
    return (f[0] - 2.0 * f[1] + f[2]) / h**2


def sigma2_D(geom: HalfSpaceGeom, rel_step: float = 1e-3) -> float:
    """Curvature of ``u -> u Lambda(beta(1/u))`` at the most probable time."""
    h = rel_step * geom.report.u_G
    val = _second_difference(geom, h / 2.0)
    if not val > 0:
        raise NonPositiveCurvature(f"second difference {val:.3e} at u_G={geom.report.u_G}")
    return val


def a_coeff(geom: HalfSpaceGeom, kappa=None) -> float:
    kappa = geom.kappa if kappa is None else np.asarray(kappa, dtype=float)
    A = geom.rates.rate_hess(geom.report.alpha_star)
    return float(kappa @ A @ kappa)


def laplace_quantities(geom: HalfSpaceGeom) -> LaplaceQuantities:
    s2 = sigma2_D(geom)
    a = a_coeff(geom)
    sigma_alpha = math.sqrt(geom.rates.sigma2(geom.report.alpha_star))
    return LaplaceQuantities(
        sigma2_D=s2,
        a_uG=a,
        sigma_star_D=math.sqrt(s2 + a / geom.report.u_G),
        sigma_alpha=sigma_alpha,
    )


# ---------------------------------------------------------------------------
# p and q
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbEstimate:
    value: float
    se: float
    n: int


def lundberg_exponent(model: JumpModel, w) -> Optional[float]:
    """``sup{nu : E exp(nu <xi, w>) <= 1}`` when ``<E xi, w> < 0``, else ``None``.

    Then ``P(sup_n <S(n), w> >= x) <= exp(-nu x)`` for every ``x >= 0``.
    """
    w = np.asarray(w, dtype=float)
    if not float(model.mean @ w) < 0:
        return None

    def k(nu):
        return float(model.cgf(nu * w))

    hi = 1.0
    for _ in range(200):
        val = k(hi)
        if not np.isfinite(val):
            # the domain ends before K crosses zero; bisect for its edge
            lo_ok = 0.0
            for _ in range(100):
                mid = 0.5 * (lo_ok + hi)
                if np.isfinite(k(mid)) and k(mid) <= 0:
                    lo_ok = mid
                else:
                    hi = mid
            return lo_ok if lo_ok > 0 else None
        if val > 0:
            lo = hi / 2.0
            while k(lo) > 0:
                lo /= 2.0
            return optimize.brentq(k, lo, hi, xtol=1e-14, rtol=1e-12)
        hi *= 2.0
    return None


def _coordinate_exponents(model: JumpModel) -> np.ndarray:
    nus = []
    for i in range(model.dim):
        e = np.zeros(model.dim)
        e[i] = 1.0
        nu = lundberg_exponent(model, e)
        nus.append(np.nan if nu is None else nu)
    return np.array(nus)


def _hopeless(pos, zmax, nus, drop_tol):
    """True where no node can still reach the orthant with probability > drop_tol."""
    log_tol = math.log(drop_tol)
    x = pos + zmax
    with np.errstate(invalid="ignore"):
        logb = np.where(np.isfinite(nus) & (x < 0), nus * x, 0.0)
    return np.min(logb, axis=-1) < log_tol


def _untilted_paths(model, rng, n_paths, horizon, zmax, nus, drop_tol, chunk=64):
    """Untilted walk paths from the origin, run until hopeless for every node.

    Returns one ``(n_i, d)`` array of positions ``S(1..n_i)`` per path.
    """
    d = model.dim
    pieces = [[] for _ in range(n_paths)]
    active = np.arange(n_paths)
    current = np.zeros((n_paths, d))
    steps = 0
    while active.size and steps < horizon:
        c = min(chunk, horizon - steps)
        inc = model.sample(rng, (active.size, c))
        pos = current[active, None, :] + np.cumsum(inc, axis=1)
        for row, j in enumerate(active):
            pieces[j].append(pos[row])
        current[active] = pos[:, -1, :]
        steps += c
        active = active[~_hopeless(pos[:, -1, :], zmax, nus, drop_tol)]
    return [np.concatenate(p, axis=0) for p in pieces]


def estimate_p(model: JumpModel, z, n_samples: int = 100_000, horizon: int = 10_000, seed: int = 0,
               drop_tol: float = 1e-12, threads: Optional[int] = None, block: int = 4096) -> ProbEstimate:
    """Probability that the walk started at ``z`` ever enters ``cl(Q+)``.

    Paths are cut at ``horizon`` steps, or earlier once a Lundberg bound puts
    the remaining entry probability below ``drop_tol``; both truncations bias
    the estimate downwards.
    """
    z = np.asarray(z, dtype=float)
    if np.all(z >= 0):
        return ProbEstimate(1.0, 0.0, 0)
    nus = _coordinate_exponents(model)
    n_blocks = -(-n_samples // block)

    def run(b):
        rng = block_rng(seed, b, _P_TAG)
        n = min(block, n_samples - b * block)
        hit = np.zeros(n, dtype=bool)
        active = np.arange(n)
        current = np.zeros((n, model.dim))
        steps = 0
        while active.size and steps < horizon:
            c = min(64, horizon - steps)
            pos = current[active, None, :] + np.cumsum(model.sample(rng, (active.size, c)), axis=1)
            entered = np.any(np.all(pos + z >= 0, axis=-1), axis=1)
            hit[active[entered]] = True
            current[active] = pos[:, -1, :]
            steps += c
            keep = ~entered & ~_hopeless(pos[:, -1, :], z, nus, drop_tol)
            active = active[keep]
        return int(hit.sum())

    hits = sum(map_blocks(run, n_blocks, threads))
    p = hits / n_samples
    return ProbEstimate(p, math.sqrt(max(p * (1 - p), 0.0) / max(n_samples - 1, 1)), n_samples)


def q_horizon(drift: float, sd: float, threshold: float, cap: int = 100_000) -> int:
    """Smallest ``n`` with ``drift * n >= threshold + 6 sd sqrt(n)``."""
    if not drift > 0:
        raise ValueError("tilted projection must drift upwards")
    # quadratic in sqrt(n)
    b, c = 6.0 * sd, max(threshold, 0.0)
    root = (b + math.sqrt(b * b + 4.0 * drift * c)) / (2.0 * drift)
    return int(min(max(math.ceil(root * root), 1), cap))


def _projection_minima(model, N, n_samples, horizon, seed, threads, block=4096):
    n_blocks = -(-n_samples // block)

    def run(b):
        rng = block_rng(seed, b, _Q_TAG)
        n = min(block, n_samples - b * block)
        proj = model.sample_tilted(N, rng, (n, horizon)) @ N
        return np.min(np.cumsum(proj, axis=1), axis=1)

    return np.concatenate(map_blocks(run, n_blocks, threads))


def estimate_q(geom: HalfSpaceGeom, z, n_samples: int = 100_000, horizon: Optional[int] = None,
               seed: int = 0, threads: Optional[int] = None) -> ProbEstimate:
    """``P(inf_{n>=1} <N, S(n)> >= <N, z>)`` for the walk tilted by ``N``."""
    model, N = geom.rates.model, geom.N
    threshold = float(N @ np.asarray(z, dtype=float))
    drift = float(N @ geom.report.alpha_star)
    sd = math.sqrt(float(N @ model.cgf_hess(N) @ N))
    if horizon is None:
        horizon = q_horizon(drift, sd, threshold)
    minima = _projection_minima(model, N, n_samples, horizon, seed, threads)
    q = float(np.mean(minima >= threshold))
    return ProbEstimate(q, math.sqrt(max(q * (1 - q), 0.0) / max(n_samples - 1, 1)), n_samples)


# ---------------------------------------------------------------------------
# the E integral
# ---------------------------------------------------------------------------


@dataclass
class EIntegralSettings:
    p_paths: int = 20_000
    q_paths: int = 100_000
    p_horizon: int = 10_000
    drop_tol: float = 1e-12
    tail_tol: float = 1e-4
    order: int = 8
    t_panels: int = 8
    y_panels: int = 12
    T: Optional[float] = None
    Y: Optional[float] = None
    max_T: float = 1e3
    seed: int = 0
    threads: Optional[int] = None
    unit_functions: bool = False


@dataclass(frozen=True)
class EIntegralEstimate:
    value: float
    se: float
    T: float
    Y: float
    tail_bound: float
    n_nodes: int
    settings: dict = field(default_factory=dict)


def _gl_panels(a: float, b: float, panels: int, order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    if b <= a:
        return np.empty(0), np.empty(0)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _inside_interval(J_row, zeta, y):
    """t-range where ``t J + y zeta`` lies in the closed orthant (d = 2)."""
    lo, hi = -np.inf, np.inf
    for j, zt in zip(J_row, zeta):
        if j > 0:
            lo = max(lo, -zt * y / j)
        elif j < 0:
            hi = min(hi, -zt * y / j)
        elif zt * y < 0:
            return 0.0, 0.0
    return lo, hi


def _p_envelope(z, nus):
    with np.errstate(invalid="ignore"):
        logb = np.where(np.isfinite(nus) & (z < 0), nus * z, 0.0)
    return np.exp(np.min(logb, axis=-1))


def _log_env_line(t, y, J_row, zeta, nus):
    z = t * J_row + y * zeta
    with np.errstate(invalid="ignore"):
        terms = np.where(np.isfinite(nus), nus * np.minimum(z, 0.0), 0.0)
    return float(np.min(terms))


def _t_integral(y, a, b, J_row, zeta, nus):
    """Exact integral of the p-envelope over ``t in (a, b)``.

    Along a line the log-envelope is concave and piecewise linear, so the
    integral is a finite sum of exponentials.
    """
    if b <= a:
        return 0.0
    knots = []
    for i, (j, zt) in enumerate(zip(J_row, zeta)):
        if j != 0:
            knots.append(-zt * y / j)
        for k in range(i + 1, len(J_row)):
            if np.isfinite(nus[i]) and np.isfinite(nus[k]):
                den = nus[i] * J_row[i] - nus[k] * J_row[k]
                if den != 0:
                    knots.append((nus[k] * zeta[k] - nus[i] * zeta[i]) * y / den)
    knots = sorted(set(k for k in knots if a < k < b))
    edges = [a] + knots + [b]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if not hi > lo:
            continue
        # linear piece: recover intercept and slope from two interior points
        if np.isinf(lo) and np.isinf(hi):
            return math.inf
        if np.isinf(lo):
            p0, p1 = hi - 2.0, hi - 1.0
        elif np.isinf(hi):
            p0, p1 = lo + 1.0, lo + 2.0
        else:
            p0, p1 = lo + (hi - lo) / 3.0, lo + 2.0 * (hi - lo) / 3.0
        f0 = _log_env_line(p0, y, J_row, zeta, nus)
        f1 = _log_env_line(p1, y, J_row, zeta, nus)
        slope = (f1 - f0) / (p1 - p0)
        if (np.isinf(lo) and slope <= 0) or (np.isinf(hi) and slope >= 0):
            return math.inf
        anchor = hi if np.isinf(lo) else lo
        f_anchor = f0 + slope * (anchor - p0)
        if np.isinf(lo) or np.isinf(hi):
            total += math.exp(f_anchor) / abs(slope)
        elif abs(slope) * (hi - lo) < 1e-12:
            total += math.exp(f_anchor) * (hi - lo)
        else:
            total += math.exp(f_anchor) * math.expm1(slope * (hi - lo)) / slope
    return total


def _tail_bound_2d(geom, nus, T, Y):
    """Upper bound on the integral outside ``[-T, T] x [0, Y]`` (with q <= 1)."""
    nN = float(np.linalg.norm(geom.N))
    J_row, zeta = geom.J[0], geom.zeta

    def side(y):
        return math.exp(-nN * y) * (_t_integral(y, -math.inf, -T, J_row, zeta, nus)
                                    + _t_integral(y, T, math.inf, J_row, zeta, nus))

    def top(y):
        return math.exp(-nN * y) * _t_integral(y, -T, T, J_row, zeta, nus)

    # the inside interval leaves [-T, T] near y ~ T; split there for quad
    kinks = sorted({abs(T * j / z) for j, z in zip(J_row, zeta) if z != 0})
    side_val = 0.0
    edges = [0.0] + kinks + [math.inf]
    for lo, hi in zip(edges[:-1], edges[1:]):
        side_val += integrate.quad(side, lo, hi, limit=200)[0]
    top_val = integrate.quad(top, Y, math.inf, limit=200)[0]
    return side_val + top_val


def _choose_Y(nN, tail_tol, T):
    # exp(-nN Y) (2T + 2Y/slope) / nN stays far below tail_tol; refined by the bound
    return max(1.0, (math.log(max(2.0 * T, 1.0) / (nN * tail_tol)) + 5.0) / nN)


def _select_box(geom, nus, settings):
    nN = float(np.linalg.norm(geom.N))
    if settings.T is not None:
        T = float(settings.T)
        Y = settings.Y if settings.Y is not None else _choose_Y(nN, settings.tail_tol * 1e-4, T)
        bound = 0.0 if settings.unit_functions else _tail_bound_2d(geom, nus, T, Y)
        return T, Y, bound
    T = 4.0
    while T <= settings.max_T:
        Y = settings.Y if settings.Y is not None else _choose_Y(nN, settings.tail_tol, T)
        bound = _tail_bound_2d(geom, nus, T, Y)
        if bound <= settings.tail_tol:
            return T, Y, bound
        T *= 1.5
    raise TruncationBudgetExceeded(f"tail bound above {settings.tail_tol} for T up to {settings.max_T}")


def _nodes_2d(geom, T, Y, settings):
    """Quadrature nodes split at the orthant boundary, where p jumps to 1."""
    J_row, zeta = geom.J[0], geom.zeta
    ys, wy = _gl_panels(0.0, Y, settings.y_panels, settings.order)
    rows = []
    for y, w in zip(ys, wy):
        lo, hi = _inside_interval(J_row, zeta, y)
        lo, hi = float(np.clip(lo, -T, T)), float(np.clip(hi, -T, T))
        for a, b, inside in ((-T, lo, False), (lo, hi, True), (hi, T, False)):
            t, wt = _gl_panels(a, b, settings.t_panels, settings.order)
            for ti, wti in zip(t, wt):
                rows.append((ti, y, w * wti, inside))
    arr = np.array([r[:3] for r in rows])
    inside = np.array([r[3] for r in rows], dtype=bool)
    z = arr[:, :1] * J_row[None, :] + arr[:, 1:2] * zeta[None, :]
    return z, arr[:, 1], arr[:, 2], inside


def _nodes_nd(geom, T, Y, settings):
    d = geom.rates.model.dim
    ys, wy = _gl_panels(0.0, Y, settings.y_panels, settings.order)
    t1, w1 = _gl_panels(-T, T, settings.t_panels, settings.order)
    grids = np.meshgrid(*([t1] * (d - 1)), indexing="ij")
    wgrids = np.meshgrid(*([w1] * (d - 1)), indexing="ij")
    tt = np.stack([g.ravel() for g in grids], axis=1)
    wt = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    z = (tt @ geom.J)[None, :, :] + ys[:, None, None] * geom.zeta[None, None, :]
    y = np.repeat(ys, tt.shape[0])
    w = (wy[:, None] * wt[None, :]).ravel()
    z = z.reshape(-1, d)
    inside = np.all(z >= 0, axis=1)
    return z, y, w, inside


def _path_hits_2d(path, z):
    """For each node ``z``, whether ``z + S(n)`` is in the orthant for some n."""
    pts = -path
    order = np.argsort(pts[:, 0], kind="stable")
    xs = pts[order, 0]
    ymin = np.minimum.accumulate(pts[order, 1])
    k = np.searchsorted(xs, z[:, 0], side="right")
    ok = k > 0
    out = np.zeros(z.shape[0], dtype=bool)
    out[ok] = ymin[k[ok] - 1] <= z[ok, 1]
    return out


def _path_hits_nd(path, z, chunk=256):
    out = np.zeros(z.shape[0], dtype=bool)
    for i in range(0, path.shape[0], chunk):
        seg = path[i:i + chunk]
        out |= np.any(np.all(z[:, None, :] + seg[None, :, :] >= 0, axis=-1), axis=1)
    return out


def estimate_E_integral(geom: HalfSpaceGeom, settings: Optional[EIntegralSettings] = None) -> EIntegralEstimate:
    """Tensor Gauss-Legendre quadrature over (tangential t, normal y >= 0).

    The factor ``exp(-|N| y)`` is evaluated exactly at the nodes; ``p`` is
    estimated at all nodes from one shared batch of untilted paths and ``q``
    from one shared batch of tilted paths, so each batch yields i.i.d.
    per-path contributions and the standard error follows directly.
    """
    settings = settings or EIntegralSettings()
    model = geom.rates.model
    d = model.dim
    nN = float(np.linalg.norm(geom.N))
    nus = _coordinate_exponents(model)

    if d == 2:
        T, Y, bound = _select_box(geom, nus, settings)
        z, y, w, inside = _nodes_2d(geom, T, Y, settings)
        hits_fn = _path_hits_2d
    else:
        T = settings.T if settings.T is not None else 20.0
        Y = settings.Y if settings.Y is not None else _choose_Y(nN, settings.tail_tol, T)
        bound = math.nan
        z, y, w, inside = _nodes_nd(geom, T, Y, settings)
        hits_fn = _path_hits_nd
    weight = w * np.exp(-nN * y)
    record = asdict(settings)

    if settings.unit_functions:
        value = float(weight.sum())
        return EIntegralEstimate(value, 0.0, T, Y, bound, z.shape[0], record)

    # q at every distinct y from one batch of tilted projection minima
    drift = float(geom.N @ geom.report.alpha_star)
    sd = math.sqrt(float(geom.N @ model.cgf_hess(geom.N) @ geom.N))
    horizon = q_horizon(drift, sd, nN * float(y.max()))
    minima = np.sort(_projection_minima(model, geom.N, settings.q_paths, horizon, settings.seed, settings.threads))
    # q(y) = P(min >= nN y)
    q_hat = 1.0 - np.searchsorted(minima, nN * y, side="left") / minima.size

    out_idx = np.flatnonzero(~inside)
    z_out = z[out_idx]
    zmax = z_out.max(axis=0) if out_idx.size else np.zeros(d)
    block = 512
    n_blocks = -(-settings.p_paths // block)
    coef_out = weight[out_idx] * q_hat[out_idx]

    def run(b):
        rng = block_rng(settings.seed, b, _P_TAG)
        n = min(block, settings.p_paths - b * block)
        paths = _untilted_paths(model, rng, n, settings.p_horizon, zmax, nus, settings.drop_tol)
        counts = np.zeros(out_idx.size)
        contrib = np.empty(n)
        for i, path in enumerate(paths):
            h = hits_fn(path, z_out)
            counts += h
            contrib[i] = coef_out @ h
        return counts, contrib

    parts = map_blocks(run, n_blocks, settings.threads)
    counts = sum(p[0] for p in parts)
    contrib = np.concatenate([p[1] for p in parts])
    p_hat = np.ones(z.shape[0])
    p_hat[out_idx] = counts / settings.p_paths

    value = float(np.sum(weight * q_hat * p_hat))
    inside_part = float(np.sum((weight * q_hat)[inside]))
    var_p = float(np.var(contrib + inside_part, ddof=1)) / settings.p_paths
    # per-q-path contributions: sum_k w_k p_k 1{min_i >= nN y_k}, grouped by distinct y
    wp = weight * p_hat
    y_levels, inv = np.unique(y, return_inverse=True)
    wp_by_y = np.bincount(inv, weights=wp)
    thresholds = nN * y_levels
    # contribution of a path with minimum m is the sum of wp_by_y over thresholds <= m
    cum = np.cumsum(wp_by_y)
    idx = np.searchsorted(thresholds, minima, side="right")
    q_contrib = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
    var_q = float(np.var(q_contrib, ddof=1)) / minima.size
    return EIntegralEstimate(value, math.sqrt(var_p + var_q), T, Y, bound, z.shape[0], record)


def constant_A(geom: HalfSpaceGeom, laplace: LaplaceQuantities, e_value) -> float:
    e = e_value.value if isinstance(e_value, EIntegralEstimate) else float(e_value)
    d = geom.rates.model.dim
    u_G = geom.report.u_G
    return _assemble_A(e, d, u_G, laplace.sigma_star_D, laplace.sigma_alpha)


def _assemble_A(e, d, u_G, sigma_star_D, sigma_alpha):
    return e / ((2.0 * math.pi) ** ((d - 1) / 2.0) * u_G ** (d / 2.0) * sigma_star_D * sigma_alpha)


# ---------------------------------------------------------------------------
# prediction and fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AsymptoticModel:
    D_G: float
    A: float
    provenance: str
    d: int

    def predict(self, s):
        s = np.asarray(s, dtype=float)
        out = self.A * s ** (-(self.d - 1) / 2.0) * np.exp(-s * self.D_G)
        return float(out) if out.ndim == 0 else out


def predict(model: AsymptoticModel, s):
    return model.predict(s)


@dataclass(frozen=True)
class FitResult:
    A_fit: float
    D_fit: float
    residuals: np.ndarray
    cov: np.ndarray
    s: np.ndarray

    @property
    def D_se(self) -> float:
        return math.sqrt(self.cov[1, 1])

    @property
    def logA_se(self) -> float:
        return math.sqrt(self.cov[0, 0])

    def A_interval(self, z: float = 1.959963984540054):
        return (self.A_fit * math.exp(-z * self.logA_se), self.A_fit * math.exp(z * self.logA_se))

    def D_interval(self, z: float = 1.959963984540054):
        return (self.D_fit - z * self.D_se, self.D_fit + z * self.D_se)

    def model(self, d: int) -> AsymptoticModel:
        return AsymptoticModel(self.D_fit, self.A_fit, "fitted", d)


def fit_asymptote(runs: Sequence, d: int, min_points: int = 10, fixed_D: Optional[float] = None) -> FitResult:
    """Weighted least squares of ``ln P + (d-1)/2 ln s = ln A - D s``.

    Weights are ``(P / se)**2``, the inverse delta-method variance of
    ``ln P``.  When no run carries a standard error, weights are uniform.
    With ``fixed_D`` only ``ln A`` is fitted.
    """
    s = np.array([r.s for r in runs], dtype=float)
    est = np.array([r.estimate for r in runs], dtype=float)
    se = np.array([r.std_error for r in runs], dtype=float)
    noisy = bool(np.any(se > 0))
    keep = (est > 0) & (s > 0) & ((se > 0) if noisy else True)
    if keep.sum() < min_points:
        raise DegenerateFit(f"need {min_points} points with positive estimates, have {int(keep.sum())}")
    s, est, se = s[keep], est[keep], se[keep]
    y = np.log(est) + 0.5 * (d - 1) * np.log(s)
    w = (est / se) ** 2 if noisy else np.ones_like(s)
    if fixed_D is not None:
        y = y + fixed_D * s
        b = float(np.sum(w * y) / np.sum(w))
        resid = y - b
        var_b = 1.0 / float(np.sum(w))
        if not noisy:
            var_b = float(resid @ resid) / max(len(s) - 1, 1) / len(s)
        cov = np.array([[var_b, 0.0], [0.0, 0.0]])
        return FitResult(A_fit=math.exp(b), D_fit=float(fixed_D), residuals=resid, cov=cov, s=s)
    X = np.column_stack([np.ones_like(s), -s])
    sw = np.sqrt(w)
    Xw = X * sw[:, None]
    if np.linalg.matrix_rank(Xw) < 2:
        raise DegenerateFit("design matrix is rank deficient")
    coef, *_ = np.linalg.lstsq(Xw, y * sw, rcond=None)
    resid = y - X @ coef
    cov = np.linalg.inv(Xw.T @ Xw)
    if not noisy:
        dof = max(len(s) - 2, 1)
        cov = cov * float(resid @ resid) / dof
    return FitResult(A_fit=float(math.exp(coef[0])), D_fit=float(coef[1]), residuals=resid, cov=cov, s=s)


def ratio_table(model: AsymptoticModel, runs: Sequence) -> list:
    """Predicted-to-measured ratio per grid point, with the CI mapped through."""
    rows = []
    for r in runs:
        pred = model.predict(r.s)
        ratio = pred / r.estimate if r.estimate > 0 else math.inf
        lo = pred / r.ci_high if r.ci_high > 0 else math.inf
        hi = pred / r.ci_low if r.ci_low > 0 else math.inf
        rows.append({
            "s": r.s,
            "predicted": pred,
            "estimate": r.estimate,
            "ci_low": r.ci_low,
            "ci_high": r.ci_high,
            "ratio": ratio,
            "ratio_low": lo,
            "ratio_high": hi,
            "inside_ci": bool(r.ci_low <= pred <= r.ci_high),
        })
    return rows
