"""First and second deviation rate functions.

``Lambda(alpha) = sup_lam <alpha, lam> - K(lam)`` is evaluated through its
maximiser ``lam(alpha)``, the root of ``grad K(lam) = alpha``.  The second
rate function ``D(v) = inf_t Lambda(t v) / t`` is computed both from that
infimum and from the dual ``sup{<lam, v> : K(lam) <= 0}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DualSolveFailed, NoInteriorMinimum, NotInCramerRange, SingularHessian
from .jump_models import JumpModel

__all__ = ["RateEvaluator", "SecondRateResult"]


@dataclass(frozen=True)
class SecondRateResult:
    D: float
    t: float
    u: float
    lambda_opt: Optional[np.ndarray] = None


class RateEvaluator:
    """Rate-function evaluator for one jump model.

    With ``cache=True`` the last Newton solution warm-starts the next solve,
    which makes an instance unsafe to share between threads.  Results do not
    depend on the cache beyond round-off.
    """

    def __init__(self, model: JumpModel, tol: float = 1e-10, max_iter: int = 100, cache: bool = True):
        self.model = model
        self.tol = tol
        self.max_iter = max_iter
        self.cache = cache
        self._last: Optional[np.ndarray] = None

    # -- first rate function -------------------------------------------------

    def lambda_of_alpha(self, alpha, start=None) -> np.ndarray:
        """Solve ``grad K(lam) = alpha`` by damped Newton."""
        model = self.model
        alpha = np.asarray(alpha, dtype=float)
        tol = self.tol * (1.0 + np.linalg.norm(alpha))

        candidates = []
        if start is not None:
            candidates.append(np.asarray(start, dtype=float))
        if self.cache and self._last is not None:
            candidates.append(self._last)
        candidates.append(model.interior_point)
        lam = next(c for c in candidates if bool(model.in_domain(c)))

        res = model.cgf_grad(lam) - alpha
        merit = float(res @ res)
        for _ in range(self.max_iter):
            if math.sqrt(merit) <= tol:
                # one more step drives the residual to round-off level
                lam = self._polish(lam, alpha)
                if self.cache:
                    self._last = lam
                return lam
            try:
                step = np.linalg.solve(model.cgf_hess(lam), res)
            except np.linalg.LinAlgError as exc:
                raise NotInCramerRange(f"singular Hessian while solving for {alpha.tolist()}") from exc
            damp = 1.0
            while damp > 1e-12:
                trial = lam - damp * step
                if bool(model.in_domain(trial)):
                    r_trial = model.cgf_grad(trial) - alpha
                    m_trial = float(r_trial @ r_trial)
                    if np.isfinite(m_trial) and m_trial < (1.0 - 1e-4 * damp) * merit:
                        break
                damp *= 0.5
            else:
                raise NotInCramerRange(f"line search stalled for alpha={alpha.tolist()}")
            lam, res, merit = trial, r_trial, m_trial
        raise NotInCramerRange(f"Newton did not converge for alpha={alpha.tolist()}")

    def _polish(self, lam, alpha):
        try:
            trial = lam - np.linalg.solve(self.model.cgf_hess(lam), self.model.cgf_grad(lam) - alpha)
        except np.linalg.LinAlgError:
            return lam
        if bool(self.model.in_domain(trial)):
            r0 = np.linalg.norm(self.model.cgf_grad(lam) - alpha)
            r1 = np.linalg.norm(self.model.cgf_grad(trial) - alpha)
            if r1 <= r0:
                return trial
        return lam

    def rate_Lambda(self, alpha) -> float:
        alpha = np.asarray(alpha, dtype=float)
        lam = self.lambda_of_alpha(alpha)
        return max(float(alpha @ lam - self.model.cgf(lam)), 0.0)

    def rate_hess(self, alpha) -> np.ndarray:
        cov = self.model.cgf_hess(self.lambda_of_alpha(alpha))
        try:
            return np.linalg.inv(cov)
        except np.linalg.LinAlgError as exc:
            raise SingularHessian(str(exc)) from exc

    def sigma2(self, alpha) -> float:
        """Determinant of the covariance of the Cramér transform with mean ``alpha``."""
        det = float(np.linalg.det(self.model.cgf_hess(self.lambda_of_alpha(alpha))))
        if not det > 0:
            raise SingularHessian(f"covariance determinant {det}")
        return det

    def D_u(self, v, u: float) -> float:
        """``u * Lambda(v / u)``."""
        if not u > 0:
            raise NotInCramerRange("u must be positive")
        return u * self.rate_Lambda(np.asarray(v, dtype=float) / u)

    # -- second rate function, primal route ---------------------------------

    def second_rate_D(self, v, t_tol: float = 1e-10, max_expand: int = 60) -> SecondRateResult:
        """Minimise ``phi(t) = Lambda(t v) / t`` over ``t > 0``.

        ``phi'(t) = K(lam(t v)) / t**2`` and ``K(lam(t v))`` is increasing in
        ``t``, so the minimiser is the unique root of ``h(t) = K(lam(t v))``.
        """
        v = np.asarray(v, dtype=float)
        if not np.any(v):
            raise NoInteriorMinimum("v must be nonzero")

        def h(t):
            lam = self.lambda_of_alpha(t * v)
            return float(self.model.cgf(lam)), lam

        def h_or_none(t):
            try:
                return h(t)
            except NotInCramerRange:
                return None

        lo, hi = self._bracket(h_or_none, max_expand)
        if hi[1][0] == 0.0:
            t_star, lam = hi[0], hi[1][1]
        else:
            t_star, lam = self._safeguarded_newton(v, lo, hi, t_tol)
        alpha = t_star * v
        D = float(alpha @ lam - self.model.cgf(lam)) / t_star
        return SecondRateResult(D=max(D, 0.0), t=t_star, u=1.0 / t_star, lambda_opt=None)

    @staticmethod
    def _bracket(h_or_none, max_expand):
        # h is increasing where defined; find t_lo < t_hi with h(t_lo) < 0 <= h(t_hi)
        start = None
        for k in range(max_expand):
            t = 2.0 ** ((k + 1) // 2 * (1 if k % 2 else -1))
            val = h_or_none(t)
            if val is not None:
                start = (t, val)
                break
        if start is None:
            raise NoInteriorMinimum("no point of the ray lies in the Cramer range")
        upward = start[1][0] < 0
        known, factor = start, (2.0 if upward else 0.5)
        for _ in range(max_expand):
            t = known[0] * factor
            val = h_or_none(t)
            if val is None:
                # left the Cramer range: search between the last good point and t
                bad = t
                for _ in range(max_expand):
                    t = math.sqrt(known[0] * bad)
                    val = h_or_none(t)
                    if val is None:
                        bad = t
                    elif (val[0] >= 0) == upward:
                        break
                    else:
                        known = (t, val)
                else:
                    break
            if (val[0] >= 0) == upward:
                pair = (known, (t, val)) if upward else ((t, val), known)
                return pair
            known = (t, val)
        raise NoInteriorMinimum("could not bracket the minimiser")

    def _safeguarded_newton(self, v, lo, hi, t_tol):
        (a, (_, lam_a)), (b, _) = lo, hi
        t = 0.5 * (a + b)
        lam = lam_a
        for _ in range(200):
            lam = self.lambda_of_alpha(t * v)
            val = float(self.model.cgf(lam))
            if abs(val) / t**2 <= t_tol:
                return t, lam
            if val < 0:
                a = t
            else:
                b = t
            # h'(t) = t * v H^{-1} v with H the tilted covariance
            deriv = t * float(v @ np.linalg.solve(self.model.cgf_hess(lam), v))
            t_new = t - val / deriv if deriv > 0 else 0.5 * (a + b)
            if not (a < t_new < b):
                t_new = 0.5 * (a + b)
            if b - a <= 1e-15 * b:
                return t, lam
            t = t_new
        raise NoInteriorMinimum("safeguarded Newton exhausted")

    # -- second rate function, dual route -----------------------------------

    def second_rate_D_dual(self, v, init=None, tol: float = 1e-12, max_iter: int = 100) -> SecondRateResult:
        """Maximise ``<lam, v>`` subject to ``K(lam) = 0`` by Lagrange-Newton.

        The KKT system is ``v = nu * grad K(lam)``, ``K(lam) = 0``.  Without
        ``init`` the start is the maximiser under the quadratic model of
        ``K`` at the origin, which is exact for Gaussian jumps.
        """
        model = self.model
        v = np.asarray(v, dtype=float)
        d = model.dim
        if init is not None:
            lam = np.asarray(init, dtype=float)
            nu = float(np.linalg.norm(v) / max(np.linalg.norm(model.cgf_grad(lam)), 1e-300))
        else:
            mu = model.mean
            h0 = model.cgf_hess(np.zeros(d))
            try:
                a = float(mu @ np.linalg.solve(h0, mu))
                b = float(v @ np.linalg.solve(h0, v))
            except np.linalg.LinAlgError as exc:
                raise DualSolveFailed("singular covariance at the origin") from exc
            if not b > 0:
                raise DualSolveFailed("degenerate direction")
            t0 = math.sqrt(a / b)
            lam = np.linalg.solve(h0, t0 * v - mu)
            nu = 1.0 / t0 if t0 > 0 else 1.0
            # shrink toward the origin until the start is admissible
            while not bool(model.in_domain(lam)) and np.linalg.norm(lam) > 1e-12:
                lam = 0.5 * lam

        def residual(lam, nu):
            return np.concatenate([v - nu * model.cgf_grad(lam), [model.cgf(lam)]])

        scale = 1.0 + np.linalg.norm(v)
        res = residual(lam, nu)
        merit = float(res @ res)
        for _ in range(max_iter):
            if np.linalg.norm(res[:d]) <= tol * scale and abs(res[d]) <= tol:
                break
            grad = model.cgf_grad(lam)
            jac = np.zeros((d + 1, d + 1))
            jac[:d, :d] = -nu * model.cgf_hess(lam)
            jac[:d, d] = -grad
            jac[d, :d] = grad
            try:
                step = np.linalg.solve(jac, res)
            except np.linalg.LinAlgError as exc:
                raise DualSolveFailed("singular KKT matrix") from exc
            damp = 1.0
            while damp > 1e-12:
                lam_t, nu_t = lam - damp * step[:d], nu - damp * step[d]
                if bool(model.in_domain(lam_t)):
                    r_t = residual(lam_t, nu_t)
                    m_t = float(r_t @ r_t)
                    if np.isfinite(m_t) and m_t < (1.0 - 1e-4 * damp) * merit:
                        break
                damp *= 0.5
            else:
                raise DualSolveFailed(f"line search stalled for v={v.tolist()}")
            lam, nu, res, merit = lam_t, nu_t, r_t, m_t
        else:
            raise DualSolveFailed(f"no convergence for v={v.tolist()}")
        if not nu > 0:
            raise DualSolveFailed(f"multiplier {nu} is not positive; v is not a valid direction")
        # at the optimum grad K(lam) = v / nu, i.e. t(v) = 1 / nu
        return SecondRateResult(D=float(lam @ v), t=1.0 / nu, u=nu, lambda_opt=lam)
