"""Large-deviation asymptotics and importance sampling for orthant hitting by random walks."""
from __future__ import annotations

from .asymptotics import (
    AsymptoticModel,
    EIntegralSettings,
    LaplaceQuantities,
    a_coeff,
    constant_A,
    estimate_E_integral,
    estimate_p,
    estimate_q,
    fit_asymptote,
    laplace_quantities,
    predict,
    sigma2_D,
)
from .errors import *  # noqa: F401,F403
from .geometry import (
    HalfSpaceGeom,
    MppReport,
    OrthantTarget,
    half_space_geometry,
    half_space_mpp,
    kappa_vector,
    mpp_orthant,
    tangent_frame,
)
from .jump_models import (
    AnalyticJumpModel,
    Degenerate,
    Exponential,
    Gamma,
    GaussianJumpModel,
    IndependentClaims,
    JumpModel,
    ProportionalClaims,
    SparreAndersenModel,
    build_sparre_andersen,
    cumulant_grad,
    cumulant_hess,
    psi,
    sample_tilted,
)
from .rates import RateEvaluator, SecondRateResult
from .simulation import McRun, TiltSpec, default_tilt, is_hitting_prob, naive_hitting_prob, simulate_ruin

__version__ = "0.1.0"
