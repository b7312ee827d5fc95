"""
Exchange current density, the anode Butler-Volmer balance and polarization sweeps.

At one external load the cell current i satisfies

    i = A_E j0 [exp(c1 eta) - exp(-c2 eta)],   eta = E0 - i (R_ext + R_int)

with c1 = alpha n F / RT and c2 = (1 - alpha) n F / RT. The residual is
strictly decreasing in i, so the root is unique on [0, E0 / (R_ext + R_int)].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

from scipy.optimize import brentq

from .core import (
    FittedRateProfile,
    GrowthState,
    ModelParameters,
    NumericalError,
    PolarizationPoint,
    ValidationError,
    annotated,
    csv_text,
)
from .growth import integrate_growth

EXP_LIMIT = 700.0

POLARIZATION_COLUMNS = ("r_ext_ohm", "i_amp", "v_volt", "j_a_per_m2", "p_w_per_m2",
                        "k_per_m2", "eta_act_volt", "x_g_per_m3")
POWER_COLUMNS = ("j_a_per_m2", "p_w_per_m2")


class SolverError(NumericalError):
    pass


def _exp(a: float) -> float:
    return math.exp(min(max(a, -EXP_LIMIT), EXP_LIMIT))


def transfer_coefficients(params: ModelParameters) -> tuple:
    """(c1, c2) [1/V] for the anodic and cathodic Butler-Volmer branches."""
    c = params.constants
    nf_rt = params.n * c.F / (c.R * c.T)
    return params.alpha * nf_rt, (1.0 - params.alpha) * nf_rt


def photon_flux_term(x: float, params: ModelParameters) -> float:
    """Normalized photon/cell activity that acts as the anode reactant concentration."""
    p = params
    return p.L0 * p.C_f * p.A_s * p.Q * p.eta_eff * x / (p.constants.N_Av * p.x_max)


def exchange_current_density(k: float, x: float, params: ModelParameters) -> float:
    """j0 = K n F (L0 C_f A_s Q eta_eff x / (N_Av x_max))**alpha  [A/m2]."""
    if k < 0 or x < 0:
        raise ValueError(f"rate constant and cell concentration must be >= 0 (k={k!r}, x={x!r})")
    return k * params.n * params.constants.F * photon_flux_term(x, params) ** params.alpha


@dataclass(frozen=True)
class OperatingProblem:
    r_ext: float
    k: float
    x: float
    params: ModelParameters

    def __post_init__(self):
        if not (math.isfinite(self.r_ext) and self.r_ext > 0):
            raise ValidationError(f"r_ext must be > 0, got {self.r_ext!r}")
        if not (math.isfinite(self.k) and self.k >= 0):
            raise ValidationError(f"rate constant must be >= 0, got {self.k!r}")
        if not (0 <= self.x <= self.params.x_max):
            raise ValidationError(f"cell concentration {self.x!r} outside [0, x_max={self.params.x_max!r}]")

    @property
    def r_total(self) -> float:
        return self.r_ext + self.params.R_int

    @property
    def current_upper(self) -> float:
        return self.params.E0 / self.r_total

    @property
    def j0(self) -> float:
        return exchange_current_density(self.k, self.x, self.params)


def bv_residual(i: float, problem: OperatingProblem, j0: float = None) -> float:
    """A_E j0 [exp(c1 eta) - exp(-c2 eta)] - i, with eta from the voltage balance."""
    p = problem.params
    if j0 is None:
        j0 = problem.j0
    c1, c2 = transfer_coefficients(p)
    eta = p.E0 - i * problem.r_total
    return p.A_E * j0 * (_exp(c1 * eta) - _exp(-c2 * eta)) - i


def _point(problem: OperatingProblem, i: float) -> PolarizationPoint:
    p = problem.params
    v = i * problem.r_ext
    return PolarizationPoint(
        r_ext=problem.r_ext,
        i=i,
        v=v,
        j=i / p.A_E,
        p=v * i / p.A_E,
        k=problem.k,
        eta_act=max(0.0, p.E0 - i * problem.r_total),
        x_at_eval=problem.x,
    )


def solve_operating_point(problem: OperatingProblem) -> PolarizationPoint:
    """Steady current, voltage and losses at one external load."""
    p = problem.params
    if p.E0 <= 0:
        raise SolverError(f"no root: E0={p.E0!r} V leaves no bracket")
    j0 = problem.j0
    if j0 == 0.0:
        return _point(problem, 0.0)
    upper = problem.current_upper
    # f(0) > 0 and f(upper) = -upper < 0 whenever j0 > 0
    i_star = brentq(bv_residual, 0.0, upper, args=(problem, j0),
                    xtol=1e-300, rtol=4 * 2.220446049250313e-16, maxiter=500)
    return _point(problem, min(max(i_star, 0.0), upper))


KSource = Union[float, FittedRateProfile, Callable[[float], float]]


def k_provider(k_source: KSource) -> Callable[[float], float]:
    """Normalize a constant, a fitted profile or a callable into r_ext -> K."""
    if isinstance(k_source, FittedRateProfile):
        from .estimation import interpolate_k
        return lambda r: interpolate_k(k_source, r)
    if callable(k_source):
        return k_source
    k = float(k_source)
    return lambda r: k


def polarization_sweep(loads: Sequence[float], k_source: KSource, params: ModelParameters,
                       dwell: float = 0.0) -> list:
    """One operating point per load, in the given order.

    Before each point the culture is advanced by ``dwell`` seconds and the
    resulting cell concentration is used for j0. ``dwell=0`` holds x at x0.
    """
    loads = list(loads)
    if not loads:
        raise ValidationError("at least one load is required")
    if not dwell >= 0:
        raise ValidationError(f"dwell must be >= 0, got {dwell!r}")
    get_k = k_provider(k_source)
    state = GrowthState(0.0, params.x0, params.N0)
    points = []
    for idx, r in enumerate(loads):
        try:
            if dwell > 0:
                state = integrate_growth(state, state.t + dwell, params).final
            problem = OperatingProblem(float(r), float(get_k(r)), state.x, params)
            points.append(solve_operating_point(problem))
        except (NumericalError, ValidationError) as exc:
            raise annotated(exc, f"load index {idx} (r_ext={r!r})") from exc
    return points


def power_curve(points: Sequence[PolarizationPoint]) -> list:
    """(current density, power density) pairs; p = v i / A_E = v j."""
    if not points:
        raise ValidationError("at least one point is required")
    return [(pt.j, pt.v * pt.j) for pt in points]


def polarization_csv(points: Sequence[PolarizationPoint]) -> str:
    return csv_text(POLARIZATION_COLUMNS,
                    ((pt.r_ext, pt.i, pt.v, pt.j, pt.p, pt.k, pt.eta_act, pt.x_at_eval)
                     for pt in points))


def power_csv(points: Sequence[PolarizationPoint]) -> str:
    return csv_text(POWER_COLUMNS, power_curve(points))
