"""
Per-load estimation of the characteristic rate constant K.

Each K only affects its own load point, so the least-squares objective

    sum_i (v_exp - v_model(K_i))**2 + (i_exp - i_model(K_i))**2,   K_i >= 0

splits into independent one-dimensional problems, solved in log K with a
golden-section search refined by parabolic steps. Test loads get K from a
log-log piecewise-linear interpolation of the fitted profile.
"""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    DatasetRecord,
    ExperimentalDataset,
    FittedRateProfile,
    GrowthState,
    ModelParameters,
    NumericalError,
    RateEntry,
    ValidationError,
    annotated,
    csv_text,
)
from .electrochem import OperatingProblem, solve_operating_point
from .growth import integrate_growth

log = logging.getLogger(__name__)

DEFAULT_K_BOUNDS = (0.0, 1e3)
K_REL_TOL = 1e-10
# lower end of the log-space search when the lower bound is zero
_LOG_SPAN = math.log(1e40)
_PLATEAU_RTOL = 1e-9

FIT_REPORT_COLUMNS = ("r_ext_ohm", "k_per_m2", "sse", "residual_v", "residual_i")


class FitBoundError(NumericalError):
    def __init__(self, message: str, k: float, sse: float):
        super().__init__(message)
        self.k = k
        self.sse = sse


class RegimeError(ValidationError):
    pass


# ======================================================================
# Scalar minimization
# ======================================================================

_GOLD = 0.5 * (3.0 - math.sqrt(5.0))


def minimize_bracketed(f, a: float, b: float, xtol: float, maxiter: int = 500):
    """Minimize ``f`` on [a, b] by golden section with parabolic acceleration.

    Terminates when the bracket shrinks below ``2 * xtol`` (absolute).
    Returns ``(x, f(x))``.
    """
    x = w = v = a + _GOLD * (b - a)
    fx = fw = fv = f(x)
    d = e = 0.0
    for _ in range(maxiter):
        m = 0.5 * (a + b)
        tol1 = xtol
        tol2 = 2.0 * tol1
        if abs(x - m) <= tol2 - 0.5 * (b - a):
            break
        parabolic = False
        if abs(e) > tol1:
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0:
                p = -p
            q = abs(q)
            if abs(p) < abs(0.5 * q * e) and q * (a - x) < p < q * (b - x):
                e, d = d, p / q
                u = x + d
                if u - a < tol2 or b - u < tol2:
                    d = tol1 if x < m else -tol1
                parabolic = True
        if not parabolic:
            e = (b - x) if x < m else (a - x)
            d = _GOLD * e
        u = x + (d if abs(d) >= tol1 else math.copysign(tol1, d))
        fu = f(u)
        if fu <= fx:
            if u < x:
                b = x
            else:
                a = x
            v, fv, w, fw, x, fx = w, fw, x, fx, u, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, fv, w, fw = w, fw, u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    return x, fx


# ======================================================================
# Per-point and dataset fits
# ======================================================================

def point_residuals(record: DatasetRecord, k: float, x: float, params: ModelParameters):
    """(v_exp - v_model, i_exp - i_model, model point) at rate constant ``k``."""
    pt = solve_operating_point(OperatingProblem(record.r_ext, k, x, params))
    return record.v_exp - pt.v, record.i_exp - pt.i, pt


def fit_point_k(record: DatasetRecord, x_at_point: float, params: ModelParameters,
                k_bounds: Sequence[float] = DEFAULT_K_BOUNDS) -> tuple:
    """Least-squares K for one v-i datum. Returns ``(k, sse)``.

    Raises :class:`FitBoundError` when the optimum sits at the upper bound.
    """
    k_lo, k_hi = map(float, k_bounds)
    if not (0 <= k_lo < k_hi and math.isfinite(k_hi)):
        raise ValidationError(f"invalid K bounds {tuple(k_bounds)!r}")
    if not record.r_ext > 0:
        raise ValidationError(f"r_ext must be > 0, got {record.r_ext!r}")

    def sse_at(k):
        dv, di, _ = point_residuals(record, k, x_at_point, params)
        return dv * dv + di * di

    u_hi = math.log(k_hi)
    u_lo = math.log(k_lo) if k_lo > 0 else u_hi - _LOG_SPAN

    # coarse scan, one node per decade, to isolate the basin before refining;
    # the objective is flat for K -> 0 and K -> inf
    n_nodes = max(3, int(math.ceil((u_hi - u_lo) / math.log(10.0))) + 1)
    grid = np.linspace(u_lo, u_hi, n_nodes)
    values = [sse_at(math.exp(u)) for u in grid]
    best = int(np.argmin(values))
    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, n_nodes - 1)]
    u, sse = minimize_bracketed(lambda s: sse_at(math.exp(s)), a, b, xtol=0.5 * K_REL_TOL)
    if values[best] < sse:
        u, sse = grid[best], values[best]
    k = math.exp(u)

    # the objective saturates towards both bounds, so compare values, not positions
    sse_hi = sse_at(k_hi)
    if sse_hi <= sse * (1 + _PLATEAU_RTOL):
        raise FitBoundError(
            f"optimum at the upper K bound {k_hi!r} for r_ext={record.r_ext!r}; "
            f"widen the bounds or check the datum (sse={sse_hi!r})", k_hi, sse_hi)
    sse_lo = sse_at(k_lo)
    if sse_lo <= sse:
        k, sse = k_lo, sse_lo
    return k, sse


@dataclass(frozen=True)
class PointResult:
    r_ext: float
    k: float
    sse: float
    residual_v: float
    residual_i: float
    v_model: float
    i_model: float
    v_exp: float
    i_exp: float
    clamped: bool = False


@dataclass(frozen=True)
class FitReport:
    profile: FittedRateProfile
    points: tuple
    train_rmse: Optional[float] = None
    test_rmse: Optional[float] = None

    def to_csv(self) -> str:
        return csv_text(FIT_REPORT_COLUMNS,
                        ((p.r_ext, p.k, p.sse, p.residual_v, p.residual_i) for p in self.points))


def rmse(points: Sequence[PointResult]) -> float:
    """Root mean square over both residual channels (denominator 2n)."""
    total = math.fsum(p.sse for p in points)
    return math.sqrt(total / (2 * len(points)))


def growth_schedule(n: int, params: ModelParameters, dwell: float) -> list:
    """Cell concentration seen by each of ``n`` consecutive points."""
    if not dwell >= 0:
        raise ValidationError(f"dwell must be >= 0, got {dwell!r}")
    state = GrowthState(0.0, params.x0, params.N0)
    xs = []
    for idx in range(n):
        if dwell > 0:
            try:
                state = integrate_growth(state, state.t + dwell, params).final
            except (NumericalError, ValidationError) as exc:
                raise annotated(exc, f"growth before record {idx}") from exc
        xs.append(state.x)
    return xs


def _result(record, k, x, params, clamped=False) -> PointResult:
    dv, di, pt = point_residuals(record, k, x, params)
    return PointResult(record.r_ext, k, dv * dv + di * di, dv, di,
                       pt.v, pt.i, record.v_exp, record.i_exp, clamped)


def fit_dataset(data: ExperimentalDataset, params: ModelParameters, dwell: float = 0.0,
                k_bounds: Sequence[float] = DEFAULT_K_BOUNDS) -> FitReport:
    """Fit K at every train record and assemble the rate profile."""
    train = data.train
    if not train:
        raise ValidationError("dataset has no train records")
    xs = growth_schedule(len(train), params, dwell)
    results = []
    for idx, (rec, x) in enumerate(zip(train, xs)):
        try:
            k, _ = fit_point_k(rec, x, params, k_bounds)
            results.append(_result(rec, k, x, params))
        except (NumericalError, ValidationError) as exc:
            raise annotated(exc, f"train record {idx} (r_ext={rec.r_ext!r})") from exc
    results.sort(key=lambda p: p.r_ext)
    profile = FittedRateProfile(tuple(RateEntry(p.r_ext, p.k, p.sse) for p in results))
    if len(profile) >= 4 and all(e.k > 0 for e in profile.entries):
        reg = segment_regimes(profile)
        profile = FittedRateProfile(profile.entries, reg.breakpoint_index,
                                    (reg.slope_low, reg.slope_high))
    return FitReport(profile, tuple(results), train_rmse=rmse(results))


# ======================================================================
# Interpolation and validation
# ======================================================================

def interpolate_k(profile: FittedRateProfile, r_ext: float) -> float:
    """K at ``r_ext`` by piecewise-linear interpolation in log-log space.

    Outside the fitted range the nearest endpoint K is used. Segments with a
    zero K endpoint are interpolated linearly in (r_ext, K).
    """
    if not r_ext > 0:
        raise ValidationError(f"r_ext must be > 0, got {r_ext!r}")
    rs, ks = profile.r_ext, profile.k
    if r_ext <= rs[0]:
        return ks[0]
    if r_ext >= rs[-1]:
        return ks[-1]
    hi = bisect.bisect_left(rs, r_ext)
    if rs[hi] == r_ext:
        return ks[hi]
    lo = hi - 1
    r0, r1, k0, k1 = rs[lo], rs[hi], ks[lo], ks[hi]
    if k0 == 0 or k1 == 0:
        return k0 + (k1 - k0) * (r_ext - r0) / (r1 - r0)
    t = (math.log(r_ext) - math.log(r0)) / (math.log(r1) - math.log(r0))
    k = math.exp(math.log(k0) + t * (math.log(k1) - math.log(k0)))
    # keep rounding from stepping outside the bracketing values
    return min(max(k, min(k0, k1)), max(k0, k1))


def validate(data: ExperimentalDataset, profile: FittedRateProfile, params: ModelParameters,
             dwell: float = 0.0) -> FitReport:
    """Predict every test record with interpolated K and score the prediction."""
    test = data.test
    if not test:
        raise ValidationError("dataset has no test records")
    lo, hi = profile.r_ext[0], profile.r_ext[-1]
    xs = growth_schedule(len(test), params, dwell)
    results = []
    for idx, (rec, x) in enumerate(zip(test, xs)):
        clamped = not (lo <= rec.r_ext <= hi)
        if clamped:
            log.warning("test record %d: r_ext=%r outside fitted range [%r, %r]; using endpoint K",
                        idx, rec.r_ext, lo, hi)
        try:
            results.append(_result(rec, interpolate_k(profile, rec.r_ext), x, params, clamped))
        except (NumericalError, ValidationError) as exc:
            raise annotated(exc, f"test record {idx} (r_ext={rec.r_ext!r})") from exc
    return FitReport(profile, tuple(results), test_rmse=rmse(results))


# ======================================================================
# Regime segmentation
# ======================================================================

@dataclass(frozen=True)
class RegimeFit:
    breakpoint_index: int
    slope_low: float
    slope_high: float
    residual: float

    @property
    def summary(self) -> str:
        return f"{self.breakpoint_index},{self.slope_low!r},{self.slope_high!r}"


def segment_regimes(profile: FittedRateProfile) -> RegimeFit:
    """Continuous two-segment line through (log r_ext, log K).

    The hinge sits on a profile entry; candidate index ``b`` leaves entries
    ``[0, b)`` on the low segment and ``[b, n)`` on the high one, each with at
    least two entries. Every candidate is fitted by least squares and the one
    with the smallest residual wins (ties go to the smaller index).
    """
    n = len(profile)
    if n < 4:
        raise RegimeError(f"regime segmentation needs at least 4 entries, got {n}")
    if any(e.k <= 0 for e in profile.entries):
        raise RegimeError("regime segmentation needs strictly positive K everywhere")
    X = np.log(np.asarray(profile.r_ext))
    Y = np.log(np.asarray(profile.k))
    fits = []
    for b in range(2, n - 1):
        dx = X - X[b]
        A = np.column_stack([np.ones(n), dx, np.maximum(dx, 0.0)])
        coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
        res = float(np.sum((A @ coef - Y) ** 2))
        fits.append(RegimeFit(b, float(coef[1]), float(coef[1] + coef[2]), res))
    best = min(f.residual for f in fits)
    tie = 1e-12 * (1.0 + best)
    return next(f for f in fits if f.residual <= best + tie)
