"""
Monod growth and decay of the anode culture.

    dx/dt = (k1 - k2) x,   dN/dt = -k1 x / Y_xN,   k1 = mu_max N / (K_N + N)

integrated with an explicit Dormand-Prince 5(4) embedded pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import GrowthState, ModelParameters, NumericalError, ValidationError, csv_text

DEFAULT_REL_TOL = 1e-8
DEFAULT_ABS_TOL = 1e-12


class IntegrationError(NumericalError):
    pass


class StepSizeUnderflow(IntegrationError):
    def __init__(self, t: float, h: float):
        super().__init__(f"step size underflow at t={t!r} s (h={h!r})")
        self.t = t


class NegativeStateError(IntegrationError):
    pass


def monod_rate(N: float, params: ModelParameters) -> float:
    if N < 0:
        raise ValueError(f"nutrient concentration must be >= 0, got {N!r}")
    return params.mu_max * N / (params.K_N + N)


def ode_rhs(state: GrowthState, params: ModelParameters) -> tuple:
    k1 = monod_rate(state.N, params)
    return (k1 - params.k2) * state.x, -k1 * state.x / params.Y_xN


def _rhs(y, params):
    x, N = y
    k1 = params.mu_max * max(N, 0.0) / (params.K_N + max(N, 0.0))
    return np.array([(k1 - params.k2) * x, -k1 * x / params.Y_xN])


@dataclass(frozen=True)
class GrowthTrajectory:
    states: tuple
    accepted: int
    rejected: int

    @property
    def final(self) -> GrowthState:
        return self.states[-1]

    def to_csv(self) -> str:
        return csv_text(("t_s", "x_g_per_m3", "n_g_per_m3"),
                        ((s.t, s.x, s.N) for s in self.states))


# Dormand-Prince 5(4) tableau
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_MAX_STEPS = 1_000_000


def _dp_step(y, h, f0, params):
    k = np.empty((7, 2))
    k[0] = f0
    for s in range(1, 7):
        k[s] = _rhs(y + h * (np.asarray(_A[s]) @ k[:s]), params)
    y_new = y + h * (_B5 @ k)
    err = h * (_E @ k)
    return y_new, err, k[6]


def integrate_growth(initial: GrowthState, t_end: float, params: ModelParameters,
                     rel_tol: float = DEFAULT_REL_TOL,
                     abs_tol: float = DEFAULT_ABS_TOL) -> GrowthTrajectory:
    """Adaptive integration of the growth ODEs from ``initial.t`` to ``t_end``.

    A step whose result undershoots zero by less than ``abs_tol`` is clamped
    to zero. A larger undershoot rejects the step; if the step size
    underflows while doing so, :class:`NegativeStateError` is raised.
    """
    if not t_end > initial.t:
        raise ValidationError(f"t_end ({t_end!r}) must exceed the initial time ({initial.t!r})")
    if not (rel_tol > 0 and abs_tol > 0):
        raise ValidationError("integration tolerances must be positive")

    t = float(initial.t)
    y = np.array([initial.x, initial.N], dtype=float)
    f = _rhs(y, params)
    states = [initial]
    accepted = rejected = 0

    # standard starting-step heuristic from the scale of y and dy/dt
    scale = abs_tol + rel_tol * np.abs(y)
    d0 = np.sqrt(np.mean((y / scale) ** 2))
    d1 = np.sqrt(np.mean((f / scale) ** 2))
    h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else float(0.01 * d0 / d1)
    h = min(h, t_end - t)

    undershoot = None
    for _ in range(_MAX_STEPS):
        if t >= t_end:
            break
        h = min(h, t_end - t)
        if h <= 16 * np.finfo(float).eps * max(abs(t), 1.0):
            if undershoot is not None:
                raise NegativeStateError(
                    f"state goes negative beyond {abs_tol!r} at t={t!r} s: "
                    f"x={undershoot[0]!r}, N={undershoot[1]!r}")
            raise StepSizeUnderflow(t, h)

        y_new, err, f_new = _dp_step(y, h, f, params)
        scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = float(np.max(np.abs(err) / scale))

        if not math.isfinite(err_norm) or err_norm > 1.0:
            rejected += 1
            factor = _MIN_FACTOR if not math.isfinite(err_norm) else \
                max(_MIN_FACTOR, _SAFETY * err_norm ** -0.2)
            h *= factor
            continue

        if np.any(y_new < 0):
            if np.any(y_new < -abs_tol):
                rejected += 1
                undershoot = (float(y_new[0]), float(y_new[1]))
                h *= 0.5
                continue
            y_new = np.maximum(y_new, 0.0)
            f_new = _rhs(y_new, params)
        undershoot = None

        t = t_end if t_end - (t + h) <= 4 * np.finfo(float).eps * abs(t_end) else t + h
        y, f = y_new, f_new
        accepted += 1
        states.append(GrowthState(t, float(y[0]), float(y[1])))
        factor = _MAX_FACTOR if err_norm == 0 else min(_MAX_FACTOR, _SAFETY * err_norm ** -0.2)
        h *= factor
    else:
        raise IntegrationError(f"exceeded {_MAX_STEPS} steps before t_end={t_end!r}")

    return GrowthTrajectory(tuple(states), accepted, rejected)
