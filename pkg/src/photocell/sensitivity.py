"""
One-at-a-time design-parameter sweeps and elasticity ranking.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .core import (
    FittedRateProfile,
    ModelParameters,
    NumericalError,
    ValidationError,
    annotated,
)
from .electrochem import (
    KSource,
    OperatingProblem,
    exchange_current_density,
    polarization_sweep,
    solve_operating_point,
)

SWEEP_PARAMETERS = ("A_E", "L0", "x0", "A_s")


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple
    loads: tuple
    k_source: KSource

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValidationError(f"unknown sweep parameter {self.parameter!r}; "
                                  f"choose one of {', '.join(SWEEP_PARAMETERS)}")
        values = tuple(float(v) for v in self.values)
        if not values or not all(math.isfinite(v) and v > 0 for v in values):
            raise ValidationError("sweep values must be a non-empty list of positive numbers")
        loads = tuple(float(r) for r in self.loads)
        if not loads or not all(r > 0 for r in loads):
            raise ValidationError("sweep loads must be a non-empty list of positive numbers")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "loads", loads)

    @property
    def k_description(self) -> str:
        if isinstance(self.k_source, FittedRateProfile):
            return "fitted profile"
        return f"constant {float(self.k_source)!r}"


def _curve(spec: SweepSpec, base: ModelParameters, value: float, dwell: float) -> list:
    try:
        params = base.with_values(**{spec.parameter: value})
        return polarization_sweep(spec.loads, spec.k_source, params, dwell)
    except (NumericalError, ValidationError) as exc:
        raise annotated(exc, f"{spec.parameter}={value!r}") from exc


def run_sweep(spec: SweepSpec, base: ModelParameters, dwell: float = 0.0,
              workers: int = 1) -> dict:
    """Polarization curve for every swept value, keyed in value order.

    A changed x0 restarts the growth integration from the new initial
    condition. With ``workers > 1`` curves are computed in a process pool;
    results do not depend on the worker count.
    """
    if workers > 1 and len(spec.values) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_curve, spec, base, v, dwell) for v in spec.values]
            curves = [f.result() for f in futures]
    else:
        curves = [_curve(spec, base, v, dwell) for v in spec.values]
    return dict(zip(spec.values, curves))


def j0_elasticity(name: str, base: ModelParameters, k: float, rel_step: float = 0.01) -> float:
    """Central-difference d ln j0 / d ln theta at x = x0."""
    def log_j0(scale):
        p = base.with_values(**{name: getattr(base, name) * scale})
        return math.log(exchange_current_density(k, p.x0, p))
    return (log_j0(1 + rel_step) - log_j0(1 - rel_step)) / \
        (math.log(1 + rel_step) - math.log(1 - rel_step))


def current_elasticity(name: str, base: ModelParameters, k: float, load: float,
                       rel_step: float = 0.01) -> float:
    """Central-difference d ln i / d ln theta at one operating point (x = x0)."""
    def log_i(scale):
        p = base.with_values(**{name: getattr(base, name) * scale})
        return math.log(solve_operating_point(OperatingProblem(load, k, p.x0, p)).i)
    return (log_i(1 + rel_step) - log_i(1 - rel_step)) / \
        (math.log(1 + rel_step) - math.log(1 - rel_step))


def rank_sensitivities(base: ModelParameters, k: float, load: float,
                       rel_step: float = 0.01, names: Sequence[str] = SWEEP_PARAMETERS) -> list:
    """``[(parameter, d ln i / d ln theta), ...]`` sorted by magnitude, largest first."""
    if not 0 < rel_step <= 0.5:
        raise ValidationError(f"rel_step must lie in (0, 0.5], got {rel_step!r}")
    if not k > 0:
        raise ValidationError("sensitivities need a positive rate constant")
    out = [(name, current_elasticity(name, base, k, load, rel_step)) for name in names]
    return sorted(out, key=lambda item: -abs(item[1]))
