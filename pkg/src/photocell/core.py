"""
Model symbols, physical constants, dataset records and their file formats.

Everything here is an immutable value object. Parameter files are flat
``key = value`` text; datasets and rate profiles are small CSV files.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, fields, replace
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Optional, Sequence


# ======================================================================
# Errors
# ======================================================================

class ValidationError(ValueError):
    """Bad input: malformed file, out-of-range value, inconsistent data."""


class ParameterError(ValidationError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class DatasetError(ValidationError):
    pass


class NumericalError(RuntimeError):
    """A solver, integrator or optimizer could not deliver a result."""


def annotated(exc: Exception, context: str) -> Exception:
    """Same error category as ``exc`` with ``context`` prefixed to the message."""
    cls = ValidationError if isinstance(exc, ValidationError) else NumericalError
    return cls(f"{context}: {exc}")


# ======================================================================
# Constants and parameters
# ======================================================================

# Standard reduction potentials [V], kept as decimal text so that the
# cell potential difference is exact.
HALF_CELL_POTENTIALS = {
    "anode": "-0.011",    # MB_red -> MB + 2e- + 2H+
    "cathode": "1.23",    # 0.5 O2 + 2H+ + 2e- -> H2O
}


def standard_cell_potential(anode=None, cathode=None) -> float:
    """E_cathode - E_anode [V] from the half-cell table (1.241 V).

    ``anode`` / ``cathode`` override the tabulated potentials.
    """
    ea = Decimal(str(anode)) if anode is not None else Decimal(HALF_CELL_POTENTIALS["anode"])
    ec = Decimal(str(cathode)) if cathode is not None else Decimal(HALF_CELL_POTENTIALS["cathode"])
    return float(ec - ea)


@dataclass(frozen=True)
class PhysicalConstants:
    R: float = 8.314        # J/(mol K)
    F: float = 96486.0      # C/mol
    N_Av: float = 6.023e23  # 1/mol
    T: float = 298.0        # K

    def __post_init__(self):
        for f in fields(self):
            _require_positive(f.name, getattr(self, f.name))


@dataclass(frozen=True)
class ModelParameters:
    """Kinetic, photonic, geometric and electrical model inputs.

    Defaults are the reference device values. The characteristic rate
    constant K is per-load and therefore not stored here.
    """
    x0: float = 12.2          # initial cell concentration, g/m3
    N0: float = 2890.0        # initial nutrient concentration, g/m3
    mu_max: float = 5e-5      # max specific growth rate, 1/s
    K_N: float = 4.0          # half-saturation constant, g/m3
    k2: float = 5.32e-6       # cell death rate, 1/s
    Y_xN: float = 10.0        # yield coefficient
    x_max: float = 1e5        # maximum cell density, g/m3
    R_int: float = 599.0      # internal resistance, ohm
    L0: float = 625.0         # light intensity, lux
    C_f: float = 1e16         # photons/s per lux
    Q: float = 0.742          # quantum yield, electrons/photon
    eta_eff: float = 0.5      # photon uptake efficiency
    A_s: float = 6.25e-4      # illumination area, m2
    A_E: float = 4.84e-4      # electrode area, m2
    alpha: float = 0.005      # charge-transfer-like exponent
    n: float = 2.0            # electrons transferred
    E0: float = 1.241         # standard cell potential, V
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    def __post_init__(self):
        for name in MODEL_KEYS:
            _require_positive(name, getattr(self, name))
        if not self.alpha < 1.0:
            raise ParameterError("alpha", f"must lie in (0, 1), got {self.alpha!r}")
        if self.eta_eff > 1.0:
            raise ParameterError("eta_eff", f"must lie in (0, 1], got {self.eta_eff!r}")
        if self.Q > 1.0:
            raise ParameterError("Q", f"must lie in (0, 1], got {self.Q!r}")
        if self.x0 > self.x_max:
            raise ParameterError("x0", f"exceeds x_max ({self.x0!r} > {self.x_max!r})")

    def with_values(self, **changes) -> "ModelParameters":
        """Copy with some fields overridden; constant names (R, F, ...) allowed."""
        const_changes = {k: changes.pop(k) for k in list(changes) if k in CONSTANT_KEYS}
        if const_changes:
            changes["constants"] = replace(self.constants, **const_changes)
        unknown = set(changes) - set(MODEL_KEYS) - {"constants"}
        if unknown:
            raise ParameterError(sorted(unknown)[0], "unknown parameter")
        return replace(self, **changes)

    def as_dict(self) -> dict:
        """Flat mapping of every key accepted by the parameter file."""
        out = {k: getattr(self, k) for k in MODEL_KEYS}
        out.update({k: getattr(self.constants, k) for k in CONSTANT_KEYS})
        return out


MODEL_KEYS = tuple(f.name for f in fields(ModelParameters) if f.name != "constants")
CONSTANT_KEYS = tuple(f.name for f in fields(PhysicalConstants))
PARAMETER_KEYS = MODEL_KEYS + CONSTANT_KEYS


def _require_positive(name, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParameterError(name, f"must be a number, got {value!r}")
    if not math.isfinite(value) or value <= 0:
        raise ParameterError(name, f"must be finite and strictly positive, got {value!r}")


def parse_parameters(text: str) -> ModelParameters:
    """Parse ``key = value`` lines; missing keys keep their defaults."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = (s.strip() for s in line.partition("="))
        if key not in PARAMETER_KEYS:
            raise ParameterError(key, f"unknown parameter (line {lineno})")
        if key in values:
            raise ParameterError(key, f"given twice (line {lineno})")
        try:
            values[key] = float(value)
        except ValueError:
            raise ParameterError(key, f"not a number: {value!r} (line {lineno})") from None
    return ModelParameters().with_values(**values)


def load_parameters(path) -> ModelParameters:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read parameter file {str(path)!r}: {exc.strerror}") from exc
    return parse_parameters(text)


def format_parameters(params: ModelParameters) -> str:
    # repr() gives the shortest text that reloads to the same float
    return "".join(f"{k} = {v!r}\n" for k, v in params.as_dict().items())


def save_parameters(params: ModelParameters, path) -> None:
    Path(path).write_text(format_parameters(params), encoding="utf-8", newline="\n")


# ======================================================================
# State and result records
# ======================================================================

@dataclass(frozen=True)
class GrowthState:
    t: float   # s
    x: float   # cell concentration, g/m3
    N: float   # nutrient concentration, g/m3

    def __post_init__(self):
        if not (self.x >= 0 and self.N >= 0):
            raise ValidationError(f"negative concentration in growth state: x={self.x!r}, N={self.N!r}")


@dataclass(frozen=True)
class PolarizationPoint:
    r_ext: float       # ohm
    i: float           # A
    v: float           # V
    j: float           # A/m2
    p: float           # W/m2
    k: float           # 1/m2
    eta_act: float     # V
    x_at_eval: float   # g/m3


# ======================================================================
# Experimental dataset
# ======================================================================

TRAIN, TEST = "train", "test"
DATASET_COLUMNS = ("r_ext_ohm", "v_volt", "i_amp")


@dataclass(frozen=True)
class DatasetRecord:
    r_ext: float
    v_exp: float
    i_exp: float
    split: str = TRAIN


def default_train_indices(n: int) -> set:
    """0-based train indices of the default split.

    For 32 records this is 1, 2:2:30, 31, 32 in 1-based terms (18 train,
    14 test). Other sizes keep the first record, every even record and the
    last two.
    """
    one_based = {1} | set(range(2, n - 1, 2)) | {n - 1, n}
    return {i - 1 for i in one_based if 1 <= i <= n}


@dataclass(frozen=True)
class ExperimentalDataset:
    records: tuple

    def __post_init__(self):
        recs = tuple(self.records)
        object.__setattr__(self, "records", recs)
        if not recs:
            raise DatasetError("dataset is empty")
        for row, rec in enumerate(recs, start=1):
            if not (math.isfinite(rec.r_ext) and rec.r_ext > 0):
                raise DatasetError(f"row {row}: r_ext must be strictly positive, got {rec.r_ext!r}")
            if not (math.isfinite(rec.v_exp) and rec.v_exp >= 0):
                raise DatasetError(f"row {row}: v_exp must be non-negative, got {rec.v_exp!r}")
            if not (math.isfinite(rec.i_exp) and rec.i_exp >= 0):
                raise DatasetError(f"row {row}: i_exp must be non-negative, got {rec.i_exp!r}")
            if rec.split not in (TRAIN, TEST):
                raise DatasetError(f"row {row}: split must be 'train' or 'test', got {rec.split!r}")
        if len(recs) > 1:
            ascending = recs[1].r_ext > recs[0].r_ext
            for row, (a, b) in enumerate(zip(recs, recs[1:]), start=2):
                if (b.r_ext > a.r_ext) != ascending or b.r_ext == a.r_ext:
                    raise DatasetError(f"row {row}: r_ext must be strictly monotone within the file")

    @classmethod
    def from_arrays(cls, r_ext, v, i, split: Optional[Sequence[str]] = None):
        r_ext, v, i = list(r_ext), list(v), list(i)
        if split is None:
            train = default_train_indices(len(r_ext))
            split = [TRAIN if k in train else TEST for k in range(len(r_ext))]
        return cls(tuple(DatasetRecord(float(a), float(b), float(c), s)
                         for a, b, c, s in zip(r_ext, v, i, split)))

    @property
    def train(self) -> list:
        return [r for r in self.records if r.split == TRAIN]

    @property
    def test(self) -> list:
        return [r for r in self.records if r.split == TEST]

    def __len__(self):
        return len(self.records)


def parse_dataset(text: str) -> ExperimentalDataset:
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r and any(c.strip() for c in r)]
    if not rows:
        raise DatasetError("dataset file is empty")
    header = [c.strip() for c in rows[0]]
    has_split = header == [*DATASET_COLUMNS, "split"]
    if not has_split and header != list(DATASET_COLUMNS):
        raise DatasetError(f"bad header {','.join(header)!r}; expected "
                           f"'{','.join(DATASET_COLUMNS)}[,split]'")
    r_ext, v, i, split = [], [], [], []
    for row, cells in enumerate(rows[1:], start=1):
        if len(cells) != len(header):
            raise DatasetError(f"row {row}: expected {len(header)} columns, got {len(cells)}")
        try:
            r_ext.append(float(cells[0]))
            v.append(float(cells[1]))
            i.append(float(cells[2]))
        except ValueError:
            raise DatasetError(f"row {row}: non-numeric value in {cells[:3]!r}") from None
        if has_split:
            split.append(cells[3].strip().lower())
    return ExperimentalDataset.from_arrays(r_ext, v, i, split if has_split else None)


def load_dataset(path) -> ExperimentalDataset:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read dataset file {str(path)!r}: {exc.strerror}") from exc
    return parse_dataset(text)


def format_dataset(data: ExperimentalDataset) -> str:
    lines = [",".join([*DATASET_COLUMNS, "split"])]
    lines += [f"{r.r_ext!r},{r.v_exp!r},{r.i_exp!r},{r.split}" for r in data.records]
    return "\n".join(lines) + "\n"


# ======================================================================
# Fitted rate-constant profile
# ======================================================================

@dataclass(frozen=True)
class RateEntry:
    r_ext: float                  # ohm
    k: float                      # 1/m2
    sse: Optional[float] = None   # V^2 + A^2; None when loaded from a profile file


@dataclass(frozen=True)
class FittedRateProfile:
    entries: tuple
    breakpoint_index: Optional[int] = None
    slopes: Optional[tuple] = None   # (low-load slope, high-load slope) in log-log

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        if not entries:
            raise ValidationError("rate profile is empty")
        for e in entries:
            if not (math.isfinite(e.k) and e.k >= 0):
                raise ValidationError(f"rate constant must be >= 0, got {e.k!r} at r_ext={e.r_ext!r}")
            if not (math.isfinite(e.r_ext) and e.r_ext > 0):
                raise ValidationError(f"r_ext must be > 0, got {e.r_ext!r}")
        if any(b.r_ext <= a.r_ext for a, b in zip(entries, entries[1:])):
            raise ValidationError("rate profile entries must be sorted by strictly increasing r_ext")

    @property
    def r_ext(self) -> list:
        return [e.r_ext for e in self.entries]

    @property
    def k(self) -> list:
        return [e.k for e in self.entries]

    def __len__(self):
        return len(self.entries)


PROFILE_COLUMNS = ("r_ext_ohm", "k_per_m2")


def format_number(value: float) -> str:
    """Fixed 12-significant-digit scientific notation used by every output file."""
    return f"{value:.11e}"


def format_profile(profile: FittedRateProfile) -> str:
    lines = [",".join(PROFILE_COLUMNS)]
    lines += [f"{format_number(e.r_ext)},{format_number(e.k)}" for e in profile.entries]
    return "\n".join(lines) + "\n"


def parse_profile(text: str) -> FittedRateProfile:
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if not rows or [c.strip() for c in rows[0]] != list(PROFILE_COLUMNS):
        raise ValidationError(f"rate profile must start with header '{','.join(PROFILE_COLUMNS)}'")
    entries = []
    for row, cells in enumerate(rows[1:], start=1):
        try:
            r, k = (float(c) for c in cells)
        except ValueError:
            raise ValidationError(f"profile row {row}: expected two numbers, got {cells!r}") from None
        entries.append(RateEntry(r, k))
    entries.sort(key=lambda e: e.r_ext)
    return FittedRateProfile(tuple(entries))


def load_profile(path) -> FittedRateProfile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read profile file {str(path)!r}: {exc.strerror}") from exc
    return parse_profile(text)


def write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def csv_text(header: Iterable[str], rows: Iterable[Iterable[float]]) -> str:
    lines = [",".join(header)]
    lines += [",".join(format_number(float(v)) for v in row) for row in rows]
    return "\n".join(lines) + "\n"
