"""Diagonal covariance spectra: constructors, effective ranks and shifts.

All covariances here are diagonal in a shared basis, so a spectrum is just
the vector of eigenvalues.  Source spectra are expected in non-increasing
order; that is checked when a :class:`SpectrumPair` is formed.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from shiftlab.errors import DegenerateTailError, InvalidParameterError

DEFAULT_B = 1.0


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Spectrum:
    values: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.values)
        if arr.size < 1:
            raise InvalidParameterError("spectrum must have at least one value")
        if not np.all(np.isfinite(arr)):
            raise InvalidParameterError("spectrum values must be finite")
        if np.any(arr < 0):
            raise InvalidParameterError("spectrum values must be non-negative")
        object.__setattr__(self, "values", arr)

    @property
    def p(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.p

    def __eq__(self, other) -> bool:
        if not isinstance(other, Spectrum):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def trace(self) -> float:
        return math.fsum(self.values)

    def is_non_increasing(self) -> bool:
        return bool(np.all(self.values[1:] <= self.values[:-1]))

    def scaled(self, c: float) -> "Spectrum":
        return Spectrum(self.values * c)

    # -- serialization -------------------------------------------------
    def to_json(self) -> str:
        return json.dumps([float(v) for v in self.values])

    @classmethod
    def from_json(cls, text: str) -> "Spectrum":
        data = json.loads(text)
        if isinstance(data, dict):
            data = data["lambda"]
        return cls(np.asarray(data, dtype=float))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("lambda\n")
        for v in self.values:
            buf.write(f"{float(v):.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Spectrum":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0][0].strip() != "lambda":
            raise InvalidParameterError("spectrum CSV must start with a 'lambda' header")
        return cls(np.array([float(r[0]) for r in rows[1:] if r], dtype=float))

    def save(self, path) -> None:
        path = Path(path)
        text = self.to_json() if path.suffix == ".json" else self.to_csv()
        path.write_text(text)

    @classmethod
    def load(cls, path) -> "Spectrum":
        path = Path(path)
        text = path.read_text()
        if path.suffix == ".json":
            return cls.from_json(text)
        return cls.from_csv(text)


@dataclass(frozen=True)
class SpectrumPair:
    source: Spectrum
    target: Spectrum

    def __post_init__(self):
        if self.source.p != self.target.p:
            raise InvalidParameterError(
                f"source and target lengths differ ({self.source.p} vs {self.target.p})"
            )
        # exact comparison: constructors emit exactly ordered sequences
        if not self.source.is_non_increasing():
            raise InvalidParameterError("source spectrum must be non-increasing")
        if np.any(self.source.values * self.target.values < 0):
            raise InvalidParameterError("target_i * source_i must be >= 0 for every i")

    @property
    def p(self) -> int:
        return self.source.p

    @classmethod
    def identity(cls, source: Spectrum) -> "SpectrumPair":
        return cls(source, source)

    def to_json(self) -> str:
        return json.dumps(
            {
                "source": [float(v) for v in self.source.values],
                "target": [float(v) for v in self.target.values],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "SpectrumPair":
        data = json.loads(text)
        return cls(Spectrum(data["source"]), Spectrum(data["target"]))


# --------------------------------------------------------------------------
# constructors


@dataclass(frozen=True)
class SpikedParams:
    k: int
    delta: float
    eps: float
    p: int

    def __post_init__(self):
        if self.p < 1:
            raise InvalidParameterError("p must be >= 1")
        if not 0 <= self.k <= self.p:
            raise InvalidParameterError(f"need 0 <= k <= p, got k={self.k}, p={self.p}")
        if not (self.delta > 0 and self.eps > 0):
            raise InvalidParameterError("delta and eps must be positive")
        if self.delta < self.eps:
            raise InvalidParameterError("need delta >= eps")


def make_spiked(params: SpikedParams) -> Spectrum:
    """k eigenvalues equal to ``delta`` followed by p - k equal to ``eps``."""
    values = np.full(params.p, float(params.eps))
    values[: params.k] = float(params.delta)
    return Spectrum(values)


@dataclass(frozen=True)
class PowerLog:
    """lambda_i = i^-a * ln(i + 1)^-b"""

    a: float
    b: float


@dataclass(frozen=True)
class Power:
    """lambda_i = i^-a"""

    a: float


@dataclass(frozen=True)
class LogSelf:
    """lambda_i = i^-ln(i)"""


DecayLaw = Union[PowerLog, Power, LogSelf]


def make_decay(law: DecayLaw, p: int) -> Spectrum:
    if p < 1:
        raise InvalidParameterError("p must be >= 1")
    i = np.arange(1, p + 1, dtype=float)
    if isinstance(law, PowerLog):
        values = i ** (-law.a) * np.log(i + 1.0) ** (-law.b)
    elif isinstance(law, Power):
        values = i ** (-law.a)
    elif isinstance(law, LogSelf):
        values = np.exp(-np.log(i) ** 2)
    else:
        raise InvalidParameterError(f"unknown decay law {law!r}")
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise InvalidParameterError(f"{law!r} produces non-positive values at p={p}")
    if np.any(values[1:] > values[:-1]):
        raise InvalidParameterError(f"{law!r} is not non-increasing at p={p}")
    return Spectrum(values)


# --------------------------------------------------------------------------
# effective ranks


def _tail_sums(values: np.ndarray) -> np.ndarray:
    """s[k] = sum_{i > k} lambda_i (1-based i), for k = 0..p-1, correctly rounded.

    Keeps exact partials (as math.fsum does) so each entry equals
    ``math.fsum(values[k:])`` and the tables agree with rho_k / big_R_k.
    """
    partials: list[float] = []
    out = np.empty(len(values))
    for j in range(len(values) - 1, -1, -1):
        x = float(values[j])
        kept = []
        for y in partials:
            if abs(x) < abs(y):
                x, y = y, x
            hi = x + y
            lo = y - (hi - x)
            if lo:
                kept.append(lo)
            x = hi
        kept.append(x)
        partials = kept
        out[j] = math.fsum(partials)
    return out


def _check_k(spectrum: Spectrum, k: int) -> None:
    if not 0 <= k < spectrum.p:
        raise InvalidParameterError(f"need 0 <= k < p, got k={k}, p={spectrum.p}")


def rho_k(source: Spectrum, k: int, n: int) -> float:
    """Tail energy over ``n`` times the first tail eigenvalue."""
    _check_k(source, k)
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    lead = source.values[k]
    if lead == 0:
        raise DegenerateTailError(
            f"rho_k undefined: lambda_(k+1) = 0 at k={k} (tail carries no energy)"
        )
    return math.fsum(source.values[k:]) / (n * lead)


def big_R_k(source: Spectrum, k: int) -> float:
    """Tail flatness (sum lambda)^2 / sum lambda^2 over i > k."""
    _check_k(source, k)
    tail = source.values[k:]
    sq = math.fsum(tail * tail)
    if sq == 0:
        raise DegenerateTailError(f"R_k undefined: all-zero tail at k={k}")
    return math.fsum(tail) ** 2 / sq


def rho_table(source: Spectrum, n: int) -> np.ndarray:
    """rho_k for every k = 0..p-1; nan where lambda_(k+1) = 0."""
    v = source.values
    s = _tail_sums(v)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(v > 0, s / (n * np.where(v > 0, v, 1.0)), np.nan)
    return out


def R_table(source: Spectrum) -> np.ndarray:
    v = source.values
    s = _tail_sums(v)
    s2 = _tail_sums(v * v)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(s2 > 0, s * s / np.where(s2 > 0, s2, 1.0), np.nan)


def k_star(source: Spectrum, n: int, b: float = DEFAULT_B) -> int | None:
    """Smallest k with rho_k >= b, or None when no k < p qualifies."""
    if b < 1:
        raise InvalidParameterError("benign threshold b must be >= 1")
    for k in range(source.p):
        if source.values[k] == 0:
            # sorted sources have an all-zero remainder from here on
            return None
        if rho_k(source, k, n) >= b:
            return k
    return None


@dataclass(frozen=True)
class BenignReport:
    k_star: int | None
    rho_0: float | None
    k_star_over_n: float | None
    n_over_R: float | None
    degenerate: bool = False

    def as_dict(self) -> dict:
        return {
            "k_star": self.k_star,
            "rho_0": self.rho_0,
            "k_star_over_n": self.k_star_over_n,
            "n_over_R_k_star": self.n_over_R,
            "degenerate": self.degenerate,
        }


def benign_report(source: Spectrum, n: int, b: float = DEFAULT_B) -> BenignReport:
    """Finite-n values of rho_0, k*/n and n/R_{k*}."""
    degenerate = source.p == 1 or source.values[0] == 0
    rho0 = None if source.values[0] == 0 else rho_k(source, 0, n)
    ks = k_star(source, n, b)
    if ks is None:
        return BenignReport(None, rho0, None, None, degenerate)
    return BenignReport(ks, rho0, ks / n, n / big_R_k(source, ks), degenerate)


# --------------------------------------------------------------------------
# shifts


@dataclass(frozen=True)
class Multiplicative:
    """Scale the top ``k`` eigenvalues by ``alpha`` and the rest by ``beta``."""

    k: int
    alpha: float
    beta: float

    def factors(self, p: int) -> np.ndarray:
        if not 0 <= self.k <= p:
            raise InvalidParameterError(f"shift k={self.k} incompatible with p={p}")
        if self.alpha < 0 or self.beta < 0:
            raise InvalidParameterError("shift factors must be non-negative")
        f = np.full(p, float(self.beta))
        f[: self.k] = float(self.alpha)
        return f


@dataclass(frozen=True)
class PerIndex:
    """One non-negative factor per eigenvalue."""

    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(f) for f in self.values))

    def factors(self, p: int) -> np.ndarray:
        f = np.asarray(self.values, dtype=float)
        if f.size != p:
            raise InvalidParameterError(f"{f.size} factors given for p={p}")
        if np.any(f < 0) or not np.all(np.isfinite(f)):
            raise InvalidParameterError("shift factors must be finite and non-negative")
        return f


ShiftSpec = Union[Multiplicative, PerIndex]


def apply_shift(source: Spectrum, shift: ShiftSpec) -> SpectrumPair:
    return SpectrumPair(source, Spectrum(shift.factors(source.p) * source.values))


def shift_factors(pair: SpectrumPair) -> np.ndarray:
    """Recover target/source ratios; nan where the source eigenvalue is zero."""
    s, t = pair.source.values, pair.target.values
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(s > 0, t / np.where(s > 0, s, 1.0), np.nan)


# --------------------------------------------------------------------------
# JSON descriptions used by configs and the CLI


def source_from_dict(d: dict, p: int | None = None) -> Spectrum:
    """Build a spectrum from ``{"kind": "spiked" | "power_log" | ...}``.

    ``p`` overrides the dimension stored in ``d`` (sweeps vary it).
    """
    kind = d["kind"]
    if kind == "values":
        return Spectrum(d["values"])
    dim = int(p if p is not None else d["p"])
    if kind == "spiked":
        return make_spiked(SpikedParams(int(d["k"]), float(d["delta"]), float(d["eps"]), dim))
    if kind == "power_log":
        return make_decay(PowerLog(float(d["a"]), float(d["b"])), dim)
    if kind == "power":
        return make_decay(Power(float(d["a"])), dim)
    if kind == "log_self":
        return make_decay(LogSelf(), dim)
    raise InvalidParameterError(f"unknown source kind {kind!r}")
