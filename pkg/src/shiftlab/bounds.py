"""Variance and bias bounds for the shifted MNI and their tightness brackets.

The theorems behind these expressions hold up to unknown universal
constants.  ``c`` defaults to 1 ("shape mode"); :func:`fit_constant`
estimates a single constant from exact variances instead.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np

from shiftlab.errors import InvalidParameterError, PropertyFailure, UnsupportedRatioError
from shiftlab.spectra import DEFAULT_B, SpectrumPair, big_R_k, k_star, rho_k


@dataclass(frozen=True)
class BoundConfig:
    n: int
    k: int | None = None
    c: float = 1.0
    b: float = DEFAULT_B

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParameterError("n must be >= 1")
        if self.c <= 0:
            raise InvalidParameterError("c must be positive")
        if self.k is not None and not 0 <= self.k < self.n:
            raise InvalidParameterError(f"need 0 <= k < n, got k={self.k}, n={self.n}")

    def resolve_k(self, pair: SpectrumPair) -> int:
        """Configured k, or k* of the source when unset."""
        if self.k is not None:
            if self.k >= pair.p:
                raise InvalidParameterError(f"k={self.k} leaves no tail for p={pair.p}")
            return self.k
        ks = k_star(pair.source, self.n, self.b)
        if ks is None:
            raise InvalidParameterError("no k with rho_k >= b; pass k explicitly")
        if ks >= self.n:
            raise InvalidParameterError(f"k*={ks} is not below n={self.n}")
        return ks


def _ratio(pair: SpectrumPair) -> np.ndarray:
    lam, lt = pair.source.values, pair.target.values
    bad = (lam == 0) & (lt > 0)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise UnsupportedRatioError(
            f"target eigenvalue {lt[i]:g} > 0 where source eigenvalue is 0 (index {i})"
        )
    out = np.zeros_like(lam)
    np.divide(lt, lam, out=out, where=lam > 0)
    return out


def _tail_scale(pair: SpectrumPair, k: int, n: int) -> tuple[float, float]:
    """lambda_{k+1} and rho_k."""
    return float(pair.source.values[k]), rho_k(pair.source, k, n)


def variance_lower(pair: SpectrumPair, cfg: BoundConfig) -> float:
    k = cfg.resolve_k(pair)
    lam = pair.source.values
    r = _ratio(pair)
    lead, rho = _tail_scale(pair, k, cfg.n)
    m = np.minimum(1.0, lam**2 / (lead**2 * (rho + 1.0) ** 2))
    return math.fsum(r * m) / (cfg.c * cfg.n)


def _variance_parts(pair: SpectrumPair, k: int, n: int) -> tuple[float, float]:
    lam, lt = pair.source.values, pair.target.values
    r = _ratio(pair)
    head = math.fsum(r[:k]) / n
    tail_sum = math.fsum(lam[k:])
    if tail_sum == 0:
        return head, 0.0
    tail = n * math.fsum(lt[k:] * lam[k:]) / tail_sum**2
    return head, tail


def variance_upper(pair: SpectrumPair, cfg: BoundConfig) -> float:
    """``c * (head + tail)``; reported even when rho_k < b (see BoundsReport)."""
    k = cfg.resolve_k(pair)
    head, tail = _variance_parts(pair, k, cfg.n)
    return cfg.c * (head + tail)


def variance_upper_parts(pair: SpectrumPair, cfg: BoundConfig) -> tuple[float, float]:
    """Head and tail contributions to the variance upper bound at c = 1."""
    return _variance_parts(pair, cfg.resolve_k(pair), cfg.n)


def _bias_denominator(pair: SpectrumPair, k: int, n: int) -> np.ndarray:
    lead, rho = _tail_scale(pair, k, n)
    return 1.0 + pair.source.values / (lead * rho)


def bias_lower(pair: SpectrumPair, theta_source, cfg: BoundConfig) -> float:
    k = cfg.resolve_k(pair)
    theta = np.asarray(theta_source, dtype=float)
    if theta.shape != (pair.p,):
        raise InvalidParameterError("theta_source must have length p")
    r = _ratio(pair)
    lam, lt = pair.source.values, pair.target.values
    d = _bias_denominator(pair, k, cfg.n)
    head = r[:k] * lam[:k] * theta[:k] ** 2 / d[:k] ** 2
    tail = lt[k:] * theta[k:] ** 2
    return (math.fsum(head) + math.fsum(tail)) / cfg.c


def bias_upper(pair: SpectrumPair, theta_source, cfg: BoundConfig) -> float:
    """Assumes p is at most exponential in n; recorded, not checked."""
    k = cfg.resolve_k(pair)
    theta = np.asarray(theta_source, dtype=float)
    if theta.shape != (pair.p,):
        raise InvalidParameterError("theta_source must have length p")
    r = _ratio(pair)
    d = _bias_denominator(pair, k, cfg.n)
    return cfg.c * math.fsum(theta * theta) * math.fsum(r * pair.source.values / d)


@dataclass(frozen=True)
class BoundsReport:
    k: int
    n: int
    c: float
    b: float
    rho_k: float
    R_k: float
    benign_ok: bool
    v_lower: float
    v_upper: float
    b_lower: float | None = None
    b_upper: float | None = None

    @property
    def benign_violated(self) -> bool:
        return not self.benign_ok

    def as_dict(self) -> dict:
        d = asdict(self)
        d["benign_violated"] = self.benign_violated
        return d


def bounds_report(pair: SpectrumPair, cfg: BoundConfig, theta_source=None) -> BoundsReport:
    k = cfg.resolve_k(pair)
    fixed = BoundConfig(cfg.n, k, cfg.c, cfg.b)
    rho = rho_k(pair.source, k, cfg.n)
    bl = bu = None
    if theta_source is not None:
        bl = bias_lower(pair, theta_source, fixed)
        bu = bias_upper(pair, theta_source, fixed)
    return BoundsReport(
        k=k,
        n=cfg.n,
        c=cfg.c,
        b=cfg.b,
        rho_k=rho,
        R_k=big_R_k(pair.source, k),
        benign_ok=rho >= cfg.b,
        v_lower=variance_lower(pair, fixed),
        v_upper=variance_upper(pair, fixed),
        b_lower=bl,
        b_upper=bu,
    )


@dataclass(frozen=True)
class TightnessReport:
    v_ratio: float
    v_bracket: tuple[float, float]
    b_ratio: float | None
    b_bracket: tuple[float, float] | None
    k_is_minimal: bool

    @property
    def v_inside(self) -> bool:
        lo, hi = self.v_bracket
        return lo <= self.v_ratio <= hi * (1 + 1e-12)

    @property
    def b_inside(self) -> bool:
        if self.b_ratio is None:
            return True
        lo, hi = self.b_bracket
        return lo * (1 - 1e-12) <= self.b_ratio <= hi * (1 + 1e-12)

    def check(self) -> None:
        if not self.v_inside:
            raise PropertyFailure(f"variance ratio {self.v_ratio:.6g} outside {self.v_bracket}")
        if not self.b_inside:
            raise PropertyFailure(f"bias ratio {self.b_ratio:.6g} outside {self.b_bracket}")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["v_inside"] = self.v_inside
        d["b_inside"] = self.b_inside
        return d


def tightness_ratios(pair: SpectrumPair, theta_source, cfg: BoundConfig, check: bool = True) -> TightnessReport:
    """Lower/upper ratios and the brackets they must fall in when rho_k >= b.

    The variance bracket is only guaranteed when k is the smallest index with
    rho_k >= b; ``k_is_minimal`` records whether that holds.  The bias ratio
    is formed from constant-free (c = 1) bound values.
    """
    k = cfg.resolve_k(pair)
    fixed = BoundConfig(cfg.n, k, cfg.c, cfg.b)
    rho = rho_k(pair.source, k, cfg.n)
    if rho < cfg.b:
        raise InvalidParameterError(f"tightness needs rho_k >= b (rho_k={rho:.4g}, b={cfg.b})")
    b = cfg.b
    v_ratio = variance_lower(pair, fixed) / variance_upper(pair, fixed)
    v_bracket = (1.0 / (b**2 * (1 + b) ** 2 * cfg.c**2), 1.0)

    b_ratio = b_bracket = None
    if theta_source is not None:
        theta = np.asarray(theta_source, dtype=float)
        shape = BoundConfig(cfg.n, k, 1.0, cfg.b)
        up = bias_upper(pair, theta, shape)
        lam = pair.source.values
        nz = theta[theta != 0] ** 2
        if up > 0 and nz.size:
            b_ratio = bias_lower(pair, theta, shape) / up
            lo = float(nz.min()) / (math.fsum(theta * theta) * (1 + lam[0] / (b * lam[k])))
            b_bracket = (lo, 1.0)

    minimal = k == 0 or rho_k(pair.source, k - 1, cfg.n) < b
    report = TightnessReport(v_ratio, v_bracket, b_ratio, b_bracket, minimal)
    if check and minimal:
        report.check()
    return report


def fit_constant(triples: Iterable[tuple[float, float, float]]) -> float:
    """Smallest c >= 1 with ``lower/c <= exact <= c * upper`` for every triple.

    Each triple is ``(lower, exact, upper)`` evaluated at c = 1.
    """
    c = 1.0
    for lower, exact, upper in triples:
        if exact <= 0:
            if lower > 0:
                raise InvalidParameterError("exact value 0 with a positive lower bound")
            continue
        c = max(c, lower / exact, exact / upper if upper > 0 else math.inf)
    return c
