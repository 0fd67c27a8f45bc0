"""Beneficial / malignant classification of multiplicative covariate shifts.

Shifts scale the top ``k`` source eigenvalues (the signal head) and the
remaining tail.  At the level of the variance bounds the shifted variance
moves by ``(a - 1) k/n + (t - 1) n/R_k`` where ``a`` and ``t`` summarize
the head and tail factors.  Which of the two rates dominates is the
mild / severe overparameterization regime.

The regime definitions are asymptotic (omega / little-o).  At finite
scale they become strict inequalities between ``n/R_k`` and
``C * k/n`` with a relative ``Boundary`` band, and verdicts whose
predicted gap is small relative to the ID variance are ``Indeterminate``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from shiftlab.errors import InvalidParameterError
from shiftlab.spectra import DEFAULT_B, Spectrum, big_R_k, rho_k

DEFAULT_TOL_REL = 0.05
DEFAULT_BAND = 0.10


class Regime(str, Enum):
    MILD = "Mild"
    SEVERE = "Severe"
    BOUNDARY = "Boundary"


class Verdict(str, Enum):
    BENEFICIAL = "Beneficial"
    MALIGNANT = "Malignant"
    NEUTRAL = "Neutral"
    INDETERMINATE = "Indeterminate"

    @property
    def sign(self) -> int:
        return {"Beneficial": -1, "Malignant": 1}.get(self.value, 0)


@dataclass(frozen=True)
class TaxonomyReport:
    c_alpha_beta: float
    k_over_n: float
    n_over_Rk: float
    regime: Regime
    verdict: Verdict
    predicted_delta_v: float
    v_id_bound: float
    trace_source: float
    trace_target: float
    head_stat: float
    tail_stat: float
    benign_ok: bool | None

    def as_dict(self) -> dict:
        d = asdict(self)
        d["regime"] = self.regime.value
        d["verdict"] = self.verdict.value
        return d


def _rates(source: Spectrum, k: int, n: int) -> tuple[float, float]:
    if not 0 <= k <= source.p:
        raise InvalidParameterError(f"need 0 <= k <= p, got k={k}")
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    n_over_R = 0.0 if k == source.p else n / big_R_k(source, k)
    return k / n, n_over_R


def _benign(source: Spectrum, k: int, n: int, b: float) -> bool | None:
    if k >= source.p or source.values[k] == 0:
        return None
    return rho_k(source, k, n) >= b


def regime_of(n_over_R: float, c_times_k_over_n: float, band: float = DEFAULT_BAND) -> Regime:
    x, y = n_over_R, c_times_k_over_n
    if math.isinf(y):
        return Regime.SEVERE
    if abs(x - y) <= band * max(x, y):
        return Regime.BOUNDARY
    return Regime.MILD if x > y else Regime.SEVERE


def _classify(a, t, k_over_n, n_over_R, band, tol_rel):
    """Shared case analysis; ``a`` / ``t`` are the head / tail shift statistics."""
    # t == 1 follows the convention C = inf (effectively severe)
    c = math.inf if t == 1 else abs((a - 1) / (1 - t))
    regime = regime_of(n_over_R, math.inf if math.isinf(c) else c * k_over_n, band)
    delta = (a - 1) * k_over_n + (t - 1) * n_over_R
    v_id = k_over_n + n_over_R

    if delta == 0:
        verdict = Verdict.NEUTRAL
    elif abs(delta) < tol_rel * v_id:
        verdict = Verdict.INDETERMINATE
    elif (a < 1 and t <= 1) or (a <= 1 and t < 1):
        verdict = Verdict.BENEFICIAL
    elif (a > 1 and t >= 1) or (a >= 1 and t > 1):
        verdict = Verdict.MALIGNANT
    elif regime is Regime.BOUNDARY:
        verdict = Verdict.INDETERMINATE
    else:
        head_up = a > 1  # and tail down; otherwise head down, tail up
        mild = regime is Regime.MILD
        verdict = Verdict.BENEFICIAL if head_up == mild else Verdict.MALIGNANT
    return c, regime, verdict, delta, v_id


def classify_multiplicative(
    source: Spectrum,
    k: int,
    n: int,
    alpha: float,
    beta: float,
    tol_rel: float = DEFAULT_TOL_REL,
    band: float = DEFAULT_BAND,
    b: float = DEFAULT_B,
) -> TaxonomyReport:
    if alpha < 0 or beta < 0:
        raise InvalidParameterError("alpha and beta must be non-negative")
    kn, nR = _rates(source, k, n)
    c, regime, verdict, delta, v_id = _classify(float(alpha), float(beta), kn, nR, band, tol_rel)
    tr = trace_condition(source, k, alpha, beta)
    return TaxonomyReport(
        c, kn, nR, regime, verdict, delta, v_id, tr.tr_source, tr.tr_target,
        float(alpha), float(beta), _benign(source, k, n, b),
    )


def _mean_if_constant(v: np.ndarray, fallback: float) -> float:
    return float(v[0]) if v.size and np.all(v == v[0]) else fallback


def classify_general(
    source: Spectrum,
    k: int,
    n: int,
    alpha_vec,
    beta_vec,
    tol_rel: float = DEFAULT_TOL_REL,
    band: float = DEFAULT_BAND,
    b: float = DEFAULT_B,
) -> TaxonomyReport:
    """Per-index factors: ``alpha_vec`` on the head, ``beta_vec`` on the tail.

    Head statistic ``sum(alpha)/k``; tail statistic
    ``sum(beta * lam^2) / sum(lam^2)`` over the tail.  Constant vectors
    reduce exactly to :func:`classify_multiplicative`.
    """
    alpha = np.asarray(alpha_vec, dtype=float).reshape(-1)
    beta = np.asarray(beta_vec, dtype=float).reshape(-1)
    if alpha.size != k or beta.size != source.p - k:
        raise InvalidParameterError(
            f"expected {k} head and {source.p - k} tail factors, got {alpha.size} and {beta.size}"
        )
    if np.any(alpha < 0) or np.any(beta < 0):
        raise InvalidParameterError("factors must be non-negative")
    lam = source.values
    tail_sq = lam[k:] ** 2
    denom = math.fsum(tail_sq)
    a = _mean_if_constant(alpha, math.fsum(alpha) / k if k else 1.0)
    t = _mean_if_constant(beta, math.fsum(beta * tail_sq) / denom if denom > 0 else 1.0)
    kn, nR = _rates(source, k, n)
    c, regime, verdict, delta, v_id = _classify(a, t, kn, nR, band, tol_rel)
    factors = np.concatenate([alpha, beta])
    return TaxonomyReport(
        c, kn, nR, regime, verdict, delta, v_id, source.trace(), math.fsum(factors * lam),
        a, t, _benign(source, k, n, b),
    )


def delta_v_bound_general(source: Spectrum, k: int, n: int, alpha_vec, beta_vec) -> float:
    """Bound-level V_ood - V_id summed term by term (no head/tail statistics)."""
    lam = source.values
    tail = lam[k:]
    s = math.fsum(tail)
    head = (math.fsum(alpha_vec) - k) / n
    return head + n * math.fsum((np.asarray(beta_vec) - 1.0) * tail**2) / s**2


@dataclass(frozen=True)
class TraceReport:
    tr_source: float
    tr_target: float
    ordering: str  # "target_larger" | "source_larger" | "equal"
    tail_head_ratio: float

    def as_dict(self) -> dict:
        return asdict(self)


def trace_condition(source: Spectrum, k: int, alpha: float, beta: float) -> TraceReport:
    lam = source.values
    head = math.fsum(lam[:k])
    tail = math.fsum(lam[k:])
    tr_s = head + tail
    tr_t = alpha * head + beta * tail
    if alpha == 1 and beta == 1:
        ordering = "equal"
    else:
        # sign of tr_t - tr_s = (alpha - 1) head + (beta - 1) tail, without cancellation
        gap = math.fsum([(alpha - 1) * head, (beta - 1) * tail])
        ordering = "target_larger" if gap > 0 else "source_larger" if gap < 0 else "equal"
    ratio = tail / head if head > 0 else math.inf
    return TraceReport(tr_s, tr_t, ordering, ratio)


def robustness_value(source: Spectrum, k: int, n: int, alpha: float, beta: float) -> float:
    """Shifted variance-bound value ``alpha k/n + beta n/R_k``."""
    kn, nR = _rates(source, k, n)
    return alpha * kn + beta * nR
