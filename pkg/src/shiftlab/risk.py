"""Target excess risk of the minimum-norm interpolator and its decomposition.

With diagonal target covariance the excess risk of any estimator is the
weighted squared distance ``sum_i lt_i (theta_i - theta_target_i)^2``, so
nothing here samples test points.  The MNI is linear in the labels, which
splits the fitted vector into a signal part (fit to ``X theta_source``) and
a noise part (fit to the noise vector).
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from shiftlab.errors import InvalidParameterError, ShiftlabError
from shiftlab.interpolator import DEFAULT_TOL, SVDFactor
from shiftlab.sampling import RegressionInstance, SeedSpec
from shiftlab.spectra import Spectrum


class SingularGramError(ShiftlabError, np.linalg.LinAlgError):
    pass


def _weights(target: Spectrum | np.ndarray) -> np.ndarray:
    return target.values if isinstance(target, Spectrum) else np.asarray(target, dtype=float)


def weighted_sq_norm(v: np.ndarray, weights: np.ndarray) -> float:
    return math.fsum(weights * v * v)


def excess_risk_exact(theta, theta_target, target_spectrum) -> float:
    theta = np.asarray(theta, dtype=float)
    theta_target = np.asarray(theta_target, dtype=float)
    w = _weights(target_spectrum)
    if not theta.shape == theta_target.shape == w.shape:
        raise InvalidParameterError(
            f"dimension mismatch: {theta.shape}, {theta_target.shape}, {w.shape}"
        )
    return weighted_sq_norm(theta - theta_target, w)


@dataclass(frozen=True)
class RiskReport:
    model_shift_M: float
    bias_B: float
    raw_variance_Veps: float
    normalized_variance_V: float
    cross_term: float
    total_excess_risk: float
    upper_bound_4M4B2V: float
    expected_excess_risk: float
    noise_variance: float | None
    bound_holds: bool

    def as_dict(self) -> dict:
        return asdict(self)


def _pinv_variance(f: SVDFactor, w: np.ndarray) -> float:
    # ||X^+ e||^2_w averaged over white e: sum_i w_i * ||row_i(X^+)||^2
    P = f.Vt.T / f.s  # p x r, rows of X^+ up to the orthogonal U
    return math.fsum(w * np.einsum("ij,ij->i", P, P))


def variance_normalized(X, target_spectrum, allow_pinv: bool = True, tol: float = DEFAULT_TOL) -> float:
    """Noise-averaged ``||theta_hat(eps)||^2`` in the target norm, per unit noise variance.

    Equals ``tr(A^-1 X St X^T A^-1)`` with ``A = X X^T`` when X has full row
    rank.  Rank-deficient X uses the pseudo-inverse of A and warns, or
    raises :class:`SingularGramError` when ``allow_pinv`` is False.
    """
    X = np.asarray(X, dtype=float)
    w = _weights(target_spectrum)
    if w.shape != (X.shape[1],):
        raise InvalidParameterError("target spectrum length must equal X.shape[1]")
    f = SVDFactor.of(X, tol)
    if f.rank < X.shape[0]:
        if not allow_pinv:
            raise SingularGramError(
                f"X X^T is singular (rank {f.rank} < n = {X.shape[0]})"
            )
        warnings.warn(
            f"rank-deficient design (rank {f.rank} < n = {X.shape[0]}); using pseudo-inverse",
            RuntimeWarning,
            stacklevel=2,
        )
    return _pinv_variance(f, w)


def bias_exact(X, theta_source, target_spectrum, tol: float = DEFAULT_TOL) -> float:
    """``||(I - X^+ X) theta_source||^2`` in the target norm."""
    X = np.asarray(X, dtype=float)
    theta = np.asarray(theta_source, dtype=float)
    f = SVDFactor.of(X, tol)
    r = theta - f.project_rowspace(theta)
    return weighted_sq_norm(r, _weights(target_spectrum))


def decompose(
    X,
    theta_source,
    theta_target,
    target_spectrum,
    noise,
    noise_variance: float | None = None,
    tol: float = DEFAULT_TOL,
) -> RiskReport:
    """All terms of the excess-risk decomposition for one realized noise vector.

    ``noise_variance`` is only used for ``expected_excess_risk``
    (``M + B + cross + v * V``); when omitted the empirical mean square of
    ``noise`` stands in for it.
    """
    X = np.asarray(X, dtype=float)
    ts = np.asarray(theta_source, dtype=float)
    tt = np.asarray(theta_target, dtype=float)
    noise = np.asarray(noise, dtype=float)
    w = _weights(target_spectrum)
    n, p = X.shape
    if ts.shape != (p,) or tt.shape != (p,) or w.shape != (p,) or noise.shape != (n,):
        raise InvalidParameterError("dimension mismatch in decompose")

    f = SVDFactor.of(X, tol)
    fit_signal = f.solve(X @ ts) if f.rank else np.zeros(p)
    fit_noise = f.solve(noise) if f.rank else np.zeros(p)

    M = weighted_sq_norm(ts - tt, w)
    resid = ts - fit_signal
    B = weighted_sq_norm(resid, w)
    Veps = weighted_sq_norm(fit_noise, w)
    V = _pinv_variance(f, w) if f.rank else 0.0
    cross = 2.0 * math.fsum((tt - ts) * w * resid)
    total = weighted_sq_norm(fit_signal + fit_noise - tt, w)
    upper = 4 * M + 4 * B + 2 * Veps
    scale = max(1.0, M + B + Veps)
    v = float(np.mean(noise**2)) if noise_variance is None else float(noise_variance)
    return RiskReport(
        model_shift_M=M,
        bias_B=B,
        raw_variance_Veps=Veps,
        normalized_variance_V=V,
        cross_term=cross,
        total_excess_risk=total,
        upper_bound_4M4B2V=upper,
        expected_excess_risk=M + B + cross + v * V,
        noise_variance=noise_variance,
        bound_holds=total <= upper + 1e-9 * scale,
    )


def decompose_instance(inst: RegressionInstance, target_spectrum, tol: float = DEFAULT_TOL) -> RiskReport:
    return decompose(
        inst.X, inst.theta_source, inst.theta_target, target_spectrum, inst.noise,
        inst.noise_variance, tol,
    )


# --------------------------------------------------------------------------
# Monte-Carlo aggregation


@dataclass(frozen=True)
class MCSummary:
    mean: float
    stderr: float
    trials: int

    def as_dict(self) -> dict:
        return asdict(self)


def summarize(values: Sequence[float]) -> MCSummary:
    """Mean and standard error with exactly rounded sums (order independent)."""
    vals = [float(v) for v in values]
    m = len(vals)
    if m == 0:
        raise InvalidParameterError("no values to summarize")
    mean = math.fsum(vals) / m
    if m < 2:
        return MCSummary(mean, 0.0, m)
    var = math.fsum((v - mean) ** 2 for v in vals) / (m - 1)
    return MCSummary(mean, math.sqrt(var / m), m)


TrialFactory = Callable[[SeedSpec], "tuple[RegressionInstance, Spectrum]"]


def monte_carlo_excess_risk(
    make_trial: TrialFactory,
    trials: int,
    seed: SeedSpec,
    workers: int = 1,
    tol: float = DEFAULT_TOL,
) -> tuple[MCSummary, np.ndarray]:
    """Average the realized target excess risk of the MNI over fresh trials.

    ``make_trial(seed)`` must return a regression instance (fresh X, models
    and noise) and the target spectrum to evaluate against.  Trial ``t``
    receives ``seed.child(t)``, so results do not depend on ``workers``.
    """
    if trials < 2:
        raise InvalidParameterError("need at least 2 trials for a standard error")

    def one(t: int) -> float:
        inst, target = make_trial(seed.child(t))
        f = SVDFactor.of(inst.X, tol)
        theta_hat = f.solve(inst.y) if f.rank else np.zeros(inst.p)
        return excess_risk_exact(theta_hat, inst.theta_target, target)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            values = list(pool.map(one, range(trials)))
    else:
        values = [one(t) for t in range(trials)]
    values = np.asarray(values)
    return summarize(values), values
