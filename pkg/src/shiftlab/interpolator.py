"""Minimum-norm interpolation via a thin SVD (with an optional Gram fast path)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from shiftlab.errors import InvalidParameterError

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class FitResult:
    theta_hat: np.ndarray
    numerical_rank: int
    gram_condition: float
    residual_norm: float
    method: str = "svd"

    def meta(self) -> dict:
        return {
            "numerical_rank": self.numerical_rank,
            "gram_condition": self.gram_condition,
            "residual_norm": self.residual_norm,
            "method": self.method,
        }


@dataclass(frozen=True)
class SVDFactor:
    """Thin SVD of X truncated at a relative singular-value cutoff."""

    U: np.ndarray  # n x r
    s: np.ndarray  # r
    Vt: np.ndarray  # r x p
    s_max: float

    @classmethod
    def of(cls, X: np.ndarray, tol: float = DEFAULT_TOL) -> "SVDFactor":
        if tol <= 0:
            raise InvalidParameterError("tol must be positive")
        U, s, Vt = np.linalg.svd(X, full_matrices=False)
        s_max = float(s[0]) if s.size else 0.0
        keep = s > tol * s_max if s_max > 0 else np.zeros_like(s, dtype=bool)
        r = int(np.count_nonzero(keep))
        return cls(U[:, :r], s[:r], Vt[:r], s_max)

    @property
    def rank(self) -> int:
        return int(self.s.size)

    @property
    def condition(self) -> float:
        return float(self.s[0] / self.s[-1]) if self.rank else float("inf")

    def pinv(self) -> np.ndarray:
        """p x n pseudo-inverse."""
        return self.Vt.T @ (self.U.T / self.s[:, None])

    def solve(self, y: np.ndarray) -> np.ndarray:
        return self.Vt.T @ ((self.U.T @ y) / self.s)

    def project_rowspace(self, v: np.ndarray) -> np.ndarray:
        return self.Vt.T @ (self.Vt @ v)


def _check(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise InvalidParameterError("X must be a 2-d array")
    if y.shape[0] != X.shape[0]:
        raise InvalidParameterError(f"y has {y.shape[0]} entries for {X.shape[0]} rows")
    return X, y


def mni_fit(X, y, tol: float = DEFAULT_TOL, method: str = "svd") -> FitResult:
    """Minimum-norm solution of ``X theta = y`` (least squares if inconsistent).

    ``method="gram"`` solves ``(X X^T) a = y`` by Cholesky and returns
    ``X^T a``; it falls back to the SVD path when X is wide but the Gram
    matrix is not numerically positive definite, or when n > p.
    """
    X, y = _check(X, y)
    n, p = X.shape
    if method == "gram" and n <= p:
        A = X @ X.T
        try:
            L = np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            pass
        else:
            ev = np.linalg.eigvalsh(A)
            cond = float(np.sqrt(ev[-1] / ev[0])) if ev[0] > 0 else float("inf")
            # Gram squares the conditioning; stay well inside double precision
            if cond < 1.0 / np.sqrt(tol):
                a = np.linalg.solve(L.T, np.linalg.solve(L, y))
                theta = X.T @ a
                return FitResult(theta, n, cond, float(np.linalg.norm(X @ theta - y)), "gram")
    elif method not in ("svd", "gram"):
        raise InvalidParameterError(f"unknown method {method!r}")
    f = SVDFactor.of(X, tol)
    theta = f.solve(y) if f.rank else np.zeros(p)
    return FitResult(theta, f.rank, f.condition, float(np.linalg.norm(X @ theta - y)), "svd")


def predict(theta, X_new) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    X_new = np.asarray(X_new, dtype=float)
    if X_new.ndim != 2 or X_new.shape[1] != theta.shape[0]:
        raise InvalidParameterError(
            f"dimension mismatch: X_new {X_new.shape}, theta {theta.shape}"
        )
    return X_new @ theta


def null_space_basis(X, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis (p x (p - rank)) of the null space of X."""
    X = np.asarray(X, dtype=float)
    _, s, Vt = np.linalg.svd(X, full_matrices=True)
    s_max = s[0] if s.size else 0.0
    r = int(np.count_nonzero(s > tol * s_max)) if s_max > 0 else 0
    return Vt[r:].T
