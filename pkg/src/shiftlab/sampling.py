"""Seedable Gaussian designs, sphere-uniform models and noisy labels.

Every random draw is keyed by a :class:`SeedSpec`.  Streams come from
numpy's counter-based Philox generator seeded through ``SeedSequence``
with a spawn key ``(stream_id, *path, purpose)``, so any trial can be
regenerated on its own, in any order, on any worker.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from shiftlab.errors import InvalidParameterError
from shiftlab.spectra import Spectrum

RNG_ALGORITHM = "numpy.Philox4x64 via SeedSequence(master, spawn_key); normals: numpy ziggurat"

_MASK64 = (1 << 64) - 1

# purpose tags keep the draws of one trial on separate sub-streams
DESIGN, MODEL, NOISE, FLIP, SUBSAMPLE = 0, 1, 2, 3, 4


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "master_seed", int(self.master_seed) & _MASK64)
        object.__setattr__(self, "stream_id", int(self.stream_id) & _MASK64)
        object.__setattr__(self, "path", tuple(int(x) & _MASK64 for x in self.path))

    def child(self, *path: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, self.stream_id, self.path + tuple(path))

    def generator(self, purpose: int = 0) -> np.random.Generator:
        ss = np.random.SeedSequence(
            self.master_seed, spawn_key=(self.stream_id, *self.path, int(purpose))
        )
        return np.random.Generator(np.random.Philox(ss))

    def as_dict(self) -> dict:
        return {"master_seed": self.master_seed, "stream_id": self.stream_id, "path": list(self.path)}


@dataclass(frozen=True)
class RegressionInstance:
    X: np.ndarray
    y: np.ndarray
    theta_source: np.ndarray
    theta_target: np.ndarray
    noise: np.ndarray
    noise_variance: float

    def __post_init__(self):
        n, p = self.X.shape
        if self.y.shape != (n,) or self.noise.shape != (n,):
            raise InvalidParameterError("y and noise must have length n")
        if self.theta_source.shape != (p,) or self.theta_target.shape != (p,):
            raise InvalidParameterError("model vectors must have length p")
        if self.noise_variance < 0:
            raise InvalidParameterError("noise_variance must be >= 0")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def sample_design(n: int, spectrum: Spectrum, seed: SeedSpec) -> np.ndarray:
    """n x p matrix whose rows are N(0, diag(spectrum)) draws."""
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    g = seed.generator(DESIGN).standard_normal((n, spectrum.p))
    return g * np.sqrt(spectrum.values)


def sample_sphere_model(p: int, seed: SeedSpec) -> np.ndarray:
    if p < 1:
        raise InvalidParameterError("p must be >= 1")
    rng = seed.generator(MODEL)
    while True:
        v = rng.standard_normal(p)
        norm = np.linalg.norm(v)
        if norm > 0:
            return v / norm


def gen_labels(X: np.ndarray, theta: np.ndarray, noise_variance: float, seed: SeedSpec):
    """Return ``(y, noise)`` with ``y = X @ theta + noise``."""
    X = np.asarray(X, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if X.ndim != 2 or theta.shape != (X.shape[1],):
        raise InvalidParameterError(f"shape mismatch: X {X.shape}, theta {theta.shape}")
    if noise_variance < 0:
        raise InvalidParameterError("noise_variance must be >= 0")
    noise = np.sqrt(noise_variance) * seed.generator(NOISE).standard_normal(X.shape[0])
    return X @ theta + noise, noise


def flip_labels(y: np.ndarray, prob: float, seed: SeedSpec) -> np.ndarray:
    y = np.asarray(y)
    if not np.all((y == 0) | (y == 1)):
        raise InvalidParameterError("flip_labels expects entries in {0, 1}")
    if not 0.0 <= prob <= 1.0:
        raise InvalidParameterError("flip probability must lie in [0, 1]")
    mask = seed.generator(FLIP).random(y.shape) < prob
    return np.where(mask, 1 - y, y).astype(y.dtype)


def make_instance(
    n: int,
    source: Spectrum,
    seed: SeedSpec,
    noise_variance: float = 1.0,
    theta_target: np.ndarray | None = None,
) -> RegressionInstance:
    """Draw X, a sphere-uniform source model and noisy labels.

    The target model defaults to the source model (no model shift).
    """
    X = sample_design(n, source, seed)
    theta = sample_sphere_model(source.p, seed)
    y, noise = gen_labels(X, theta, noise_variance, seed)
    tt = theta.copy() if theta_target is None else np.asarray(theta_target, dtype=float)
    return RegressionInstance(X, y, theta, tt, noise, float(noise_variance))
