"""Zero-mean bivariate Gaussian noise for the observation model x = mu(t) + u."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["GaussianNoise", "make_rng"]


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator; the only RNG used throughout the package."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class GaussianNoise:
    cov: np.ndarray = field(default_factory=lambda: np.eye(2))
    precision: np.ndarray = field(init=False, repr=False, compare=False)
    chol: np.ndarray = field(init=False, repr=False, compare=False)
    log_norm: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cov = np.array(self.cov, dtype=float)
        if cov.shape != (2, 2) or not np.all(np.isfinite(cov)):
            raise ValueError("covariance must be a finite 2x2 matrix")
        if abs(cov[0, 1] - cov[1, 0]) > 1e-12:
            raise ValueError("covariance must be symmetric")
        cov[1, 0] = cov[0, 1]
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ValueError("covariance must be positive definite") from None
        det = cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0]
        precision = np.array([[cov[1, 1], -cov[0, 1]], [-cov[1, 0], cov[0, 0]]]) / det
        cov.setflags(write=False)
        precision.setflags(write=False)
        chol.setflags(write=False)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "precision", precision)
        object.__setattr__(self, "chol", chol)
        object.__setattr__(self, "log_norm", -math.log(2.0 * math.pi) - 0.5 * math.log(det))

    @classmethod
    def isotropic(cls, variance: float = 1.0) -> "GaussianNoise":
        return cls(variance * np.eye(2))

    def quadratic_form(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        u1, u2 = u[..., 0], u[..., 1]
        p = self.precision
        # symmetric in u -> -u term by term
        return p[0, 0] * (u1 * u1) + 2.0 * p[0, 1] * (u1 * u2) + p[1, 1] * (u2 * u2)

    def log_density(self, u):
        q = self.quadratic_form(u)
        out = self.log_norm - 0.5 * q
        return float(out) if np.ndim(out) == 0 else out

    def density(self, u):
        """Gaussian density at ``u`` (shape ``(..., 2)``)."""
        out = np.exp(self.log_density(u))
        return float(out) if np.ndim(out) == 0 else out

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` draws as an ``(n, 2)`` array via the Cholesky factor."""
        if n < 1:
            raise ValueError("n must be >= 1")
        z = rng.standard_normal((n, 2))
        return z @ self.chol.T
