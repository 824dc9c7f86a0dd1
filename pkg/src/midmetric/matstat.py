"""Moment estimation and regularized Gaussian linear algebra.

Everything downstream (MI, PMI, the KL route, FID) reduces to a handful of
operations on symmetric matrices: eigendecomposition, shifted log-determinants
and inverses, and Mahalanobis quadratic forms. They are centralized here so the
regularization convention is applied in exactly one place: an operation with
ridge ``eps`` acts on the shifted matrix ``a + eps * I``, i.e. the inverse is
``(a + eps I)^-1`` and the log-determinant is ``sum(log(lam_i + eps))``.

Covariances use the population convention (divisor ``N``, not ``N - 1``).
That choice is load-bearing: the expected Mahalanobis distance of the fitting
samples under the fitted Gaussian equals the dimension exactly only with the
population divisor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericError

__all__ = [
    "SymEig",
    "RegularizedGaussian",
    "mean",
    "covariance",
    "sym_eig",
    "logdet_reg",
    "inverse_reg",
    "mahalanobis_sq",
    "mahalanobis_sq_rows",
]

# Relative asymmetry tolerated before sym_eig refuses the input.
_SYM_RTOL = 1e-9


def _as_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DataError(f"{name} must be a square 2-D matrix, got shape {a.shape}")
    if a.shape[0] == 0:
        raise DataError(f"{name} is empty (0 x 0)")
    if not np.all(np.isfinite(a)):
        raise DataError(f"{name} contains non-finite entries")
    return a


def mean(samples) -> np.ndarray:
    """Column-wise mean of an ``(N, D)`` sample matrix.

    Parameters
    ----------
    samples : array_like, shape (N, D)
        Feature rows. ``N`` must be at least 1.

    Returns
    -------
    ndarray, shape (D,)
    """
    s = np.asarray(samples, dtype=np.float64)
    if s.ndim != 2:
        raise DataError(f"samples must be 2-D (N, D), got shape {s.shape}")
    if s.shape[0] < 1:
        raise DataError("no samples: need at least one row to take a mean")
    return s.mean(axis=0)


def covariance(samples, mu) -> np.ndarray:
    """Population covariance (divisor N) of samples around a given mean.

    The result is symmetrized bitwise, ``(C + C.T) / 2``, so downstream
    eigendecompositions never see rounding asymmetry.
    """
    s = np.asarray(samples, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    if s.ndim != 2:
        raise DataError(f"samples must be 2-D (N, D), got shape {s.shape}")
    n, d = s.shape
    if n < 1:
        raise DataError("no samples: need at least one row to fit a covariance")
    if mu.shape != (d,):
        raise DataError(
            f"mean has dimension {mu.shape}, samples have {d} columns"
        )
    c = s - mu
    cov = c.T @ c / n
    return (cov + cov.T) / 2.0


@dataclass(frozen=True)
class SymEig:
    """Eigendecomposition of a symmetric matrix.

    ``eigenvalues`` ascending; ``eigenvectors`` orthonormal columns, column i
    paired with eigenvalue i.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def sym_eig(a) -> SymEig:
    """Eigendecomposition of a (nearly) symmetric matrix.

    The input must be symmetric up to ``1e-9 * ||a||_F``; it is symmetrized as
    ``(a + a.T) / 2`` before factoring so the decomposition is well defined.
    Grossly asymmetric input is rejected rather than silently averaged.
    """
    a = _as_matrix(a, "matrix")
    scale = float(np.linalg.norm(a))
    asym = float(np.linalg.norm(a - a.T))
    if asym > _SYM_RTOL * max(scale, 1e-300):
        raise DataError(
            f"matrix is not symmetric: ||a - a.T|| = {asym:.3e} "
            f"exceeds {_SYM_RTOL:g} * ||a|| = {_SYM_RTOL * scale:.3e}"
        )
    sym = (a + a.T) / 2.0
    lam, vec = np.linalg.eigh(sym)
    return SymEig(eigenvalues=lam, eigenvectors=vec)


def _shifted_eig(a, eps: float, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Eigendecomposition plus the eps-shifted spectrum, with positivity check."""
    if eps < 0:
        raise DataError(f"epsilon must be nonnegative, got {eps}")
    e = sym_eig(a)
    shifted = e.eigenvalues + eps
    if np.any(shifted <= 0.0):
        worst = float(e.eigenvalues.min())
        raise NumericError(
            f"{name} is not positive definite after regularization: "
            f"min eigenvalue {worst:.6e} with epsilon {eps:g}"
        )
    return e.eigenvalues, e.eigenvectors, shifted


def logdet_reg(a, eps: float) -> float:
    """log det(a + eps I), computed on the eigenvalues as sum(log(lam + eps))."""
    _, _, shifted = _shifted_eig(a, eps, "matrix")
    return float(np.log(shifted).sum())


def inverse_reg(a, eps: float) -> np.ndarray:
    """(a + eps I)^-1 via the eigendecomposition, symmetrized bitwise."""
    _, vec, shifted = _shifted_eig(a, eps, "matrix")
    inv = (vec / shifted) @ vec.T
    return (inv + inv.T) / 2.0


@dataclass(frozen=True)
class RegularizedGaussian:
    """A Gaussian with precision and log-determinant frozen at fit time.

    ``precision`` and ``logdet`` both refer to the same shifted matrix
    ``cov + epsilon * I`` and come from a single eigendecomposition, so the
    pair is always mutually consistent.
    """

    mean: np.ndarray
    cov: np.ndarray
    epsilon: float
    precision: np.ndarray = field(repr=False)
    logdet: float = field(repr=False)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @classmethod
    def from_moments(cls, mu, cov, eps: float) -> "RegularizedGaussian":
        mu = np.asarray(mu, dtype=np.float64)
        cov = _as_matrix(cov, "covariance")
        if mu.ndim != 1 or mu.shape[0] != cov.shape[0]:
            raise DataError(
                f"mean shape {mu.shape} does not match covariance {cov.shape}"
            )
        if not np.all(np.isfinite(mu)):
            raise DataError("mean contains non-finite entries")
        _, vec, shifted = _shifted_eig(cov, eps, "covariance")
        prec = (vec / shifted) @ vec.T
        prec = (prec + prec.T) / 2.0
        logdet = float(np.log(shifted).sum())
        return cls(mean=mu, cov=cov, epsilon=float(eps), precision=prec, logdet=logdet)


def mahalanobis_sq_rows(rows, g: RegularizedGaussian) -> np.ndarray:
    """Squared Mahalanobis distance of each row of an ``(M, D)`` matrix.

    Clamped at zero: the quadratic form is PSD, so any negative value is
    rounding noise from the factored precision.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != g.dim:
        raise DataError(
            f"rows have shape {rows.shape}, Gaussian has dimension {g.dim}"
        )
    d = rows - g.mean
    vals = ((d @ g.precision) * d).sum(axis=1)
    return np.maximum(vals, 0.0)


def mahalanobis_sq(v, g: RegularizedGaussian) -> float:
    """Squared Mahalanobis distance of one vector under a fitted Gaussian.

    Delegates to the row kernel, so this agrees exactly with a one-row batch;
    against larger batches it matches up to BLAS summation-order rounding.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise DataError(f"vector must be 1-D, got shape {v.shape}")
    return float(mahalanobis_sq_rows(v[None, :], g)[0])
