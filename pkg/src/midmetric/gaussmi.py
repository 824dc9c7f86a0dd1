"""Gaussian mutual information scoring for paired embeddings.

A reference corpus of matched (x, y) feature pairs is summarized by three
Gaussians: the two marginals and the joint over the concatenation z = [x, y].
Mutual information then has the closed form

    MI = 1/2 * log( det(Sx) * det(Sy) / det(Sz) )

and a candidate pair is scored by its pointwise contribution

    pmi(x, y) = MI + 1/2 * (smd_x + smd_y - smd_z)

where smd_* are squared Mahalanobis distances under the three fitted
Gaussians. Averaging pmi over an evaluation batch gives the batch score
(``mid``). Two cross-checking routes and a diagnostic decomposition of the
Mahalanobis expectation live here as well.

All determinants and precisions follow the shifted convention of
:mod:`midmetric.matstat`: with ridge ``eps``, every covariance C is read as
C + eps*I. The same eps is applied uniformly to both marginals and the joint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .matstat import (
    RegularizedGaussian,
    covariance,
    mahalanobis_sq_rows,
    mean,
)

__all__ = [
    "DEFAULT_EPSILON",
    "EPSILON_PRESETS",
    "GaussianJointModel",
    "PairBatch",
    "ScoreReport",
    "SmdDecomposition",
    "fit_reference",
    "mutual_information",
    "pmi",
    "mid",
    "smd_expectation_decomposition",
    "kl_gaussian",
    "mid_via_kl",
]

DEFAULT_EPSILON = 5e-4
# "foil" keeps the spectrum numerically invertible while leaving scores
# indistinguishable from eps = 0 for well-conditioned fits.
EPSILON_PRESETS = {"default": DEFAULT_EPSILON, "foil": 1e-15}


def _as_features(arr, name: str) -> np.ndarray:
    """Coerce an EmbeddingSet or array-like into a validated (N, D) float64 array."""
    data = getattr(arr, "data", arr)
    a = np.asarray(data, dtype=np.float64)
    if a.ndim != 2:
        raise DataError(f"{name} must be 2-D (rows, features), got shape {a.shape}")
    bad = ~np.isfinite(a)
    if bad.any():
        rows = np.unique(np.nonzero(bad)[0])
        head = ", ".join(str(int(r)) for r in rows[:10])
        more = "" if rows.size <= 10 else f" (+{rows.size - 10} more)"
        raise DataError(f"{name} has non-finite features in rows [{head}]{more}")
    return a


@dataclass(frozen=True)
class GaussianJointModel:
    """Frozen scorer: two marginals, the joint, and the reference MI."""

    dim: int
    x_marg: RegularizedGaussian
    y_marg: RegularizedGaussian
    z_joint: RegularizedGaussian
    epsilon: float
    mi: float
    n_ref: int


@dataclass(frozen=True)
class PairBatch:
    """Evaluation pairs: row i of x_hat goes with row i of y_hat."""

    x_hat: np.ndarray
    y_hat: np.ndarray

    def __post_init__(self):
        x = _as_features(self.x_hat, "x_hat")
        y = _as_features(self.y_hat, "y_hat")
        if x.shape[0] != y.shape[0]:
            raise DataError(
                f"pair batch is ragged: x_hat has {x.shape[0]} rows, "
                f"y_hat has {y.shape[0]}"
            )
        object.__setattr__(self, "x_hat", x)
        object.__setattr__(self, "y_hat", y)

    def __len__(self) -> int:
        return self.x_hat.shape[0]


@dataclass(frozen=True)
class ScoreReport:
    """Per-pair PMI plus batch aggregates."""

    pmi: np.ndarray
    mid: float
    mi: float
    mean_smd_x: float
    mean_smd_y: float
    mean_smd_z: float
    n_pairs: int
    epsilon: float


@dataclass(frozen=True)
class SmdDecomposition:
    """Mean-shift / covariance-trace / dimension split of an SMD expectation."""

    bias: float
    var_trace: float
    dim: int
    total: float


def fit_reference(x, y, epsilon: float = DEFAULT_EPSILON) -> GaussianJointModel:
    """Fit the joint Gaussian model on matched reference pairs.

    Parameters
    ----------
    x, y : array_like or EmbeddingSet, shape (N, D)
        Matched reference features; row i of x pairs with row i of y.
    epsilon : float
        Ridge added to every covariance before inversion. Must be >= 0.

    Returns
    -------
    GaussianJointModel
    """
    xa = _as_features(x, "x")
    ya = _as_features(y, "y")
    if xa.shape[0] != ya.shape[0]:
        raise DataError(
            f"reference sets disagree on sample count: x has {xa.shape[0]} rows, "
            f"y has {ya.shape[0]}"
        )
    if xa.shape[1] != ya.shape[1]:
        raise DataError(
            f"reference sets disagree on dimension: x has {xa.shape[1]} features, "
            f"y has {ya.shape[1]}"
        )
    n, d = xa.shape
    if n < 2:
        raise DataError(f"need at least 2 reference pairs to fit, got {n}")
    if epsilon < 0:
        raise DataError(f"epsilon must be nonnegative, got {epsilon}")

    mu_x = mean(xa)
    mu_y = mean(ya)
    cov_x = covariance(xa, mu_x)
    cov_y = covariance(ya, mu_y)
    cx = xa - mu_x
    cy = ya - mu_y
    cov_xy = cx.T @ cy / n

    # The joint covariance is assembled from the blocks rather than refit on
    # the concatenation, so its corners equal the marginal fits bitwise.
    cov_z = np.block([[cov_x, cov_xy], [cov_xy.T, cov_y]])
    mu_z = np.concatenate([mu_x, mu_y])

    gx = RegularizedGaussian.from_moments(mu_x, cov_x, epsilon)
    gy = RegularizedGaussian.from_moments(mu_y, cov_y, epsilon)
    gz = RegularizedGaussian.from_moments(mu_z, cov_z, epsilon)
    mi = 0.5 * (gx.logdet + gy.logdet - gz.logdet)
    return GaussianJointModel(
        dim=d,
        x_marg=gx,
        y_marg=gy,
        z_joint=gz,
        epsilon=float(epsilon),
        mi=float(mi),
        n_ref=n,
    )


def mutual_information(model: GaussianJointModel) -> float:
    """Reference MI of a fitted model (half the log-determinant gap)."""
    return model.mi


def _score_rows(model: GaussianJointModel, x: np.ndarray, y: np.ndarray):
    z = np.hstack([x, y])
    smd_x = mahalanobis_sq_rows(x, model.x_marg)
    smd_y = mahalanobis_sq_rows(y, model.y_marg)
    smd_z = mahalanobis_sq_rows(z, model.z_joint)
    pmi_vec = model.mi + 0.5 * (smd_x + smd_y - smd_z)
    return pmi_vec, smd_x, smd_y, smd_z


def _check_dim(model: GaussianJointModel, x: np.ndarray, y: np.ndarray):
    if x.shape[1] != model.dim or y.shape[1] != model.dim:
        raise DataError(
            f"model has dimension {model.dim}, batch has x dim {x.shape[1]} "
            f"and y dim {y.shape[1]}"
        )


def pmi(model: GaussianJointModel, x_hat, y_hat) -> float:
    """Pointwise score of a single pair.

    Equals ``mid`` of the one-pair batch exactly: both run the same row kernel.
    """
    x = np.asarray(x_hat, dtype=np.float64)
    y = np.asarray(y_hat, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1:
        raise DataError("pmi expects 1-D feature vectors; use mid() for batches")
    batch = PairBatch(x_hat=x[None, :], y_hat=y[None, :])
    _check_dim(model, batch.x_hat, batch.y_hat)
    pmi_vec, _, _, _ = _score_rows(model, batch.x_hat, batch.y_hat)
    return float(pmi_vec[0])


def mid(model: GaussianJointModel, batch: PairBatch) -> ScoreReport:
    """Score an evaluation batch: per-pair PMI and their mean.

    The batch must be nonempty and match the model dimension.
    """
    if not isinstance(batch, PairBatch):
        batch = PairBatch(x_hat=batch[0], y_hat=batch[1])
    if len(batch) == 0:
        raise DataError("evaluation batch is empty")
    _check_dim(model, batch.x_hat, batch.y_hat)
    pmi_vec, smd_x, smd_y, smd_z = _score_rows(model, batch.x_hat, batch.y_hat)
    return ScoreReport(
        pmi=pmi_vec,
        mid=float(pmi_vec.mean()),
        mi=model.mi,
        mean_smd_x=float(smd_x.mean()),
        mean_smd_y=float(smd_y.mean()),
        mean_smd_z=float(smd_z.mean()),
        n_pairs=len(batch),
        epsilon=model.epsilon,
    )


def smd_expectation_decomposition(
    ref: RegularizedGaussian, eval_samples
) -> SmdDecomposition:
    """Split the mean squared Mahalanobis distance of a sample set.

    mean SMD = bias + var_trace + dim, where

    - ``bias`` is the squared Mahalanobis norm of the mean shift,
    - ``var_trace`` is ``tr(P (S_hat - (S + eps I)))`` with P the reference
      precision, S the reference covariance and S_hat the (population)
      covariance of the evaluated samples,
    - ``dim`` is the feature dimension.

    The eps shift inside var_trace keeps the identity exact for regularized
    references; at eps = 0 it reduces to the plain ``tr(P (S_hat - S))``.
    ``total`` is stored as the literal float sum of the three parts.
    """
    e = _as_features(eval_samples, "eval_samples")
    if e.shape[0] < 1:
        raise DataError("need at least one evaluation sample")
    if e.shape[1] != ref.dim:
        raise DataError(
            f"eval samples have dimension {e.shape[1]}, reference has {ref.dim}"
        )
    mu_hat = mean(e)
    cov_hat = covariance(e, mu_hat)
    delta = mu_hat - ref.mean
    bias = float(delta @ ref.precision @ delta)
    if bias < 0.0:
        bias = 0.0
    shifted = ref.cov + ref.epsilon * np.eye(ref.dim)
    var_trace = float(np.einsum("ij,ji->", ref.precision, cov_hat - shifted))
    total = bias + var_trace + ref.dim
    return SmdDecomposition(bias=bias, var_trace=var_trace, dim=ref.dim, total=total)


def _effective_cov(g: RegularizedGaussian) -> np.ndarray:
    return g.cov + g.epsilon * np.eye(g.dim)


def kl_gaussian(p_hat: RegularizedGaussian, p_ref: RegularizedGaussian) -> float:
    """KL divergence D(p_hat || p_ref) between two fitted Gaussians.

    Each argument is read as N(mean, cov + eps I) with its own eps. Closed
    form:

        1/2 * ( tr(P1 (S0 - S1)) + delta' P1 delta + logdet(S1) - logdet(S0) )

    with S0, S1 the effective covariances, P1 the reference precision and
    delta the mean difference. The value is not clamped: tiny negative
    rounding residue is preserved so the KL-route identity stays exact.
    """
    if p_hat.dim != p_ref.dim:
        raise DataError(
            f"dimension mismatch: p_hat has {p_hat.dim}, p_ref has {p_ref.dim}"
        )
    s0 = _effective_cov(p_hat)
    s1 = _effective_cov(p_ref)
    delta = p_ref.mean - p_hat.mean
    tr_term = float(np.einsum("ij,ji->", p_ref.precision, s0 - s1))
    quad = float(delta @ p_ref.precision @ delta)
    return 0.5 * (tr_term + quad + p_ref.logdet - p_hat.logdet)


def mid_via_kl(ref: GaussianJointModel, eval_model: GaussianJointModel) -> float:
    """Batch score recomputed through the KL route.

    Fits of the evaluation batch itself provide ``eval_model``; the value is

        MI_eval + KL(x_hat || x) + KL(y_hat || y) - KL(z_hat || z) + ridge

    where ridge = eps/2 * (tr Pz - tr Px - tr Py) over the reference
    precisions. The ridge term is identically zero at eps = 0 and accounts
    exactly for the shifted-covariance convention, so this route agrees with
    the direct per-pair average whenever the evaluation moments come from the
    scored batch.
    """
    if ref.dim != eval_model.dim:
        raise DataError(
            f"dimension mismatch: reference has {ref.dim}, eval has {eval_model.dim}"
        )
    if ref.epsilon != eval_model.epsilon:
        raise DataError(
            f"epsilon mismatch: reference fitted with {ref.epsilon}, "
            f"eval fitted with {eval_model.epsilon}"
        )
    kl_x = kl_gaussian(eval_model.x_marg, ref.x_marg)
    kl_y = kl_gaussian(eval_model.y_marg, ref.y_marg)
    kl_z = kl_gaussian(eval_model.z_joint, ref.z_joint)
    ridge = 0.5 * ref.epsilon * (
        float(np.trace(ref.z_joint.precision))
        - float(np.trace(ref.x_marg.precision))
        - float(np.trace(ref.y_marg.precision))
    )
    return eval_model.mi + kl_x + kl_y - kl_z + ridge
