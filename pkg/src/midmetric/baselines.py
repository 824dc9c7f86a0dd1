"""Comparison scorers: cosine-family metrics and the Frechet moment distance.

The cosine family (clip_s, ref_clip_s, ref_mid, info_nce_score, r_precision)
normalizes internally and rejects zero-norm vectors; fid compares two Gaussian
moment summaries directly. These exist to be ranked against the information
score, not to share its machinery, so they stay deliberately independent of
the fitting code except for the shared eigendecomposition helper.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericError
from .matstat import sym_eig

__all__ = [
    "BaselineConfig",
    "ReferenceSetR",
    "clip_s",
    "ref_clip_s",
    "ref_mid",
    "info_nce_score",
    "r_precision",
    "fid",
]

# Input covariances may dip this far below PSD before fid refuses them.
_PSD_TOL = -1e-8


@dataclass(frozen=True)
class BaselineConfig:
    """Scale knobs for the cosine-family baselines."""

    clip_s_weight: float = 2.5
    refmid_alpha: float = 3e2
    infonce_temperature: float = 100.0
    rprecision_candidates: int = 100

    def __post_init__(self):
        for name in (
            "clip_s_weight",
            "refmid_alpha",
            "infonce_temperature",
            "rprecision_candidates",
        ):
            val = getattr(self, name)
            if not val > 0:
                raise DataError(f"{name} must be positive, got {val}")


@dataclass(frozen=True)
class ReferenceSetR:
    """Reference-caption features, one candidate per row."""

    embeddings: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.embeddings, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] < 1:
            raise DataError(
                f"reference set must be a nonempty (K, D) matrix, got shape {a.shape}"
            )
        if not np.all(np.isfinite(a)):
            raise DataError("reference set contains non-finite entries")
        object.__setattr__(self, "embeddings", a)


def _vec(v, name: str) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.ndim != 1 or a.shape[0] == 0:
        raise DataError(f"{name} must be a nonempty 1-D vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DataError(f"{name} contains non-finite entries")
    return a


def _unit(v: np.ndarray, name: str) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise DataError(f"{name} has zero norm, cosine undefined")
    return v / norm


def _cosine(a: np.ndarray, b: np.ndarray, name_a: str, name_b: str) -> float:
    if a.shape[0] != b.shape[0]:
        raise DataError(
            f"{name_a} and {name_b} disagree on dimension: {a.shape[0]} vs {b.shape[0]}"
        )
    return float(_unit(a, name_a) @ _unit(b, name_b))


def _refs(refs) -> ReferenceSetR:
    return refs if isinstance(refs, ReferenceSetR) else ReferenceSetR(refs)


def _best_ref_cosine(refs: ReferenceSetR, v: np.ndarray, v_name: str) -> float:
    emb = refs.embeddings
    return max(
        _cosine(emb[k], v, f"refs[{k}]", v_name) for k in range(emb.shape[0])
    )


def clip_s(x, y, cfg: BaselineConfig = BaselineConfig()) -> float:
    """Weighted clipped cosine: ``weight * max(cos(x, y), 0)``."""
    return cfg.clip_s_weight * max(
        _cosine(_vec(x, "x"), _vec(y, "y"), "x", "y"), 0.0
    )


def ref_clip_s(x, y, refs, cfg: BaselineConfig = BaselineConfig()) -> float:
    """Harmonic mean of clip_s(x, y) and the best clipped reference cosine.

    The reference term compares each reference row against y. If either term
    is zero the harmonic mean is zero.
    """
    r = _refs(refs)
    yv = _vec(y, "y")
    cand = cfg.clip_s_weight * max(_cosine(_vec(x, "x"), yv, "x", "y"), 0.0)
    ref_term = max(_best_ref_cosine(r, yv, "y"), 0.0)
    if cand == 0.0 or ref_term == 0.0:
        return 0.0
    return 2.0 * cand * ref_term / (cand + ref_term)


def ref_mid(mid_score: float, y, refs, cfg: BaselineConfig = BaselineConfig()) -> float:
    """Arithmetic mean of a batch information score and a reference-cosine bonus.

    ``(mid_score + alpha * max(best_ref_cos(y), 0)) / 2``.
    """
    if not np.isfinite(mid_score):
        raise DataError(f"mid_score must be finite, got {mid_score}")
    r = _refs(refs)
    yv = _vec(y, "y")
    best = _best_ref_cosine(r, yv, "y")
    return 0.5 * (float(mid_score) + cfg.refmid_alpha * max(best, 0.0))


def info_nce_score(
    x, matched: int, candidates, cfg: BaselineConfig = BaselineConfig()
) -> float:
    """Log-softmax of the matched candidate under temperature-scaled cosines.

    logits_k = t * cos(x, candidates[k]); returns
    logits[matched] - logsumexp(logits), always <= 0, with max-subtraction so
    large temperatures cannot overflow.
    """
    xv = _vec(x, "x")
    cand = np.asarray(candidates, dtype=np.float64)
    if cand.ndim != 2 or cand.shape[0] < 1:
        raise DataError(
            f"candidates must be a nonempty (K, D) matrix, got shape {cand.shape}"
        )
    k = cand.shape[0]
    if not 0 <= matched < k:
        raise DataError(f"matched index {matched} out of range for {k} candidates")
    cos = np.array([_cosine(cand[i], xv, f"candidates[{i}]", "x") for i in range(k)])
    logits = cfg.infonce_temperature * cos
    shifted = logits - logits.max()
    return float(shifted[matched] - np.log(np.exp(shifted).sum()))


def r_precision(x, true_y, distractors) -> float:
    """1.0 if the true candidate strictly beats every distractor cosine, else 0.0.

    Exact ties lose: retrieval is only credited when unambiguous.
    """
    xv = _vec(x, "x")
    ty = _vec(true_y, "true_y")
    d = np.asarray(distractors, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] < 1:
        raise DataError(
            f"distractors must be a nonempty (K, D) matrix, got shape {d.shape}"
        )
    true_cos = _cosine(ty, xv, "true_y", "x")
    best = max(_cosine(d[i], xv, f"distractors[{i}]", "x") for i in range(d.shape[0]))
    return 1.0 if true_cos > best else 0.0


def _checked_cov(c, name: str) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    lam = sym_eig(c).eigenvalues
    if float(lam.min()) < _PSD_TOL:
        raise NumericError(
            f"{name} is not positive semidefinite: min eigenvalue "
            f"{float(lam.min()):.6e} below tolerance {_PSD_TOL:g}"
        )
    return c


def _cov_sqrt(c: np.ndarray) -> np.ndarray:
    e = sym_eig(c)
    root = np.sqrt(np.maximum(e.eigenvalues, 0.0))
    return (e.eigenvectors * root) @ e.eigenvectors.T


def fid(a_mean, a_cov, b_mean, b_cov) -> float:
    """Frechet distance between two Gaussian moment summaries.

    ||mu_a - mu_b||^2 + tr(Ca + Cb - 2 (Ca^1/2 Cb Ca^1/2)^1/2). The inner
    square root is taken by eigendecomposition; negative rounding eigenvalues
    of the product are clamped to zero, while input covariances more than
    1e-8 below PSD are rejected.
    """
    mu_a = _vec(a_mean, "a_mean")
    mu_b = _vec(b_mean, "b_mean")
    ca = _checked_cov(a_cov, "a_cov")
    cb = _checked_cov(b_cov, "b_cov")
    if mu_a.shape[0] != mu_b.shape[0]:
        raise DataError(
            f"mean dimensions disagree: {mu_a.shape[0]} vs {mu_b.shape[0]}"
        )
    d = mu_a.shape[0]
    if ca.shape != (d, d) or cb.shape != (d, d):
        raise DataError(
            f"covariance shapes {ca.shape} and {cb.shape} do not match dimension {d}"
        )
    ra = _cov_sqrt(ca)
    inner = ra @ cb @ ra
    inner = (inner + inner.T) / 2.0
    lam = sym_eig(inner).eigenvalues
    tr_root = float(np.sqrt(np.maximum(lam, 0.0)).sum())
    diff = mu_a - mu_b
    return float(diff @ diff) + float(np.trace(ca) + np.trace(cb)) - 2.0 * tr_root
