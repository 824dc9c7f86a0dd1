"""Synthetic oracle data and the experiment drivers built on it.

The generator draws jointly Gaussian pairs whose mutual information is known
in closed form, which turns every downstream scorer into something testable
without real embeddings. The drivers reproduce the qualitative experiments:
misalignment via derangement shuffling, reference-count parsimony, and foil
perturbations inside (or orthogonal to) the correlated subspace.

Everything here is a deterministic function of its inputs and an explicit
seed; repeats derive child generators from (seed, repeat, point) so results
do not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .evalstats import JudgmentTable, kendall_tau_b, kendall_tau_c
from .gaussmi import GaussianJointModel, PairBatch, mid
from .store import EmbeddingSet

__all__ = [
    "SyntheticSpec",
    "CurvePoint",
    "gen_synthetic",
    "shuffle_curve",
    "parsimony_curve",
    "foil_fixture",
    "write_curve",
]


@dataclass(frozen=True)
class SyntheticSpec:
    """Block-correlated Gaussian pair source: cov [[I, rho I], [rho I, I]]."""

    dim: int
    rho: float
    n: int
    seed: int

    def __post_init__(self):
        if self.dim < 1:
            raise DataError(f"dim must be >= 1, got {self.dim}")
        if not abs(self.rho) < 1.0:
            raise DataError(f"|rho| must be < 1, got {self.rho}")
        if self.n < 1:
            raise DataError(f"n must be >= 1, got {self.n}")

    @property
    def oracle_mi(self) -> float:
        """Closed-form mutual information of the generating distribution."""
        return -(self.dim / 2.0) * math.log(1.0 - self.rho * self.rho)


@dataclass(frozen=True)
class CurvePoint:
    """One curve sample: position in [0, 1], value, stderr over repeats."""

    x: float
    value: float
    stderr: float

    def __post_init__(self):
        if not 0.0 <= self.x <= 1.0:
            raise DataError(f"curve x must lie in [0, 1], got {self.x}")


def gen_synthetic(spec: SyntheticSpec) -> tuple[EmbeddingSet, EmbeddingSet]:
    """Draw matched pairs with per-dimension cross-correlation rho.

    y = rho * x + sqrt(1 - rho^2) * w with x, w independent standard normal,
    so the joint covariance is exactly the block target.
    """
    rng = np.random.default_rng(spec.seed)
    x = rng.standard_normal((spec.n, spec.dim))
    w = rng.standard_normal((spec.n, spec.dim))
    y = spec.rho * x + math.sqrt(1.0 - spec.rho * spec.rho) * w
    tag = f"synthetic(dim={spec.dim},rho={spec.rho},seed={spec.seed})"
    return (
        EmbeddingSet(modality="image", model_tag=tag, data=x),
        EmbeddingSet(modality="text", model_tag=tag, data=y),
    )


def _derangement(rng: np.random.Generator, k: int) -> np.ndarray:
    """Uniform-ish derangement of range(k) by rejection, k >= 2."""
    for _ in range(1000):
        perm = rng.permutation(k)
        if not np.any(perm == np.arange(k)):
            return perm
    # Practically unreachable; rotation is a guaranteed derangement.
    return np.roll(np.arange(k), 1)


def _aggregate(values: list[float]) -> tuple[float, float]:
    arr = np.array(values, dtype=np.float64)
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


def shuffle_curve(
    model: GaussianJointModel,
    batch: PairBatch,
    ratios,
    seed: int,
    repeats: int = 1,
) -> list[CurvePoint]:
    """Batch score after deranging the y-side of an r-fraction of pairs.

    Ratio 0 bypasses the generator entirely and scores the batch as-is, so
    the first point agrees with a plain mid() call exactly. Deranged rows
    keep no fixed points; a one-row selection is widened to two rows since a
    single row cannot move.
    """
    ratios = [float(r) for r in ratios]
    for r in ratios:
        if not 0.0 <= r <= 1.0:
            raise DataError(f"shuffle ratio must lie in [0, 1], got {r}")
    if repeats < 1:
        raise DataError(f"repeats must be >= 1, got {repeats}")
    m = len(batch)
    if m < 2 and any(r > 0.0 for r in ratios):
        raise DataError(
            f"cannot shuffle a batch of {m} rows; need at least 2 for ratio > 0"
        )
    points = []
    for ri, r in enumerate(ratios):
        if r == 0.0:
            value = mid(model, batch).mid
            points.append(CurvePoint(x=r, value=value, stderr=0.0))
            continue
        values = []
        for rep in range(repeats):
            rng = np.random.default_rng([seed, rep, ri])
            k = int(round(r * m))
            if k == 1:
                k = 2
            values.append(_shuffled_mid(model, batch, rng, k))
        mean_v, stderr = _aggregate(values)
        points.append(CurvePoint(x=r, value=mean_v, stderr=stderr))
    return points


def _shuffled_mid(model, batch, rng, k) -> float:
    m = len(batch)
    selected = rng.choice(m, size=k, replace=False)
    perm = _derangement(rng, k)
    y2 = batch.y_hat.copy()
    y2[selected] = batch.y_hat[selected[perm]]
    return mid(model, PairBatch(x_hat=batch.x_hat, y_hat=y2)).mid


def parsimony_curve(
    scores_fn,
    n_ref: int,
    fractions,
    judgments: JudgmentTable,
    repeats: int,
    seed: int,
    tau: str = "b",
) -> list[CurvePoint]:
    """Rank correlation as a function of the reference fraction used.

    ``scores_fn(subset_indices)`` must rescore every judged item using only
    the referenced reference rows and return scores aligned with
    ``judgments``. Each fraction is sampled ``repeats`` times with child
    seeds; fraction 1.0 short-circuits to the identity subset, making it
    exactly the full-reference correlation.
    """
    fractions = [float(f) for f in fractions]
    for f in fractions:
        if not 0.0 < f <= 1.0:
            raise DataError(f"fraction must lie in (0, 1], got {f}")
    if n_ref < 2:
        raise DataError(f"need at least 2 reference rows, got {n_ref}")
    if repeats < 1:
        raise DataError(f"repeats must be >= 1, got {repeats}")
    if tau == "b":
        tau_fn = kendall_tau_b
    elif tau == "c":
        tau_fn = kendall_tau_c
    else:
        raise DataError(f"tau must be 'b' or 'c', got {tau!r}")

    points = []
    for fi, f in enumerate(fractions):
        k = int(round(f * n_ref))
        if k < 2:
            raise DataError(
                f"fraction {f} selects a reference subset of {k} rows; need >= 2"
            )
        values = []
        for rep in range(repeats):
            if f == 1.0:
                subset = np.arange(n_ref)
            else:
                rng = np.random.default_rng([seed, rep, fi])
                subset = np.sort(rng.choice(n_ref, size=k, replace=False))
            scores = np.asarray(scores_fn(subset), dtype=np.float64)
            if scores.shape[0] != len(judgments):
                raise DataError(
                    f"scores_fn returned {scores.shape[0]} scores for "
                    f"{len(judgments)} judged items"
                )
            values.append(tau_fn(scores, judgments.judgments))
        mean_v, stderr = _aggregate(values)
        points.append(CurvePoint(x=f, value=mean_v, stderr=stderr))
    return points


def foil_fixture(
    model: GaussianJointModel,
    batch: PairBatch,
    shift_sigma: float,
    subspace_dim: int,
    seed: int,
    mode: str = "correlated",
) -> tuple[np.ndarray, np.ndarray]:
    """Per-pair scores before and after perturbing y inside a chosen subspace.

    The correlated subspace is spanned by the top right-singular vectors of
    the cross-covariance block; ``mode="orthogonal"`` uses its complement
    instead. Each row receives a shift of ``shift_sigma`` times the
    per-direction std along every subspace direction, with seeded random
    signs, so the expected shift norm scales with sqrt(subspace_dim).
    """
    if shift_sigma < 0:
        raise DataError(f"shift_sigma must be >= 0, got {shift_sigma}")
    d = model.dim
    if not 1 <= subspace_dim <= d:
        raise DataError(
            f"subspace_dim must be in [1, {d}], got {subspace_dim}"
        )
    if mode not in ("correlated", "orthogonal"):
        raise DataError(f"mode must be 'correlated' or 'orthogonal', got {mode!r}")
    cross = model.z_joint.cov[:d, d:]
    _, _, vt = np.linalg.svd(cross)
    if mode == "correlated":
        dirs = vt[:subspace_dim]
    else:
        dirs = vt[subspace_dim:]
        if dirs.shape[0] == 0:
            raise DataError(
                f"no orthogonal complement: subspace_dim {subspace_dim} covers "
                f"all {d} dimensions"
            )
    sigmas = np.sqrt(np.einsum("kd,de,ke->k", dirs, model.y_marg.cov, dirs))
    rng = np.random.default_rng(seed)
    signs = rng.choice(np.array([-1.0, 1.0]), size=(len(batch), dirs.shape[0]))
    delta = shift_sigma * (signs * sigmas) @ dirs
    gt = mid(model, batch).pmi
    foiled = mid(model, PairBatch(x_hat=batch.x_hat, y_hat=batch.y_hat + delta)).pmi
    return gt, foiled


def write_curve(points: list[CurvePoint], path) -> None:
    """Write curve points as `x<TAB>value<TAB>stderr` text."""
    lines = ["x\tvalue\tstderr"]
    for p in points:
        lines.append(f"{p.x!r}\t{p.value!r}\t{p.stderr!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
