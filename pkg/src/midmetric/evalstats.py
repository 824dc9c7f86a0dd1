"""Rank correlation with tie handling, plus the accuracy-style protocols.

Kendall's tau comes in the tau-b and tau-c tie corrections. Both are driven
by the same pair classification (concordant, discordant, tied one side, tied
both), which has two interchangeable implementations: exact O(n^2) counting
(default up to n = 10,000) and a merge-sort inversion path for larger inputs.
`method="exact"|"mergesort"` forces a path; the two must agree exactly, which
the test suite checks property-style.

Accuracy protocols: pairwise preference with half or seeded-random tie
breaking, ground-truth-vs-foil accuracy, and strict lowest-of-three.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import DataError

__all__ = [
    "EXACT_CUTOFF",
    "JudgmentTable",
    "PairPreference",
    "PairCounts",
    "pair_counts",
    "kendall_tau_b",
    "kendall_tau_c",
    "pairwise_accuracy",
    "foil_accuracy",
    "lowest_of_three_accuracy",
    "read_judgments",
]

# Largest n routed to the O(n^2) exact counter when method="auto".
EXACT_CUTOFF = 10_000


class PairCounts(NamedTuple):
    concordant: int
    discordant: int
    tied_a_only: int
    tied_b_only: int
    tied_both: int


def _as_rank_input(v, name: str) -> np.ndarray:
    a = np.ascontiguousarray(v, dtype=np.float64)
    if a.ndim != 1:
        raise DataError(f"{name} must be 1-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DataError(f"{name} contains non-finite values")
    return a


def _tie_pairs(sorted_vals: np.ndarray) -> int:
    """Sum of t*(t-1)/2 over runs of equal values in a sorted array."""
    n = sorted_vals.shape[0]
    if n < 2:
        return 0
    change = np.nonzero(sorted_vals[1:] != sorted_vals[:-1])[0]
    edges = np.concatenate(([0], change + 1, [n]))
    runs = np.diff(edges)
    return int((runs * (runs - 1) // 2).sum())


def _joint_tie_pairs(a_s: np.ndarray, b_s: np.ndarray) -> int:
    """Tie pairs of the (a, b) tuples, given arrays sorted lexicographically."""
    n = a_s.shape[0]
    if n < 2:
        return 0
    change = np.nonzero((a_s[1:] != a_s[:-1]) | (b_s[1:] != b_s[:-1]))[0]
    edges = np.concatenate(([0], change + 1, [n]))
    runs = np.diff(edges)
    return int((runs * (runs - 1) // 2).sum())


def pair_counts(a, b, *, method: str = "auto", threads: int = 1) -> PairCounts:
    """Classify every unordered index pair of two aligned score lists."""
    av = _as_rank_input(a, "a")
    bv = _as_rank_input(b, "b")
    if av.shape[0] != bv.shape[0]:
        raise DataError(
            f"lists disagree on length: a has {av.shape[0]}, b has {bv.shape[0]}"
        )
    n = av.shape[0]
    if n < 2:
        raise DataError(f"need at least 2 items, got {n}")
    if method not in ("auto", "exact", "mergesort"):
        raise DataError(f"unknown method {method!r}")
    if method == "auto":
        method = "exact" if n <= EXACT_CUTOFF else "mergesort"

    if method == "exact":
        return PairCounts(*_kernels.pair_counts_all(av, bv, threads=threads))

    order = np.lexsort((bv, av))
    a_s = av[order]
    b_s = bv[order]
    disc = _kernels.sorted_inversions(b_s)
    total = n * (n - 1) // 2
    ties_a = _tie_pairs(a_s)
    ties_b = _tie_pairs(np.sort(bv, kind="stable"))
    ties_both = _joint_tie_pairs(a_s, b_s)
    conc = total - ties_a - ties_b + ties_both - disc
    return PairCounts(
        concordant=conc,
        discordant=disc,
        tied_a_only=ties_a - ties_both,
        tied_b_only=ties_b - ties_both,
        tied_both=ties_both,
    )


def kendall_tau_b(a, b, *, method: str = "auto", threads: int = 1) -> float:
    """Tau-b: (C - D) / sqrt((C + D + Ta)(C + D + Tb)), tie-corrected."""
    c = pair_counts(a, b, method=method, threads=threads)
    d1 = c.concordant + c.discordant + c.tied_a_only
    d2 = c.concordant + c.discordant + c.tied_b_only
    if d1 == 0 or d2 == 0:
        raise DataError(
            "kendall tau-b undefined (zero denominator): one list is entirely tied"
        )
    return (c.concordant - c.discordant) / math.sqrt(d1 * d2)


def kendall_tau_c(a, b, *, method: str = "auto", threads: int = 1) -> float:
    """Tau-c: 2m(C - D) / (n^2 (m - 1)), m = smaller distinct-value count."""
    av = _as_rank_input(a, "a")
    bv = _as_rank_input(b, "b")
    c = pair_counts(av, bv, method=method, threads=threads)
    n = av.shape[0]
    m = min(np.unique(av).size, np.unique(bv).size)
    if m < 2:
        raise DataError(
            "kendall tau-c undefined (zero denominator): "
            f"need at least 2 distinct values per list, got m={m}"
        )
    return 2.0 * m * (c.concordant - c.discordant) / (n * n * (m - 1))


@dataclass(frozen=True)
class PairPreference:
    """Rows of paired scores with a human preference label 'A' or 'B'."""

    score_a: np.ndarray
    score_b: np.ndarray
    preferred: np.ndarray

    def __post_init__(self):
        sa = _as_rank_input(self.score_a, "score_a")
        sb = _as_rank_input(self.score_b, "score_b")
        pref = np.asarray(self.preferred)
        if not (sa.shape == sb.shape == pref.shape):
            raise DataError(
                f"preference table is ragged: shapes {sa.shape}, {sb.shape}, {pref.shape}"
            )
        if sa.shape[0] == 0:
            raise DataError("preference table is empty")
        labels = pref.astype("U1")
        if not np.all((labels == "A") | (labels == "B")):
            bad = labels[(labels != "A") & (labels != "B")][0]
            raise DataError(f"preferred labels must be 'A' or 'B', got {bad!r}")
        object.__setattr__(self, "score_a", sa)
        object.__setattr__(self, "score_b", sb)
        object.__setattr__(self, "preferred", labels)

    def __len__(self) -> int:
        return self.score_a.shape[0]


def _check_tie_rule(tie_rule: str, seed):
    if tie_rule not in ("half", "random"):
        raise DataError(f"unknown tie rule {tie_rule!r}")
    if tie_rule == "random" and seed is None:
        raise DataError("tie_rule 'random' requires a seed")


def pairwise_accuracy(
    prefs: PairPreference, tie_rule: str = "random", seed=None
) -> float:
    """Fraction of rows where the higher score agrees with the preference."""
    if not isinstance(prefs, PairPreference):
        raise DataError("pairwise_accuracy expects a PairPreference")
    _check_tie_rule(tie_rule, seed)
    a_wins = prefs.score_a > prefs.score_b
    b_wins = prefs.score_b > prefs.score_a
    ties = ~a_wins & ~b_wins
    correct = float(
        np.count_nonzero(a_wins & (prefs.preferred == "A"))
        + np.count_nonzero(b_wins & (prefs.preferred == "B"))
    )
    n_ties = int(np.count_nonzero(ties))
    if n_ties:
        if tie_rule == "half":
            correct += 0.5 * n_ties
        else:
            rng = np.random.default_rng(seed)
            picks = np.where(rng.integers(0, 2, size=n_ties) == 0, "A", "B")
            correct += float(np.count_nonzero(picks == prefs.preferred[ties]))
    return correct / len(prefs)


def foil_accuracy(
    gt_scores, foil_scores, tie_rule: str = "random", seed=None
) -> float:
    """Fraction of rows scoring the ground truth above its foil."""
    _check_tie_rule(tie_rule, seed)
    gt = _as_rank_input(gt_scores, "gt_scores")
    foil = _as_rank_input(foil_scores, "foil_scores")
    if gt.shape[0] != foil.shape[0]:
        raise DataError(
            f"lists disagree on length: gt has {gt.shape[0]}, foil has {foil.shape[0]}"
        )
    if gt.shape[0] == 0:
        raise DataError("empty score lists")
    wins = int(np.count_nonzero(gt > foil))
    n_ties = int(np.count_nonzero(gt == foil))
    credit = 0.0
    if n_ties:
        if tie_rule == "half":
            credit = 0.5 * n_ties
        else:
            rng = np.random.default_rng(seed)
            # Coin per tied row: 0 keeps the ground-truth pick.
            credit = float(np.count_nonzero(rng.integers(0, 2, size=n_ties) == 0))
    return (wins + credit) / gt.shape[0]


def lowest_of_three_accuracy(real, fake, foiled) -> float:
    """Fraction of triples where the foiled score is strictly the lowest."""
    r = _as_rank_input(real, "real")
    f = _as_rank_input(fake, "fake")
    fl = _as_rank_input(foiled, "foiled")
    if not (r.shape == f.shape == fl.shape):
        raise DataError(
            f"lists disagree on length: {r.shape[0]}, {f.shape[0]}, {fl.shape[0]}"
        )
    if r.shape[0] == 0:
        raise DataError("empty score lists")
    hits = np.count_nonzero((fl < r) & (fl < f))
    return float(hits) / r.shape[0]


@dataclass(frozen=True)
class JudgmentTable:
    """Items with a metric score and an ordinal judgment each."""

    ids: tuple
    scores: np.ndarray
    judgments: np.ndarray

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        scores = _as_rank_input(self.scores, "scores")
        judgments = _as_rank_input(self.judgments, "judgments")
        if not (len(ids) == scores.shape[0] == judgments.shape[0]):
            raise DataError(
                f"judgment table is ragged: {len(ids)} ids, {scores.shape[0]} scores, "
                f"{judgments.shape[0]} judgments"
            )
        if len(set(ids)) != len(ids):
            seen = set()
            dup = next(i for i in ids if i in seen or seen.add(i))
            raise DataError(f"duplicate item id {dup!r} in judgment table")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "judgments", judgments)

    def __len__(self) -> int:
        return len(self.ids)


def read_judgments(path, aggregate: str = "flatten") -> JudgmentTable:
    """Parse an `id<TAB>score<TAB>judgment` file (header optional, UTF-8).

    Items may carry several judgment rows. ``aggregate="flatten"`` keeps each
    row (repeat ids are suffixed #2, #3, ... to stay unique);
    ``aggregate="median"`` collapses repeats to their median score and median
    judgment.
    """
    if aggregate not in ("flatten", "median"):
        raise DataError(f"unknown aggregate mode {aggregate!r}")
    raw = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(
                    f"{path}: line {lineno}: expected 3 tab-separated fields, "
                    f"got {len(parts)}"
                )
            if lineno == 1:
                try:
                    float(parts[1]), float(parts[2])
                except ValueError:
                    continue  # header row
            try:
                raw.append((parts[0], float(parts[1]), float(parts[2])))
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
    if not raw:
        raise DataError(f"{path}: no judgment rows")

    if aggregate == "median":
        by_id: dict = {}
        order = []
        for item, score, judgment in raw:
            if item not in by_id:
                by_id[item] = ([], [])
                order.append(item)
            by_id[item][0].append(score)
            by_id[item][1].append(judgment)
        ids = order
        scores = [float(np.median(by_id[i][0])) for i in order]
        judgments = [float(np.median(by_id[i][1])) for i in order]
    else:
        counts: dict = {}
        ids, scores, judgments = [], [], []
        for item, score, judgment in raw:
            counts[item] = counts.get(item, 0) + 1
            ids.append(item if counts[item] == 1 else f"{item}#{counts[item]}")
            scores.append(score)
            judgments.append(judgment)

    return JudgmentTable(
        ids=tuple(ids),
        scores=np.array(scores, dtype=np.float64),
        judgments=np.array(judgments, dtype=np.float64),
    )
