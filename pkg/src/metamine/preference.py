"""Preference-matrix construction from paired base-level outcomes, and the
rank-correlation similarity targets the metric objectives fit against."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import stats

from .data_model import PreferenceMatrix


class PairOutcome(str, Enum):
    K_WINS = "k_wins"
    L_WINS = "l_wins"
    TIE = "tie"


class SimilarityAxis(str, Enum):
    DATASETS = "datasets"
    WORKFLOWS = "workflows"


@dataclass(frozen=True)
class OutcomeCube:
    """Per-dataset matrices of per-instance correctness indicators.

    matrices[i] has shape (instances_i, m): rows are held-out instances
    pooled across CV folds, columns follow workflow_ids. All workflows of a
    dataset share the same instance axis, so comparisons are paired.
    """

    dataset_ids: tuple
    workflow_ids: tuple
    matrices: tuple  # one (instances_i x m) array per dataset

    def __post_init__(self):
        object.__setattr__(self, "dataset_ids", tuple(self.dataset_ids))
        object.__setattr__(self, "workflow_ids", tuple(self.workflow_ids))
        mats = tuple(np.asarray(m, dtype=float) for m in self.matrices)
        object.__setattr__(self, "matrices", mats)
        if len(mats) != len(self.dataset_ids):
            raise ValueError("one correctness matrix required per dataset")
        m = len(self.workflow_ids)
        for i, mat in enumerate(mats):
            if mat.ndim != 2 or mat.shape[1] != m:
                raise ValueError(f"dataset {i}: matrix must have {m} workflow columns")
            if mat.shape[0] < 1:
                raise ValueError(f"dataset {i}: needs at least one instance")
            if not np.isin(mat, (0.0, 1.0)).all():
                raise ValueError(f"dataset {i}: correctness entries must be 0/1")


@dataclass(frozen=True)
class SimilarityTarget:
    """Symmetric rank-correlation matrix over entities of one axis.

    Entities with constant preference vectors (correlation undefined) get 0
    off-diagonal / 1 on-diagonal and are listed in constant_entities.
    """

    matrix: np.ndarray
    axis: SimilarityAxis
    constant_entities: tuple = ()

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "constant_entities", tuple(self.constant_entities))


def mcnemar_significant(correct_k, correct_l, alpha_level=0.05,
                        exact=False) -> PairOutcome:
    """Paired significance comparison of two workflows' correctness vectors.

    Uses the continuity-corrected chi-square statistic (|b-c|-1)^2/(b+c)
    against the chi-square(1) critical value. With exact=True and fewer
    than 25 discordant pairs, an exact two-sided binomial test is used
    instead. b+c = 0 is always a tie.
    """
    k = np.asarray(correct_k, dtype=float)
    l = np.asarray(correct_l, dtype=float)
    if k.shape != l.shape:
        raise ValueError(f"length mismatch: {k.shape} vs {l.shape}")
    b = int(np.sum((k == 1) & (l == 0)))  # k right, l wrong
    c = int(np.sum((k == 0) & (l == 1)))  # k wrong, l right
    if b + c == 0:
        return PairOutcome.TIE
    if exact and b + c < 25:
        tail = stats.binom.cdf(min(b, c), b + c, 0.5)
        significant = min(1.0, 2.0 * tail) < alpha_level
    else:
        statistic = (abs(b - c) - 1.0) ** 2 / (b + c)
        significant = statistic > stats.chi2.ppf(1.0 - alpha_level, 1)
    if not significant:
        return PairOutcome.TIE
    return PairOutcome.K_WINS if b > c else PairOutcome.L_WINS


def _tally(m, outcome_of_pair):
    scores = np.zeros(m)
    for k in range(m):
        for l in range(k + 1, m):
            outcome = outcome_of_pair(k, l)
            if outcome is PairOutcome.K_WINS:
                scores[k] += 1.0
            elif outcome is PairOutcome.L_WINS:
                scores[l] += 1.0
            else:
                scores[k] += 0.5
                scores[l] += 0.5
    return scores


def score_dataset(correctness, alpha_level=0.05, exact=False) -> np.ndarray:
    """Comparison points of every workflow on one dataset.

    correctness: (instances x m) 0/1 matrix. Each unordered workflow pair is
    compared once with McNemar; the resulting score vector sums to
    m(m-1)/2.
    """
    mat = np.asarray(correctness, dtype=float)
    m = mat.shape[1]
    if m < 2:
        raise ValueError("need at least two workflows to compare")
    return _tally(m, lambda k, l: mcnemar_significant(
        mat[:, k], mat[:, l], alpha_level, exact=exact))


def score_from_outcomes(pair_outcomes) -> np.ndarray:
    """Score vector from a precomputed m x m significance table.

    pair_outcomes[k][l] (k < l) holds the PairOutcome of workflows k vs l;
    entries elsewhere are ignored.
    """
    m = len(pair_outcomes)
    return _tally(m, lambda k, l: pair_outcomes[k][l])


def build_preference_matrix(cube: OutcomeCube, alpha_level=0.05,
                            exact=False) -> PreferenceMatrix:
    """Populate R: row i holds the comparison points of all workflows on
    dataset i."""
    rows = [score_dataset(mat, alpha_level, exact=exact) for mat in cube.matrices]
    r = PreferenceMatrix(dataset_ids=cube.dataset_ids,
                         workflow_ids=cube.workflow_ids,
                         scores=np.vstack(rows))
    r.check_invariants()
    return r


def build_preference_from_significance(dataset_ids, workflow_ids,
                                       outcomes) -> PreferenceMatrix:
    """Alternate ingestion path: outcomes[i] is an m x m table of
    PairOutcome for dataset i (upper triangle used)."""
    rows = [score_from_outcomes(tab) for tab in outcomes]
    r = PreferenceMatrix(dataset_ids=tuple(dataset_ids),
                         workflow_ids=tuple(workflow_ids),
                         scores=np.vstack(rows))
    r.check_invariants()
    return r


def spearman(x, y):
    """Tie-aware Spearman correlation: Pearson over average ranks.

    Returns nan when either vector is constant (correlation undefined).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise ValueError("need at least two observations")
    if np.all(x == x[0]) or np.all(y == y[0]):
        return float("nan")
    rx = stats.rankdata(x, method="average")
    ry = stats.rankdata(y, method="average")
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    return float(rx @ ry / np.sqrt((rx @ rx) * (ry @ ry)))


def similarity_target(r: PreferenceMatrix, axis: SimilarityAxis) -> SimilarityTarget:
    """Rank-correlation similarity matrix over R's rows (datasets) or
    columns (workflows)."""
    if axis is SimilarityAxis.DATASETS:
        vectors = r.scores
    else:
        vectors = r.scores.T
    k = vectors.shape[0]
    constant = [i for i in range(k) if np.all(vectors[i] == vectors[i][0])]
    out = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            if i in constant or j in constant:
                value = 0.0
            else:
                value = spearman(vectors[i], vectors[j])
            out[i, j] = out[j, i] = value
    return SimilarityTarget(matrix=out, axis=axis,
                            constant_entities=tuple(constant))
