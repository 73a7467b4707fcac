"""Similarity-driven cluster management.

The same machinery runs at the edge level on client update deltas and at
the cloud level on specialized-model deltas: build a cosine similarity
matrix, test whether a cluster should split, find the bipartition that
minimizes the worst cross-pair similarity, and certify the split before
committing it.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from .errors import DegenerateDeltaError
from .learner import ModelParams

EXHAUSTIVE_LIMIT = 12  # 2^(n-1)-1 candidate bipartitions up to 2047


@dataclass
class Cluster:
    """A group of clients sharing one specialized model."""

    id: int
    members: tuple[int, ...]
    model: ModelParams
    stopped: bool = False
    parent: int | None = None
    split_round: int | None = None

    def __post_init__(self):
        if not self.members:
            raise ValueError("cluster must have members")
        self.members = tuple(sorted(self.members))


@dataclass
class SimilarityMatrix:
    """Symmetric cosine matrix over the ids of non-degenerate deltas."""

    ids: tuple[int, ...]
    entries: np.ndarray

    def value(self, a: int, b: int) -> float:
        i, j = self.ids.index(a), self.ids.index(b)
        return float(self.entries[i, j])


class SplitDecision(enum.Enum):
    SPLIT = "split"
    CONTINUE = "continue"
    STOP = "stop"


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of two update deltas, clamped to [-1, 1] against rounding."""
    if a.shape != b.shape:
        raise ValueError("deltas must have equal length")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise DegenerateDeltaError("cosine undefined for a zero-norm delta")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def build_similarity(deltas: Mapping[int, np.ndarray]) -> SimilarityMatrix:
    """Pairwise cosine matrix; zero-norm deltas are excluded (their owners
    count as converged and take no part in direction comparisons)."""
    ids = tuple(sorted(i for i, d in deltas.items()
                       if np.linalg.norm(d) > 0.0))
    mat = np.stack([deltas[i] for i in ids]) if ids else np.zeros((0, 0))
    if ids:
        norms = np.linalg.norm(mat, axis=1, keepdims=True)
        unit = mat / norms
        entries = np.clip(unit @ unit.T, -1.0, 1.0)
        np.fill_diagonal(entries, 1.0)
    else:
        entries = mat
    return SimilarityMatrix(ids=ids, entries=entries)


def check_split(deltas: Sequence[np.ndarray], weights: Sequence[float],
                eps1: float, eps2: float) -> SplitDecision:
    """Trichotomy on a cluster's update deltas.

    SPLIT when the weighted mean delta has collapsed (below eps1) while some
    member still moves strongly (above eps2); STOP when every member's
    delta is below eps2; CONTINUE otherwise.
    """
    if len(deltas) == 0:
        raise ValueError("check_split needs at least one delta")
    if eps1 <= 0 or eps2 <= 0:
        raise ValueError("eps1 and eps2 must be positive")
    w = np.asarray(weights, dtype=float)
    if w.shape[0] != len(deltas) or w.sum() <= 0:
        raise ValueError("weights must match deltas and have positive sum")
    mean = sum(wi * d for wi, d in zip(w / w.sum(), deltas))
    mean_norm = float(np.linalg.norm(mean))
    max_norm = max(float(np.linalg.norm(d)) for d in deltas)
    if mean_norm < eps1 and max_norm > eps2:
        return SplitDecision.SPLIT
    if max_norm < eps2:
        return SplitDecision.STOP
    return SplitDecision.CONTINUE


def _max_cross(entries: np.ndarray, left: Sequence[int],
               right: Sequence[int]) -> float:
    return float(entries[np.ix_(left, right)].max())


def bipartition(sim: SimilarityMatrix) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Split the matrix ids into two groups minimizing the maximum
    cross-group similarity.

    Exhaustive over all bipartitions up to EXHAUSTIVE_LIMIT members;
    complete-linkage agglomerative clustering on distance 1 - cos beyond
    that. Ties break toward the lexicographically smallest first group
    (which always contains the smallest id).
    """
    n = len(sim.ids)
    if n < 2:
        raise ValueError("bipartition needs at least two members")
    if n <= EXHAUSTIVE_LIMIT:
        best: tuple[float, tuple[int, ...]] | None = None
        rest = list(range(1, n))
        for r in range(0, n - 1):
            for combo in itertools.combinations(rest, r):
                left = (0,) + combo
                right = [i for i in rest if i not in combo]
                score = _max_cross(sim.entries, left, right)
                key = (score, tuple(sim.ids[i] for i in left))
                if best is None or key < best:
                    best = key
        assert best is not None
        c1 = best[1]
        c2 = tuple(i for i in sim.ids if i not in c1)
        return c1, c2
    dist = 1.0 - sim.entries
    np.fill_diagonal(dist, 0.0)
    labels = fcluster(linkage(squareform(dist, checks=False), method="complete"),
                      t=2, criterion="maxclust")
    first_label = labels[0]
    c1 = tuple(sim.ids[i] for i in range(n) if labels[i] == first_label)
    c2 = tuple(sim.ids[i] for i in range(n) if labels[i] != first_label)
    return c1, c2


def gamma_check(deltas: Mapping[int, np.ndarray], c1: Sequence[int],
                c2: Sequence[int], sim: SimilarityMatrix) -> bool:
    """Certify a candidate split before committing it.

    Each member's relative drift from its side's mean delta must stay
    under sqrt((1 - max cross similarity) / 2); a congruent side keeps
    drifts near zero while a well-separated split keeps the threshold
    large, so only clean two-mode structure passes.
    """
    idx = {cid: i for i, cid in enumerate(sim.ids)}
    left = [idx[c] for c in c1 if c in idx]
    right = [idx[c] for c in c2 if c in idx]
    if not left or not right:
        raise ValueError("both sides must contain non-degenerate deltas")
    max_cross = _max_cross(sim.entries, left, right)
    threshold = math.sqrt((1.0 - max_cross) / 2.0)
    worst = 0.0
    for side in (c1, c2):
        present = [c for c in side if c in idx]
        side_mean = np.mean([deltas[c] for c in present], axis=0)
        ref = float(np.linalg.norm(side_mean))
        if ref == 0.0:
            raise DegenerateDeltaError("side mean delta has zero norm")
        for c in present:
            worst = max(worst, float(np.linalg.norm(side_mean - deltas[c])) / ref)
    return worst < threshold


def cross_and_intra(sim: SimilarityMatrix, groups: Sequence[Sequence[int]]
                    ) -> tuple[float, float, float]:
    """(max cross-group cosine, min within-group cosine, separation gap).

    Groups must partition the matrix ids. A group with a single member is
    trivially self-congruent and contributes +1 to the intra side.
    """
    flat = sorted(i for g in groups for i in g)
    if flat != sorted(sim.ids) or len(flat) != len(set(flat)):
        raise ValueError("groups must partition the similarity matrix ids")
    idx = {cid: i for i, cid in enumerate(sim.ids)}
    max_cross = -1.0
    min_intra = 1.0
    for a, ga in enumerate(groups):
        for b in range(a + 1, len(groups)):
            gb = groups[b]
            if ga and gb:
                max_cross = max(max_cross, _max_cross(
                    sim.entries, [idx[i] for i in ga], [idx[i] for i in gb]))
        for i, j in itertools.combinations(ga, 2):
            min_intra = min(min_intra, float(sim.entries[idx[i], idx[j]]))
    return max_cross, min_intra, min_intra - max_cross
