"""Similarity thresholding: pseudo-negatives, ROC analysis, catalog expansion.

Positives are cosine scores of established pairs in the shared space;
negatives come from randomly sampled non-articulated lower-division course
pairs across institutions.  The operating threshold maximizes Youden's J
(TPR - FPR) over the swept ROC.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .catalog import ArticulationPair, Catalog, institution_of
from .embed import EmbeddingTable
from .errors import (
    EmptyScoresError,
    InsufficientPopulationError,
    MissingEmbeddingError,
)

logger = logging.getLogger(__name__)

# Below this many feasible pairs the sampler enumerates instead of rejecting.
_ENUMERATION_CEILING = 200_000


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    tpr: float
    fpr: float
    tnr: float
    fnr: float


@dataclass
class ThresholdReport:
    roc: list[RocPoint]
    auc: float
    best_threshold: float | None
    pos_mean: float
    neg_mean: float
    n_pos: int
    n_neg: int

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "best_threshold": self.best_threshold,
            "pos_mean": self.pos_mean,
            "neg_mean": self.neg_mean,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
            "roc_points": len(self.roc),
        }


@dataclass
class ExpansionResult:
    """Proposed new articulations above the operating threshold."""

    new_pairs: list[tuple[str, str, float]]  # (source, target, cosine), canonical order
    excluded_existing: int
    by_segment: dict[str, int]
    ratio_vs_existing: float | None
    threshold: float
    mode: str


def pair_scores(
    shared_table: EmbeddingTable, pairs: Sequence[ArticulationPair]
) -> tuple[np.ndarray, int]:
    """Cosine score per pair in the shared space; skips unembeddable pairs.

    Returns (scores, n_skipped).
    """
    scores = []
    skipped = 0
    for pair in pairs:
        source, target = pair.source_course_id, pair.target_course_id
        if source not in shared_table or target not in shared_table:
            skipped += 1
            continue
        a = shared_table[source]
        b = shared_table[target]
        denom = float(np.linalg.norm(a) * np.linalg.norm(b))
        if denom == 0:
            raise MissingEmbeddingError(f"zero-norm vector in pair {source!r} -> {target!r}")
        scores.append(float(a @ b) / denom)
    if skipped:
        logger.warning("pair_scores skipped %d pairs without embeddings", skipped)
    return np.asarray(scores, dtype=np.float64), skipped


def _eligible_courses(catalog: Catalog) -> list[str]:
    """Transferable lower-division courses, sorted by id."""
    return sorted(
        c.id
        for c in catalog.courses.values()
        if c.transferable and c.level == "lower_division"
    )


def sample_pseudo_negatives(
    catalog: Catalog,
    established_pairs: Sequence[ArticulationPair],
    n: int,
    seed: int,
) -> list[tuple[str, str]]:
    """Sample n distinct ordered cross-institution course pairs with no record.

    Eligible endpoints are transferable lower-division courses.  A pair is
    excluded when either direction is established.  Deterministic per seed.
    """
    if n <= 0:
        raise ValueError(f"sample size must be positive, got {n}")
    eligible = _eligible_courses(catalog)
    eligible_set = set(eligible)
    by_inst: dict[str, int] = {}
    for course_id in eligible:
        inst = institution_of(course_id)
        by_inst[inst] = by_inst.get(inst, 0) + 1
    total = len(eligible)
    cross_pairs = sum(count * (total - count) for count in by_inst.values())

    blocked: set[tuple[str, str]] = set()
    for pair in established_pairs:
        s, t = pair.source_course_id, pair.target_course_id
        if s in eligible_set and t in eligible_set and institution_of(s) != institution_of(t):
            blocked.add((s, t))
            blocked.add((t, s))
    feasible = cross_pairs - len(blocked)
    if n > feasible:
        raise InsufficientPopulationError(
            f"requested {n} pseudo-negatives but only {feasible} eligible pairs exist"
        )

    rng = np.random.default_rng(seed)
    if feasible <= max(_ENUMERATION_CEILING, 4 * n):
        population = [
            (a, b)
            for a in eligible
            for b in eligible
            if institution_of(a) != institution_of(b) and (a, b) not in blocked
        ]
        chosen = rng.choice(len(population), size=n, replace=False)
        return [population[int(i)] for i in chosen]

    picked: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    attempts = 0
    limit = 200 * n + 10_000
    while len(picked) < n:
        attempts += 1
        if attempts > limit:
            raise InsufficientPopulationError(
                f"sampler failed to find {n} pairs after {attempts} attempts"
            )
        a = eligible[int(rng.integers(total))]
        b = eligible[int(rng.integers(total))]
        if a == b or institution_of(a) == institution_of(b):
            continue
        pair = (a, b)
        if pair in blocked or pair in seen:
            continue
        seen.add(pair)
        picked.append(pair)
    return picked


def roc_auc(pos_scores: Iterable[float], neg_scores: Iterable[float]) -> ThresholdReport:
    """Sweep every distinct observed score as a classification threshold.

    A score counts as predicted-positive when score >= threshold.  A sentinel
    above the maximum yields the (0, 0) corner.  AUC is the trapezoidal area
    under the resulting (FPR, TPR) curve, which equals the probability that a
    random positive outscores a random negative (ties counted half).
    """
    pos = np.asarray(list(pos_scores), dtype=np.float64)
    neg = np.asarray(list(neg_scores), dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise EmptyScoresError("both positive and negative score sets must be non-empty")
    for name, arr in (("positive", pos), ("negative", neg)):
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{name} scores contain non-finite values")
        if arr.min() < -1.0 - 1e-9 or arr.max() > 1.0 + 1e-9:
            raise ValueError(f"{name} scores fall outside [-1, 1]")

    observed = np.unique(np.concatenate([pos, neg]))[::-1]  # descending
    thresholds = np.concatenate([[observed[0] + 1.0], observed])
    pos_sorted = np.sort(pos)
    neg_sorted = np.sort(neg)
    # count of scores >= t via binary search on the sorted arrays
    tpr = (pos.size - np.searchsorted(pos_sorted, thresholds, side="left")) / pos.size
    fpr = (neg.size - np.searchsorted(neg_sorted, thresholds, side="left")) / neg.size

    points = [
        RocPoint(
            threshold=float(t),
            tpr=float(tp),
            fpr=float(fp),
            tnr=float(1.0 - fp),
            fnr=float(1.0 - tp),
        )
        for t, tp, fp in zip(thresholds, tpr, fpr)
    ]
    # fpr ascends as the threshold drops; integrate TPR over FPR
    auc = 0.0
    for a, b in zip(points[:-1], points[1:]):
        auc += (b.fpr - a.fpr) * (b.tpr + a.tpr) / 2.0

    return ThresholdReport(
        roc=points,
        auc=float(auc),
        best_threshold=None,
        pos_mean=float(pos.mean()),
        neg_mean=float(neg.mean()),
        n_pos=int(pos.size),
        n_neg=int(neg.size),
    )


def best_threshold(report: ThresholdReport) -> float:
    """Threshold maximizing Youden's J = TPR - FPR; ties pick the largest."""
    if not report.roc:
        raise EmptyScoresError("report has no ROC points")
    j = np.array([p.tpr - p.fpr for p in report.roc])
    # points are ordered by descending threshold, so the first argmax wins ties
    return float(report.roc[int(np.argmax(j))].threshold)


def with_best_threshold(report: ThresholdReport) -> ThresholdReport:
    return replace(report, best_threshold=best_threshold(report))


def expand(
    shared_table: EmbeddingTable,
    catalog: Catalog,
    established_pairs: Sequence[ArticulationPair],
    threshold: float,
    mode: str = "per_institution",
) -> ExpansionResult:
    """Propose new articulations above the threshold.

    per_institution mode keeps, for every (source course, other institution),
    the single most similar transferable course there when its cosine clears
    the threshold.  global mode keeps only each source course's single best
    candidate across all other institutions.  Candidates that are already
    established count toward excluded_existing instead.
    """
    if mode not in ("per_institution", "global"):
        raise ValueError(f"unknown expansion mode: {mode!r}")
    established = {(p.source_course_id, p.target_course_id) for p in established_pairs}

    institutions = catalog.institution_ids()
    pools: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for inst in institutions:
        ids = [
            c.id
            for c in catalog.courses_at(inst, transferable_only=True)
            if c.id in shared_table
        ]
        if not ids:
            continue
        mat = shared_table.matrix(ids)
        norms = np.linalg.norm(mat, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        pools[inst] = (np.array(ids, dtype=object), mat / norms)

    sources = [
        c.id
        for c in catalog.courses.values()
        if c.transferable and c.id in shared_table
    ]
    sources.sort()
    src_inst = np.array([institution_of(c) for c in sources], dtype=object)
    src_mat = shared_table.matrix(sources)
    src_norms = np.linalg.norm(src_mat, axis=1, keepdims=True)
    src_norms[src_norms == 0] = 1.0
    src_unit = src_mat / src_norms

    # (source, target, cosine) winner per (source, receiving institution)
    winners: dict[str, list[tuple[str, str, float]]] = {c: [] for c in sources}
    chunk = 2048
    for inst, (pool_ids, pool_unit) in pools.items():
        rows = np.flatnonzero(src_inst != inst)
        for start in range(0, len(rows), chunk):
            part = rows[start : start + chunk]
            scores = src_unit[part] @ pool_unit.T
            best_idx = np.argmax(scores, axis=1)  # pool ids sorted, first max = smallest id
            for local, row in enumerate(part):
                source = sources[int(row)]
                target = str(pool_ids[best_idx[local]])
                winners[source].append((source, target, float(scores[local, best_idx[local]])))

    candidates: list[tuple[str, str, float]] = []
    if mode == "per_institution":
        for source in sources:
            candidates.extend(winners[source])
    else:
        for source in sources:
            if winners[source]:
                candidates.append(min(winners[source], key=lambda w: (-w[2], w[1])))

    new_pairs: list[tuple[str, str, float]] = []
    excluded_existing = 0
    for source, target, cosine in candidates:
        if cosine < threshold:
            continue
        if (source, target) in established:
            excluded_existing += 1
            continue
        new_pairs.append((source, target, cosine))
    new_pairs.sort(key=lambda p: (p[0], p[1]))

    by_segment: dict[str, int] = {}
    for source, target, _ in new_pairs:
        src_seg = catalog.segment_short(institution_of(source))
        tgt_seg = catalog.segment_short(institution_of(target))
        key = f"{src_seg}->{tgt_seg}"
        by_segment[key] = by_segment.get(key, 0) + 1

    ratio = len(new_pairs) / len(established) if established else None
    return ExpansionResult(
        new_pairs=new_pairs,
        excluded_existing=excluded_existing,
        by_segment=by_segment,
        ratio_vs_existing=ratio,
        threshold=threshold,
        mode=mode,
    )


def project_adoption(
    n_candidates: int, adoption_rate: float, n_existing: int
) -> tuple[int, float]:
    """Expected accepted candidates (half-up rounding) and catalog fold increase."""
    if n_candidates < 0:
        raise ValueError("candidate count must be non-negative")
    if not 0.0 <= adoption_rate <= 1.0:
        raise ValueError(f"adoption rate must be in [0, 1], got {adoption_rate}")
    if n_existing < 1:
        raise ValueError("existing pair count must be >= 1")
    expected_accepted = int(math.floor(n_candidates * adoption_rate + 0.5))
    fold_increase = (n_existing + expected_accepted) / n_existing
    return expected_accepted, fold_increase
