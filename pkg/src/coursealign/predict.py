"""Articulation prediction by cosine nearest neighbors in the shared space.

The candidate pool for a query is every transferable course of the receiving
institution that has an embedding, minus the query course itself.  Ties in
cosine are broken by ascending course id so rankings are fully deterministic.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .catalog import ArticulationPair, Catalog, FoldAssignment, institution_of, make_folds
from .embed import EmbeddingTable
from .errors import EmptyPoolError, MissingEmbeddingError
from .ssa import AlignmentModel, SsaConfig, encode_shared, train_ssa

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RankedCandidates:
    """Top-k candidate target courses for one source course."""

    source_course_id: str
    receiving_institution_id: str
    entries: tuple[tuple[str, float], ...]  # (course_id, cosine), best first

    def course_ids(self) -> list[str]:
        return [course_id for course_id, _ in self.entries]


@dataclass
class RecallResult:
    recall: float
    correct: int
    total: int
    skipped: int


@dataclass
class EvalReport:
    """Cross-validation summary; recalls are pooled over all folds."""

    recall_at_1: float
    recall_at_5: float
    correct_at_k: dict[int, int]
    total: int
    skipped: int
    per_fold: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "recall_at_1": self.recall_at_1,
            "recall_at_5": self.recall_at_5,
            "correct_at_k": {str(k): v for k, v in sorted(self.correct_at_k.items())},
            "total": self.total,
            "skipped": self.skipped,
            "per_fold": self.per_fold,
        }


class _Pool:
    """Embedded transferable courses of one institution, unit-normalized."""

    def __init__(self, shared: EmbeddingTable, catalog: Catalog, institution_id: str):
        courses = catalog.courses_at(institution_id, transferable_only=True)
        self.ids = np.array([c.id for c in courses if c.id in shared], dtype=object)
        if len(self.ids):
            mat = shared.matrix(list(self.ids))
            norms = np.linalg.norm(mat, axis=1, keepdims=True)
            norms[norms == 0] = 1.0
            self.unit = mat / norms
        else:
            self.unit = np.empty((0, shared.dim))
        self.row_of: dict[str, int] = {cid: k for k, cid in enumerate(self.ids)}

    def scores_for(self, vector: np.ndarray) -> np.ndarray:
        norm = float(np.linalg.norm(vector))
        if norm == 0:
            return np.zeros(len(self.ids))
        return self.unit @ (vector / norm)


def _pools(shared: EmbeddingTable, catalog: Catalog) -> dict[str, _Pool]:
    return {inst: _Pool(shared, catalog, inst) for inst in catalog.institution_ids()}


def rank_candidates(
    shared_table: EmbeddingTable,
    catalog: Catalog,
    source_course_id: str,
    receiving_institution_id: str,
    k: int,
) -> RankedCandidates:
    """Exhaustive cosine scan of the receiving institution's pool."""
    if source_course_id not in shared_table:
        raise MissingEmbeddingError(f"no embedding for source course {source_course_id!r}")
    catalog.institution(receiving_institution_id)
    pool = _Pool(shared_table, catalog, receiving_institution_id)
    mask = np.asarray(pool.ids != source_course_id, dtype=bool)
    ids = pool.ids[mask]
    if len(ids) == 0:
        raise EmptyPoolError(
            f"no embedded transferable candidates at {receiving_institution_id!r}"
        )
    scores = pool.scores_for(shared_table[source_course_id])[mask]
    order = np.lexsort((ids, -scores))  # cosine desc, then id asc
    top = order[: max(k, 0)]
    entries = tuple((str(ids[i]), float(scores[i])) for i in top)
    return RankedCandidates(source_course_id, receiving_institution_id, entries)


def _evaluate_pairs(
    shared: EmbeddingTable,
    catalog: Catalog,
    eval_pairs: Sequence[ArticulationPair],
    ks: Sequence[int],
) -> tuple[dict[int, int], int, int]:
    """Count top-k hits per k.  Returns (correct_at_k, total, skipped).

    Pairs whose endpoints cannot be embedded, or whose target is absent from
    the receiving pool, are skipped and excluded from both numerator and
    denominator.
    """
    pools: dict[str, _Pool] = {}
    correct = {k: 0 for k in ks}
    total = 0
    skipped = 0
    for pair in eval_pairs:
        source, target = pair.source_course_id, pair.target_course_id
        if source not in shared or target not in shared:
            skipped += 1
            continue
        inst = institution_of(target)
        pool = pools.get(inst)
        if pool is None:
            pool = pools[inst] = _Pool(shared, catalog, inst)
        target_row = pool.row_of.get(target)
        if target_row is None:
            skipped += 1
            continue
        scores = pool.scores_for(shared[source])
        target_score = scores[target_row]
        id_before = np.asarray(pool.ids < target, dtype=bool)
        ahead = (scores > target_score) | ((scores == target_score) & id_before)
        if source in pool.row_of:
            ahead[pool.row_of[source]] = False  # query never competes with itself
        rank = int(np.count_nonzero(ahead))
        total += 1
        for k in ks:
            if rank < k:
                correct[k] += 1
    return correct, total, skipped


def recall_at_k(
    model: AlignmentModel,
    embeddings: EmbeddingTable,
    eval_pairs: Sequence[ArticulationPair],
    k: int,
    catalog: Catalog,
) -> RecallResult:
    """Fraction of pairs whose true target appears in the top-k candidates."""
    shared = encode_shared(model, embeddings)
    correct, total, skipped = _evaluate_pairs(shared, catalog, eval_pairs, [k])
    if skipped:
        logger.warning("recall_at_k skipped %d pairs with unembeddable endpoints", skipped)
    recall = correct[k] / total if total else 0.0
    return RecallResult(recall=recall, correct=correct[k], total=total, skipped=skipped)


def cross_validate(
    catalog: Catalog,
    embeddings: EmbeddingTable,
    pairs: Sequence[ArticulationPair],
    ssa_config: SsaConfig | None = None,
    k_folds: int = 5,
    folds: FoldAssignment | None = None,
) -> EvalReport:
    """K-fold evaluation: train on k-1 folds, rank the held-out fold.

    Every pair is evaluated exactly once.  Pooled recall is total correct
    over total evaluated, not a mean of per-fold recalls.
    """
    ssa_config = ssa_config or SsaConfig()
    if folds is None:
        folds = make_folds(pairs, k_folds, ssa_config.seed)
    ks = (1, 5)
    institutions = catalog.institution_ids()
    correct_at_k = {k: 0 for k in ks}
    total = 0
    skipped = 0
    per_fold: list[dict] = []
    for fold_index in range(folds.k):
        train_pairs = folds.complement(fold_index)
        eval_pairs = folds.fold(fold_index)
        model = train_ssa(embeddings, train_pairs, institutions, ssa_config)
        shared = encode_shared(model, embeddings)
        fold_correct, fold_total, fold_skipped = _evaluate_pairs(shared, catalog, eval_pairs, ks)
        for k in ks:
            correct_at_k[k] += fold_correct[k]
        total += fold_total
        skipped += fold_skipped
        per_fold.append(
            {
                "fold": fold_index,
                "total": fold_total,
                "skipped": fold_skipped,
                "correct_at_1": fold_correct[1],
                "correct_at_5": fold_correct[5],
                "recall_at_1": fold_correct[1] / fold_total if fold_total else 0.0,
                "recall_at_5": fold_correct[5] / fold_total if fold_total else 0.0,
                "final_loss": model.final_loss,
            }
        )
    return EvalReport(
        recall_at_1=correct_at_k[1] / total if total else 0.0,
        recall_at_5=correct_at_k[5] / total if total else 0.0,
        correct_at_k=correct_at_k,
        total=total,
        skipped=skipped,
        per_fold=per_fold,
    )
