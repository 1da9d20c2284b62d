"""Dispersion diagnostics: how tightly subject clusters pack before/after alignment.

The effective radius of a set of vectors is the root-mean-square Euclidean
distance from their centroid.  Comparing radii computed from unit-normalized
vectors before and after the shared-space mapping shows whether alignment
pulls same-subject courses together across campuses.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .catalog import Catalog
from .embed import EmbeddingTable
from .errors import (
    CoverageMismatchError,
    EmptyGroupError,
    MixedDimensionsError,
    UnknownCourseError,
)

Scope = str  # "system" | "institutional"


@dataclass(frozen=True)
class GroupDispersion:
    n_courses: int
    radius_before: float
    radius_after: float

    @property
    def delta(self) -> float:
        return self.radius_after - self.radius_before


@dataclass
class DispersionReport:
    scope: Scope
    per_group: dict  # group key -> GroupDispersion
    mean_delta: float | None
    share_decreased: float | None
    skipped_small: int
    skipped_missing_cip: int


def effective_radius(vectors: Iterable[np.ndarray] | np.ndarray) -> float:
    """RMS distance from the centroid; 0 for a single point.

    Translation and rotation invariant, which makes radii comparable across
    the raw and shared spaces.
    """
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        points = np.asarray(vectors, dtype=np.float64)
    else:
        rows = [np.asarray(v, dtype=np.float64) for v in vectors]
        if not rows:
            raise EmptyGroupError("effective_radius requires at least one vector")
        lengths = {r.shape for r in rows}
        if len(lengths) > 1 or any(r.ndim != 1 for r in rows):
            raise MixedDimensionsError(f"vectors disagree in shape: {sorted(lengths)}")
        points = np.stack(rows)
    if points.shape[0] == 0:
        raise EmptyGroupError("effective_radius requires at least one vector")
    centroid = points.mean(axis=0)
    sq = np.sum((points - centroid) ** 2, axis=1)
    return float(np.sqrt(sq.mean()))


def _normalized_matrix(table: EmbeddingTable, ids: Sequence[str]) -> np.ndarray:
    mat = table.matrix(ids)
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return mat / norms


def dispersion_report(
    table_before: EmbeddingTable,
    table_after: EmbeddingTable,
    catalog: Catalog,
    scope: Scope = "system",
) -> DispersionReport:
    """Per-group effective radii before and after alignment.

    system scope groups courses by 2-digit CIP across all institutions;
    institutional scope groups by (institution, CIP).  Groups with fewer than
    two courses are excluded and counted.  Radii are computed on
    unit-normalized vectors in both conditions.
    """
    if scope not in ("system", "institutional"):
        raise ValueError(f"unknown scope: {scope!r}")
    before_ids = set(table_before.vectors)
    after_ids = set(table_after.vectors)
    if before_ids != after_ids:
        missing = before_ids.symmetric_difference(after_ids)
        raise CoverageMismatchError(
            f"before/after tables cover different courses ({len(missing)} differ)"
        )

    groups: dict = {}
    skipped_missing_cip = 0
    for course_id in sorted(before_ids):
        if course_id not in catalog.courses:
            raise UnknownCourseError(f"embedded course not in catalog: {course_id!r}")
        course = catalog.courses[course_id]
        if course.cip2 is None:
            skipped_missing_cip += 1
            continue
        key = course.cip2 if scope == "system" else (course.institution_id, course.cip2)
        groups.setdefault(key, []).append(course_id)

    per_group: dict = {}
    skipped_small = 0
    for key in sorted(groups):
        ids = groups[key]
        if len(ids) < 2:
            skipped_small += 1
            continue
        r_before = effective_radius(_normalized_matrix(table_before, ids))
        r_after = effective_radius(_normalized_matrix(table_after, ids))
        per_group[key] = GroupDispersion(
            n_courses=len(ids), radius_before=r_before, radius_after=r_after
        )

    if per_group:
        deltas = np.array([g.delta for g in per_group.values()])
        mean_delta = float(deltas.mean())
        share_decreased = float(np.count_nonzero(deltas < 0) / deltas.size)
    else:
        mean_delta = None
        share_decreased = None

    return DispersionReport(
        scope=scope,
        per_group=per_group,
        mean_delta=mean_delta,
        share_decreased=share_decreased,
        skipped_small=skipped_small,
        skipped_missing_cip=skipped_missing_cip,
    )
