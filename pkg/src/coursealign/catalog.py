"""Domain data model and CSV ingestion.

Institutions, courses, established articulation pairs, and per-student
enrollment sequences.  Course ids are globally unique strings of the form
``<institution_id>:<local_code>``; the loaders enforce that the prefix matches
the owning institution, which lets downstream stages resolve a course's
institution without a catalog lookup.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Mapping, Sequence

import numpy as np

from .errors import (
    DuplicateIdError,
    EmptyInputError,
    MalformedRowError,
    SelfPairError,
    TooFewPairsError,
    UnknownCourseError,
    UnknownInstitutionError,
)

logger = logging.getLogger(__name__)

Segment = Literal["two_year", "four_year"]
Level = Literal["lower_division", "upper_division"]

# CSV column contracts.
_INSTITUTION_COLUMNS = ["id", "name", "segment"]
_COURSE_COLUMNS = ["id", "institution_id", "title", "description", "cip2", "level", "transferable"]
_ARTICULATION_COLUMNS = ["source_course_id", "target_course_id"]
_ENROLLMENT_COLUMNS = ["student_id", "term_index", "course_id"]

_SEGMENT_CODES: dict[str, Segment] = {"2": "two_year", "4": "four_year"}
_SEGMENT_SHORT: dict[Segment, str] = {"two_year": "2", "four_year": "4"}
_LEVEL_CODES: dict[str, Level] = {"L": "lower_division", "U": "upper_division"}

#: The four transfer pathway labels, source segment first.
PATHWAYS = ("2->2", "2->4", "4->2", "4->4")


@dataclass(frozen=True)
class Institution:
    id: str
    name: str
    segment: Segment


@dataclass(frozen=True)
class Course:
    id: str
    institution_id: str
    title: str
    description: str
    cip2: str | None
    level: Level
    transferable: bool


@dataclass(frozen=True)
class ArticulationPair:
    """Directed credit-transfer equivalence: source course satisfies target."""

    source_course_id: str
    target_course_id: str
    status: str = "established"


@dataclass(frozen=True)
class EnrollmentSequence:
    """One student's courses ordered by academic term."""

    student_id: str
    events: tuple[tuple[int, str], ...]

    def course_ids(self) -> list[str]:
        return [course_id for _, course_id in self.events]


def institution_of(course_id: str) -> str:
    """Institution prefix of a ``<institution_id>:<local_code>`` course id."""
    return course_id.split(":", 1)[0]


@dataclass
class Catalog:
    """Validated institutions and courses; immutable by convention after load."""

    institutions: dict[str, Institution]
    courses: dict[str, Course]

    def course(self, course_id: str) -> Course:
        try:
            return self.courses[course_id]
        except KeyError:
            raise UnknownCourseError(f"course id not in catalog: {course_id!r}") from None

    def institution(self, institution_id: str) -> Institution:
        try:
            return self.institutions[institution_id]
        except KeyError:
            raise UnknownInstitutionError(
                f"institution id not in catalog: {institution_id!r}"
            ) from None

    def institution_ids(self) -> list[str]:
        return sorted(self.institutions)

    def courses_at(self, institution_id: str, transferable_only: bool = False) -> list[Course]:
        """Courses of one institution, sorted by id."""
        self.institution(institution_id)
        rows = [c for c in self.courses.values() if c.institution_id == institution_id]
        if transferable_only:
            rows = [c for c in rows if c.transferable]
        return sorted(rows, key=lambda c: c.id)

    def segment_short(self, institution_id: str) -> str:
        return _SEGMENT_SHORT[self.institution(institution_id).segment]

    def pathway_of(self, pair: ArticulationPair) -> str:
        src = self.course(pair.source_course_id)
        tgt = self.course(pair.target_course_id)
        return f"{self.segment_short(src.institution_id)}->{self.segment_short(tgt.institution_id)}"


def _read_rows(path: str | Path, columns: Sequence[str]):
    """Yield (line_number, row) from an RFC-4180 CSV, validating the header."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRowError(f"{path}: empty file, expected header {','.join(columns)}") from None
        if header != list(columns):
            raise MalformedRowError(
                f"{path}: bad header {header!r}, expected {list(columns)!r}", line=1
            )
        for row in reader:
            if not row:
                continue  # tolerate blank lines
            if len(row) != len(columns):
                raise MalformedRowError(
                    f"{path}: expected {len(columns)} fields, got {len(row)}",
                    line=reader.line_num,
                )
            yield reader.line_num, row


def load_catalog(institutions_path: str | Path, courses_path: str | Path) -> Catalog:
    """Load and cross-validate the institution and course files."""
    institutions: dict[str, Institution] = {}
    for line, (inst_id, name, segment_code) in _read_rows(institutions_path, _INSTITUTION_COLUMNS):
        if not inst_id:
            raise MalformedRowError(f"{institutions_path}: empty institution id", line=line)
        if ":" in inst_id:
            raise MalformedRowError(
                f"{institutions_path}: institution id may not contain ':': {inst_id!r}", line=line
            )
        if segment_code not in _SEGMENT_CODES:
            raise MalformedRowError(
                f"{institutions_path}: segment must be one of 2|4, got {segment_code!r}", line=line
            )
        if inst_id in institutions:
            raise DuplicateIdError(f"duplicate institution id: {inst_id!r}")
        institutions[inst_id] = Institution(inst_id, name, _SEGMENT_CODES[segment_code])

    courses: dict[str, Course] = {}
    for line, row in _read_rows(courses_path, _COURSE_COLUMNS):
        course_id, inst_id, title, description, cip2, level_code, transferable = row
        if inst_id not in institutions:
            raise UnknownInstitutionError(
                f"course {course_id!r} references unknown institution {inst_id!r}"
            )
        prefix, _, local = course_id.partition(":")
        if not local or prefix != inst_id:
            raise MalformedRowError(
                f"{courses_path}: course id {course_id!r} must start with {inst_id!r} + ':'",
                line=line,
            )
        if not title:
            raise MalformedRowError(f"{courses_path}: course {course_id!r} has empty title", line=line)
        if cip2 and not (len(cip2) == 2 and cip2.isdigit()):
            raise MalformedRowError(
                f"{courses_path}: cip2 must be two digits or empty, got {cip2!r}", line=line
            )
        if level_code not in _LEVEL_CODES:
            raise MalformedRowError(
                f"{courses_path}: level must be one of L|U, got {level_code!r}", line=line
            )
        if transferable not in ("0", "1"):
            raise MalformedRowError(
                f"{courses_path}: transferable must be 0|1, got {transferable!r}", line=line
            )
        if course_id in courses:
            raise DuplicateIdError(f"duplicate course id: {course_id!r}")
        courses[course_id] = Course(
            id=course_id,
            institution_id=inst_id,
            title=title,
            description=description,
            cip2=cip2 or None,
            level=_LEVEL_CODES[level_code],
            transferable=transferable == "1",
        )

    logger.info("loaded %d institutions, %d courses", len(institutions), len(courses))
    return Catalog(institutions=institutions, courses=courses)


def load_articulations(path: str | Path, catalog: Catalog) -> list[ArticulationPair]:
    """Load established articulation pairs, resolving both endpoints."""
    pairs: list[ArticulationPair] = []
    seen: set[tuple[str, str]] = set()
    for line, (source, target) in _read_rows(path, _ARTICULATION_COLUMNS):
        for course_id in (source, target):
            if course_id not in catalog.courses:
                raise UnknownCourseError(f"articulation references unknown course: {course_id!r}")
        if source == target:
            raise SelfPairError(f"articulation pairs a course with itself: {source!r}")
        if (source, target) in seen:
            raise MalformedRowError(f"{path}: duplicate articulation {source}->{target}", line=line)
        seen.add((source, target))
        pairs.append(ArticulationPair(source, target))
    logger.info("loaded %d articulation pairs", len(pairs))
    return pairs


def load_enrollments(path: str | Path, catalog: Catalog) -> list[EnrollmentSequence]:
    """Load per-student enrollment sequences, ordered by term then file order."""
    events: dict[str, list[tuple[int, int, str]]] = {}
    for line, (student_id, term_index, course_id) in _read_rows(path, _ENROLLMENT_COLUMNS):
        if not student_id:
            raise MalformedRowError(f"{path}: empty student id", line=line)
        try:
            term = int(term_index)
        except ValueError:
            raise MalformedRowError(
                f"{path}: term_index must be an integer, got {term_index!r}", line=line
            ) from None
        if course_id not in catalog.courses:
            raise UnknownCourseError(f"enrollment references unknown course: {course_id!r}")
        events.setdefault(student_id, []).append((term, line, course_id))

    sequences = []
    for student_id in sorted(events):
        ordered = sorted(events[student_id], key=lambda e: (e[0], e[1]))
        sequences.append(
            EnrollmentSequence(student_id, tuple((term, cid) for term, _, cid in ordered))
        )
    return sequences


def segment_breakdown(pairs: Iterable[ArticulationPair], catalog: Catalog) -> dict[str, int]:
    """Count pairs per transfer pathway (2->2, 2->4, 4->2, 4->4)."""
    counts = {p: 0 for p in PATHWAYS}
    for pair in pairs:
        counts[catalog.pathway_of(pair)] += 1
    return counts


def fanout_stats(pairs: Sequence[ArticulationPair]) -> tuple[float, float]:
    """Mean and population std of targets per (source course, receiving institution).

    Counts how many distinct targets each source course maps to at each
    receiving institution that it maps to at all.
    """
    if not pairs:
        raise EmptyInputError("fanout_stats requires at least one pair")
    groups: dict[tuple[str, str], set[str]] = {}
    for pair in pairs:
        key = (pair.source_course_id, institution_of(pair.target_course_id))
        groups.setdefault(key, set()).add(pair.target_course_id)
    sizes = np.array([len(targets) for targets in groups.values()], dtype=np.float64)
    return float(sizes.mean()), float(sizes.std())


@dataclass
class FoldAssignment:
    """Partition of pairs into k evaluation folds."""

    k: int
    seed: int
    fold_of: dict[ArticulationPair, int] = field(repr=False)

    def fold(self, index: int) -> list[ArticulationPair]:
        """Pairs assigned to one fold, in assignment order."""
        return [p for p, f in self.fold_of.items() if f == index]

    def complement(self, index: int) -> list[ArticulationPair]:
        """Pairs outside one fold, in assignment order."""
        return [p for p, f in self.fold_of.items() if f != index]

    def sizes(self) -> list[int]:
        counts = [0] * self.k
        for f in self.fold_of.values():
            counts[f] += 1
        return counts


def make_folds(pairs: Sequence[ArticulationPair], k: int, seed: int) -> FoldAssignment:
    """Seeded shuffle followed by round-robin assignment into k folds.

    Fold sizes differ by at most one and the same seed reproduces the same
    assignment.
    """
    if k < 2:
        raise ValueError(f"fold count must be >= 2, got {k}")
    if len(pairs) < k:
        raise TooFewPairsError(f"need at least {k} pairs for {k} folds, got {len(pairs)}")
    if len(set(pairs)) != len(pairs):
        raise DuplicateIdError("pairs passed to make_folds must be unique")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(pairs))
    fold_of = {pairs[int(idx)]: position % k for position, idx in enumerate(order)}
    return FoldAssignment(k=k, seed=seed, fold_of=fold_of)
