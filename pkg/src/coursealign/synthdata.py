"""Synthetic benchmark construction with planted ground truth.

Builds a catalog of institutions and courses where groups of courses are
declared equivalent (same latent class), articulation pairs derived from
those classes, and planted embeddings to match.  Because each institution
observes the shared latents through its own random orthogonal frame, raw
cross-institution similarity is uninformative and recovery of the class
structure measures alignment quality directly.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .catalog import ArticulationPair, Catalog, Course, Institution
from .embed import EmbeddingTable, PlantedSpec, synthetic_embeddings


@dataclass
class PlantedBenchmark:
    catalog: Catalog
    table: EmbeddingTable
    pairs: list[ArticulationPair]
    class_of: dict[str, int]
    spec: PlantedSpec
    seed: int


def _class_sizes(n_classes: int, total: int, max_size: int, rng: np.random.Generator) -> list[int]:
    if not 2 * n_classes <= total <= max_size * n_classes:
        raise ValueError(
            f"cannot split {total} courses into {n_classes} classes of size 2..{max_size}"
        )
    sizes = [2] * n_classes
    remaining = total - 2 * n_classes
    order = rng.permutation(n_classes)
    cursor = 0
    while remaining > 0:
        cls = int(order[cursor % n_classes])
        if sizes[cls] < max_size:
            sizes[cls] += 1
            remaining -= 1
        cursor += 1
    return sizes


def planted_benchmark(
    n_institutions: int = 5,
    courses_per_institution: int = 400,
    n_classes: int = 800,
    dim: int = 32,
    noise: float = 0.01,
    nuisance: float = 0.0,
    seed: int = 42,
) -> PlantedBenchmark:
    """Catalog + planted embeddings + class-derived articulation pairs.

    Every class's courses sit at distinct institutions, so each directed pair
    has exactly one correct answer in the receiving pool.  Classes are capped
    at one course per institution; institutions alternate two-year/four-year
    segments.  Classes 0..89 double as 2-digit CIP codes for dispersion
    grouping; beyond that cip2 is left empty.
    """
    rng = np.random.default_rng([seed, 7])
    total = n_institutions * courses_per_institution
    sizes = _class_sizes(n_classes, total, n_institutions, rng)

    inst_ids = [f"inst{k + 1:02d}" for k in range(n_institutions)]
    institutions = {
        inst: Institution(inst, f"Institution {k + 1}", "two_year" if k % 2 == 0 else "four_year")
        for k, inst in enumerate(inst_ids)
    }

    capacity = {inst: courses_per_institution for inst in inst_ids}
    serial = {inst: 0 for inst in inst_ids}
    courses: dict[str, Course] = {}
    class_of: dict[str, int] = {}
    members: list[list[str]] = []

    # place larger classes first; pick the least-filled institutions each time
    placement_order = sorted(range(n_classes), key=lambda c: (-sizes[c], c))
    for class_id in placement_order:
        open_insts = sorted(
            (inst for inst in inst_ids if capacity[inst] > 0),
            key=lambda inst: (-capacity[inst], inst),
        )
        chosen = open_insts[: sizes[class_id]]
        if len(chosen) < sizes[class_id]:
            raise ValueError("institution capacities cannot host the requested class sizes")
        for inst in chosen:
            capacity[inst] -= 1
            serial[inst] += 1
            course_id = f"{inst}:C{serial[inst]:04d}"
            cip2 = f"{10 + class_id}" if class_id < 90 else None
            courses[course_id] = Course(
                id=course_id,
                institution_id=inst,
                title=f"Synthetic course {class_id:04d}.{serial[inst]:04d}",
                description=f"Generated member of equivalence class {class_id}",
                cip2=cip2,
                level="lower_division",
                transferable=True,
            )
            class_of[course_id] = class_id
    assert all(v == 0 for v in capacity.values())

    members = [[] for _ in range(n_classes)]
    for course_id, class_id in class_of.items():
        members[class_id].append(course_id)

    pair_rng = np.random.default_rng([seed, 8])
    pairs: list[ArticulationPair] = []
    for class_id in range(n_classes):
        group = sorted(members[class_id])
        for a_idx in range(len(group)):
            for b_idx in range(a_idx + 1, len(group)):
                a, b = group[a_idx], group[b_idx]
                if pair_rng.integers(2):
                    a, b = b, a
                pairs.append(ArticulationPair(a, b))

    catalog = Catalog(institutions=institutions, courses=courses)
    spec = PlantedSpec(class_of=class_of, noise=noise, nuisance=nuisance, rotate=True)
    table = synthetic_embeddings(catalog, dim, seed, planted=spec)
    return PlantedBenchmark(
        catalog=catalog, table=table, pairs=pairs, class_of=class_of, spec=spec, seed=seed
    )


def synthetic_enrollments(
    benchmark: PlantedBenchmark,
    students_per_institution: int = 200,
    courses_per_student: int = 8,
    seed: int = 42,
) -> list[tuple[str, int, str]]:
    """Enrollment rows (student_id, term_index, course_id) with local structure.

    Students stay at one institution and sample courses from a narrow band of
    class ids, so classmates co-occur and sequence embeddings carry subject
    signal.  Returns rows ready for enrollments.csv.
    """
    rng = np.random.default_rng([seed, 9])
    by_inst: dict[str, list[str]] = {}
    for course_id, class_id in sorted(benchmark.class_of.items()):
        by_inst.setdefault(course_id.split(":", 1)[0], []).append(course_id)
    rows: list[tuple[str, int, str]] = []
    student = 0
    for inst in sorted(by_inst):
        local = by_inst[inst]
        local_sorted = sorted(local, key=lambda c: benchmark.class_of[c])
        for _ in range(students_per_institution):
            student += 1
            start = int(rng.integers(0, max(1, len(local_sorted) - courses_per_student)))
            band = local_sorted[start : start + max(courses_per_student * 3, 12)]
            take = min(courses_per_student, len(band))
            picks = rng.choice(len(band), size=take, replace=False)
            for term, pick in enumerate(picks):
                rows.append((f"s{student:06d}", term, band[int(pick)]))
    return rows


def write_benchmark_files(
    benchmark: PlantedBenchmark,
    out_dir: str | Path,
    enrollments: Sequence[tuple[str, int, str]] | None = None,
) -> dict[str, Path]:
    """Write the benchmark as the standard CSV/JSONL input files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "institutions": out / "institutions.csv",
        "courses": out / "courses.csv",
        "articulations": out / "articulations.csv",
        "embeddings": out / "embeddings.jsonl",
    }

    with open(paths["institutions"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "name", "segment"])
        for inst_id in sorted(benchmark.catalog.institutions):
            inst = benchmark.catalog.institutions[inst_id]
            writer.writerow([inst.id, inst.name, "2" if inst.segment == "two_year" else "4"])

    with open(paths["courses"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "institution_id", "title", "description", "cip2", "level", "transferable"])
        for course_id in sorted(benchmark.catalog.courses):
            c = benchmark.catalog.courses[course_id]
            writer.writerow(
                [
                    c.id,
                    c.institution_id,
                    c.title,
                    c.description,
                    c.cip2 or "",
                    "L" if c.level == "lower_division" else "U",
                    "1" if c.transferable else "0",
                ]
            )

    with open(paths["articulations"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_course_id", "target_course_id"])
        for pair in benchmark.pairs:
            writer.writerow([pair.source_course_id, pair.target_course_id])

    from .embed import save_embeddings

    save_embeddings(benchmark.table, paths["embeddings"])

    if enrollments is not None:
        paths["enrollments"] = out / "enrollments.csv"
        with open(paths["enrollments"], "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["student_id", "term_index", "course_id"])
            for student_id, term, course_id in enrollments:
                writer.writerow([student_id, term, course_id])

    return paths
