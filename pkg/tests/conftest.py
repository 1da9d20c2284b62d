"""Shared fixtures: a small hand-built catalog and CSV writers."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from coursealign.catalog import load_articulations, load_catalog
from coursealign.embed import EmbeddingTable

INSTITUTION_ROWS = [
    ("alpha", "Alpha Community College", "2"),
    ("beta", "Beta Community College", "2"),
    ("gamma", "Gamma University", "4"),
]

COURSE_ROWS = [
    # id, institution_id, title, description, cip2, level, transferable
    ("alpha:MATH101", "alpha", "Calculus I", "Limits and derivatives.", "27", "L", "1"),
    ("alpha:ENG101", "alpha", "Composition", "Expository writing.", "23", "L", "1"),
    ("alpha:WELD110", "alpha", "Welding Basics", "Shop practice.", "48", "L", "0"),
    ("beta:MTH150", "beta", "Calculus A", "Differential calculus.", "27", "L", "1"),
    ("beta:ENGL100", "beta", "College Writing", "Essay writing.", "23", "L", "1"),
    ("gamma:MAT201", "gamma", "Calculus I", "Single-variable calculus.", "27", "L", "1"),
    ("gamma:WRT105", "gamma", "Writing Studio", "Academic writing.", "23", "L", "1"),
    ("gamma:PHY301", "gamma", "Quantum Mechanics", "Upper-division physics.", "40", "U", "1"),
]

ARTICULATION_ROWS = [
    ("alpha:MATH101", "beta:MTH150"),
    ("alpha:MATH101", "gamma:MAT201"),
    ("alpha:ENG101", "gamma:WRT105"),
    ("beta:ENGL100", "gamma:WRT105"),
]


def write_csv(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_catalog_files(
    directory: Path,
    institutions=INSTITUTION_ROWS,
    courses=COURSE_ROWS,
    articulations=ARTICULATION_ROWS,
) -> dict[str, Path]:
    directory.mkdir(parents=True, exist_ok=True)
    return {
        "institutions": write_csv(
            directory / "institutions.csv", ["id", "name", "segment"], institutions
        ),
        "courses": write_csv(
            directory / "courses.csv",
            ["id", "institution_id", "title", "description", "cip2", "level", "transferable"],
            courses,
        ),
        "articulations": write_csv(
            directory / "articulations.csv",
            ["source_course_id", "target_course_id"],
            articulations,
        ),
    }


def write_embeddings_jsonl(path: Path, table: EmbeddingTable) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        for course_id in table.ids():
            record = {"course_id": course_id, "vector": table.vectors[course_id].tolist()}
            fh.write(json.dumps(record) + "\n")
    return path


def random_table(course_ids, dim: int, seed: int = 0, normalize: bool = True) -> EmbeddingTable:
    rng = np.random.default_rng(seed)
    vectors = {}
    for course_id in course_ids:
        v = rng.standard_normal(dim)
        if normalize:
            v = v / np.linalg.norm(v)
        vectors[course_id] = v
    return EmbeddingTable(dim=dim, vectors=vectors, provenance="synthetic")


@pytest.fixture()
def small_files(tmp_path):
    return write_catalog_files(tmp_path / "data")


@pytest.fixture()
def small_catalog(small_files):
    return load_catalog(small_files["institutions"], small_files["courses"])


@pytest.fixture()
def small_pairs(small_files, small_catalog):
    return load_articulations(small_files["articulations"], small_catalog)


@pytest.fixture()
def small_table(small_catalog):
    return random_table(sorted(small_catalog.courses), dim=8, seed=3)
