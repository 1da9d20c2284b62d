"""Embedding tables: loading, normalization, composition, synthetic generation.

A table maps course ids to fixed-dimension float64 vectors.  Provenance tracks
how the vectors were produced (text model export, enrollment co-occurrence
training, concatenation of the two, or synthetic benchmark data).
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Mapping, Sequence

import numpy as np

from .catalog import Catalog, institution_of
from .errors import (
    DimensionMismatchError,
    DisjointKeysError,
    DuplicateCourseError,
    MalformedRowError,
    NotNormalizedError,
    ZeroVectorError,
)

logger = logging.getLogger(__name__)

Provenance = Literal["text", "course2vec", "concat", "synthetic"]


@dataclass
class EmbeddingTable:
    """Course id -> vector map with a fixed dimension.

    Treated as immutable after construction; transformation functions return
    new tables.
    """

    dim: int
    vectors: dict[str, np.ndarray]
    provenance: Provenance = "text"

    def __post_init__(self):
        clean: dict[str, np.ndarray] = {}
        for course_id, vec in self.vectors.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (self.dim,):
                raise DimensionMismatchError(
                    f"vector for {course_id!r} has shape {arr.shape}, expected ({self.dim},)"
                )
            clean[course_id] = arr
        self.vectors = clean

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, course_id: str) -> bool:
        return course_id in self.vectors

    def __getitem__(self, course_id: str) -> np.ndarray:
        return self.vectors[course_id]

    def ids(self) -> list[str]:
        return sorted(self.vectors)

    def matrix(self, ids: Sequence[str]) -> np.ndarray:
        """Stack the vectors for ``ids`` into an (n, dim) array."""
        if not ids:
            return np.empty((0, self.dim), dtype=np.float64)
        return np.stack([self.vectors[i] for i in ids])

    def subset(self, ids: Iterable[str]) -> "EmbeddingTable":
        keep = {i: self.vectors[i] for i in ids}
        return EmbeddingTable(dim=self.dim, vectors=keep, provenance=self.provenance)


def load_embeddings(path: str | Path, expected_dim: int | None = None) -> EmbeddingTable:
    """Load a JSONL file of ``{"course_id": ..., "vector": [...]}`` records."""
    path = Path(path)
    vectors: dict[str, np.ndarray] = {}
    dim = expected_dim
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRowError(f"{path}: invalid JSON ({exc})", line=line_no) from None
            if not isinstance(record, dict) or "course_id" not in record or "vector" not in record:
                raise MalformedRowError(
                    f"{path}: record must have course_id and vector fields", line=line_no
                )
            course_id = record["course_id"]
            vec = np.asarray(record["vector"], dtype=np.float64)
            if vec.ndim != 1:
                raise MalformedRowError(f"{path}: vector must be a flat list", line=line_no)
            if dim is None:
                dim = int(vec.shape[0])
            if vec.shape[0] != dim:
                raise DimensionMismatchError(
                    f"{path} line {line_no}: vector for {course_id!r} has length "
                    f"{vec.shape[0]}, expected {dim}"
                )
            if not np.all(np.isfinite(vec)):
                raise MalformedRowError(
                    f"{path}: vector for {course_id!r} has non-finite entries", line=line_no
                )
            if course_id in vectors:
                raise DuplicateCourseError(f"duplicate embedding for course {course_id!r}")
            vectors[course_id] = vec
    if dim is None:
        raise MalformedRowError(f"{path}: no embedding records found")
    return EmbeddingTable(dim=dim, vectors=vectors, provenance="text")


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    """Write a table as JSONL, sorted by course id for stable bytes."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for course_id in table.ids():
            record = {"course_id": course_id, "vector": table[course_id].tolist()}
            fh.write(json.dumps(record) + "\n")


def restrict_to_catalog(table: EmbeddingTable, catalog: Catalog) -> EmbeddingTable:
    """Drop embedding records whose course ids are not in the catalog."""
    known = {i for i in table.vectors if i in catalog.courses}
    dropped = len(table) - len(known)
    if dropped:
        logger.warning("dropping %d embedding records not present in the catalog", dropped)
    return table.subset(known)


def l2_normalize(table: EmbeddingTable) -> EmbeddingTable:
    """Scale every vector to unit L2 norm.  Idempotent."""
    out: dict[str, np.ndarray] = {}
    for course_id, vec in table.vectors.items():
        norm = float(np.linalg.norm(vec))
        if norm < 1e-12:
            raise ZeroVectorError(f"cannot normalize zero vector for course {course_id!r}")
        out[course_id] = vec / norm
    return EmbeddingTable(dim=table.dim, vectors=out, provenance=table.provenance)


def compose(table_a: EmbeddingTable, table_b: EmbeddingTable, mode: str = "concat") -> EmbeddingTable:
    """Concatenate two normalized tables on the intersection of their course ids."""
    if mode != "concat":
        raise ValueError(f"unsupported composition mode: {mode!r}")
    common = sorted(set(table_a.vectors) & set(table_b.vectors))
    if not common:
        raise DisjointKeysError("tables share no course ids")
    for table in (table_a, table_b):
        for course_id in common:
            norm = float(np.linalg.norm(table[course_id]))
            if abs(norm - 1.0) > 1e-6:
                raise NotNormalizedError(
                    f"compose requires unit-norm inputs; {course_id!r} has norm {norm:.6f}"
                )
    vectors = {i: np.concatenate([table_a[i], table_b[i]]) for i in common}
    return EmbeddingTable(dim=table_a.dim + table_b.dim, vectors=vectors, provenance="concat")


def prepare_tables(
    text_table: EmbeddingTable,
    course2vec_table: EmbeddingTable | None = None,
    catalog: Catalog | None = None,
) -> EmbeddingTable:
    """Standard pre-alignment pipeline: restrict, normalize, optionally concat.

    When both tables are given each is normalized, they are concatenated on
    the id intersection, and the result is normalized again.
    """
    if catalog is not None:
        text_table = restrict_to_catalog(text_table, catalog)
    table = l2_normalize(text_table)
    if course2vec_table is not None:
        if catalog is not None:
            course2vec_table = restrict_to_catalog(course2vec_table, catalog)
        table = compose(table, l2_normalize(course2vec_table))
        table = l2_normalize(table)
    return table


def _haar_orthogonal(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Haar-distributed orthogonal matrix via sign-fixed QR."""
    gauss = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(gauss)
    return q * np.sign(np.diag(r))


def institution_frames(institution_ids: Iterable[str], dim: int, seed: int) -> dict[str, np.ndarray]:
    """Per-institution random orthogonal frames, deterministic in the seed.

    The draw order follows sorted institution ids so the frames do not depend
    on input ordering.
    """
    rng = np.random.default_rng([seed, 101])
    return {inst: _haar_orthogonal(rng, dim) for inst in sorted(set(institution_ids))}


@dataclass(frozen=True)
class PlantedSpec:
    """Ground-truth structure for synthetic embeddings.

    Courses sharing a class id are noisy images of one latent vector.  Each
    institution observes the latent through its own orthogonal frame; an
    optional shared nuisance direction per institution mimics boilerplate
    text that drags all of an institution's vectors the same way.
    """

    class_of: Mapping[str, int]
    noise: float = 0.0
    nuisance: float = 0.0
    rotate: bool = True


def synthetic_embeddings(
    catalog: Catalog, dim: int, seed: int, planted: PlantedSpec | None = None
) -> EmbeddingTable:
    """Unit-norm synthetic vectors for every catalog course.

    Without a planted spec every course gets an independent random direction.
    With one, same-class courses share a latent observed through their
    institution's frame, plus optional nuisance and isotropic noise, then
    re-normalized.
    """
    course_ids = sorted(catalog.courses)
    vectors: dict[str, np.ndarray] = {}

    if planted is None:
        rng = np.random.default_rng([seed, 0])
        for course_id in course_ids:
            vec = rng.standard_normal(dim)
            vectors[course_id] = vec / np.linalg.norm(vec)
        return EmbeddingTable(dim=dim, vectors=vectors, provenance="synthetic")

    institutions = sorted(catalog.institutions)
    frames = (
        institution_frames(institutions, dim, seed)
        if planted.rotate
        else {inst: np.eye(dim) for inst in institutions}
    )

    rng_latent = np.random.default_rng([seed, 1])
    latents: dict[int, np.ndarray] = {}
    for class_id in sorted(set(planted.class_of.values())):
        z = rng_latent.standard_normal(dim)
        latents[class_id] = z / np.linalg.norm(z)

    rng_nuisance = np.random.default_rng([seed, 2])
    nuisance_dirs: dict[str, np.ndarray] = {}
    for inst in institutions:
        u = rng_nuisance.standard_normal(dim)
        nuisance_dirs[inst] = u / np.linalg.norm(u)

    rng_base = np.random.default_rng([seed, 3])
    rng_noise = np.random.default_rng([seed, 4])
    for course_id in course_ids:
        inst = catalog.courses[course_id].institution_id
        if course_id in planted.class_of:
            base = latents[planted.class_of[course_id]]
        else:
            base = rng_base.standard_normal(dim)
            base = base / np.linalg.norm(base)
        vec = base @ frames[inst]
        if planted.nuisance:
            vec = vec + planted.nuisance * nuisance_dirs[inst]
        if planted.noise:
            vec = vec + planted.noise * rng_noise.standard_normal(dim)
        norm = float(np.linalg.norm(vec))
        if norm < 1e-12:
            raise ZeroVectorError(f"synthetic vector collapsed to zero for {course_id!r}")
        vectors[course_id] = vec / norm

    return EmbeddingTable(dim=dim, vectors=vectors, provenance="synthetic")
