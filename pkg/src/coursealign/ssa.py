"""Shared-space alignment of per-institution embedding subspaces.

Each institution i gets one square matrix M_i, constrained to be orthogonal.
A source vector x from institution i is mapped into institution j's space as
``x @ M_i @ M_j.T``; with orthogonal matrices the inverse of M_j is its
transpose, so all institutions meet in one shared intermediate space.
Training minimizes the mean squared distance between mapped source vectors
and their established transfer targets by mini-batch gradient descent, with a
projection back to the nearest orthogonal matrix after each step.

Matrices start at identity, so an untrained model reproduces raw-embedding
behavior exactly.
"""
from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .catalog import ArticulationPair, institution_of
from .embed import EmbeddingTable
from .errors import (
    DimensionMismatchError,
    MissingEmbeddingError,
    ModelFormatError,
    NoPairsError,
    RankDeficientError,
    UnknownInstitutionError,
)

logger = logging.getLogger(__name__)

_MAGIC = b"SSA1"


@dataclass
class SsaConfig:
    learning_rate: float = 0.01
    epochs: int = 50
    batch_size: int = 256
    reorthogonalize_every: int = 1
    convergence_tol: float = 1e-5
    seed: int = 0
    symmetrize: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.reorthogonalize_every < 1:
            raise ValueError("reorthogonalize_every must be >= 1")
        if self.convergence_tol < 0:
            raise ValueError("convergence_tol must be >= 0")


@dataclass
class AlignmentModel:
    """One orthogonal matrix per institution plus training metadata."""

    dim: int
    matrices: dict[str, np.ndarray]
    trained_on: dict[str, Any] = field(default_factory=dict)
    final_loss: float = float("nan")

    def matrix(self, institution_id: str) -> np.ndarray:
        try:
            return self.matrices[institution_id]
        except KeyError:
            raise UnknownInstitutionError(
                f"no alignment matrix for institution {institution_id!r}"
            ) from None

    def institutions(self) -> list[str]:
        return sorted(self.matrices)

    def max_orthogonality_defect(self) -> float:
        """Largest Frobenius deviation of M.T @ M from identity."""
        eye = np.eye(self.dim)
        worst = 0.0
        for m in self.matrices.values():
            worst = max(worst, float(np.linalg.norm(m.T @ m - eye)))
        return worst


def identity_model(institution_ids: Iterable[str], dim: int) -> AlignmentModel:
    """Untrained model: every institution mapped by the identity."""
    matrices = {inst: np.eye(dim) for inst in sorted(set(institution_ids))}
    return AlignmentModel(dim=dim, matrices=matrices, trained_on={"epochs_run": 0}, final_loss=float("nan"))


def nearest_orthogonal(matrix: np.ndarray) -> np.ndarray:
    """Orthogonal matrix closest in Frobenius norm: U @ V.T from the SVD."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {matrix.shape}")
    u, s, vt = np.linalg.svd(matrix)
    if s[-1] <= 1e-12 * max(s[0], 1.0):
        raise RankDeficientError(
            f"matrix is rank deficient (smallest singular value {s[-1]:.3e})"
        )
    return u @ vt


def pair_loss_and_grads(
    x_i: np.ndarray, x_j: np.ndarray, m_i: np.ndarray, m_j: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Squared mapping error for one pair and its gradients w.r.t. M_i, M_j.

    loss = || x_i M_i M_j^T - x_j ||^2
    dloss/dM_i = 2 x_i^T (r M_j)     with r = x_i M_i M_j^T - x_j
    dloss/dM_j = 2 r^T (x_i M_i)
    """
    q = x_i @ m_i
    r = q @ m_j.T - x_j
    loss = float(r @ r)
    g_i = 2.0 * np.outer(x_i, r @ m_j)
    g_j = 2.0 * np.outer(r, q)
    return loss, g_i, g_j


def _pair_arrays(
    embeddings: EmbeddingTable,
    pairs: Sequence[ArticulationPair],
    inst_index: dict[str, int],
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Stack pair endpoints into arrays with institution indices."""
    xi = np.empty((len(pairs), embeddings.dim))
    xj = np.empty((len(pairs), embeddings.dim))
    src = np.empty(len(pairs), dtype=np.int64)
    tgt = np.empty(len(pairs), dtype=np.int64)
    for row, pair in enumerate(pairs):
        for course_id in (pair.source_course_id, pair.target_course_id):
            if course_id not in embeddings:
                raise MissingEmbeddingError(f"no embedding for paired course {course_id!r}")
        src_inst = institution_of(pair.source_course_id)
        tgt_inst = institution_of(pair.target_course_id)
        for inst in (src_inst, tgt_inst):
            if inst not in inst_index:
                raise UnknownInstitutionError(
                    f"pair references institution {inst!r} outside the model's institution set"
                )
        xi[row] = embeddings[pair.source_course_id]
        xj[row] = embeddings[pair.target_course_id]
        src[row] = inst_index[src_inst]
        tgt[row] = inst_index[tgt_inst]
    return xi, xj, src, tgt


def _grouped(indices: np.ndarray, src: np.ndarray, tgt: np.ndarray):
    """Yield (src_inst, tgt_inst, row_indices) for one batch, grouped by route."""
    key = src[indices] * (tgt.max() + 1) + tgt[indices]
    order = np.argsort(key, kind="stable")
    rows = indices[order]
    key = key[order]
    boundaries = np.flatnonzero(np.diff(key)) + 1
    for chunk in np.split(rows, boundaries):
        yield int(src[chunk[0]]), int(tgt[chunk[0]]), chunk


def _mean_loss(
    mats: list[np.ndarray], xi: np.ndarray, xj: np.ndarray, src: np.ndarray, tgt: np.ndarray
) -> float:
    total = 0.0
    for i, j, rows in _grouped(np.arange(len(src)), src, tgt):
        residual = xi[rows] @ (mats[i] @ mats[j].T) - xj[rows]
        total += float(np.sum(residual * residual))
    return total / len(src)


def train_ssa(
    embeddings: EmbeddingTable,
    training_pairs: Sequence[ArticulationPair],
    institutions: Iterable[str],
    config: SsaConfig | None = None,
) -> AlignmentModel:
    """Fit per-institution orthogonal matrices to established pairs.

    Matrices start at identity.  Every optimizer step updates the matrices of
    the institutions present in the batch with the exact gradient of the mean
    squared pair loss, then projects the touched matrices back onto the
    orthogonal group.  Training stops when the configured epochs are
    exhausted or the relative loss improvement over a full epoch falls below
    ``convergence_tol``.
    """
    config = config or SsaConfig()
    inst_ids = sorted(set(institutions))
    if not inst_ids:
        raise UnknownInstitutionError("at least one institution is required")
    pairs = list(training_pairs)
    if config.symmetrize:
        pairs += [
            ArticulationPair(p.target_course_id, p.source_course_id, p.status) for p in pairs
        ]
    if not pairs:
        raise NoPairsError("no training pairs supplied")

    inst_index = {inst: k for k, inst in enumerate(inst_ids)}
    xi, xj, src, tgt = _pair_arrays(embeddings, pairs, inst_index)
    dim = embeddings.dim
    mats = [np.eye(dim) for _ in inst_ids]

    rng = np.random.default_rng(config.seed)
    n = len(pairs)
    order = np.arange(n)
    losses = [_mean_loss(mats, xi, xj, src, tgt)]
    steps = 0
    dirty: set[int] = set()
    epochs_run = 0
    converged = False

    for _ in range(config.epochs):
        rng.shuffle(order)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            grads: dict[int, np.ndarray] = {}
            for i, j, rows in _grouped(batch, src, tgt):
                q = xi[rows] @ mats[i]
                residual = q @ mats[j].T - xj[rows]
                g_i = 2.0 * xi[rows].T @ (residual @ mats[j])
                g_j = 2.0 * residual.T @ q
                grads[i] = grads.get(i, 0) + g_i
                grads[j] = grads.get(j, 0) + g_j
            scale = config.learning_rate / len(batch)
            for k, grad in grads.items():
                mats[k] = mats[k] - scale * grad
                dirty.add(k)
            steps += 1
            if steps % config.reorthogonalize_every == 0:
                for k in dirty:
                    mats[k] = nearest_orthogonal(mats[k])
                dirty.clear()
        epochs_run += 1
        current = _mean_loss(mats, xi, xj, src, tgt)
        previous = losses[-1]
        losses.append(current)
        if previous <= 1e-15 or (previous - current) / previous < config.convergence_tol:
            converged = True
            break

    # Leftover un-projected updates when reorthogonalize_every > 1.
    for k in dirty:
        mats[k] = nearest_orthogonal(mats[k])
    final_loss = _mean_loss(mats, xi, xj, src, tgt)

    model = AlignmentModel(
        dim=dim,
        matrices={inst: mats[inst_index[inst]] for inst in inst_ids},
        trained_on={
            "n_pairs": n,
            "seed": config.seed,
            "learning_rate": config.learning_rate,
            "batch_size": config.batch_size,
            "epochs_requested": config.epochs,
            "epochs_run": epochs_run,
            "converged": converged,
            "symmetrize": config.symmetrize,
            "loss_history": [float(x) for x in losses],
        },
        final_loss=final_loss,
    )
    logger.info(
        "ssa trained: %d pairs, %d epochs, loss %.6f -> %.6f",
        n, epochs_run, losses[0], final_loss,
    )
    return model


def encode_shared(model: AlignmentModel, table: EmbeddingTable) -> EmbeddingTable:
    """Map every vector into the shared space via its institution's matrix."""
    if table.dim != model.dim:
        raise DimensionMismatchError(
            f"table dim {table.dim} does not match model dim {model.dim}"
        )
    by_inst: dict[str, list[str]] = {}
    for course_id in table.vectors:
        by_inst.setdefault(institution_of(course_id), []).append(course_id)
    vectors: dict[str, np.ndarray] = {}
    for inst, ids in by_inst.items():
        mapped = table.matrix(ids) @ model.matrix(inst)
        for row, course_id in enumerate(ids):
            vectors[course_id] = mapped[row]
    return EmbeddingTable(dim=table.dim, vectors=vectors, provenance=table.provenance)


def decode_to(
    model: AlignmentModel, vector: np.ndarray, from_institution: str, to_institution: str
) -> np.ndarray:
    """Map a vector from one institution's space into another's."""
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (model.dim,):
        raise DimensionMismatchError(f"vector shape {vector.shape}, expected ({model.dim},)")
    return vector @ model.matrix(from_institution) @ model.matrix(to_institution).T


def alignment_loss(
    model: AlignmentModel, embeddings: EmbeddingTable, pairs: Sequence[ArticulationPair]
) -> float:
    """Mean squared mapping error of the model over the given pairs."""
    if not pairs:
        raise NoPairsError("alignment_loss requires at least one pair")
    inst_ids = model.institutions()
    inst_index = {inst: k for k, inst in enumerate(inst_ids)}
    xi, xj, src, tgt = _pair_arrays(embeddings, list(pairs), inst_index)
    mats = [model.matrices[inst] for inst in inst_ids]
    return _mean_loss(mats, xi, xj, src, tgt)


def save_model(model: AlignmentModel, path: str | Path) -> None:
    """Write the binary model file plus a JSON metadata sidecar."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", model.dim, len(model.matrices)))
        for inst in model.institutions():
            encoded = inst.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(np.ascontiguousarray(model.matrices[inst], dtype="<f8").tobytes())
    sidecar = {
        "dim": model.dim,
        "institutions": model.institutions(),
        "final_loss": None if np.isnan(model.final_loss) else model.final_loss,
        "trained_on": model.trained_on,
    }
    with open(str(path) + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")


def load_model(path: str | Path) -> AlignmentModel:
    """Read a model written by save_model; the sidecar is optional."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != _MAGIC:
        raise ModelFormatError(f"{path}: bad magic {raw[:4]!r}")
    offset = 4
    try:
        dim, count = struct.unpack_from("<II", raw, offset)
        offset += 8
        matrices: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            inst = raw[offset : offset + name_len].decode("utf-8")
            offset += name_len
            block = dim * dim * 8
            mat = np.frombuffer(raw[offset : offset + block], dtype="<f8")
            if mat.size != dim * dim:
                raise ModelFormatError(f"{path}: truncated matrix for {inst!r}")
            offset += block
            matrices[inst] = mat.reshape(dim, dim).astype(np.float64)
    except struct.error as exc:
        raise ModelFormatError(f"{path}: truncated model file ({exc})") from None
    if offset != len(raw):
        raise ModelFormatError(f"{path}: {len(raw) - offset} trailing bytes")

    model = AlignmentModel(dim=dim, matrices=matrices)
    meta_path = Path(str(path) + ".meta.json")
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        model.trained_on = meta.get("trained_on", {})
        if meta.get("final_loss") is not None:
            model.final_loss = float(meta["final_loss"])
    return model
