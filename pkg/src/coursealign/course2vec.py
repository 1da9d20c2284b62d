"""Skip-gram embeddings over student enrollment sequences.

Courses taken near each other in a student's history get similar vectors.
Training is plain skip-gram with negative sampling: for each (center,
context) pair within a shrinking window, the center's input vector is pulled
toward the context's output vector and pushed away from sampled noise
courses.  Single-threaded and fully deterministic for a fixed seed; sequences
are traversed in sorted student-id order so corpus file order never matters.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .catalog import EnrollmentSequence
from .embed import EmbeddingTable
from .errors import EmptyCorpusError

logger = logging.getLogger(__name__)


@dataclass
class Course2vecConfig:
    dim: int = 64
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.window < 1 or self.epochs < 1:
            raise ValueError("dim, window, and epochs must be positive")
        if self.negatives < 0:
            raise ValueError("negatives must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.min_count < 1:
            raise ValueError("min_count must be >= 1")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -30.0, 30.0)))


def train_course2vec(
    sequences: Sequence[EnrollmentSequence], config: Course2vecConfig | None = None
) -> EmbeddingTable:
    """Train course vectors from enrollment sequences.

    The vocabulary keeps course ids occurring at least min_count times,
    indexed by descending frequency (ties by id).  The learning rate decays
    linearly over all scheduled center tokens down to 1e-4 of its start.
    """
    config = config or Course2vecConfig()
    ordered = sorted(sequences, key=lambda s: s.student_id)
    counts: dict[str, int] = {}
    for seq in ordered:
        for course_id in seq.course_ids():
            counts[course_id] = counts.get(course_id, 0) + 1
    vocab = [c for c, n in counts.items() if n >= config.min_count]
    vocab.sort(key=lambda c: (-counts[c], c))
    if not vocab:
        raise EmptyCorpusError("no course occurs at least min_count times")
    index = {c: k for k, c in enumerate(vocab)}

    corpus: list[np.ndarray] = []
    for seq in ordered:
        tokens = [index[c] for c in seq.course_ids() if c in index]
        if len(tokens) >= 2:
            corpus.append(np.asarray(tokens, dtype=np.int64))
    if not corpus:
        raise EmptyCorpusError("no sequence has two or more in-vocabulary events")

    v = len(vocab)
    rng = np.random.default_rng(config.seed)
    w_in = (rng.random((v, config.dim)) - 0.5) / config.dim
    w_out = np.zeros((v, config.dim))

    # negative sampling distribution: unigram counts to the 3/4 power
    freq = np.array([counts[c] for c in vocab], dtype=np.float64) ** 0.75
    cumulative = np.cumsum(freq / freq.sum())

    total_tokens = sum(len(t) for t in corpus) * config.epochs
    processed = 0
    lr0 = config.learning_rate
    lr_floor = lr0 * 1e-4

    for _ in range(config.epochs):
        for tokens in corpus:
            n = len(tokens)
            for t in range(n):
                lr = max(lr0 * (1.0 - processed / total_tokens), lr_floor)
                processed += 1
                span = int(rng.integers(1, config.window + 1))
                left = max(0, t - span)
                right = min(n, t + span + 1)
                center = tokens[t]
                for c in range(left, right):
                    if c == t:
                        continue
                    context = tokens[c]
                    targets = [context]
                    if config.negatives:
                        draws = np.searchsorted(cumulative, rng.random(config.negatives))
                        targets.extend(int(d) for d in draws if d != context)
                    rows = np.asarray(targets, dtype=np.int64)
                    labels = np.zeros(len(rows))
                    labels[0] = 1.0
                    vec = w_in[center].copy()
                    outs = w_out[rows]  # fancy indexing copies
                    grad = (_sigmoid(outs @ vec) - labels) * lr
                    np.add.at(w_out, rows, -grad[:, None] * vec)
                    w_in[center] = vec - grad @ outs

    vectors = {course_id: w_in[index[course_id]].copy() for course_id in vocab}
    logger.info("course2vec trained %d vectors from %d sequences", len(vectors), len(corpus))
    return EmbeddingTable(dim=config.dim, vectors=vectors, provenance="course2vec")
