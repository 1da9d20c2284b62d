"""Retrieval ranking, recall@k, and cross-validated evaluation."""
import numpy as np
import pytest

from coursealign.catalog import ArticulationPair, make_folds
from coursealign.embed import EmbeddingTable
from coursealign.errors import EmptyPoolError, MissingEmbeddingError
from coursealign.predict import cross_validate, rank_candidates, recall_at_k
from coursealign.ssa import SsaConfig, identity_model
from coursealign.synthdata import planted_benchmark

from conftest import random_table


def unit(*xs):
    v = np.asarray(xs, dtype=np.float64)
    return v / np.linalg.norm(v)


@pytest.fixture()
def toy_space(small_catalog):
    # hand-positioned unit vectors so every cosine is known
    vectors = {
        "alpha:MATH101": unit(1.0, 0.0, 0.0),
        "alpha:ENG101": unit(0.0, 1.0, 0.0),
        "alpha:WELD110": unit(0.0, 0.0, 1.0),
        "beta:MTH150": unit(1.0, 0.1, 0.0),
        "beta:ENGL100": unit(0.0, 1.0, 0.1),
        "gamma:MAT201": unit(1.0, 0.2, 0.0),
        "gamma:WRT105": unit(0.1, 1.0, 0.0),
        "gamma:PHY301": unit(0.0, 0.1, 1.0),
    }
    return EmbeddingTable(dim=3, vectors=vectors, provenance="synthetic")


def test_rank_candidates_orders_by_cosine(toy_space, small_catalog):
    ranked = rank_candidates(toy_space, small_catalog, "alpha:MATH101", "gamma", k=3)
    ids = [course_id for course_id, _ in ranked.entries]
    assert ids == ["gamma:MAT201", "gamma:WRT105", "gamma:PHY301"]
    scores = [score for _, score in ranked.entries]
    assert scores == sorted(scores, reverse=True)
    expected_top = float(
        toy_space.vectors["alpha:MATH101"] @ toy_space.vectors["gamma:MAT201"]
    )
    assert scores[0] == pytest.approx(expected_top, abs=1e-12)


def test_rank_candidates_tie_breaks_by_id(small_catalog):
    # two identical target vectors -> equal cosine, lexicographically smaller id first
    vectors = {
        "alpha:MATH101": unit(1.0, 0.0),
        "gamma:MAT201": unit(1.0, 1.0),
        "gamma:WRT105": unit(1.0, 1.0),
        "gamma:PHY301": unit(-1.0, 0.2),
    }
    table = EmbeddingTable(dim=2, vectors=vectors, provenance="synthetic")
    ranked = rank_candidates(table, small_catalog, "alpha:MATH101", "gamma", k=3)
    assert [cid for cid, _ in ranked.entries] == ["gamma:MAT201", "gamma:WRT105", "gamma:PHY301"]


def test_rank_candidates_excludes_source_and_nontransferable(toy_space, small_catalog):
    ranked = rank_candidates(toy_space, small_catalog, "alpha:MATH101", "alpha", k=10)
    ids = [course_id for course_id, _ in ranked.entries]
    assert "alpha:MATH101" not in ids  # never its own candidate
    assert "alpha:WELD110" not in ids  # not transferable
    assert ids == ["alpha:ENG101"]


def test_rank_candidates_errors(toy_space, small_catalog):
    with pytest.raises(MissingEmbeddingError):
        rank_candidates(toy_space.subset(["alpha:ENG101"]), small_catalog, "alpha:MATH101", "gamma", k=3)
    sparse = toy_space.subset(["alpha:MATH101"])
    with pytest.raises(EmptyPoolError):
        rank_candidates(sparse, small_catalog, "alpha:MATH101", "gamma", k=3)


def test_recall_at_k_counts_rank_correctly(toy_space, small_catalog):
    model = identity_model(small_catalog.institution_ids(), toy_space.dim)
    pairs = [
        ArticulationPair("alpha:MATH101", "gamma:MAT201"),  # rank 1
        ArticulationPair("alpha:ENG101", "gamma:PHY301"),   # rank 3 for k>=3
    ]
    r1 = recall_at_k(model, toy_space, pairs, 1, small_catalog)
    assert r1.correct == 1 and r1.total == 2
    assert r1.recall == pytest.approx(0.5)
    r3 = recall_at_k(model, toy_space, pairs, 3, small_catalog)
    assert r3.correct == 2 and r3.recall == pytest.approx(1.0)


def test_recall_skips_unembeddable_pairs(toy_space, small_catalog):
    model = identity_model(small_catalog.institution_ids(), toy_space.dim)
    table = toy_space.subset([cid for cid in toy_space.ids() if cid != "gamma:MAT201"])
    pairs = [
        ArticulationPair("alpha:MATH101", "gamma:MAT201"),  # target not embedded
        ArticulationPair("alpha:ENG101", "gamma:WRT105"),
    ]
    result = recall_at_k(model, table, pairs, 1, small_catalog)
    assert result.total == 1 and result.skipped == 1


def test_recall_matches_per_query_ranking(small_catalog):
    # oracle: recall computed by re-ranking every source with rank_candidates
    table = random_table(sorted(small_catalog.courses), dim=6, seed=13)
    model = identity_model(small_catalog.institution_ids(), table.dim)
    pairs = [
        ArticulationPair("alpha:MATH101", "gamma:MAT201"),
        ArticulationPair("alpha:ENG101", "gamma:WRT105"),
        ArticulationPair("beta:MTH150", "gamma:PHY301"),
        ArticulationPair("beta:ENGL100", "gamma:WRT105"),
    ]
    for k in (1, 2, 3):
        expected = 0
        for pair in pairs:
            ranked = rank_candidates(
                table, small_catalog, pair.source_course_id,
                "gamma", k=k,
            )
            if pair.target_course_id in [cid for cid, _ in ranked.entries]:
                expected += 1
        got = recall_at_k(model, table, pairs, k, small_catalog)
        assert got.correct == expected


@pytest.fixture(scope="module")
def cv_benchmark():
    return planted_benchmark(
        n_institutions=3,
        courses_per_institution=40,
        n_classes=40,
        dim=12,
        noise=0.01,
        seed=17,
    )


def test_cross_validate_partitions_every_pair_once(cv_benchmark):
    bench = cv_benchmark
    config = SsaConfig(learning_rate=1.0, epochs=40, batch_size=64, seed=4)
    report = cross_validate(bench.catalog, bench.table, bench.pairs, config, k_folds=5)
    assert sum(f["total"] + f["skipped"] for f in report.per_fold) == len(bench.pairs)
    assert report.total + report.skipped == len(bench.pairs)
    # pooled recall must be sum(correct)/sum(total), not a mean of fold rates
    pooled_1 = sum(f["correct_at_1"] for f in report.per_fold) / report.total
    assert report.recall_at_1 == pytest.approx(pooled_1, abs=1e-15)
    assert 0.0 <= report.recall_at_1 <= report.recall_at_5 <= 1.0


def test_cross_validate_deterministic(cv_benchmark):
    bench = cv_benchmark
    config = SsaConfig(learning_rate=1.0, epochs=10, batch_size=64, seed=5)
    a = cross_validate(bench.catalog, bench.table, bench.pairs, config, k_folds=4)
    b = cross_validate(bench.catalog, bench.table, bench.pairs, config, k_folds=4)
    assert a.to_dict() == b.to_dict()


def test_cross_validate_folds_respect_seed(cv_benchmark):
    bench = cv_benchmark
    folds_a = make_folds(bench.pairs, k=5, seed=8)
    folds_b = make_folds(bench.pairs, k=5, seed=8)
    assert folds_a.fold_of == folds_b.fold_of


def test_identity_ranking_matches_raw_cosine(cv_benchmark):
    bench = cv_benchmark
    model = identity_model(bench.catalog.institution_ids(), bench.table.dim)
    from coursealign.ssa import encode_shared

    shared = encode_shared(model, bench.table)
    source = bench.pairs[0].source_course_id
    inst = bench.catalog.course(bench.pairs[0].target_course_id).institution_id
    raw = rank_candidates(bench.table, bench.catalog, source, inst, k=5)
    aligned = rank_candidates(shared, bench.catalog, source, inst, k=5)
    assert raw.entries == aligned.entries
