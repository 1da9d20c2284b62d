"""Command-line interface.

Subcommands cover the full pipeline: ingest and validate catalog files, train
enrollment embeddings, fit the alignment model, evaluate retrieval, sweep the
operating threshold, expand the articulation catalog, measure dispersion,
project adoption, and serve the review API.

Exit codes: 0 success, 1 domain error (single-line JSON on stderr), 2 usage
error.  Every JSON artifact embeds a provenance header (tool version, seed,
input digests) and is byte-stable for identical inputs and seed.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .catalog import (
    ArticulationPair,
    Catalog,
    fanout_stats,
    load_articulations,
    load_catalog,
    load_enrollments,
    segment_breakdown,
)
from .course2vec import Course2vecConfig, train_course2vec
from .dispersion import dispersion_report
from .embed import load_embeddings, prepare_tables, save_embeddings
from .errors import CourseAlignError, EmptyInputError, IoError
from .predict import cross_validate
from .service import DecisionLog, ReviewState, build_scenarios, make_server
from .ssa import SsaConfig, encode_shared, identity_model, load_model, save_model, train_ssa
from .threshold import (
    expand,
    pair_scores,
    project_adoption,
    roc_auc,
    sample_pseudo_negatives,
    with_best_threshold,
)

logger = logging.getLogger(__name__)


def _digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _provenance(args: argparse.Namespace, *path_attrs: str) -> dict:
    inputs = {}
    for attr in path_attrs:
        value = getattr(args, attr, None)
        if value:
            inputs[attr] = _digest(value)
    return {
        "tool": "coursealign",
        "version": __version__,
        "seed": getattr(args, "seed", None),
        "inputs": inputs,
    }


def _render_table(payload: Any, indent: int = 0) -> list[str]:
    pad = "  " * indent
    lines: list[str] = []
    if isinstance(payload, dict):
        width = max((len(str(k)) for k in payload), default=0)
        for key, value in payload.items():
            if isinstance(value, (dict, list)):
                lines.append(f"{pad}{key}:")
                lines.extend(_render_table(value, indent + 1))
            else:
                lines.append(f"{pad}{str(key):<{width}}  {value}")
    elif isinstance(payload, list):
        if payload and all(isinstance(row, dict) for row in payload):
            columns = list(payload[0])
            widths = {
                c: max(len(str(c)), *(len(str(row.get(c, ""))) for row in payload))
                for c in columns
            }
            lines.append(pad + "  ".join(f"{c:<{widths[c]}}" for c in columns))
            for row in payload:
                lines.append(pad + "  ".join(f"{str(row.get(c, '')):<{widths[c]}}" for c in columns))
        else:
            for value in payload:
                lines.append(f"{pad}- {value}")
    else:
        lines.append(f"{pad}{payload}")
    return lines


def _emit(payload: dict, args: argparse.Namespace) -> None:
    """Write JSON to --out when given; print to stdout per --format."""
    text = json.dumps(payload, indent=2) + "\n"
    out = getattr(args, "out", None)
    if out:
        try:
            Path(out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot write output file {out!r}: {exc}") from None
    fmt = getattr(args, "format", "json")
    if fmt == "table":
        print("\n".join(_render_table(payload)))
    elif not out:
        sys.stdout.write(text)


def _load_catalog(args) -> Catalog:
    return load_catalog(args.institutions, args.courses)


def _load_pairs(args, catalog: Catalog) -> list[ArticulationPair]:
    return load_articulations(args.articulations, catalog)


def _load_table(args, catalog: Catalog):
    text = load_embeddings(args.embeddings, args.dim)
    c2v = None
    if getattr(args, "course2vec_embeddings", None):
        c2v = load_embeddings(args.course2vec_embeddings)
    return prepare_tables(text, c2v, catalog)


def _ssa_config(args) -> SsaConfig:
    return SsaConfig(
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=args.batch_size,
        reorthogonalize_every=args.reorthogonalize_every,
        convergence_tol=args.convergence_tol,
        seed=args.seed,
        symmetrize=args.symmetrize,
    )


# ---------------------------------------------------------------- subcommands


def _cmd_ingest(args) -> None:
    catalog = _load_catalog(args)
    payload: dict[str, Any] = {
        "provenance": _provenance(args, "institutions", "courses", "articulations"),
        "institutions": len(catalog.institutions),
        "courses": len(catalog.courses),
        "transferable_courses": sum(1 for c in catalog.courses.values() if c.transferable),
    }
    if args.articulations:
        pairs = _load_pairs(args, catalog)
        payload["articulations"] = len(pairs)
        payload["segment_breakdown"] = segment_breakdown(pairs, catalog)
        try:
            mean, std = fanout_stats(pairs)
            payload["fanout_mean"] = round(mean, 6)
            payload["fanout_std"] = round(std, 6)
        except EmptyInputError:
            pass
    _emit(payload, args)


def _cmd_course2vec(args) -> None:
    catalog = _load_catalog(args)
    sequences = load_enrollments(args.enrollments, catalog)
    config = Course2vecConfig(
        dim=args.dim,
        window=args.window,
        negatives=args.negatives,
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        min_count=args.min_count,
        seed=args.seed,
    )
    table = train_course2vec(sequences, config)
    save_embeddings(table, args.out)
    payload = {
        "provenance": _provenance(args, "institutions", "courses", "enrollments"),
        "sequences": len(sequences),
        "courses_embedded": len(table),
        "dim": table.dim,
        "out": args.out,
    }
    args.out = None  # summary goes to stdout; --out already holds the vectors
    _emit(payload, args)


def _cmd_train(args) -> None:
    catalog = _load_catalog(args)
    pairs = _load_pairs(args, catalog)
    table = _load_table(args, catalog)
    model = train_ssa(table, pairs, catalog.institution_ids(), _ssa_config(args))
    save_model(model, args.out)
    payload = {
        "provenance": _provenance(
            args, "institutions", "courses", "articulations", "embeddings", "course2vec_embeddings"
        ),
        "dim": model.dim,
        "institutions": len(model.matrices),
        "pairs": model.trained_on["n_pairs"],
        "epochs_run": model.trained_on["epochs_run"],
        "converged": model.trained_on["converged"],
        "final_loss": model.final_loss,
        "orthogonality_defect": model.max_orthogonality_defect(),
        "model": args.out,
    }
    args.out = None
    _emit(payload, args)


def _cmd_evaluate(args) -> None:
    catalog = _load_catalog(args)
    pairs = _load_pairs(args, catalog)
    table = _load_table(args, catalog)
    report = cross_validate(catalog, table, pairs, _ssa_config(args), k_folds=args.folds)
    payload = {
        "provenance": _provenance(
            args, "institutions", "courses", "articulations", "embeddings", "course2vec_embeddings"
        ),
        **report.to_dict(),
    }
    _emit(payload, args)
    if args.out and args.format != "table":
        print("\n".join(_render_table({"per_fold": payload["per_fold"]})))
        print(f"recall@1 {report.recall_at_1:.4f}  recall@5 {report.recall_at_5:.4f}  "
              f"total {report.total}  skipped {report.skipped}")


def _cmd_threshold(args) -> None:
    catalog = _load_catalog(args)
    pairs = _load_pairs(args, catalog)
    table = _load_table(args, catalog)
    model = load_model(args.model)
    shared = encode_shared(model, table)
    pos, skipped_pos = pair_scores(shared, pairs)
    n_negatives = max(1, round(len(pos) * args.pseudo_ratio))
    sampled = sample_pseudo_negatives(catalog, pairs, n_negatives, args.seed)
    neg, _ = pair_scores(shared, [ArticulationPair(a, b, "pseudo") for a, b in sampled])
    report = with_best_threshold(roc_auc(pos, neg))
    if args.roc_csv:
        with open(args.roc_csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["threshold", "tpr", "fpr", "tnr", "fnr"])
            for point in report.roc:
                writer.writerow([point.threshold, point.tpr, point.fpr, point.tnr, point.fnr])
    payload = {
        "provenance": _provenance(
            args, "institutions", "courses", "articulations", "embeddings",
            "course2vec_embeddings", "model",
        ),
        **report.to_dict(),
        "skipped_pairs": skipped_pos,
    }
    _emit(payload, args)


def _cmd_expand(args) -> None:
    catalog = _load_catalog(args)
    pairs = _load_pairs(args, catalog)
    table = _load_table(args, catalog)
    model = load_model(args.model)
    shared = encode_shared(model, table)
    threshold_value = args.threshold
    if threshold_value is None:
        if not args.report:
            raise CourseAlignError("expand requires --threshold or --report")
        report_payload = json.loads(Path(args.report).read_text(encoding="utf-8"))
        threshold_value = report_payload.get("best_threshold")
        if threshold_value is None:
            raise CourseAlignError(f"report {args.report!r} has no best_threshold")
    mode = "global" if args.global_top1 else "per_institution"
    result = expand(shared, catalog, pairs, float(threshold_value), mode=mode)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_course_id", "target_course_id", "cosine"])
        for source, target, cosine in result.new_pairs:
            writer.writerow([source, target, repr(cosine)])
    payload = {
        "provenance": _provenance(
            args, "institutions", "courses", "articulations", "embeddings",
            "course2vec_embeddings", "model",
        ),
        "threshold": result.threshold,
        "mode": result.mode,
        "new_pairs": len(result.new_pairs),
        "excluded_existing": result.excluded_existing,
        "by_segment": result.by_segment,
        "ratio_vs_existing": result.ratio_vs_existing,
        "out": args.out,
    }
    args.out = None
    _emit(payload, args)


def _cmd_dispersion(args) -> None:
    catalog = _load_catalog(args)
    table = _load_table(args, catalog)
    model = load_model(args.model)
    shared = encode_shared(model, table)
    report = dispersion_report(table, shared, catalog, scope=args.scope)
    group_rows = []
    for key, group in report.per_group.items():
        row = {}
        if args.scope == "institutional":
            row["institution"] = key[0]
            row["cip2"] = key[1]
        else:
            row["cip2"] = key
        row.update(
            n_courses=group.n_courses,
            radius_before=group.radius_before,
            radius_after=group.radius_after,
            delta=group.delta,
        )
        group_rows.append(row)
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            columns = list(group_rows[0]) if group_rows else ["cip2", "n_courses", "radius_before", "radius_after", "delta"]
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in group_rows:
                writer.writerow([row[c] for c in columns])
    payload = {
        "provenance": _provenance(
            args, "institutions", "courses", "embeddings", "course2vec_embeddings", "model"
        ),
        "scope": report.scope,
        "groups": len(report.per_group),
        "mean_delta": report.mean_delta,
        "share_decreased": report.share_decreased,
        "skipped_small": report.skipped_small,
        "skipped_missing_cip": report.skipped_missing_cip,
        "per_group": group_rows,
    }
    _emit(payload, args)


def _cmd_project(args) -> None:
    expected, fold = project_adoption(args.candidates, args.rate, args.existing)
    payload = {
        "provenance": _provenance(args),
        "candidates": args.candidates,
        "rate": args.rate,
        "existing": args.existing,
        "expected_accepted": expected,
        "fold_increase": fold,
        "ratio_vs_existing": args.candidates / args.existing,
    }
    _emit(payload, args)


def _read_expansions_csv(path: str) -> list[tuple[str, str]]:
    rows: list[tuple[str, str]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["source_course_id", "target_course_id", "cosine"]:
            raise CourseAlignError(f"{path}: unexpected expansions header {header!r}")
        for row in reader:
            if not row:
                continue
            rows.append((row[0], row[1]))
    return rows


def _cmd_serve(args) -> None:
    catalog = _load_catalog(args)
    pairs = _load_pairs(args, catalog)
    table = _load_table(args, catalog)
    model = load_model(args.model) if args.model else identity_model(catalog.institution_ids(), table.dim)
    shared = encode_shared(model, table)
    scenarios = None
    n_candidates = None
    if args.expansions:
        expansion_rows = _read_expansions_csv(args.expansions)
        scenarios = build_scenarios(shared, catalog, expansion_rows, k=args.candidates)
        n_candidates = len(expansion_rows)
    state = ReviewState(
        scenarios,
        DecisionLog(args.decisions),
        n_existing=len(pairs),
        n_candidates=n_candidates,
    )
    server = make_server(state, args.port, args.ui_dir)
    ready = {
        "status": "serving",
        "port": server.server_address[1],
        "scenarios": len(scenarios) if scenarios is not None else None,
        "decisions_log": args.decisions,
    }
    print(json.dumps(ready), flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        state.log.close()


def _cmd_synth(args) -> None:
    from .synthdata import planted_benchmark, synthetic_enrollments, write_benchmark_files

    benchmark = planted_benchmark(
        n_institutions=args.n_institutions,
        courses_per_institution=args.courses_per_institution,
        n_classes=args.classes,
        dim=args.dim,
        noise=args.noise,
        nuisance=args.nuisance,
        seed=args.seed,
    )
    enrollments = None
    if args.students_per_institution:
        enrollments = synthetic_enrollments(
            benchmark, students_per_institution=args.students_per_institution, seed=args.seed
        )
    paths = write_benchmark_files(benchmark, args.out_dir, enrollments)
    payload = {
        "provenance": _provenance(args),
        "out_dir": args.out_dir,
        "files": {k: str(v) for k, v in paths.items()},
        "courses": len(benchmark.catalog.courses),
        "pairs": len(benchmark.pairs),
        "classes": args.classes,
    }
    _emit(payload, args)


# ------------------------------------------------------------------- parsing


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=42, help="seed for all randomized steps")
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--format", choices=["json", "table"], default="json")
    parser.add_argument("--out", help="output artifact path")


def _add_catalog_args(parser: argparse.ArgumentParser, articulations_required: bool) -> None:
    parser.add_argument("--institutions", required=True, help="institutions.csv")
    parser.add_argument("--courses", required=True, help="courses.csv")
    if articulations_required:
        parser.add_argument("--articulations", required=True, help="articulations.csv")
    else:
        parser.add_argument("--articulations", help="articulations.csv")


def _add_embedding_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--embeddings", required=True, help="course vectors (JSONL)")
    parser.add_argument(
        "--course2vec-embeddings",
        dest="course2vec_embeddings",
        help="optional second table concatenated onto --embeddings",
    )
    parser.add_argument("--dim", type=int, help="expected embedding dimension")


def _add_ssa_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--learning-rate", type=float, default=0.01)
    parser.add_argument("--epochs", type=int, default=50)
    parser.add_argument("--batch-size", type=int, default=256)
    parser.add_argument("--reorthogonalize-every", type=int, default=1)
    parser.add_argument("--convergence-tol", type=float, default=1e-5)
    parser.add_argument("--symmetrize", action="store_true",
                        help="also train on reversed pairs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coursealign",
        description="Align course embedding spaces across institutions and "
                    "propose articulation candidates.",
    )
    parser.add_argument("--version", action="version", version=f"coursealign {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    subcommand_parsers: list[argparse.ArgumentParser] = []
    _add_parser = sub.add_parser

    def add_parser(*args, **kwargs):
        p = _add_parser(*args, **kwargs)
        subcommand_parsers.append(p)
        return p

    sub.add_parser = add_parser  # type: ignore[method-assign]
    parser.subcommand_parsers = subcommand_parsers  # type: ignore[attr-defined]

    p = sub.add_parser("ingest", help="validate catalog files and report counts")
    _add_common(p)
    _add_catalog_args(p, articulations_required=False)
    p.set_defaults(handler=_cmd_ingest)

    p = sub.add_parser("course2vec", help="train enrollment-sequence embeddings")
    _add_common(p)
    _add_catalog_args(p, articulations_required=False)
    p.add_argument("--enrollments", required=True, help="enrollments.csv")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--learning-rate", type=float, default=0.025)
    p.add_argument("--min-count", type=int, default=1)
    p.set_defaults(handler=_cmd_course2vec)

    p = sub.add_parser("train", help="fit the shared-space alignment model")
    _add_common(p)
    _add_catalog_args(p, articulations_required=True)
    _add_embedding_args(p)
    _add_ssa_args(p)
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("evaluate", help="cross-validated retrieval quality")
    _add_common(p)
    _add_catalog_args(p, articulations_required=True)
    _add_embedding_args(p)
    _add_ssa_args(p)
    p.add_argument("--folds", type=int, default=5)
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("threshold", help="ROC sweep against pseudo-negatives")
    _add_common(p)
    _add_catalog_args(p, articulations_required=True)
    _add_embedding_args(p)
    p.add_argument("--model", required=True, help="trained alignment model")
    p.add_argument("--pseudo-ratio", type=float, default=1.0,
                   help="negatives sampled per positive")
    p.add_argument("--roc-csv", help="write swept ROC points as CSV")
    p.set_defaults(handler=_cmd_threshold)

    p = sub.add_parser("expand", help="propose new articulations above a threshold")
    _add_common(p)
    _add_catalog_args(p, articulations_required=True)
    _add_embedding_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--threshold", type=float, help="operating cosine threshold")
    p.add_argument("--report", help="threshold report JSON to take best_threshold from")
    p.add_argument("--global-top1", dest="global_top1", action="store_true",
                   help="keep one candidate per source course instead of one per institution")
    p.set_defaults(handler=_cmd_expand)
    # expansions CSV is the primary artifact
    p.add_argument("--summary", help=argparse.SUPPRESS)

    p = sub.add_parser("dispersion", help="subject-cluster radii before/after alignment")
    _add_common(p)
    _add_catalog_args(p, articulations_required=False)
    _add_embedding_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--scope", choices=["system", "institutional"], default="system")
    p.add_argument("--csv", help="write per-group radii as CSV")
    p.set_defaults(handler=_cmd_dispersion)

    p = sub.add_parser("project", help="project catalog growth at an adoption rate")
    _add_common(p)
    p.add_argument("--candidates", type=int, required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--existing", type=int, required=True)
    p.set_defaults(handler=_cmd_project)

    p = sub.add_parser("serve", help="run the reviewer HTTP service")
    _add_common(p)
    _add_catalog_args(p, articulations_required=True)
    _add_embedding_args(p)
    p.add_argument("--model", help="trained alignment model (identity when omitted)")
    p.add_argument("--expansions", help="expansions.csv with candidate pairs")
    p.add_argument("--decisions", required=True, help="NDJSON decision log path")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--candidates", type=int, default=7,
                   help="recommendations per scenario")
    p.add_argument("--ui-dir", dest="ui_dir", help="static review UI directory")
    p.set_defaults(handler=_cmd_serve)

    p = sub.add_parser("synth", help="generate a synthetic benchmark dataset")
    _add_common(p)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--n-institutions", type=int, default=5)
    p.add_argument("--courses-per-institution", type=int, default=40)
    p.add_argument("--classes", type=int, default=80)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--nuisance", type=float, default=0.0)
    p.add_argument("--students-per-institution", type=int, default=0)
    p.set_defaults(handler=_cmd_synth)

    return parser


def dispatch(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()

    # two-phase parse so --config supplies defaults that flags still override
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if known.config:
        try:
            overrides = json.loads(Path(known.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            print(json.dumps({"error": "Io", "detail": f"bad config file: {exc}"}), file=sys.stderr)
            return 1
        if not isinstance(overrides, dict):
            print(json.dumps({"error": "Io", "detail": "config file must hold a JSON object"}),
                  file=sys.stderr)
            return 1
        # defaults must land on the subparsers: each one parses into a fresh
        # namespace, so main-parser defaults would be shadowed
        parser.set_defaults(**overrides)
        for sub in parser.subcommand_parsers:  # type: ignore[attr-defined]
            sub.set_defaults(**overrides)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.handler(args)
    except CourseAlignError as exc:
        print(json.dumps({"error": exc.code, "detail": exc.detail}), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": "Io", "detail": str(exc)}), file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
