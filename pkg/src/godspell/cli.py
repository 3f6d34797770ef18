"""Command-line pipeline: godspell <subcommand> --config run.json [flags].

Subcommands write their artifacts into the configured output directory and
are idempotent given unchanged inputs. Exit codes: 0 success, 1 config
error, 2 runtime error (with error.json in the output directory), 64
unknown subcommand.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import annotate, corpus, evaluation, topics
from . import stats as statsmod
from .report import (
    ConfigError, RunConfig, figure_data, load_run_config, markdown_summary, write_csv,
)

log = logging.getLogger(__name__)


def _dump_json(path: Path, payload: dict) -> None:
    path.write_text(
        json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )


def _load_json(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


def _require_artifact(path: Path, produced_by: str) -> Path:
    if not path.is_file():
        raise FileNotFoundError(f"missing {path.name}; run `godspell {produced_by}` first")
    return path


def _load_stopwords(config: RunConfig) -> set[str]:
    if config.stopwords_path is None:
        return set()
    words = set()
    for line in config.stopwords_path.read_text(encoding="utf-8").splitlines():
        word = line.strip().lower()
        if word:
            words.add(word)
    return words


def cmd_ingest(config: RunConfig) -> None:
    loaded = corpus.ingest(config.manifest)
    novels = []
    total = 0
    for novel in loaded.novels:
        words = len(corpus.word_tokenize(loaded.text(novel.id)))
        total += words
        novels.append({
            "id": novel.id,
            "title": novel.title,
            "authors": [{"name": a.name, "gender": a.gender} for a in novel.authors],
            "publisher": novel.publisher,
            "year": novel.year,
            "series_tag": novel.series_tag,
            "awards": [
                {"category": a.category, "status": a.status, "award_year": a.award_year}
                for a in novel.awards
            ],
            "gender_group": novel.gender_group(),
            "word_count": words,
        })
    _dump_json(config.output_dir / "corpus.json", {"novels": novels, "total_words": total})
    print(f"ingested {len(novels)} novels ({total} words)")


def cmd_segment(config: RunConfig) -> None:
    loaded = corpus.ingest(config.manifest)
    passages = corpus.segment_corpus(loaded, cap=config.passage_cap)
    corpus.write_passages(passages, config.output_dir / "passages.jsonl")
    summary = corpus.passage_statistics(passages)
    print(
        f"wrote {summary.passage_count} passages "
        f"(mean {summary.mean_word_length} words) for {summary.novel_count} novels"
    )


def cmd_topics_train(config: RunConfig) -> None:
    loaded = corpus.ingest(config.manifest)
    segments = corpus.segment_corpus_fixed(loaded, segment_size=config.segment_size)
    vocab, docs = topics.build_vocabulary(
        segments, _load_stopwords(config), min_count=config.topics_min_count
    )
    doc_novels = [seg.novel_id for seg in segments]
    if config.topics_downsample:
        docs = topics.authorless_downsample(
            docs, doc_novels, rng_seed=config.topics_downsample_seed
        )
    state, summary = topics.train(
        docs,
        vocab.size,
        k=config.topics_k,
        sweeps=config.topics_sweeps,
        burn_in=config.topics_burn_in,
        optimize_interval=config.topics_optimize_interval,
        rng_seed=config.topics_seed,
    )
    topics_dir = config.output_dir / "topics"
    topics_dir.mkdir(parents=True, exist_ok=True)
    topics.save_state(topics_dir / "state.json", state, summary, vocab, doc_novels)
    print(
        f"trained K={config.topics_k} on {len(docs)} segments "
        f"(V={vocab.size}, final log-likelihood {summary.log_likelihoods[-1]:.2f})"
    )


def cmd_topics_inspect(config: RunConfig) -> None:
    state_path = _require_artifact(config.output_dir / "topics" / "state.json", "topics-train")
    model = topics.load_state(state_path)
    rows = []
    for k in range(model.k):
        for rank, word in enumerate(model.top_words(k, n=10), start=1):
            rows.append([k, rank, word, int(model.n_kw[k][model.vocabulary.index(word)])])
    write_csv(
        config.output_dir / "topics" / "top_words.csv",
        ["topic", "rank", "word", "count"],
        rows,
    )
    for k in range(model.k):
        print(f"topic {k}: " + " ".join(model.top_words(k, n=10)))


def cmd_annotate(config: RunConfig) -> None:
    passages = corpus.read_passages(
        _require_artifact(config.output_dir / "passages.jsonl", "segment")
    )
    if config.prompt_registry_path is not None:
        registry = annotate.load_registry(config.prompt_registry_path)
    else:
        registry = annotate.default_registry()
    model_config = annotate.ModelConfig(
        model=config.model_name,
        endpoint=config.model_endpoint,
        temperature=config.model_temperature,
        max_retries=config.model_max_retries,
        timeout=config.model_timeout,
    )
    transport = annotate.MockModel().transport if config.model_backend == "mock" else None
    annotations = annotate.run_pipeline(
        passages,
        model_config,
        registry=registry,
        cache_dir=config.resolved_cache_dir(),
        transport=transport,
        workers=config.workers,
        versions=config.prompt_versions,
    )
    annotate.write_annotations(annotations, config.output_dir / "annotations.jsonl")
    yes = sum(1 for a in annotations if a.status == "ok" and a.final_label == "YES")
    unresolved = sum(1 for a in annotations if a.status != "ok")
    print(f"annotated {len(annotations)} passages: {yes} YES, {unresolved} unresolved")


def cmd_eval(config: RunConfig) -> None:
    annotations = annotate.read_annotations(
        _require_artifact(config.output_dir / "annotations.jsonl", "annotate")
    )
    if not config.annotation_rounds:
        raise ValueError("config has no evaluation.rounds annotation files")
    rounds = {
        path.stem: evaluation.read_annotation_csv(path) for path in config.annotation_rounds
    }
    alpha_per_round = {name: evaluation.krippendorff_alpha(data) for name, data in rounds.items()}
    merged = evaluation.merge_reliability(rounds)
    overrides = (
        evaluation.read_gold_overrides(config.gold_overrides_path)
        if config.gold_overrides_path is not None
        else {}
    )
    gold = evaluation.build_gold(merged, overrides)

    by_ref = {a.ref: a for a in annotations}
    missing = sorted(set(gold.labels) - set(by_ref))
    if missing:
        raise ValueError(f"gold passages missing from annotations: {missing}")
    predicted = {}
    unresolved = 0
    for ref in gold.labels:
        ann = by_ref[ref]
        if ann.status != "ok":
            predicted[ref] = "NO"
            unresolved += 1
        else:
            predicted[ref] = ann.final_label
    matrix = evaluation.confusion(gold, predicted)
    report = evaluation.prf(matrix)

    payload = {
        "alpha_per_round": alpha_per_round,
        "gold_size": len(gold.labels),
        "gold_yes": sum(1 for v in gold.labels.values() if v == "YES"),
        "gold_no": sum(1 for v in gold.labels.values() if v == "NO"),
        "resolved_by_discussion": len(gold.resolved_by_discussion),
        "confusion": matrix.to_dict(),
        "metrics": report.to_dict(),
        "unresolved_scored_as_no": unresolved,
    }
    if config.spotcheck_path is not None:
        payload["spotcheck"] = _spotcheck(config.spotcheck_path, by_ref)
    _dump_json(config.output_dir / "metrics.json", payload)
    print(
        f"scored {len(gold.labels)} gold passages: micro-F1 {report.micro_f1:.3f} "
        f"(YES F1 {report.yes['f1']:.3f}, NO F1 {report.no['f1']:.3f})"
    )


def _spotcheck(path: Path, by_ref: dict[str, annotate.ActAnnotation]) -> dict[str, float]:
    human_affect: dict[str, str] = {}
    human_impact: dict[str, str] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            ref = row["passage_id"].strip()
            human_affect[ref] = row["affect"].strip().upper()
            human_impact[ref] = row["impact"].strip().upper()
    model_affect = {}
    model_impact = {}
    for ref in human_affect:
        ann = by_ref.get(ref)
        if ann is None or ann.status != "ok" or ann.final_label != "YES":
            raise ValueError(f"spot-check passage {ref} is not a resolved YES annotation")
        model_affect[ref] = ann.affect
        model_impact[ref] = ann.impact
    return {
        "affect": evaluation.spotcheck_agreement(human_affect, model_affect),
        "impact": evaluation.spotcheck_agreement(human_impact, model_impact),
    }


def _read_topic_labels(path: Path) -> dict[str, str]:
    labels = {}
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            labels[row["topic_index"].strip()] = row["label"].strip()
    return labels


def _resolve_comparison_series(
    spec: dict,
    act: statsmod.ActProportions,
    characterization: statsmod.CharacterizationShares,
    prominence_per_novel: dict[str, list[float]],
    novels,
) -> statsmod.NovelSeries:
    kind = spec.get("kind")
    if kind == "act_share":
        return act.series
    if kind == "topic_prominence":
        topic = int(spec["topic"])
        values = {nid: prom[topic] for nid, prom in prominence_per_novel.items()}
        return statsmod.make_series(f"topic_{topic}_prominence", values, novels)
    if kind == "characterization":
        facet = spec["facet"]
        label = spec["label"].upper()
        table = (
            characterization.affect_series if facet == "affect"
            else characterization.impact_series
        )
        return table[label]
    raise ValueError(f"unknown comparison kind {kind!r}")


def cmd_stats(config: RunConfig) -> None:
    loaded = corpus.ingest(config.manifest)
    passages = corpus.read_passages(
        _require_artifact(config.output_dir / "passages.jsonl", "segment")
    )
    annotations = annotate.read_annotations(
        _require_artifact(config.output_dir / "annotations.jsonl", "annotate")
    )
    model = topics.load_state(
        _require_artifact(config.output_dir / "topics" / "state.json", "topics-train")
    )
    analysis = _load_json(config.analysis_path) if config.analysis_path else {}

    act = statsmod.act_proportions(annotations, loaded.novels)
    act_payload = act.to_dict()
    if act.series.values:
        shares = list(act.series.values.values())
        act_payload["per_novel_mean"] = sum(shares) / len(shares)
        act_payload["per_novel_min"] = min(shares)
        act_payload["per_novel_max"] = max(shares)

    density = statsmod.position_density(
        annotations, passages, bins=int(analysis.get("position_bins", 20))
    )
    prominences = topics.prominence_from_doc_topic(
        model.doc_topic, model.doc_novels, [n.id for n in loaded.novels]
    )
    prominence_per_novel = {p.novel_id: p.prominence for p in prominences}
    mean_prominence = [
        sum(p.prominence[t] for p in prominences) / len(prominences)
        for t in range(model.k)
    ] if prominences else []

    correlations = []
    for pair in analysis.get("topic_correlations", []):
        a, b = int(pair[0]), int(pair[1])
        entry: dict = {"topics": [a, b]}
        try:
            r, p = topics.topic_correlation(prominences, a, b)
            entry.update(r=r, p=p)
        except ValueError as e:
            entry["error"] = str(e)
        correlations.append(entry)

    act_topic = []
    for topic in analysis.get("act_share_topic_correlations", []):
        topic = int(topic)
        shared = sorted(set(act.series.values) & set(prominence_per_novel))
        entry = {"topic": topic}
        try:
            r, p = statsmod.pearson(
                [act.series.values[n] for n in shared],
                [prominence_per_novel[n][topic] for n in shared],
            )
            entry.update(r=r, p=p)
        except ValueError as e:
            entry["error"] = str(e)
        act_topic.append(entry)

    characterization = statsmod.characterization_shares(annotations, loaded.novels)

    comparisons = []
    series_tag = analysis.get("series_tag")
    for spec in analysis.get("comparisons", []):
        name = spec.get("name") or f"{spec.get('kind')}~{spec.get('grouping')}"
        entry = {"name": name}
        try:
            series = _resolve_comparison_series(
                spec, act, characterization, prominence_per_novel, loaded.novels
            )
            result = statsmod.group_compare(
                series,
                spec["grouping"],
                series_tag=series_tag if spec["grouping"] == "series" else None,
            )
            entry.update(result.to_dict())
        except (KeyError, ValueError) as e:
            entry["error"] = str(e)
        comparisons.append(entry)

    payload = {
        "passages": corpus.passage_statistics(passages).to_dict(),
        "novels": {
            n.id: {
                "title": n.title,
                "series_tag": n.series_tag,
                "gender_group": n.gender_group(),
            }
            for n in loaded.novels
        },
        "act_proportions": act_payload,
        "position_density": density.to_dict(),
        "topic_prominence": {
            "per_novel": prominence_per_novel,
            "mean": mean_prominence,
        },
        "topic_correlations": correlations,
        "act_share_topic_correlations": act_topic,
        "comparisons": comparisons,
        "characterization": characterization.to_dict(),
    }
    if config.topic_labels_path is not None:
        payload["topic_labels"] = _read_topic_labels(config.topic_labels_path)
    _dump_json(config.output_dir / "stats.json", payload)
    print(f"wrote stats for {len(loaded.novels)} novels ({act.yes_count} acts)")


def cmd_report(config: RunConfig) -> None:
    results = _load_json(_require_artifact(config.output_dir / "stats.json", "stats"))
    metrics_path = config.output_dir / "metrics.json"
    metrics = _load_json(metrics_path) if metrics_path.is_file() else None
    written = figure_data(results, config.output_dir / "figures")
    (config.output_dir / "report.md").write_text(
        markdown_summary(results, metrics), encoding="utf-8"
    )
    print(f"wrote report.md and {len(written)} figure tables")


COMMANDS = {
    "ingest": cmd_ingest,
    "segment": cmd_segment,
    "topics-train": cmd_topics_train,
    "topics-inspect": cmd_topics_inspect,
    "annotate": cmd_annotate,
    "eval": cmd_eval,
    "stats": cmd_stats,
    "report": cmd_report,
}

USAGE = (
    "usage: godspell <subcommand> --config RUN.json [flags]\n"
    "subcommands: " + ", ".join(COMMANDS) + "\n"
    "flags: --output DIR --model NAME --endpoint URL --temperature T\n"
    "       --workers N --cache-dir DIR --mock --seed N --k N --sweeps N\n"
    f"The GODSPELL_ENDPOINT environment variable overrides the configured endpoint."
)


def _build_parser(command: str) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=f"godspell {command}")
    parser.add_argument("--config", required=True, help="run config JSON")
    parser.add_argument("--output", help="output directory override")
    parser.add_argument("--model", help="model name override")
    parser.add_argument("--endpoint", help="inference endpoint override")
    parser.add_argument("--temperature", type=float, default=None)
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--cache-dir", dest="cache_dir", help="annotation cache directory")
    parser.add_argument("--mock", action="store_true", help="use the built-in mock model")
    parser.add_argument("--seed", type=int, default=None, help="topic training seed")
    parser.add_argument("--k", type=int, default=None, help="topic count")
    parser.add_argument("--sweeps", type=int, default=None, help="Gibbs sweeps")
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if argv and argv[0] in ("-h", "--help"):
        print(USAGE)
        return 0
    if not argv or argv[0] not in COMMANDS:
        print(USAGE, file=sys.stderr)
        return 64
    command = argv[0]
    parser = _build_parser(command)
    try:
        args = parser.parse_args(argv[1:])
    except SystemExit as e:
        return 0 if e.code in (0, None) else 64

    overrides = {
        "output_dir": args.output,
        "model": args.model,
        "endpoint": args.endpoint,
        "temperature": args.temperature,
        "workers": args.workers,
        "cache_dir": args.cache_dir,
        "backend": "mock" if args.mock else None,
        "seed": args.seed,
        "k": args.k,
        "sweeps": args.sweeps,
    }
    try:
        config = load_run_config(args.config, overrides)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    try:
        COMMANDS[command](config)
        return 0
    except Exception as e:  # noqa: BLE001 - boundary: report and set exit code
        log.error("%s failed: %s", command, e)
        _dump_json(config.output_dir / "error.json", {
            "subcommand": command,
            "error_kind": type(e).__name__,
            "message": str(e),
        })
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
