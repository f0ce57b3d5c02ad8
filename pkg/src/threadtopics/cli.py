"""Command-line pipeline driver.

Every command is a pure function of (inputs, config, seed): outputs land
under the configured output directory via write-to-temp plus atomic
rename, logs go to stderr, and no artifact embeds a timestamp, so re-runs
with identical inputs are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import corpus as corpus_mod
from . import lexicon_analysis as lex
from . import metrics as metrics_mod
from . import textprep
from . import topic_model as tm
from . import topic_naming as naming_mod
from . import validation_survey as vs
from .config import PipelineConfig, load_config
from .corpus import ParseStats, ThreadRecord, Valence
from .seeds import derive_seed

log = logging.getLogger("threadtopics")


@contextmanager
def atomic_open(path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with tmp.open("w", encoding="utf-8", newline="") as fh:
            yield fh
        os.replace(tmp, path)
    finally:
        tmp.unlink(missing_ok=True)


def atomic_write(path: Path, text: str) -> None:
    with atomic_open(path) as fh:
        fh.write(text)


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise SystemExit(f"missing input {path}: run `{hint}` first or fix the config")
    return path


def _fmt(x: float) -> str:
    return f"{float(x):.6f}"


# --- shared loaders ---------------------------------------------------------

def _read_records(path: Path) -> list[ThreadRecord]:
    return corpus_mod.read_corpus_file(path)


def _tokens_for(cfg: PipelineConfig, text: str, lemmas: dict[str, str]) -> list[str]:
    if cfg.textprep.scrub:
        text = textprep.scrub(text)
    tokens = textprep.tokenize(text)
    if cfg.lexicons.use_lemmas or lemmas:
        tokens = textprep.lemmatize(tokens, lemmas)
    return tokens


def _load_lemmas(cfg: PipelineConfig) -> dict[str, str]:
    return textprep.load_lemma_table(cfg.path_or_packaged("lemma_file", cfg.textprep.lemma_file))


def _write_bows(path: Path, bows: Iterable[textprep.DocBow]) -> None:
    with atomic_open(path) as fh:
        for bow in bows:
            fh.write(json.dumps(
                {"doc_id": bow.doc_id, "counts": {str(k): v for k, v in sorted(bow.counts.items())}},
                sort_keys=True,
            ) + "\n")


def _read_bows(path: Path) -> list[textprep.DocBow]:
    out = []
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                out.append(textprep.DocBow(
                    doc_id=rec["doc_id"],
                    counts={int(k): int(v) for k, v in rec["counts"].items()},
                ))
    return out


def _load_named(out: Path) -> naming_mod.NamedTopics:
    payload = json.loads(_require(out / "named_topics.json", "merge").read_text(encoding="utf-8"))
    return naming_mod.NamedTopics.from_json(payload)


def _named_theta(model: tm.TopicModel, named: naming_mod.NamedTopics) -> np.ndarray:
    return model.theta_train @ named.aggregation_matrix().T


def _doc_assignments(
    model: tm.TopicModel,
    named: naming_mod.NamedTopics,
    bows: Sequence[textprep.DocBow],
) -> tuple[list[dict], int]:
    """Per-document top topics; documents without two positive named topics
    are excluded from pair analyses (counted)."""
    theta = _named_theta(model, named)
    rows, excluded = [], 0
    for i, bow in enumerate(bows):
        ranked = naming_mod.top_topics(theta[i], named, 2)
        positive = [(n, p) for n, p in ranked.items if p > 0]
        if len(positive) < 2:
            excluded += 1
            continue
        rows.append({
            "post_id": bow.doc_id,
            "top1": positive[0][0],
            "top2": positive[1][0],
            "gap": ranked.gap,
        })
    return rows, excluded


def _read_assignments(out: Path) -> list[dict]:
    path = _require(out / "assignments.csv", "pairs")
    with path.open("r", encoding="utf-8", newline="") as fh:
        return [dict(row) for row in csv.DictReader(fh)]


# --- commands ---------------------------------------------------------------

def cmd_ingest(cfg: PipelineConfig, args) -> None:
    out = cfg.output_dir
    stats = ParseStats()
    posts = list(corpus_mod.parse_archive(
        _require(cfg.resolve(cfg.corpus.posts_file), "configure corpus.posts_file"), "posts", stats))
    comments = list(corpus_mod.parse_archive(
        _require(cfg.resolve(cfg.corpus.comments_file), "configure corpus.comments_file"), "comments", stats))
    threads = corpus_mod.assemble_threads(posts, comments, stats)

    records = []
    verdicted = 0
    for thread in threads:
        v = corpus_mod.reconstruct_verdict(thread, cfg.corpus.flair_map)
        records.append(corpus_mod.thread_record(v if v is not None else thread))
        verdicted += v is not None
    with atomic_open(out / "corpus_all.jsonl") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
    atomic_write(out / "ingest_stats.json", json.dumps({
        "posts": len(posts), "comments": len(comments),
        "threads": len(threads), "verdicted": verdicted,
        "skipped_lines": stats.skipped,
    }, indent=2, sort_keys=True) + "\n")
    log.info("ingested %d threads (%d verdicted, %d skips)", len(threads), verdicted, stats.skipped)


def cmd_filter(cfg: PipelineConfig, args) -> None:
    out = cfg.output_dir
    records = _read_records(_require(out / "corpus_all.jsonl", "ingest"))
    rules = cfg.corpus.rules()
    kept = [r for r in records if r.passes(rules)]
    with atomic_open(out / "corpus_filtered.jsonl") as fh:
        for r in kept:
            fh.write(json.dumps(corpus_mod.record_to_json(r), ensure_ascii=False, sort_keys=True) + "\n")
    log.info("filter kept %d of %d threads", len(kept), len(records))


def cmd_split(cfg: PipelineConfig, args) -> None:
    out = cfg.output_dir
    records = _read_records(_require(out / "corpus_filtered.jsonl", "filter"))
    cutoff = cfg.corpus.split_cutoff
    train = [r for r in records if r.created_utc <= cutoff]
    test = [r for r in records if r.created_utc > cutoff]
    for name, part in (("corpus_train.jsonl", train), ("corpus_test.jsonl", test)):
        with atomic_open(out / name) as fh:
            for r in part:
                fh.write(json.dumps(corpus_mod.record_to_json(r), ensure_ascii=False, sort_keys=True) + "\n")
    log.info("split: %d train, %d test (cutoff %d)", len(train), len(test), cutoff)


def cmd_prep(cfg: PipelineConfig, args) -> None:
    out = cfg.output_dir
    lemmas = _load_lemmas(cfg)
    stopwords = textprep.load_stopwords(cfg.path_or_packaged("stopwords_file", cfg.textprep.stopwords_file))
    train = _read_records(_require(out / "corpus_train.jsonl", "split"))
    test_path = out / "corpus_test.jsonl"
    test = _read_records(test_path) if test_path.exists() else []

    train_tokens = [_tokens_for(cfg, r.body, lemmas) for r in train]
    vocab = textprep.build_vocabulary(train_tokens, stopwords, cfg.textprep.min_df)
    vocab.save(out / "vocabulary.tsv")

    def bows_of(records, token_lists):
        bows, empty = [], 0
        for r, toks in zip(records, token_lists):
            bow = textprep.vectorize(toks, vocab, doc_id=r.post_id)
            if bow.is_empty:
                empty += 1
                continue
            bows.append(bow)
        return bows, empty

    bows_train, empty_train = bows_of(train, train_tokens)
    test_tokens = [_tokens_for(cfg, r.body, lemmas) for r in test]
    bows_test, empty_test = bows_of(test, test_tokens)
    _write_bows(out / "bows_train.jsonl", bows_train)
    _write_bows(out / "bows_test.jsonl", bows_test)
    atomic_write(out / "prep_stats.json", json.dumps({
        "vocabulary_size": vocab.size,
        "train_documents": len(bows_train), "train_empty": empty_train,
        "test_documents": len(bows_test), "test_empty": empty_test,
    }, indent=2, sort_keys=True) + "\n")
    log.info("vocabulary %d terms; %d train bows (%d empty dropped)", vocab.size, len(bows_train), empty_train)


def cmd_train(cfg: PipelineConfig, args) -> None:
    out = cfg.output_dir
    vocab = textprep.Vocabulary.load(_require(out / "vocabulary.tsv", "prep"))
    bows = _read_bows(_require(out / "bows_train.jsonl", "prep"))
    model = tm.train_lda(
        bows, K=cfg.lda.k, alpha=cfg.lda.alpha, beta=cfg.lda.beta,
        iterations=cfg.lda.iterations, seed=derive_seed(cfg.seed, "train"),
        M=vocab.size,
    ).with_terms(vocab.terms)
    tm.save_model(model, out / "model.npz")
    shares = np.bincount(model.theta_train.argmax(axis=1), minlength=model.K) / len(bows)
    atomic_write(out / "cluster_sizes.csv", "cluster,share\n" + "".join(
        f"{k + 1},{_fmt(shares[k])}\n" for k in range(model.K)))
    log.info("trained K=%d on %d documents", model.K, len(bows))


def cmd_sweep(cfg: PipelineConfig, args) -> None:
    out = cfg.output_dir
    bows = _read_bows(_require(out / "bows_train.jsonl", "prep"))
    vocab = textprep.Vocabulary.load(_require(out / "vocabulary.tsv", "prep"))
    seed = derive_seed(cfg.seed, "sweep")
    train, val = tm.split_train_validation(bows, cfg.lda.validation_ratio, seed)
    result = tm.k_sweep(
        train, val, cfg.lda.sweep_ks, alpha=cfg.lda.alpha, beta=cfg.lda.beta,
        iterations=cfg.lda.sweep_iterations, seed=seed,
    )
    atomic_write(out / "sweep.csv", result.to_csv())
    atomic_write(out / "sweep_summary.json", json.dumps(
        {"best_k": result.best_k, "candidates": list(cfg.lda.sweep_ks)},
        indent=2, sort_keys=True) + "\n")
    log.info("sweep best K = %d", result.best_k)


def cmd_naming_bank(cfg: PipelineConfig, args) -> None:
    out = cfg.output_dir
    model = tm.load_model(_require(out / "model.npz", "train"))
    bows = _read_bows(_require(out / "bows_train.jsonl", "prep"))
    by_id = {r.post_id: r for r in _read_records(_require(out / "corpus_train.jsonl", "split"))}
    docs = [by_id[b.doc_id] for b in bows]
    questions = naming_mod.naming_bank(
        model, docs, seed=derive_seed(cfg.seed, "naming"),
        random_source=cfg.naming.random_source,
    )
    naming_mod.save_naming_bank(questions, out / "naming_bank.json")
    log.info("naming bank: %d questions", len(questions))


def cmd_merge(cfg: PipelineConfig, args) -> None:
    out = cfg.output_dir
    model = tm.load_model(_require(out / "model.npz", "train"))
    name_map = naming_mod.load_name_map(cfg.path_or_packaged("name_map_file", cfg.naming.name_map_file))
    meta = naming_mod.load_meta_categories(cfg.path_or_packaged("meta_file", cfg.naming.meta_file))
    named = naming_mod.merge_topics(model, name_map, meta)
    atomic_write(out / "named_topics.json",
                 json.dumps(named.to_json(), ensure_ascii=False, indent=2, sort_keys=True) + "\n")
    log.info("merged %d clusters into %d named topics (+%s)",
             model.K, len(named.names), naming_mod.OTHER_NAME)


def cmd_pairs(cfg: PipelineConfig, args) -> None:
    out = cfg.output_dir
    model = tm.load_model(_require(out / "model.npz", "train"))
    named = _load_named(out)
    bows = _read_bows(_require(out / "bows_train.jsonl", "prep"))
    rows, excluded = _doc_assignments(model, named, bows)

    with atomic_open(out / "assignments.csv") as fh:
        writer = csv.writer(fh)
        writer.writerow(["post_id", "top1", "top2", "gap"])
        for r in rows:
            writer.writerow([r["post_id"], r["top1"], r["top2"], _fmt(r["gap"])])

    stats = metrics_mod.PairStats.from_assignments(
        [(r["top1"], r["top2"]) for r in rows], named.names)
    with atomic_open(out / "pairs.csv") as fh:
        writer = csv.writer(fh)
        writer.writerow(["topic_a", "topic_b", "count"])
        for pair in sorted(stats.counts, key=lambda p: (p.a, p.b)):
            writer.writerow([pair.a, pair.b, stats.counts[pair]])
    mean_gap = float(np.mean([r["gap"] for r in rows])) if rows else 0.0
    atomic_write(out / "pair_stats.json", json.dumps({
        "total": stats.total,
        "excluded": excluded,
        "mean_top1_top2_gap": round(mean_gap, 6),
        "marginals": dict(sorted(stats.marginals.items())),
    }, indent=2, sort_keys=True) + "\n")
    log.info("paired %d documents (%d excluded); mean top1-top2 gap %.3f",
             stats.total, excluded, mean_gap)


def _pair_stats_from_files(out: Path, named: naming_mod.NamedTopics) -> metrics_mod.PairStats:
    rows = _read_assignments(out)
    return metrics_mod.PairStats.from_assignments(
        [(r["top1"], r["top2"]) for r in rows], named.names)


def cmd_pmi(cfg: PipelineConfig, args) -> None:
    out = cfg.output_dir
    named = _load_named(out)
    stats = _pair_stats_from_files(out, named)
    atomic_write(out / "pmi.csv", metrics_mod.pmi_matrix(stats).to_csv())
    log.info("wrote PMI matrix over %d topics", len(named.names))


def cmd_coherence(cfg: PipelineConfig, args) -> None:
    out = cfg.output_dir
    model = tm.load_model(_require(out / "model.npz", "train"))
    bows = _read_bows(_require(out / "bows_train.jsonl", "prep"))
    if model.terms is None:
        raise SystemExit("model carries no vocabulary; re-run `train`")
    top1 = model.theta_train.argmax(axis=1)
    term_sets = [frozenset(model.terms[m] for m in bow.counts) for bow in bows]

    lines = ["cluster,coherence," + ",".join(f"word{i + 1}" for i in range(10))]
    for k in range(1, model.K + 1):
        words = tm.top_words(model, k, 10)
        if cfg.lda.coherence_scope == "corpus":
            docs = term_sets
        else:
            docs = [term_sets[i] for i in np.flatnonzero(top1 == k - 1)]
        counts = metrics_mod.coherence_counts(docs, words)
        try:
            score = metrics_mod.umass_coherence(words, counts)
            lines.append(f"{k},{_fmt(score)}," + ",".join(words))
        except ValueError:
            lines.append(f"{k}," + "," + ",".join(words))
    atomic_write(out / "coherence.csv", "\n".join(lines) + "\n")
    log.info("coherence for %d clusters", model.K)


def _read_labels(path: Path) -> dict[str, str]:
    labels = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            labels[row["doc_id"]] = row["label"]
    return labels


def cmd_ami(cfg: PipelineConfig, args) -> None:
    a = _read_labels(Path(args.labels_a))
    b = _read_labels(Path(args.labels_b))
    shared = sorted(set(a) & set(b))
    if not shared:
        raise SystemExit("the two labelings share no document ids")
    value = metrics_mod.ami([a[i] for i in shared], [b[i] for i in shared])
    atomic_write(cfg.output_dir / "ami.txt", f"{value:.9f}\n")
    log.info("AMI over %d shared documents: %.4f", len(shared), value)


def _load_lexicons(cfg: PipelineConfig) -> tuple[lex.Lexicon, lex.Lexicon]:
    mode = cfg.match_mode()
    empath = lex.load_lexicon(_require(cfg.resolve(cfg.lexicons.empath_file), "configure lexicons.empath_file"), mode)
    mfd = lex.load_lexicon(_require(cfg.resolve(cfg.lexicons.mfd_file), "configure lexicons.mfd_file"), mode)
    return empath, mfd


def _score_corpus(cfg: PipelineConfig, records: list[ThreadRecord]):
    """Per-document category fractions and foundation vectors (posts and verdicts)."""
    lemmas = _load_lemmas(cfg) if cfg.lexicons.use_lemmas else {}
    empath, mfd = _load_lexicons(cfg)
    fractions, post_fv, verdict_fv = [], [], []
    for r in records:
        tokens = _tokens_for(cfg, r.body, lemmas)
        fractions.append(lex.category_fractions(tokens, empath))
        post_fv.append(lex.foundation_presence(tokens, mfd))
        if r.verdict_text:
            vtokens = _tokens_for(cfg, r.verdict_text, lemmas)
            verdict_fv.append(lex.foundation_presence(vtokens, mfd))
        else:
            verdict_fv.append(None)
    return empath, np.asarray(fractions), post_fv, verdict_fv


def cmd_lexicon_score(cfg: PipelineConfig, args) -> None:
    out = cfg.output_dir
    records = _read_records(_require(out / "corpus_train.jsonl", "split"))
    empath, fractions, post_fv, verdict_fv = _score_corpus(cfg, records)

    with atomic_open(out / "empath_fractions.csv") as fh:
        writer = csv.writer(fh)
        writer.writerow(["post_id", *empath.category_names])
        for r, vec in zip(records, fractions):
            writer.writerow([r.post_id, *(_fmt(v) for v in vec)])

    with atomic_open(out / "foundations_posts.csv") as fh:
        writer = csv.writer(fh)
        writer.writerow(["post_id", "valence", *lex.FOUNDATIONS])
        for r, fv in zip(records, post_fv):
            writer.writerow([r.post_id, r.valence.value, *fv.as_tuple()])

    with atomic_open(out / "foundations_verdicts.csv") as fh:
        writer = csv.writer(fh)
        writer.writerow(["post_id", "valence", *lex.FOUNDATIONS])
        for r, fv in zip(records, verdict_fv):
            if fv is not None:
                writer.writerow([r.post_id, r.valence.value, *fv.as_tuple()])

    overall, _ = lex.coverage_missing_rate(post_fv)
    verdict_vectors = [fv for fv in verdict_fv if fv is not None]
    coverage = {"posts_missing_rate": round(overall, 6)}
    if verdict_vectors:
        coverage["verdicts_missing_rate"] = round(lex.coverage_missing_rate(verdict_vectors)[0], 6)
    atomic_write(out / "coverage.json", json.dumps(coverage, indent=2, sort_keys=True) + "\n")
    log.info("scored %d documents against %s", len(records), empath.name)


def cmd_correlate(cfg: PipelineConfig, args) -> None:
    out = cfg.output_dir
    records = _read_records(_require(out / "corpus_train.jsonl", "split"))
    assignments = {r["post_id"]: r for r in _read_assignments(out)}
    empath, fractions, _, _ = _score_corpus(cfg, records)

    names = list(empath.category_names)
    top_cats = lex.top_variance_categories(fractions, names, cfg.output.top_categories)
    col = {c: names.index(c) for c in top_cats}

    by_pair: dict[naming_mod.TopicPair, list[int]] = {}
    for i, r in enumerate(records):
        a = assignments.get(r.post_id)
        if a is None or r.valence == Valence.NONE:
            continue
        by_pair.setdefault(naming_mod.TopicPair(a["top1"], a["top2"]), []).append(i)
    ranked_pairs = sorted(by_pair, key=lambda p: (-len(by_pair[p]), p.a, p.b))[: cfg.output.top_pairs]

    lines = ["topic_pair,category,r,p,significant"]
    for pair in ranked_pairs:
        idx = by_pair[pair]
        flags = [1 if records[i].valence == Valence.YA else 0 for i in idx]
        if len(idx) < 3 or len(set(flags)) < 2:
            continue
        feats = fractions[np.asarray(idx)][:, [col[c] for c in top_cats]]
        for cc in lex.correlate_ya(feats, flags, top_cats):
            r_s = _fmt(cc.r) if cc.defined else ""
            p_s = _fmt(cc.p) if cc.defined else ""
            lines.append(f"{pair.a}|{pair.b},{cc.category},{r_s},{p_s},{str(cc.significant).lower()}")
    atomic_write(out / "correlations.csv", "\n".join(lines) + "\n")
    log.info("correlations for %d topic pairs x %d categories", len(ranked_pairs), len(top_cats))


def _radar_rows(cfg: PipelineConfig, records, assignments) -> list[str]:
    _, _, post_fv, verdict_fv = _score_corpus(cfg, records)
    by_id = {r.post_id: i for i, r in enumerate(records)}

    groups: dict[tuple[str, str], list[int]] = {}
    for pid, a in assignments.items():
        i = by_id.get(pid)
        if i is None:
            continue
        groups.setdefault(("topic", a["top1"]), []).append(i)
        pair = naming_mod.TopicPair(a["top1"], a["top2"])
        groups.setdefault(("pair", f"{pair.a}|{pair.b}"), []).append(i)

    lines = ["scope,name,valence,care,fairness,loyalty,authority,sanctity,n"]
    for (kind, name) in sorted(groups):
        idx = groups[(kind, name)]
        for side, fvs in (("posts", post_fv), ("verdicts", verdict_fv)):
            group = [
                (fvs[i], records[i].valence) for i in idx
                if fvs[i] is not None and records[i].valence != Valence.NONE
            ]
            if not group:
                continue
            prev = lex.foundation_prevalence(group)
            for valence, vec, n in (("YA", prev.ya, prev.n_ya), ("NA", prev.na, prev.n_na)):
                if vec is None:
                    continue
                cells = ",".join(_fmt(v) for v in vec)
                lines.append(f"{kind}_{side},{name},{valence},{cells},{n}")
    return lines


def cmd_radar(cfg: PipelineConfig, args) -> None:
    out = cfg.output_dir
    records = _read_records(_require(out / "corpus_train.jsonl", "split"))
    assignments = {r["post_id"]: r for r in _read_assignments(out)}
    atomic_write(out / "radar.csv", "\n".join(_radar_rows(cfg, records, assignments)) + "\n")
    log.info("radar rows written")


def cmd_survey_bank(cfg: PipelineConfig, args) -> None:
    out = cfg.output_dir
    split = args.split
    model = tm.load_model(_require(out / "model.npz", "train"))
    named = _load_named(out)
    records = _read_records(_require(out / f"corpus_{split}.jsonl", "split"))
    bows = _read_bows(_require(out / f"bows_{split}.jsonl", "prep"))
    by_id = {r.post_id: r for r in records}
    docs = [by_id[b.doc_id] for b in bows]

    seed = derive_seed(cfg.seed, f"survey:{split}")
    if split == "train":
        theta = _named_theta(model, named)
    else:
        A = named.aggregation_matrix()
        theta = np.vstack([
            A @ tm.infer(model, bow, sweeps=cfg.lda.infer_sweeps,
                         seed=derive_seed(seed, bow.doc_id))
            for bow in bows
        ])

    mode = vs.QuestionMode(args.mode.upper()) if args.mode else cfg.survey.mode
    per_topic = args.per_topic or cfg.survey.per_topic
    bank_id = args.bank_id or cfg.survey.bank_id or split
    questions = vs.validation_bank(docs, named, theta, mode, per_topic, seed)
    screening, correct = vs.make_screening(docs, named, theta, seed)
    bank = vs.SurveyBank(
        bank_id=bank_id, mode=mode, prompt=vs.SURVEY_PROMPT,
        questions=tuple(questions), screening=screening, screening_correct=correct,
    )
    bank.save(out / f"survey_bank_{bank_id}.json")
    log.info("bank %s: %d questions (%s, %d per topic)", bank_id, len(questions), mode.value, per_topic)


def cmd_agreement(cfg: PipelineConfig, args) -> None:
    out = cfg.output_dir
    bank = vs.SurveyBank.load(_require(Path(args.bank), "survey-bank"))
    responses, report = vs.ingest_responses(
        Path(args.responses), bank, cfg.survey.responses_per_question)
    questions = bank.question_map()

    table = vs.post_level_agreement(responses, questions)
    atomic_write(out / "agreement_post_level.csv",
                 "answer_type,rate_pct\n" + "".join(f"{label},{_fmt(v)}\n" for label, v in table))

    rates = vs.topic_agreement(responses, questions)
    atomic_write(out / "agreement_topics.csv", "topic,rate_pct\n" + "".join(
        f"{t},{_fmt(v) if v is not None else ''}\n" for t, v in rates.items()))

    histogram, mean = vs.answer_length_distribution(responses)
    atomic_write(out / "answer_lengths.csv", "topics_chosen,count\n" + "".join(
        f"{k},{v}\n" for k, v in histogram.items()) + f"mean,{_fmt(mean)}\n")
    log.info("agreement over %d responses (%d rejected rows)", report.accepted, len(report.rejected))


def cmd_serve(cfg: PipelineConfig, args) -> None:
    import uvicorn

    from .survey_service import SurveyStore, create_app

    svc = cfg.service
    store = SurveyStore(
        cfg.resolve(svc.data_dir),
        answers_per_question=svc.answers_per_question,
        session_questions=svc.session_questions,
        session_timeout=svc.session_timeout or None,
    )
    for bank_path in args.bank or []:
        payload = json.loads(Path(bank_path).read_text(encoding="utf-8"))
        if payload.get("kind") == "naming":
            bank = naming_mod.NamingBank.load(Path(bank_path))
        else:
            bank = vs.SurveyBank.load(Path(bank_path))
        if bank.bank_id not in store.banks:
            store.add_bank(bank)
    ui_dir = cfg.resolve(svc.ui_dir) if svc.ui_dir else None
    app = create_app(store, ui_dir=ui_dir)
    host = args.host or svc.host
    port = args.port or svc.port
    log.info("serving %d bank(s) on %s:%d", len(store.banks), host, port)
    uvicorn.run(app, host=host, port=port, log_level="warning")


def _year_of(created_utc: int) -> int:
    from datetime import datetime, timezone

    return datetime.fromtimestamp(created_utc, tz=timezone.utc).year


def cmd_report(cfg: PipelineConfig, args) -> None:
    out = cfg.output_dir
    filtered = _read_records(_require(out / "corpus_filtered.jsonl", "filter"))
    train = _read_records(_require(out / "corpus_train.jsonl", "split"))
    model = tm.load_model(_require(out / "model.npz", "train"))
    named = _load_named(out)
    bows = _read_bows(_require(out / "bows_train.jsonl", "prep"))

    # basic corpus statistics: traffic, judgment shares (overall and per
    # year), controversiality and length by judgment
    lines = ["stat,group,value"]
    years = sorted({_year_of(r.created_utc) for r in filtered})
    verdicts = sorted({r.verdict.value for r in filtered if r.verdict})
    for y in years:
        of_year = [r for r in filtered if _year_of(r.created_utc) == y]
        lines.append(f"posts_per_year,{y},{len(of_year)}")
        lines.append(f"mean_comments_per_year,{y},{_fmt(np.mean([r.comment_count for r in of_year]))}")
        judged = [r for r in of_year if r.verdict]
        for v in verdicts:
            share = sum(1 for r in judged if r.verdict.value == v) / len(judged) if judged else 0.0
            lines.append(f"verdict_share_{y},{v},{_fmt(share)}")
    n_verdicted = sum(1 for r in filtered if r.verdict)
    for v in verdicts:
        of_v = [r for r in filtered if r.verdict and r.verdict.value == v]
        lines.append(f"verdict_share,{v},{_fmt(len(of_v) / n_verdicted)}")
        lines.append(f"mean_comments_per_verdict,{v},{_fmt(np.mean([r.comment_count for r in of_v]))}")
        lines.append(f"mean_body_words_per_verdict,{v},{_fmt(np.mean([len(r.body.split()) for r in of_v]))}")
    atomic_write(out / "corpus_stats.csv", "\n".join(lines) + "\n")

    # topic-pair structure
    rows, _ = _doc_assignments(model, named, bows)
    with atomic_open(out / "assignments.csv") as fh:
        writer = csv.writer(fh)
        writer.writerow(["post_id", "top1", "top2", "gap"])
        for r in rows:
            writer.writerow([r["post_id"], r["top1"], r["top2"], _fmt(r["gap"])])
    assignments = {r["post_id"]: r for r in rows}
    pair_list = [(r["top1"], r["top2"]) for r in rows]
    stats = metrics_mod.PairStats.from_assignments(pair_list, named.names)
    atomic_write(out / "pmi.csv", metrics_mod.pmi_matrix(stats).to_csv())

    ccdf = metrics_mod.pair_size_ccdf(stats)
    atomic_write(out / "ccdf.csv", ccdf.to_csv())
    atomic_write(out / "pair_summary.json", json.dumps({
        "pairs_total": len(named.names) * (len(named.names) - 1) // 2,
        "share_empty": round(ccdf.share_empty, 6),
        "share_ge_50": round(ccdf.share_ge_50, 6),
        "share_ge_100": round(ccdf.share_ge_100, 6),
        "mean_top1_top2_gap": round(float(np.mean([r["gap"] for r in rows])) if rows else 0.0, 6),
    }, indent=2, sort_keys=True) + "\n")

    # prevalence (top-1 / top-1-or-2 percentages)
    shares = metrics_mod.prevalence(pair_list)
    atomic_write(out / "prevalence.csv", "topic,meta_category,top1_pct,top1_or_2_pct\n" + "".join(
        f"{t},{named.meta_category.get(t, '')},{_fmt(s.top1_pct)},{_fmt(s.top1_or_2_pct)}\n"
        for t, s in sorted(shares.items())))

    # treemap blocks: per-topic and per-pair sizes with YA share
    by_id = {r.post_id: r for r in train}
    lines = ["scope,name,n,ya_share"]
    topic_groups: dict[str, list[str]] = {}
    pair_groups: dict[str, list[str]] = {}
    for pid, a in assignments.items():
        topic_groups.setdefault(a["top1"], []).append(pid)
        pair = naming_mod.TopicPair(a["top1"], a["top2"])
        pair_groups.setdefault(f"{pair.a}|{pair.b}", []).append(pid)
    for scope, groups in (("topic", topic_groups), ("pair", pair_groups)):
        for name in sorted(groups):
            pids = groups[name]
            judged = [by_id[p].valence for p in pids if p in by_id and by_id[p].valence != Valence.NONE]
            ya = sum(1 for v in judged if v == Valence.YA)
            share = _fmt(ya / len(judged)) if judged else ""
            lines.append(f"{scope},{name},{len(pids)},{share}")
    atomic_write(out / "treemap.csv", "\n".join(lines) + "\n")

    # lexicon-based exports when lexicons are configured
    if cfg.lexicons.empath_file and cfg.lexicons.mfd_file:
        atomic_write(out / "radar.csv", "\n".join(_radar_rows(cfg, train, assignments)) + "\n")
        cmd_correlate(cfg, args)
    log.info("report bundle written to %s", out)


# --- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="threadtopics",
        description="Verdict, topic and survey analytics pipeline.",
    )
    parser.add_argument("--config", required=True, help="path to the pipeline INI config")
    parser.add_argument("--seed", type=int, default=None, help="override the master seed")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("ingest", "filter", "split", "prep", "train", "sweep",
                 "naming-bank", "merge", "pairs", "pmi", "coherence",
                 "lexicon-score", "correlate", "radar", "report"):
        sub.add_parser(name)

    p = sub.add_parser("ami")
    p.add_argument("--labels-a", required=True)
    p.add_argument("--labels-b", required=True)

    p = sub.add_parser("survey-bank")
    p.add_argument("--split", choices=("train", "test"), default="train")
    p.add_argument("--mode", choices=("top4", "top2_rand2"), default=None)
    p.add_argument("--per-topic", type=int, default=None)
    p.add_argument("--bank-id", default=None)

    p = sub.add_parser("agreement")
    p.add_argument("--bank", required=True)
    p.add_argument("--responses", required=True)

    p = sub.add_parser("serve")
    p.add_argument("--bank", action="append", help="bank JSON file(s) to register")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    return parser


_COMMANDS = {
    "ingest": cmd_ingest,
    "filter": cmd_filter,
    "split": cmd_split,
    "prep": cmd_prep,
    "train": cmd_train,
    "sweep": cmd_sweep,
    "naming-bank": cmd_naming_bank,
    "merge": cmd_merge,
    "pairs": cmd_pairs,
    "pmi": cmd_pmi,
    "coherence": cmd_coherence,
    "ami": cmd_ami,
    "lexicon-score": cmd_lexicon_score,
    "correlate": cmd_correlate,
    "radar": cmd_radar,
    "survey-bank": cmd_survey_bank,
    "agreement": cmd_agreement,
    "serve": cmd_serve,
    "report": cmd_report,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
    try:
        _COMMANDS[args.command](cfg, args)
    except SystemExit as exc:
        if exc.code and not isinstance(exc.code, int):
            print(exc.code, file=sys.stderr)
            return 1
        raise
    except (OSError, ValueError) as exc:
        print(f"{args.command} failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
