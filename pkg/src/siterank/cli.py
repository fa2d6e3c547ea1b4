"""Command-line entry point: ingest -> train -> recommend -> evaluate.

Every artifact lives in the store directory (``store_path`` in the config):

    store.jsonl     document snapshot
    space.json, vocab.tsv, model.bin   trained topic space
    topics.npz      cached topic vectors of stored posts
    forest.json     trained Random Forest

Exit codes: 0 success, 2 bad input, 3 missing artifact, 4 nothing ingested.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from siterank.config import ConfigError, EngineConfig, load_config
from siterank.eval.ndpm import load_judgments
from siterank.eval.plots import plot_objective, plot_sweep
from siterank.eval.sweep import (feature_rows, rows_table, sweep_topics,
                                 sweep_trees, write_csv)
from siterank.eval.synth import SyntheticSpec, SyntheticSpecError, default_spec, generate_synthetic, write_corpus
from siterank.simrank import (SimilarityQuery, TopicCache, load_cache, rank_by_criterion, save_cache)
from siterank.store import StoreCatalog, StoreError
from siterank.textprep import VocabularyError, load_stopwords, tokenize
from siterank.topicmodel import ModelFormatError, TopicModelError, top_words
from siterank.topicmodel.space import SPACE_FILE, fit_space, load_space, save_space
from siterank.voterank import Forest, ForestError, FeatureRow, train_forest, vote_rank

log = logging.getLogger("siterank")

EXIT_OK, EXIT_INPUT, EXIT_MISSING, EXIT_EMPTY = 0, 2, 3, 4
STORE_FILE = "store.jsonl"
CACHE_FILE = "topics.npz"
FOREST_FILE = "forest.json"


class MissingArtifact(Exception):
    pass


class InputError(Exception):
    pass


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, ensure_ascii=False, sort_keys=True))
    else:
        print(text)


def _load_store(cfg: EngineConfig) -> StoreCatalog:
    path = cfg.workdir / STORE_FILE
    if not path.exists():
        raise MissingArtifact(f"no document store at {path}; run `siterank ingest` first")
    return StoreCatalog.load(path)


def _load_space(cfg: EngineConfig):
    if not (cfg.workdir / SPACE_FILE).exists():
        raise MissingArtifact(f"no trained topic model in {cfg.workdir}; run `siterank train` first")
    return load_space(cfg.workdir)


def _load_cache(cfg: EngineConfig, store, space) -> TopicCache:
    path = cfg.workdir / CACHE_FILE
    cache = load_cache(path) if path.exists() else TopicCache()
    return cache.ensure(store, space)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ------------------------------------------------------------------ commands

def cmd_ingest(cfg: EngineConfig, args) -> int:
    cfg.workdir.mkdir(parents=True, exist_ok=True)
    path = cfg.workdir / STORE_FILE
    store = StoreCatalog.load(path) if path.exists() and not args.replace else StoreCatalog()
    report = store.ingest_file(args.input)
    for lineno, msg in report.errors:
        log.warning("%s:%d: rejected: %s", args.input, lineno, msg)
    if report.accepted:
        store.snapshot(path)
    _emit(args, {"accepted": report.accepted, "rejected": report.rejected,
                 "errors": [{"line": n, "error": m} for n, m in report.errors],
                 "total_documents": len(store), "websites": store.websites},
          f"accepted: {report.accepted}, rejected: {report.rejected}\n"
          f"store: {len(store)} documents across {len(store.websites)} websites")
    return EXIT_OK if report.accepted else EXIT_EMPTY


def cmd_train(cfg: EngineConfig, args) -> int:
    store = _load_store(cfg)
    corpus = [tokenize(d.description) for d in store.documents()]
    stopwords = load_stopwords(cfg.stopword_path)
    space = fit_space(corpus, cfg.model_kind, cfg.k, stopwords, cfg.min_doc_freq, cfg.seed,
                      max_iters=cfg.max_iters, tol=cfg.tol, alpha=cfg.alpha, eta=cfg.eta,
                      n_sweeps=cfg.n_sweeps, burn_in=cfg.burn_in)
    save_space(space, cfg.workdir)
    cache = TopicCache(space).ensure(store, space)
    save_cache(cache, cfg.workdir / CACHE_FILE)

    model = space.model
    payload = {"kind": space.kind, "k": model.k, "n_terms": len(space.vocab),
               "n_docs": len(corpus), "seed": cfg.seed,
               "model_sha256": _sha256(cfg.workdir / "model.bin")}
    if space.kind == "nmf":
        trace = model.objective_trace
        payload.update(iterations=model.n_iter, objective_head=trace[:3], objective_tail=trace[-3:],
                       final_objective=trace[-1])
        figure = plot_objective(trace, cfg.workdir / "nmf_objective.png")
        payload["figure"] = str(figure)
        text = (f"trained NMF: k={model.k}, terms={len(space.vocab)}, docs={len(corpus)}, "
                f"iterations={model.n_iter}\n"
                f"objective head {', '.join(f'{v:.4f}' for v in trace[:3])} ... "
                f"tail {', '.join(f'{v:.4f}' for v in trace[-3:])}\n"
                f"final ||A - WH||_F = {trace[-1]:.6f}\nfigure: {figure}")
    else:
        payload.update(alpha=model.alpha, eta=model.eta, n_sweeps=cfg.n_sweeps, burn_in=cfg.burn_in,
                       tokens=int(model.assignments.size))
        text = (f"trained LDA: k={model.k}, terms={len(space.vocab)}, docs={len(corpus)}, "
                f"alpha={model.alpha:g}, eta={model.eta:g}\n"
                f"sweeps={cfg.n_sweeps} (burn-in {cfg.burn_in}), tokens={model.assignments.size}")
    text += f"\nmodel sha256: {payload['model_sha256']}"
    _emit(args, payload, text)
    return EXIT_OK


def cmd_topics(cfg: EngineConfig, args) -> int:
    store = _load_store(cfg)
    space = _load_space(cfg)
    if space.model is None:
        raise InputError("the trained space is a bag of words and has no topics")
    cache = _load_cache(cfg, store, space)
    docs = store.documents()
    M = cache.matrix([d.doc_id for d in docs], space.dim)
    topics, lines = [], []
    for t in range(space.model.k):
        words = top_words(space.model, t, args.n_words)
        order = np.lexsort((np.arange(len(docs)), -M[:, t]))[:args.n_docs] if docs else []
        top_docs = [{"doc_id": docs[i].doc_id, "website": docs[i].website,
                     "description": docs[i].description, "weight": float(M[i, t])} for i in order]
        topics.append({"topic": t, "words": [{"term": w, "weight": v} for w, v in words],
                       "documents": top_docs})
        lines.append(f"topic {t:>3}: {' '.join(w for w, _ in words)}")
        for d in top_docs:
            lines.append(f"      {d['weight']:.3f}  [{d['website']}] {d['description']}")
    _emit(args, {"kind": space.kind, "topics": topics}, "\n".join(lines))
    return EXIT_OK


def cmd_train_forest(cfg: EngineConfig, args) -> int:
    store = _load_store(cfg)
    space = _load_space(cfg)
    cache = _load_cache(cfg, store, space)
    rows = feature_rows(store, space, cache)
    seed = cfg.forest_seed if cfg.forest_seed is not None else cfg.seed
    forest = train_forest(rows, cfg.n_trees, cfg.m, seed, cfg.min_leaf)
    path = cfg.workdir / FOREST_FILE
    forest.save(path)
    nodes = [t.n_nodes for t in forest.trees]
    payload = {"n_trees": forest.n_trees, "m": forest.m, "seed": seed, "n_rows": len(rows),
               "labels": list(forest.schema.labels), "mean_nodes": float(np.mean(nodes)),
               "sha256": _sha256(path)}
    _emit(args, payload, f"trained forest: {forest.n_trees} trees, m={forest.m}, rows={len(rows)}, "
                         f"mean nodes/tree={np.mean(nodes):.1f}\nsha256: {payload['sha256']}")
    return EXIT_OK


def cmd_recommend(cfg: EngineConfig, args) -> int:
    store = _load_store(cfg)
    space = _load_space(cfg)
    tokens = tokenize(args.description)
    if args.mode == "votes":
        path = cfg.workdir / FOREST_FILE
        if not path.exists():
            raise MissingArtifact(f"no trained forest at {path}; run `siterank train-forest` first")
        if args.price is None:
            raise InputError("--price is required in votes mode")
        forest = Forest.load(path)
        row = FeatureRow(space.encode_one(tokens), args.category, args.price)
        ranking = vote_rank(forest, row)
        payload = dict(ranking.to_dict(), n_trees=forest.n_trees)
        lines = [f"{'rank':>4}  {'website':<12} votes"]
        lines += [f"{i:>4}  {w:<12} {v}" for i, (w, v) in enumerate(ranking.entries, 1)]
        _emit(args, payload, "\n".join(lines))
        return EXIT_OK

    criterion = "quantity" if args.mode == "quantity" else "average_price"
    cache = _load_cache(cfg, store, space)
    query = SimilarityQuery(space.encode_one(tokens), args.category, criterion,
                            cfg.similarity_threshold, cfg.price_direction)
    ranking = rank_by_criterion(store, space, query, cache)
    _emit(args, ranking.to_dict(), ranking.table())
    return EXIT_OK


def cmd_evaluate(cfg: EngineConfig, args) -> int:
    store = _load_store(cfg)
    judgments = load_judgments(args.judgments)
    values = [int(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise InputError("--values needs at least one integer")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written, tables, payload = [], [], {}

    if args.sweep == "topics":
        stopwords = load_stopwords(cfg.stopword_path)
        kinds = args.kind.split(",")
        series: dict[str, dict] = {}
        for kind in kinds:
            kw = dict(max_iters=cfg.max_iters, tol=cfg.tol) if kind == "nmf" else {}
            if kind == "lda":
                kw = dict(alpha=cfg.alpha, eta=cfg.eta, n_sweeps=cfg.n_sweeps, burn_in=cfg.burn_in)
            rows = sweep_topics(store, kind, values, judgments, args.criteria.split(","),
                                cfg.similarity_threshold, cfg.price_direction, cfg.seed,
                                stopwords, cfg.min_doc_freq, **kw)
            for crit in args.criteria.split(","):
                sub = [r for r in rows if r.criterion == crit]
                csv_path = out / f"sweep_{kind}_{crit}.csv"
                write_csv(sub, csv_path)
                written.append(str(csv_path))
                series.setdefault(crit, {})[kind.upper()] = sub
                tables.append(rows_table(sub, f"{kind} / {crit}"))
                payload[f"{kind}/{crit}"] = [r.__dict__ for r in sub]
        for crit, by_kind in series.items():
            fig = plot_sweep(by_kind, out / f"sweep_topics_{crit}.png", "number of topics",
                             f"similarity ranking by {crit.replace('_', ' ')}")
            written.append(str(fig))
    else:
        space = _load_space(cfg)
        cache = _load_cache(cfg, store, space)
        seed = cfg.forest_seed if cfg.forest_seed is not None else cfg.seed
        rows = sweep_trees(store, space, values, judgments, seed, cfg.m, cfg.min_leaf, cache)
        csv_path = out / f"sweep_trees_{space.kind}.csv"
        write_csv(rows, csv_path)
        fig = plot_sweep({space.kind.upper(): rows}, out / f"sweep_trees_{space.kind}.png",
                         "number of trees", "vote ranking")
        written += [str(csv_path), str(fig)]
        tables.append(rows_table(rows, f"forest on {space.kind} features / votes"))
        payload[f"{space.kind}/votes"] = [r.__dict__ for r in rows]

    payload["files"] = written
    _emit(args, payload, "\n\n".join(tables) + "\n\nwrote " + ", ".join(written))
    return EXIT_OK


def cmd_synth(cfg: EngineConfig, args) -> int:
    if args.spec:
        spec = SyntheticSpec.load(args.spec)
    else:
        spec = default_spec(seed=cfg.seed,
                            docs_per_website=args.docs_per_website, n_queries=args.n_queries)
    corpus = generate_synthetic(spec)
    paths = write_corpus(corpus, args.out)
    spec.save(Path(args.out) / "spec.json")
    payload = {"documents": len(corpus.records), "queries": len(corpus.queries),
               "judgments": len(corpus.judgments), "planted_topics": spec.n_topics,
               "files": {k: str(v) for k, v in paths.items()}}
    _emit(args, payload, f"wrote {len(corpus.records)} posts, {len(corpus.queries)} queries, "
                         f"{len(corpus.judgments)} judgments ({spec.n_topics} planted topics) "
                         f"to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="siterank", description=__doc__.split("\n")[0])
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--store", dest="store_path", help="artifact directory (config: store_path)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="load JSONL posts into the store")
    s.add_argument("input")
    s.add_argument("--replace", action="store_true", help="start from an empty store")

    s = sub.add_parser("train", help="build vocabulary and train a topic model")
    s.add_argument("--kind", dest="model_kind", choices=("nmf", "lda"))
    s.add_argument("--k", type=int)
    s.add_argument("--max-iters", dest="max_iters", type=int)

    s = sub.add_parser("topics", help="print top words and documents per topic")
    s.add_argument("--n-words", type=int, default=10)
    s.add_argument("--n-docs", type=int, default=5)

    s = sub.add_parser("train-forest", help="train the vote-ranking Random Forest")
    s.add_argument("--n-trees", dest="n_trees", type=int)
    s.add_argument("--m", type=int)

    s = sub.add_parser("recommend", help="rank websites for one item")
    s.add_argument("--description", required=True)
    s.add_argument("--category", required=True)
    s.add_argument("--price", type=float, help="desired selling price (votes mode)")
    s.add_argument("--mode", choices=("quantity", "avg-price", "votes"), default="quantity")
    s.add_argument("--threshold", dest="similarity_threshold", type=float)
    s.add_argument("--direction", dest="price_direction", choices=("descending", "ascending"))

    s = sub.add_parser("evaluate", help="sweep topic or tree counts and score with NDPM")
    s.add_argument("--judgments", required=True)
    s.add_argument("--sweep", choices=("topics", "trees"), required=True)
    s.add_argument("--kind", default="nmf", help="comma list of nmf,lda,bow (topics sweep)")
    s.add_argument("--criteria", default="quantity,average_price")
    s.add_argument("--values", required=True, help="comma-separated topic or tree counts")
    s.add_argument("--out", required=True, help="directory for CSV tables and figures")

    s = sub.add_parser("synth", help="generate a synthetic corpus with judgments")
    s.add_argument("--spec", help="JSON synthetic spec (default: built-in 7-site market)")
    s.add_argument("--out", required=True)
    s.add_argument("--docs-per-website", type=int, default=700)
    s.add_argument("--n-queries", type=int, default=200)
    return p


COMMANDS = {"ingest": cmd_ingest, "train": cmd_train, "topics": cmd_topics,
            "train-forest": cmd_train_forest, "recommend": cmd_recommend,
            "evaluate": cmd_evaluate, "synth": cmd_synth}
_OVERRIDES = ("store_path", "seed", "model_kind", "k", "max_iters", "n_trees", "m",
              "similarity_threshold", "price_direction")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config)
        cfg.update(**{k: getattr(args, k, None) for k in _OVERRIDES})
        cfg.validate()
        return COMMANDS[args.command](cfg, args)
    except MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except FileNotFoundError as exc:
        print(f"error: {exc.strerror}: {exc.filename}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, ConfigError, StoreError, VocabularyError, ModelFormatError,
            TopicModelError, ForestError, SyntheticSpecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
