"""Command-line front end: ``docnade {ingest,train,eval,inspect}``.

Exit status: 0 on success, 2 on usage errors (argparse), 1 on runtime errors.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import model_io
from .corpus import (CorpusError, Document, Vocabulary, build_vocab, check_ids, encode, group_sentences,
                     log_count_transform, read_corpus, read_raw, tokenize, write_bow, write_seq)
from .evalkit import hidden_unit_topics, nearest_words, retrieval_pr
from .stopwords import STOPWORDS
from .training import TrainConfig, build_model, evaluate, fit

log = logging.getLogger("docnade")


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_kv(path, items: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for k, v in items.items():
            f.write(f"{k}={v}\n")


# -- ingest -----------------------------------------------------------------------

def cmd_ingest(args) -> int:
    stop = STOPWORDS if args.stopwords else None
    records = [(doc_id, labels, tokenize(text, stop)) for doc_id, labels, text in read_raw(args.input)]
    if not records or not any(toks for _, _, toks in records):
        raise CorpusError("empty corpus")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.vocab:
        vocab = Vocabulary.load(args.vocab)
    else:
        vocab = build_vocab((toks for _, _, toks in records), args.max_vocab)
        vocab.save(out / "vocab.txt")
    base = math.e if args.log_base == "e" else 10.0
    seqs, bags, skipped, oov = [], [], [], 0
    for doc_id, labels, toks in records:
        ids, dropped = encode(toks, vocab)
        oov += dropped
        if not ids:
            skipped.append(doc_id)
            continue
        doc = Document(ids=ids, labels=labels, source_id=doc_id)
        seqs.append(doc)
        counts = log_count_transform(doc.histogram(), base) if args.log_counts else doc.histogram()
        if counts:
            bags.append(Document(counts=counts, labels=labels, source_id=doc_id))
    write_seq(out / f"{args.name}.seq", seqs)
    write_bow(out / f"{args.name}.bow", bags)
    report = {"input": str(args.input), "input_sha256": file_digest(args.input), "docs_read": len(records),
              "docs_kept": len(seqs), "docs_skipped_empty": len(skipped), "skipped_ids": skipped,
              "oov_tokens_dropped": oov, "vocab_size": len(vocab), "vocab_hash": vocab.digest(),
              "log_counts": args.log_counts, "log_base": args.log_base, "stopwords": args.stopwords}
    (out / f"{args.name}.ingest.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"kept {len(seqs)} documents, skipped {len(skipped)} empty, dropped {oov} OOV tokens; V={len(vocab)}")
    return 0


# -- train ------------------------------------------------------------------------

def _load_docs(path, kind: str, V: int, group: int) -> list[Document]:
    docs = read_corpus(path)
    check_ids(docs, V)
    if kind == "docnade_lm":
        if any(d.ids is None for d in docs):
            raise CorpusError(f"{path}: the language model needs a .seq corpus")
        docs = group_sentences(docs, group)
    docs = [d for d in docs if len(d) > 0]
    return docs


def _config_from_args(args) -> TrainConfig:
    text = Path(args.config).read_text() if args.config else ""
    overrides = {k: getattr(args, k, None) for k in (
        "kind", "hidden", "layers", "ngram", "activation", "optimizer", "lr", "beta1", "beta2", "epochs",
        "batch_size", "seed", "tree", "group", "patience", "valid_ensemble", "output_init")}
    if getattr(args, "exact_split", False):
        overrides["exact_split"] = True
    if getattr(args, "ffn", False):
        overrides["doc_context"] = False
    return TrainConfig.parse(text, **overrides)


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    vocab = Vocabulary.load(args.vocab)
    V = len(vocab)
    train = _load_docs(args.train, cfg.kind, V, cfg.group)
    valid = _load_docs(args.valid, cfg.kind, V, cfg.group) if args.valid else None
    if not train:
        raise CorpusError("empty corpus")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    resolved = {"vocab_hash": vocab.digest(), "train_sha256": file_digest(args.train)}
    if args.valid:
        resolved["valid_sha256"] = file_digest(args.valid)
    (out / "config.txt").write_text(cfg.to_text() + "".join(f"# {k}={v}\n" for k, v in resolved.items()))

    model = build_model(cfg, V, vocab.frequencies)
    with open(out / "train_log.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["epoch", "mean_loss", "valid_perplexity"])

        def on_epoch(rec):
            w.writerow([rec.epoch, repr(rec.mean_loss), "" if math.isnan(rec.valid_perplexity)
                        else repr(rec.valid_perplexity)])
            f.flush()

        fit(model, train, cfg, valid, on_epoch)
    model_io.save(model, out / "model.dnade", vocab.digest(), {"seed": cfg.seed, "config": cfg.to_text()})
    print(f"wrote {out / 'model.dnade'}")
    return 0


# -- eval -------------------------------------------------------------------------

def _load_model(path, vocab: Vocabulary):
    return model_io.load(path, vocab_hash=vocab.digest())


def cmd_eval(args) -> int:
    vocab = Vocabulary.load(args.vocab)
    model = _load_model(args.model, vocab)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run = {"model_sha256": file_digest(args.model), "corpus_sha256": file_digest(args.corpus),
           "vocab_hash": vocab.digest(), "task": args.task, "seed": args.seed, "ensemble": args.ensemble,
           "max_docs": args.max_docs or "", "group": args.group}
    if args.task == "perplexity":
        docs = _load_docs(args.corpus, model.kind, len(vocab), args.group)
        if args.max_docs:
            docs = docs[:args.max_docs]
        report = evaluate(model, docs, args.ensemble, args.seed, args.threads)
        report.write_csv(out / "perplexity.csv")
        run["perplexity"] = repr(report.perplexity)
        print(f"perplexity={report.perplexity:.6f} docs={report.n_docs} words={report.n_words} M={report.M}")
    else:
        if model.kind == "docnade_lm":
            raise ValueError("retrieval is defined for the topic models only")
        queries = _load_docs(args.corpus, model.kind, len(vocab), 1)
        database = [d for path in args.database for d in _load_docs(path, model.kind, len(vocab), 1)]
        if not database:
            raise CorpusError("retrieval needs a non-empty --database")
        q_reps = np.stack([model.doc_representation(d.histogram()) for d in queries])
        d_reps = np.stack([model.doc_representation(d.histogram()) for d in database])
        curve = retrieval_pr(q_reps, d_reps, [d.labels for d in queries], [d.labels for d in database],
                             db_ids=[d.source_id for d in database])
        curve.write_csv(out / "pr_curve.csv")
        run["database_sha256"] = ",".join(file_digest(p) for p in args.database)
        print(f"queries={curve.n_queries} database={len(database)} cutoffs={curve.cutoffs.size}")
    _write_kv(out / "eval_run.txt", run)
    return 0


# -- inspect ----------------------------------------------------------------------

def _embedding(model) -> np.ndarray:
    return model.params["doc_embed" if model.kind == "docnade_lm" else "embed"]


def cmd_inspect(args) -> int:
    vocab = Vocabulary.load(args.vocab)
    model = _load_model(args.model, vocab)
    W = _embedding(model)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="\n") as f:
        if args.task == "neighbors":
            words = args.words.split(",") if args.words else vocab.tokens[:10]
            for tok in words:
                if tok not in vocab:
                    raise CorpusError(f"word {tok!r} is not in the vocabulary")
                ids = nearest_words(W, vocab.lookup(tok), args.k)
                f.write("\t".join([tok] + [vocab.token(i) for i in ids]) + "\n")
        else:
            units = [int(u) for u in args.units.split(",")] if args.units else range(W.shape[0])
            for u in units:
                ids = hidden_unit_topics(W, u, args.k)
                f.write("\t".join([str(u)] + [vocab.token(i) for i in ids]) + "\n")
    print(f"wrote {out}")
    return 0


# -- argument parsing ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="docnade", description="DocNADE topic and language models")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="tokenize raw text into .bow/.seq corpora and a vocabulary")
    s.add_argument("input", help="raw text: 'doc_id<TAB>labels<TAB>text' lines or one document per line")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--name", default="corpus", help="output file stem (default: corpus)")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--max-vocab", type=int, default=2000, help="vocabulary size when building one (default 2000)")
    g.add_argument("--vocab", help="existing vocabulary file (for validation/test splits)")
    s.add_argument("--stopwords", action="store_true", help="drop a bundled English stop-word list")
    s.add_argument("--log-counts", action="store_true", help="replace counts n by round(log(1+n)) in the .bow output")
    s.add_argument("--log-base", choices=("e", "10"), default="e")
    s.add_argument("--seed", type=int, default=0, help="accepted for uniformity; ingestion is deterministic")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("train", help="train a model")
    s.add_argument("--kind", choices=("docnade", "deep_docnade", "docnade_lm"))
    s.add_argument("--train", required=True, help=".bow or .seq training corpus")
    s.add_argument("--valid", help="validation corpus (enables validation perplexity and early stopping)")
    s.add_argument("--vocab", required=True)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--config", help="flat key=value config file; flags override it")
    s.add_argument("--hidden", type=int, help="hidden units (per layer)")
    s.add_argument("--layers", type=int, help="deep_docnade depth (1-3)")
    s.add_argument("--ngram", type=int, help="docnade_lm n-gram order")
    s.add_argument("--activation", choices=("sigmoid", "tanh"))
    s.add_argument("--optimizer", choices=("sgd", "adam"))
    s.add_argument("--lr", type=float)
    s.add_argument("--beta1", type=float)
    s.add_argument("--beta2", type=float)
    s.add_argument("--epochs", type=int)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--tree", choices=("random", "huffman"), help="docnade output tree")
    s.add_argument("--group", type=int, help="sentences per pseudo-document (docnade_lm)")
    s.add_argument("--patience", type=int, help="early-stopping patience in epochs (0 = off)")
    s.add_argument("--valid-ensemble", type=_positive, help="orderings per validation document")
    s.add_argument("--output-init", choices=("uniform_fan", "zeros"))
    s.add_argument("--exact-split", action="store_true", help="deep_docnade: shuffle-then-cut splits")
    s.add_argument("--ffn", action="store_true", help="docnade_lm: drop the document term (n-gram ablation)")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="evaluate perplexity or retrieval")
    s.add_argument("--model", required=True)
    s.add_argument("--vocab", required=True)
    s.add_argument("--corpus", required=True, help="test corpus (queries for retrieval)")
    s.add_argument("--task", choices=("perplexity", "retrieval"), default="perplexity")
    s.add_argument("--database", nargs="*", default=[], help="retrieval database corpora (train + valid)")
    s.add_argument("--ensemble", type=_positive, default=1,
                   help="orderings per document, e.g. one of 1 2 4 16 32 64 128 256 (default 1)")
    s.add_argument("--max-docs", type=int, help="evaluate only the first N documents")
    s.add_argument("--group", type=int, default=1, help="sentences per pseudo-document (docnade_lm)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("inspect", help="word neighbours or hidden-unit topics")
    s.add_argument("--model", required=True)
    s.add_argument("--vocab", required=True)
    s.add_argument("--task", choices=("neighbors", "topics"), required=True)
    s.add_argument("--words", help="comma-separated words (neighbors)")
    s.add_argument("--units", help="comma-separated hidden units (topics; default all)")
    s.add_argument("-k", type=int, default=None, help="list length (default 5 neighbours, 10 topic words)")
    s.add_argument("--out", required=True, help="output TSV path")
    s.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "inspect" and args.k is None:
        args.k = 5 if args.task == "neighbors" else 10
    try:
        return args.func(args)
    except (CorpusError, ValueError, model_io.ModelFileError, OSError, KeyError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
