"""Command-line pipeline.

Every subcommand reads and writes fixed file names inside the work
directory and records a manifest (inputs/outputs with SHA-256) under
``<work>/manifests/``. Exit codes: 0 ok, 1 unknown command, 2 config or
usage error, 3 missing input, 4 runtime failure.
"""
import argparse
import hashlib
import json
import logging
import os
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import __version__

log = logging.getLogger("abae_reviews")

EXIT_OK, EXIT_UNKNOWN, EXIT_CONFIG, EXIT_MISSING, EXIT_RUNTIME = 0, 1, 2, 3, 4

COMMANDS = ("preprocess", "train-embeddings", "fit-kmeans", "fit-lda", "train-abae",
            "coherence", "label-aspects", "summarize", "eval-judgments", "profile",
            "rerank-eval", "report")

# file names inside the work directory
F = {
    "vocab": "vocab.tsv", "corpus": "corpus.tsv", "splits": "splits.json", "stats": "stats.tsv",
    "embeddings": "embeddings.txt", "sgns_history": "sgns_history.tsv",
    "kmeans": "kmeans.txt", "lda": "lda.txt",
    "abae": "abae.ckpt", "abae_history": "abae_history.tsv",
    "extracted": "extracted.tsv", "sheet_key": "sheet_key.tsv", "judgment_results": "judgments.txt",
    "report": "report.md",
}

# which stage produces a file, for error messages
PRODUCER = {"vocab": "preprocess", "corpus": "preprocess", "splits": "preprocess",
            "stats": "preprocess", "embeddings": "train-embeddings", "kmeans": "fit-kmeans",
            "lda": "fit-lda", "abae": "train-abae", "abae_history": "train-abae",
            "extracted": "summarize", "sheet_key": "summarize",
            "judgment_results": "eval-judgments"}


class MissingInput(Exception):
    pass


class UsageError(Exception):
    def __init__(self, message, unknown_command=False):
        super().__init__(message)
        self.unknown_command = unknown_command


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, unknown_command="invalid choice" in message)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _fmt(x):
    return repr(float(x))


class Run:
    """Per-command context: config, work dir and input/output bookkeeping."""

    def __init__(self, command, cfg, work):
        self.command = command
        self.cfg = cfg
        self.work = Path(work)
        self.inputs = []
        self.outputs = []

    def path(self, key_or_name):
        return self.work / F.get(key_or_name, key_or_name)

    def need(self, key_or_name, stage=None):
        name = str(key_or_name)
        p = key_or_name if isinstance(key_or_name, Path) else self.path(name)
        if not p.exists():
            stage = stage or PRODUCER.get(name, "an earlier stage")
            raise MissingInput(f"missing input {p} (run `{stage}` first)")
        self.inputs.append(p)
        return p

    def need_file(self, path, what):
        """A user-supplied file, resolved against the current directory."""
        p = Path(path)
        if not p.exists():
            raise MissingInput(f"missing input {p} ({what})")
        self.inputs.append(p)
        return p

    def out(self, key_or_name):
        p = self.path(key_or_name)
        p.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(p)
        return p

    def write_manifest(self):
        d = self.work / "manifests"
        d.mkdir(parents=True, exist_ok=True)
        rel = lambda p: os.path.relpath(p, self.work)
        manifest = {
            "command": self.command,
            "version": __version__,
            "config": self.cfg.to_dict(),
            "inputs": {rel(p): _sha256(p) for p in self.inputs},
            "outputs": {rel(p): _sha256(p) for p in self.outputs if p.exists()},
        }
        with open(d / f"{self.command}.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True, default=str)
            fh.write("\n")


# ------------------------------------------------------------------ loaders

def _load_corpus(run):
    from .corpus import EncodedCorpus, load_splits
    corpus = EncodedCorpus.load(run.need("corpus"))
    return corpus, load_splits(corpus, run.need("splits"))


def _load_embeddings(run):
    from .embeddings import EmbeddingTable
    return EmbeddingTable.load(run.need("embeddings"))


def _load_abae(run, table=None):
    from .abae import load_checkpoint
    table = table or _load_embeddings(run)
    return load_checkpoint(run.need("abae"), table.vectors, table.digest(),
                           run.cfg.abae.normalize_embeddings)


def _load_kmeans(run):
    from .baselines import KMeansModel
    return KMeansModel.load(run.need("kmeans"))


def _load_lda(run):
    from .baselines import LdaModel
    return LdaModel.load(run.need("lda"))


def _mapping(run, method, explicit=None):
    from .aspects import AspectLabeling
    path = explicit or run.cfg.paths.mappings.get(method)
    if path is not None:
        return AspectLabeling.load(run.need_file(path, f"{method} aspect mapping"), method)
    default = run.path(f"mapping_{method}.tsv")
    if not default.exists():
        return None
    return AspectLabeling.load(run.need(default), method)


def _bundle(run, method, labeling=None, table=None):
    from .methods import AbaeBundle, KMeansBundle, LdaBundle
    if method == "abae":
        return AbaeBundle(_load_abae(run, table), labeling)
    if method == "kmeans":
        table = table or _load_embeddings(run)
        return KMeansBundle(_load_kmeans(run), table.vectors, labeling)
    if method == "lda":
        return LdaBundle(_load_lda(run), labeling, run.cfg.lda.infer_iterations, run.cfg.seed)
    raise UsageError(f"unknown method {method!r}")


# ----------------------------------------------------------------- commands

def cmd_preprocess(run, args):
    from .corpus import preprocess, read_reviews, save_split_manifest, split_datasets
    src = args.corpus or run.cfg.paths.corpus
    reviews = read_reviews(run.need_file(src, "review corpus"))
    vocab, corpus = preprocess(reviews, run.cfg.preprocess.max_vocab,
                               min_ascii_ratio=run.cfg.preprocess.min_ascii_ratio)
    splits = split_datasets(corpus, run.cfg.split)
    vocab.save(run.out("vocab"))
    corpus.save(run.out("corpus"))
    save_split_manifest(splits, run.out("splits"))
    with open(run.out("stats"), "w", encoding="utf-8") as fh:
        fh.write("set\ttokens\tsentences\tguests\tlistings\n")
        for name, c in [("all", corpus)] + list(splits.items()):
            s = c.stats()
            fh.write(f"{name}\t{s['tokens']}\t{s['sentences']}\t{s['guests']}\t{s['listings']}\n")


def cmd_train_embeddings(run, args):
    from .corpus import Vocabulary
    from .embeddings import train_embeddings
    vocab = Vocabulary.load(run.need("vocab"))
    _, splits = _load_corpus(run)
    history = []
    table = train_embeddings(splits["train"].token_lists, vocab.words, vocab.frequency,
                             run.cfg.sgns, history)
    table.save(run.out("embeddings"))
    with open(run.out("sgns_history"), "w") as fh:
        fh.write("epoch\tmean_loss\n")
        for i, v in enumerate(history, 1):
            fh.write(f"{i}\t{_fmt(v)}\n")


def cmd_fit_kmeans(run, args):
    from .baselines import kmeans_fit
    table = _load_embeddings(run)
    k = run.cfg.kmeans
    model = kmeans_fit(table.unit, run.cfg.abae.n_aspects, seed=run.cfg.seed,
                       max_iters=k.max_iters, tol=k.tol, n_init=k.n_init)
    model.save(run.out("kmeans"))


def cmd_fit_lda(run, args):
    from .baselines import lda_fit
    from .corpus import Vocabulary
    vocab = Vocabulary.load(run.need("vocab"))
    _, splits = _load_corpus(run)
    c = run.cfg.lda
    model = lda_fit(splits["train"].token_lists, c.n_topics or run.cfg.abae.n_aspects, len(vocab),
                    c.alpha, c.beta, c.iterations, run.cfg.seed)
    model.save(run.out("lda"))


def cmd_train_abae(run, args):
    from .abae import save_checkpoint, train_abae
    table = _load_embeddings(run)
    km = _load_kmeans(run)
    _, splits = _load_corpus(run)
    history = []
    model = train_abae(splits["train"].token_lists, table.vectors, run.cfg.abae, km.centroids,
                       table.digest(), history)
    save_checkpoint(model, run.out("abae"))
    with open(run.out("abae_history"), "w") as fh:
        fh.write("epoch\tmean_objective\n")
        for i, v in enumerate(history, 1):
            fh.write(f"{i}\t{_fmt(v)}\n")


def _top_lists(run, method, n, table):
    from .aspects import top_words
    if method == "abae":
        model = _load_abae(run, table)
        K = model.K
    elif method == "kmeans":
        model = _load_kmeans(run)
        K = model.k
    else:
        model = _load_lda(run)
        K = model.K
    return {k: top_words(method, model, k, n, table.vectors) for k in range(K)}


def cmd_coherence(run, args):
    from .aspects import DocumentIndex, coherence_report
    table = _load_embeddings(run)
    _, splits = _load_corpus(run)
    docs = splits["summarize_val"].token_lists
    index = DocumentIndex(docs, V=len(table))
    sizes = tuple(run.cfg.eval.coherence_sizes)
    n = min(max(sizes), len(table))
    lists = _top_lists(run, args.method, n, table)
    # words absent from the evaluation documents cannot be scored
    df = index.doc_freq(list(range(len(table))))
    lists = {k: [w for w in lst if df[w] > 0] for k, lst in lists.items()}
    report = coherence_report(lists, index, [s for s in sizes if s <= n], table.words)
    with open(run.out(f"coherence_{args.method}.txt"), "w", encoding="utf-8") as fh:
        fh.write(report.to_text(f"coherence method={args.method} K={len(lists)}"))


def _seed_word_labels(lists, words, seed_path):
    """Label each cluster with the label whose seed words dominate its top words."""
    seeds = {}
    with open(seed_path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip() and not line.startswith("#"):
                label, ws = line.rstrip("\n").split("\t")
                seeds[label] = set(ws.split())
    mapping = {}
    for k, lst in lists.items():
        names = {words[w] for w in lst}
        hits = {l: len(names & s) for l, s in seeds.items()}
        best = max(sorted(hits), key=lambda l: hits[l]) if hits else None
        mapping[k] = best if best is not None and hits[best] > 0 else "other"
    return mapping


def cmd_label_aspects(run, args):
    from .aspects import AspectLabeling, aspect_prevalence
    table = _load_embeddings(run)
    lists = _top_lists(run, args.method, min(50, len(table)), table)
    with open(run.out(f"topwords_{args.method}.tsv"), "w", encoding="utf-8") as fh:
        for k, lst in lists.items():
            fh.write(f"{k}\t{' '.join(table.words[w] for w in lst)}\n")
    if args.seed_words:
        labeling = AspectLabeling(_seed_word_labels(lists, table.words, run.need_file(args.seed_words, "seed words")),
                                  args.method)
    else:
        labeling = _mapping(run, args.method, args.mapping)
    if labeling is None:
        log.info("no mapping for %s; wrote top words only", args.method)
        return
    labeling.check_total(len(lists))
    labeling.save(run.out(f"mapping_{args.method}.tsv"))
    _, splits = _load_corpus(run)
    sents = splits["summarize_val"].token_lists
    bundle = _bundle(run, args.method, labeling, table)
    if args.method == "abae":
        from .abae import infer_batch
        vecs, reps, sim = infer_batch(sents, bundle.model)[1], bundle.model.T, "cosine"
    elif args.method == "kmeans":
        vecs, reps, sim = bundle.bow(sents), bundle.model.centroids, "cosine"
    else:
        vecs, reps, sim = bundle.distributions(sents), np.eye(bundle.K), "dot"
    prev = aspect_prevalence(vecs, reps, labeling, sim)
    with open(run.out(f"prevalence_{args.method}.tsv"), "w", encoding="utf-8") as fh:
        fh.write("label\tclusters\tfraction\n")
        for label, frac in prev.items():
            fh.write(f"{label}\t{len(labeling.clusters(label))}\t{frac:.6f}\n")


def cmd_summarize(run, args):
    from .summarize import (KEY_COLUMNS, SHEET_COLUMNS, build_evaluation_sheet,
                            summarize_listings, write_extracted, write_rows)
    table = _load_embeddings(run)
    _, splits = _load_corpus(run)
    methods = args.methods or ["abae", "kmeans", "lda"]
    bundles = []
    for m in methods:
        labeling = _mapping(run, m)
        if labeling is None:
            if args.methods:
                raise MissingInput(f"no aspect mapping for {m} (run `label-aspects --method {m}`)")
            continue
        bundles.append(_bundle(run, m, labeling, table))
    if not bundles:
        raise MissingInput("no aspect mappings found (run `label-aspects` first)")
    extracted = summarize_listings(splits["summarize_test"], bundles, k=run.cfg.eval.top_k)
    write_extracted(extracted, run.out("extracted"))
    ev = run.cfg.eval
    sheets = build_evaluation_sheet(extracted, ev.n_annotators, ev.overlap_fraction, run.cfg.seed)
    write_rows(sheets.key, KEY_COLUMNS, run.out("sheet_key"))
    for a, rows in sheets.sheets.items():
        write_rows(rows, SHEET_COLUMNS, run.out(f"sheets/annotator_{a}.tsv"))


def cmd_eval_judgments(run, args):
    from .summarize import read_rows, score_judgments
    key = read_rows(run.need("sheet_key"))
    paths = args.judgments or ([run.cfg.paths.judgments] if run.cfg.paths.judgments else [])
    if not paths:
        raise MissingInput("no judgment files given (--judgments)")
    rows = []
    for p in paths:
        rows.extend(read_rows(run.need_file(p, "judgment file")))
    res = score_judgments(rows, key)
    with open(run.out("judgment_results"), "w", encoding="utf-8") as fh:
        fh.write(res.to_text())


def _profiles_path(method):
    return f"profiles_{method}.tsv"


def cmd_profile(run, args):
    from .profiles import aggregate_bor, aggregate_bos, aggregate_max_softmax
    table = _load_embeddings(run)
    _, splits = _load_corpus(run)
    rank_val = splits["rank_val"]
    agg = args.aggregation or run.cfg.eval.aggregation
    for method in args.methods or run.cfg.eval.methods:
        bundle = _bundle(run, method, None, table)
        P = bundle.distributions(rank_val.token_lists)
        with open(run.out(_profiles_path(method)), "w", encoding="utf-8") as fh:
            fh.write(f"guest_id\taggregation\tn_sentences\t" +
                     "\t".join(f"p{k}" for k in range(P.shape[1])) + "\n")
            for gid in sorted(rank_val.by_guest):
                idx = rank_val.by_guest[gid]
                if agg == "bos":
                    prof = aggregate_bos(P[idx], gid)
                elif agg == "bor":
                    by_review = defaultdict(list)
                    for i in idx:
                        by_review[rank_val[i].review_id].append(i)
                    prof = aggregate_bor([P[v] for _, v in sorted(by_review.items())], gid)
                elif agg == "max_softmax":
                    prof = aggregate_max_softmax(P[idx], gid)
                else:
                    raise UsageError(f"unknown aggregation {agg!r}")
                fh.write(f"{gid}\t{prof.aggregation}\t{prof.n_sentences}\t" +
                         "\t".join(_fmt(x) for x in prof.distribution) + "\n")


def _read_profiles(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            out[parts[0]] = np.array([float(x) for x in parts[3:]])
    return out


def cmd_rerank_eval(run, args):
    from .profiles import KINDS, object_sets, pairwise_experiment, rank_objects
    table = _load_embeddings(run)
    _, splits = _load_corpus(run)
    test = splits["rank_test"]
    for method in args.methods or run.cfg.eval.methods:
        profiles = _read_profiles(run.need(_profiles_path(method), stage="profile"))
        bundle = _bundle(run, method, None, table)
        P = bundle.distributions(test.token_lists)
        listings = {}
        for lid in sorted(test.by_listing):
            revs = defaultdict(list)
            for i in test.by_listing[lid]:
                revs[test[i].review_id].append(i)
            listings[lid] = {rid: P[idx] for rid, idx in sorted(revs.items())}
        with open(run.out(f"scatter_{method}.tsv"), "w", encoding="utf-8") as sc, \
                open(run.out(f"fit_{method}.tsv"), "w", encoding="utf-8") as fit, \
                open(run.out(f"ranked_{method}.tsv"), "w", encoding="utf-8") as rk:
            sc.write("guest_a\tguest_b\tx_kl\ty_tau\tkind\tmethod\n")
            fit.write("kind\tmethod\tn_points\tintercept\tslope\tr2\n")
            rk.write("profile_id\tkind\tuniverse\tobject_id\trank\tscore\n")
            for kind in KINDS:
                res = pairwise_experiment(profiles, listings, kind)
                for p in res.points:
                    sc.write(f"{p.guest_a}\t{p.guest_b}\t{_fmt(p.x_kl)}\t{_fmt(p.y_tau)}\t{kind}\t{method}\n")
                fit.write(f"{kind}\t{method}\t{len(res.points)}\t{_fmt(res.intercept)}\t"
                          f"{_fmt(res.slope)}\t{_fmt(res.r2)}\n")
                universes = object_sets(listings, kind)
                names = ["all"] if kind == "listing" else list(listings)
                for gid in sorted(profiles):
                    for uname, objs in zip(names, universes):
                        ranked = rank_objects(profiles[gid], objs, kind)
                        for r, (oid, s) in enumerate(zip(ranked.ids, ranked.scores), 1):
                            rk.write(f"{gid}\t{kind}\t{uname}\t{oid}\t{r}\t{_fmt(s)}\n")


REPORT_REQUIRED = [("stats.tsv", "preprocess"), ("sgns_history.tsv", "train-embeddings"),
                   ("abae_history.tsv", "train-abae")]


def cmd_report(run, args):
    for name, stage in REPORT_REQUIRED:
        run.need(name, stage)
    sections = []
    for name in ["stats.tsv", "sgns_history.tsv", "abae_history.tsv"]:
        sections.append((name, run.path(name).read_text(encoding="utf-8")))
    optional = sorted(p.name for p in run.work.glob("coherence_*.txt")) + \
        sorted(p.name for p in run.work.glob("prevalence_*.tsv")) + \
        ([F["judgment_results"]] if run.path("judgment_results").exists() else []) + \
        sorted(p.name for p in run.work.glob("fit_*.tsv"))
    if not any(n.startswith("fit_") for n in optional):
        raise MissingInput("missing rerank results fit_<method>.tsv (run `rerank-eval` first)")
    for name in optional:
        run.inputs.append(run.path(name))
        sections.append((name, run.path(name).read_text(encoding="utf-8")))
    with open(run.out("report"), "w", encoding="utf-8") as fh:
        fh.write("# Pipeline report\n")
        for name, text in sections:
            fh.write(f"\n## {name}\n\n```\n{text.rstrip()}\n```\n")


HANDLERS = {
    "preprocess": cmd_preprocess, "train-embeddings": cmd_train_embeddings,
    "fit-kmeans": cmd_fit_kmeans, "fit-lda": cmd_fit_lda, "train-abae": cmd_train_abae,
    "coherence": cmd_coherence, "label-aspects": cmd_label_aspects, "summarize": cmd_summarize,
    "eval-judgments": cmd_eval_judgments, "profile": cmd_profile,
    "rerank-eval": cmd_rerank_eval, "report": cmd_report,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--work", help="work directory (overrides paths.work)")
    common.add_argument("--seed", type=int, help="global seed (overrides config seed)")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value; repeatable")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="abae-reviews", description=__doc__.splitlines()[0],
                formatter_class=argparse.RawDescriptionHelpFormatter,
                epilog="Thread count for numba kernels: ABAE_REVIEWS_THREADS. "
                       "Pure-numpy kernels: ABAE_REVIEWS_DISABLE_NUMBA=1.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    helps = {
        "preprocess": "segment, tokenize, build vocabulary, encode and split the review corpus",
        "train-embeddings": "train skip-gram word vectors on the training split",
        "fit-kmeans": "k-means over unit word vectors (K = abae.n_aspects)",
        "fit-lda": "collapsed-Gibbs LDA over training sentences",
        "train-abae": "train ABAE initialized from the k-means centroids",
        "coherence": "coherence of each aspect's top words on summarization-validation sentences",
        "label-aspects": "write top words; apply a cluster->label mapping and report prevalence",
        "summarize": "extract top sentences per listing/aspect/method and write annotator sheets",
        "eval-judgments": "precision@1/@3 and Fleiss' kappa from judgment files",
        "profile": "aggregate guest profiles from ranking-validation sentences",
        "rerank-eval": "profile distance vs ranking correlation over listings, reviews, sentences",
        "report": "collect earlier stage outputs into report.md",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common], help=helps[name], description=helps[name])
        if name == "preprocess":
            sp.add_argument("--corpus", help="review JSONL file (overrides paths.corpus)")
        if name in ("coherence", "label-aspects"):
            sp.add_argument("--method", choices=["abae", "kmeans", "lda"], default="abae")
        if name == "label-aspects":
            sp.add_argument("--mapping", help="cluster_id<TAB>label file")
            sp.add_argument("--seed-words", help="label<TAB>space-separated words; labels clusters by overlap")
        if name in ("summarize", "profile", "rerank-eval"):
            sp.add_argument("--methods", nargs="+", choices=["abae", "kmeans", "lda"])
        if name == "profile":
            sp.add_argument("--aggregation", choices=["bos", "bor", "max_softmax"])
        if name == "eval-judgments":
            sp.add_argument("--judgments", nargs="+", help="judgment TSV files")
    return p


def main(argv=None):
    from .config import ConfigError, apply_override, load_config
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"abae-reviews: {exc}", file=sys.stderr)
        return EXIT_UNKNOWN if exc.unknown_command else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config and not Path(args.config).exists():
            raise MissingInput(f"missing config file {args.config}")
        cfg = load_config(args.config)
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            cfg = apply_override(cfg, k, v)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.work:
            cfg.paths.work = args.work
        cfg = cfg.seeded()
        run = Run(args.command, cfg, cfg.paths.work)
        run.work.mkdir(parents=True, exist_ok=True)
        HANDLERS[args.command](run, args)
        run.write_manifest()
    except (ConfigError, UsageError) as exc:
        print(f"abae-reviews: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingInput as exc:
        print(f"abae-reviews: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"abae-reviews: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())


def main_exit():
    sys.exit(main())
