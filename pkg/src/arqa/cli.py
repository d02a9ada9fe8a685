"""Command-line interface.

Every flag can also come from a key-value config file (``--config`` or the
ARQA_CONFIG environment variable); flags given on the command line win.
Config keys are flag names without the leading dashes, e.g.::

    # run.conf
    index = wiki.sqtf
    corpus = wiki.jsonl
    reader = tfidf
    beta = 0.35

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shlex
import sys
from pathlib import Path
from typing import Any, Callable

from . import __version__
from .align import DEFAULT_MAX_DISTANCE_RATIO, DEFAULT_MAX_WORDS, align_dataset
from .analysis import AnalyzerConfig
from .corpus import load_corpus
from .fusion import FusionConfig, beta_curve, tune_beta
from .metrics import dump_report, load_dataset, write_dataset
from .readers import READERS, ReaderSpec
from .retriever import EmbeddingRetriever, HierarchicalConfig, retrieve_flat
from .tfidf import DEFAULT_HASH_BINS, build_index, load_index, save_index

log = logging.getLogger("arqa")

CONFIG_ENV = "ARQA_CONFIG"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def ngram_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}") from None
    if not 1 <= lo <= hi <= 4:
        raise argparse.ArgumentTypeError(f"need 1 <= lo <= hi <= 4, got {text!r}")
    return lo, hi


def int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def parse_bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


# (flag, options, default, required)
Spec = tuple[str, dict, Any, bool]

COMMON: list[Spec] = [
    ("--seed", {"type": int, "help": "seed for all randomness"}, 0, False),
    ("--workers", {"type": int, "help": "per-question worker threads"}, 1, False),
    ("--log-level", {"choices": ["DEBUG", "INFO", "WARNING", "ERROR"]}, "INFO", False),
]

RETRIEVAL: list[Spec] = [
    ("--index", {"help": "stage-1 index file"}, None, True),
    ("--corpus", {"help": "corpus JSONL"}, None, True),
    ("--k1", {"type": int, "help": "stage-1 depth"}, 1000, False),
    ("--k2", {"type": int, "help": "final retrieval depth"}, 15, False),
    ("--stage2-ngrams", {"type": ngram_range, "help": "stage-2 n-gram range, e.g. 1,4"}, (1, 4), False),
]

READING: list[Spec] = [
    ("--reader", {"choices": READERS}, "tfidf", False),
    ("--vectors", {"help": "word-vector file for the embedding reader"}, None, False),
    ("--reader-cmd", {"help": "command line of an external reader process"}, None, False),
    ("--reader-timeout", {"type": float, "help": "seconds per external request"}, 60.0, False),
]

FUSING: list[Spec] = [
    ("--beta", {"type": float, "help": "weight of the document score"}, 0.5, False),
    ("--top-n", {"type": int}, 5, False),
    ("--budget", {"type": int, "help": "documents read per question"}, 10, False),
    ("--external", {"help": "external retrieval JSONL merged up to the budget"}, None, False),
    ("--subselect-k", {"type": int, "help": "keep only the k closest paragraphs"}, None, False),
]

COMMANDS: dict[str, tuple[str, list[Spec]]] = {
    "build-index": ("build a TF-IDF index from a corpus", [
        ("--corpus", {"help": "corpus JSONL"}, None, True),
        ("--out", {"help": "index file to write"}, None, True),
        ("--ngrams", {"type": ngram_range, "help": "n-gram range, e.g. 1,2"}, (1, 2), False),
        ("--hash-bins", {"type": int, "help": "number of hash bins (power of two)"}, DEFAULT_HASH_BINS, False),
        ("--unit", {"choices": ["article", "paragraph"]}, "article", False),
        ("--stopwords", {"help": "stopword file (one per line) replacing the default list"}, None, False),
        ("--min-paragraph-chars", {"type": int}, 1, False),
    ]),
    "retrieve": ("retrieve documents for a question or a dataset", RETRIEVAL + [
        ("--question", {}, None, False),
        ("--dataset", {"help": "SQuAD-format dataset"}, None, False),
        ("--flat", {"action": "store_true", "help": "single-stage retrieval of k2 documents"}, False, False),
        ("--out", {"help": "hits JSONL (default stdout)"}, None, False),
    ]),
    "answer": ("answer a single question", RETRIEVAL + READING + FUSING + [
        ("--question", {}, None, True),
        ("--qid", {"help": "question id used to look up external hits"}, None, False),
    ]),
    "eval-retriever": ("recall@k of flat and hierarchical retrieval", [
        ("--dataset", {}, None, True),
        ("--corpus", {}, None, True),
        ("--index", {"help": "bigram (stage-1) index"}, None, True),
        ("--unigram-index", {"help": "optional extra flat index"}, None, False),
        ("--k", {"type": int_list, "help": "comma-separated depths"}, [15], False),
        ("--k1", {"type": int}, 1000, False),
        ("--stage2-ngrams", {"type": ngram_range}, (1, 4), False),
        ("--vectors", {"help": "add an embedding paragraph retriever"}, None, False),
        ("--raw-match", {"action": "store_true", "help": "match answers without normalization"}, False, False),
        ("--out", {"help": "report JSON (default stdout)"}, None, False),
    ]),
    "eval-reader": ("evaluate a reader on gold paragraphs", READING + [
        ("--dataset", {}, None, True),
        ("--predictions-out", {}, None, False),
        ("--report-out", {}, None, False),
    ]),
    "eval-open": ("open-domain evaluation, top-1/3/5", RETRIEVAL + READING + FUSING + [
        ("--dataset", {}, None, True),
        ("--predictions-out", {}, None, False),
        ("--topn-out", {}, None, False),
        ("--report-out", {}, None, False),
    ]),
    "tune-beta": ("line search for beta on a development set", RETRIEVAL + READING + FUSING + [
        ("--dataset", {}, None, True),
        ("--grid-step", {"type": float}, 0.05, False),
        ("--out", {}, None, False),
    ]),
    "align": ("repair answers that are not verbatim in their paragraphs", [
        ("--dataset", {}, None, True),
        ("--out", {}, None, True),
        ("--max-words", {"type": int}, DEFAULT_MAX_WORDS, False),
        ("--max-distance-ratio", {"type": float}, DEFAULT_MAX_DISTANCE_RATIO, False),
        ("--stats-out", {}, None, False),
    ]),
}


def _dest(flag: str) -> str:
    return flag.lstrip("-").replace("-", "_")


def build_parser() -> _Parser:
    parser = _Parser(prog="arqa", description="Open-domain Arabic question answering.")
    parser.add_argument("--version", action="version", version=f"arqa {__version__}")
    subs = parser.add_subparsers(dest="command", parser_class=_Parser)
    parser.subcommands = {}
    for name, (help_text, specs) in COMMANDS.items():
        sub = subs.add_parser(name, help=help_text, description=help_text, argument_default=argparse.SUPPRESS)
        parser.subcommands[name] = sub
        sub.add_argument("--config", help=f"key-value config file (default ${CONFIG_ENV})")
        for flag, opts, default, required in COMMON + specs:
            extra = " (required)" if required else f" (default: {default})"
            sub.add_argument(flag, **{**opts, "help": opts.get("help", "") + extra})
    return parser


def read_config(path: str | Path) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def resolve(command: str, given: dict[str, Any]) -> dict[str, Any]:
    """Defaults, then config file, then explicit flags."""
    specs = {_dest(f): (opts, default, req) for f, opts, default, req in COMMON + COMMANDS[command][1]}
    convert = {
        dest: opts.get("type") or (parse_bool if isinstance(default, bool) else str)
        for dest, (opts, default, _) in specs.items()
    }
    effective = {dest: default for dest, (_, default, _) in specs.items()}
    cfg_path = given.pop("config", None) or os.environ.get(CONFIG_ENV)
    if cfg_path:
        for key, raw in read_config(cfg_path).items():
            if key not in specs:
                raise UsageError(f"{cfg_path}: unknown key {key!r} for {command}")
            try:
                effective[key] = convert[key](raw)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"{cfg_path}: bad value for {key}: {exc}") from None
            choices = specs[key][0].get("choices")
            if choices and effective[key] not in choices:
                raise UsageError(f"{cfg_path}: {key} must be one of {', '.join(choices)}")
    effective.update(given)
    missing = [f"--{d.replace('_', '-')}" for d, (_, _, req) in specs.items() if req and effective.get(d) is None]
    if missing:
        raise UsageError(f"arqa {command}: missing required option(s): {', '.join(missing)}")
    return effective


# -- commands -------------------------------------------------------------------

def _analyzer(opts) -> AnalyzerConfig:
    if opts.get("stopwords"):
        words = Path(opts["stopwords"]).read_text(encoding="utf-8").split()
        return AnalyzerConfig(stopwords=frozenset(words), ngram_range=opts["ngrams"])
    return AnalyzerConfig(ngram_range=opts["ngrams"])


def cmd_build_index(o) -> int:
    corpus = load_corpus(o["corpus"], min_paragraph_chars=o["min_paragraph_chars"])
    index = build_index(
        corpus.documents(o["unit"]), _analyzer(o), o["hash_bins"], unit=o["unit"], workers=o["workers"]
    )
    save_index(index, o["out"])
    log.info("wrote %s: %d documents, %d nonzeros", o["out"], index.n_docs, index.indices.size)
    return 0


def _hier(o, index) -> HierarchicalConfig:
    return HierarchicalConfig(index.ngram_range, o["k1"], tuple(o["stage2_ngrams"]), o["k2"])


def _reader_spec(o, analyzer) -> ReaderSpec:
    cmd = tuple(shlex.split(o["reader_cmd"])) if o.get("reader_cmd") else ()
    return ReaderSpec(
        o["reader"], seed=o["seed"], vectors_path=o.get("vectors"), command=cmd,
        timeout=o["reader_timeout"], analyzer=analyzer,
    )


def _pipeline(o):
    from .pipeline import Pipeline, load_external

    index = load_index(o["index"])
    corpus = load_corpus(o["corpus"])
    return Pipeline(
        index, corpus,
        hierarchical=_hier(o, index),
        reader=_reader_spec(o, index.analyzer),
        fusion=FusionConfig(o["beta"], o["top_n"]),
        external=load_external(o["external"]) if o.get("external") else None,
        budget=o["budget"],
        subselect_k=o.get("subselect_k"),
        workers=o["workers"],
    )


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def cmd_retrieve(o) -> int:
    from .retriever import TokenCache, retrieve_hierarchical

    if bool(o.get("question")) == bool(o.get("dataset")):
        raise UsageError("arqa retrieve: give exactly one of --question or --dataset")
    index = load_index(o["index"])
    corpus = load_corpus(o["corpus"])
    cfg = _hier(o, index)
    cache = TokenCache(corpus, index.analyzer, index.hash_seed)
    if o.get("question"):
        questions = [("q", o["question"])]
    else:
        questions = [(ex.qid, ex.question) for ex in load_dataset(o["dataset"])]
    lines = []
    for qid, q in questions:
        if o["flat"]:
            hits = retrieve_flat(index, q, o["k2"])
        else:
            hits = retrieve_hierarchical(index, corpus, q, cfg, cache=cache)
        rec = {"qid": qid, "question": q, "hits": [{"doc_id": h.doc_id, "score": h.score} for h in hits]}
        lines.append(json.dumps(rec, ensure_ascii=False))
    _emit("\n".join(lines), o.get("out"))
    return 0


def cmd_answer(o) -> int:
    with _pipeline(o) as pipe:
        answers = pipe.answer(o["question"], o.get("qid"))
    print(json.dumps({"question": o["question"], "answers": [a.to_dict() for a in answers]}, ensure_ascii=False))
    return 0


def cmd_eval_retriever(o) -> int:
    from .embeddings import load_vectors
    from .pipeline import evaluate_retriever

    dataset = load_dataset(o["dataset"])
    corpus = load_corpus(o["corpus"])
    index = load_index(o["index"])
    flat = {f"tfidf{index.ngram_range[0]}-{index.ngram_range[1]}": index}
    if o.get("unigram_index"):
        uni = load_index(o["unigram_index"])
        flat = {f"tfidf{uni.ngram_range[0]}-{uni.ngram_range[1]}": uni, **flat}
    emb = EmbeddingRetriever(corpus, load_vectors(o["vectors"]), index.analyzer) if o.get("vectors") else None
    hier = HierarchicalConfig(index.ngram_range, max(o["k1"], max(o["k"])), tuple(o["stage2_ngrams"]), min(o["k"]))
    rows = evaluate_retriever(
        dataset, corpus, flat, o["k"], hierarchical_index=index, hierarchical=hier,
        embedding=emb, normalize=not o["raw_match"],
    )
    _emit(json.dumps([r.__dict__ for r in rows], ensure_ascii=False, indent=2), o.get("out"))
    return 0


def cmd_eval_reader(o) -> int:
    from .pipeline import evaluate_reader

    dataset = load_dataset(o["dataset"])
    report = evaluate_reader(
        dataset, _reader_spec(o, None), workers=o["workers"], predictions_path=o.get("predictions_out")
    )
    print(dump_report(report, o.get("report_out")))
    return 0


def cmd_eval_open(o) -> int:
    from .pipeline import evaluate_open_domain

    dataset = load_dataset(o["dataset"])
    with _pipeline(o) as pipe:
        reports = evaluate_open_domain(
            dataset, pipe, predictions_path=o.get("predictions_out"), topn_path=o.get("topn_out"),
        )
    blob = json.dumps({f"top{n}": r.to_dict() for n, r in reports.items()}, indent=2)
    _emit(blob, o.get("report_out"))
    if o.get("report_out"):
        print(blob)
    return 0


def cmd_tune_beta(o) -> int:
    dataset = load_dataset(o["dataset"])
    with _pipeline(o) as pipe:
        runs = pipe.map_questions(lambda ex: (pipe.candidates(ex.question, ex.qid), ex.gold_texts), dataset)
    curve = beta_curve(runs, o["grid_step"])
    beta = tune_beta(runs, o["grid_step"])
    _emit(json.dumps({"beta": beta, "curve": [[b, 100.0 * f] for b, f in curve]}, indent=2), o.get("out"))
    return 0


def cmd_align(o) -> int:
    with open(o["dataset"], encoding="utf-8") as fh:
        raw = json.load(fh)
    repaired, stats = align_dataset(raw, o["max_words"], o["max_distance_ratio"])
    write_dataset(repaired, o["out"])
    blob = json.dumps(stats)
    if o.get("stats_out"):
        Path(o["stats_out"]).write_text(blob + "\n", encoding="utf-8")
    print(blob)
    return 0


HANDLERS: dict[str, Callable[[dict], int]] = {
    "build-index": cmd_build_index,
    "retrieve": cmd_retrieve,
    "answer": cmd_answer,
    "eval-retriever": cmd_eval_retriever,
    "eval-reader": cmd_eval_reader,
    "eval-open": cmd_eval_open,
    "tune-beta": cmd_tune_beta,
    "align": cmd_align,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            parser.print_help(sys.stderr)
            return 1
        try:
            opts = resolve(ns.command, {k: v for k, v in vars(ns).items() if k != "command"})
        except UsageError as exc:
            raise UsageError(parser.subcommands[ns.command].format_usage() + str(exc)) from None
    except SystemExit as exc:  # --help / --version
        return 0 if exc.code in (0, None) else 1
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1

    logging.basicConfig(level=opts["log_level"], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    logging.captureWarnings(True)
    log.info("effective config for %s: %s", ns.command, json.dumps(opts, ensure_ascii=False, default=str, sort_keys=True))
    try:
        return HANDLERS[ns.command](opts)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"arqa {ns.command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
