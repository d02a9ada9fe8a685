"""Serve a baseline reader over the external-reader protocol.

Useful as a reference child process and for exercising the pipeline's
external path without a neural model::

    python -m arqa.readers.server --reader tfidf
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from ..retriever import ParagraphHit
from . import ReaderSpec


def serve(spec: ReaderSpec, stdin=sys.stdin, stdout=sys.stdout) -> int:
    reader = spec.build()
    for line in stdin:
        if not line.strip():
            continue
        req = json.loads(line)
        paras = []
        for p in req["paragraphs"]:
            art, _, idx = p["id"].rpartition("#")
            paras.append(ParagraphHit(art, int(idx), p["text"], 0.0))
        cands = []
        for c in reader(req["question"], paras, req["qid"]):
            # split exp(score) evenly between start and end
            half = math.exp(c.ans_raw / 2.0)
            cands.append({
                "paragraph_id": f"{c.article_id}#{c.paragraph_index}",
                "char_start": c.char_start,
                "char_end": c.char_end,
                "start_score": half,
                "end_score": half,
            })
        stdout.write(json.dumps({"type": "candidates", "qid": req["qid"], "candidates": cands}, ensure_ascii=False) + "\n")
        stdout.flush()
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reader", default="tfidf", choices=["random", "sliding_window", "tfidf", "embedding"])
    ap.add_argument("--vectors")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    return serve(ReaderSpec(args.reader, seed=args.seed, vectors_path=args.vectors))


if __name__ == "__main__":
    sys.exit(main())
