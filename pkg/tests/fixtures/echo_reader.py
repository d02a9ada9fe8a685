"""Scriptable stand-in for an external reader process.

usage: echo_reader.py MODE
  ok       answer span (0, 5) of the first paragraph, scores 1.0 / 1.0
  oob      answer a span past the end of the paragraph
  sleep    never answer
  exit     exit with code 3 on the first request
  garbage  reply with a non-JSON line
"""

import json
import sys
import time

mode = sys.argv[1] if len(sys.argv) > 1 else "ok"
for line in sys.stdin:
    req = json.loads(line)
    if mode == "exit":
        sys.exit(3)
    if mode == "sleep":
        time.sleep(60)
    if mode == "garbage":
        print("not json", flush=True)
        continue
    para = req["paragraphs"][0]
    span = (0, 5) if mode == "ok" else (0, len(para["text"]) + 10)
    cand = {"paragraph_id": para["id"], "char_start": span[0], "char_end": span[1], "start_score": 1.0, "end_score": 1.0}
    print(json.dumps({"type": "candidates", "qid": req["qid"], "candidates": [cand]}), flush=True)
