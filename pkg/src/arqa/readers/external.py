"""Adapter for a neural reader running as a child process.

Protocol: newline-delimited JSON on the child's stdin/stdout, one response
per request, in request order.

    -> {"type": "read", "qid": ..., "question": ...,
        "paragraphs": [{"id": ..., "text": ...}, ...]}
    <- {"type": "candidates", "qid": ...,
        "candidates": [{"paragraph_id": ..., "char_start": int, "char_end": int,
                        "start_score": float, "end_score": float}, ...]}

Scores must be un-normalized (e.g. exp of logits) so that spans from
different paragraphs stay comparable.
"""

from __future__ import annotations

import json
import logging
import math
import queue
import subprocess
import threading
import warnings
from typing import Sequence

from ..analysis import AnalyzerConfig, surface_tokens
from ..corpus import paragraph_doc_id
from ..retriever import ParagraphHit
from .candidates import AnswerCandidate, make_candidate

log = logging.getLogger(__name__)

MAX_SPAN_GAP = 15


class ReaderError(RuntimeError):
    pass


class ReaderProtocolError(ReaderError):
    pass


class ReaderTimeoutError(ReaderError):
    def __init__(self, qid: str, timeout: float):
        super().__init__(f"external reader timed out after {timeout:g}s on question {qid!r}")
        self.qid = qid


class ReaderExitedError(ReaderError):
    pass


_EOF = object()


class ExternalReader:
    """One child process; strictly one request in flight."""

    def __init__(
        self,
        command: Sequence[str],
        timeout: float = 60.0,
        max_span_gap: int = MAX_SPAN_GAP,
        analyzer: AnalyzerConfig | None = None,
    ):
        self.command = list(command)
        self.timeout = timeout
        self.max_span_gap = max_span_gap
        self.analyzer = analyzer
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()
        self._lock = threading.Lock()

    def _start(self) -> None:
        self._proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        self._lines = queue.Queue()
        threading.Thread(target=self._pump, args=(self._proc, self._lines), daemon=True).start()

    @staticmethod
    def _pump(proc: subprocess.Popen, lines: queue.Queue) -> None:
        for line in proc.stdout:
            lines.put(line)
        lines.put(_EOF)

    def close(self) -> None:
        proc, self._proc = self._proc, None
        if proc is None:
            return
        try:
            proc.stdin.close()
            proc.wait(timeout=5)
        except (OSError, subprocess.TimeoutExpired):
            proc.kill()
            proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _exchange(self, request: dict) -> dict:
        if self._proc is None or self._proc.poll() is not None:
            self._start()
        qid = request["qid"]
        try:
            self._proc.stdin.write(json.dumps(request, ensure_ascii=False) + "\n")
            self._proc.stdin.flush()
        except OSError as exc:
            self.close()
            raise ReaderExitedError(f"external reader exited before request {qid!r}: {exc}") from None
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            # responses would now be out of step; restart on next use
            self._kill()
            raise ReaderTimeoutError(qid, self.timeout) from None
        if line is _EOF:
            code = self._proc.wait()
            self._proc = None
            raise ReaderExitedError(f"external reader exited with code {code} while answering {qid!r}")
        try:
            resp = json.loads(line)
        except json.JSONDecodeError:
            self._kill()
            raise ReaderProtocolError(f"non-JSON response for {qid!r}: {line[:200]!r}") from None
        if not isinstance(resp, dict) or resp.get("type") != "candidates" or resp.get("qid") != qid:
            self._kill()
            raise ReaderProtocolError(f"unexpected response for {qid!r}: {line[:200]!r}")
        if not isinstance(resp.get("candidates"), list):
            raise ReaderProtocolError(f"response for {qid!r} lacks a candidates list")
        return resp

    def _kill(self) -> None:
        if self._proc is not None:
            self._proc.kill()
            self._proc.wait()
            self._proc = None

    def read(self, question: str, paragraphs: Sequence[ParagraphHit], qid: str = "q") -> list[AnswerCandidate]:
        by_id = {paragraph_doc_id(p.article_id, p.paragraph_index): p for p in paragraphs}
        request = {
            "type": "read",
            "qid": qid,
            "question": question,
            "paragraphs": [{"id": pid, "text": p.text} for pid, p in by_id.items()],
        }
        with self._lock:
            resp = self._exchange(request)
        out = []
        for raw in resp["candidates"]:
            cand = self._validate(raw, by_id, qid)
            if cand is not None:
                out.append(cand)
        return out

    __call__ = read

    def _validate(self, raw, by_id, qid) -> AnswerCandidate | None:
        try:
            para = by_id[raw["paragraph_id"]]
            s, e = raw["char_start"], raw["char_end"]
            start_score, end_score = float(raw["start_score"]), float(raw["end_score"])
        except (KeyError, TypeError, ValueError):
            warnings.warn(f"{qid}: malformed candidate {raw!r} dropped", stacklevel=3)
            return None
        if not (isinstance(s, int) and isinstance(e, int) and 0 <= s < e <= len(para.text)):
            warnings.warn(f"{qid}: span ({s}, {e}) outside paragraph bounds; dropped", stacklevel=3)
            return None
        if not (math.isfinite(start_score) and math.isfinite(end_score)):
            warnings.warn(f"{qid}: non-finite span scores; dropped", stacklevel=3)
            return None
        covered = [i for i, t in enumerate(surface_tokens(para.text, self.analyzer)) if t.char_start < e and t.char_end > s]
        if not covered or covered[-1] - covered[0] > self.max_span_gap:
            warnings.warn(f"{qid}: span ({s}, {e}) violates the {self.max_span_gap}-token span limit; dropped", stacklevel=3)
            return None
        return make_candidate(para, (s, e), start_score * end_score)
