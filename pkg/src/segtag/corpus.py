"""Corpus ingestion: hashtag extraction, filtering, splits, and statistics.

Records arrive as UTF-8 line-delimited JSON, one object per line:

    {"post": "raw text ...", "hashtags": ["optional", "pre-split tags"]}

When ``hashtags`` is absent the tags are recovered from the post text.
Two marking styles are supported:

* ``weibo``   tags written as ``#...#`` pairs
* ``twitter`` tags written as ``#token``

Only tags at the beginning or end of a post count as ground truth; marks in
the middle of the text stay in the body, acting as ordinary content.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

STYLES = ("weibo", "twitter")


class ExtractionError(ValueError):
    """Raised for malformed hashtag marking in a single record."""


@dataclass
class PostRecord:
    body: str
    hashtags: list[str]
    source_id: str = ""

    def key(self) -> tuple:
        return (self.body, tuple(self.hashtags))


@dataclass
class CorpusStats:
    pair_count: int
    avg_source_len: float
    cov_source_len_95: int
    avg_target_len: float
    cov_target_len_95: int
    avg_hashtags: float

    def to_dict(self) -> dict:
        return {
            "pair_count": self.pair_count,
            "avg_source_len": self.avg_source_len,
            "cov_source_len_95": self.cov_source_len_95,
            "avg_target_len": self.avg_target_len,
            "cov_target_len_95": self.cov_target_len_95,
            "avg_hashtags": self.avg_hashtags,
        }


def _weibo_spans(text: str) -> list[tuple[int, int]]:
    """Pair up '#' marks into (start, end) spans; ``end`` is past the closing '#'."""
    marks = [i for i, c in enumerate(text) if c == "#"]
    if len(marks) % 2 != 0:
        raise ExtractionError(f"unterminated '#...#' span (odd number of '#' marks): {text[:60]!r}")
    return [(marks[i], marks[i + 1] + 1) for i in range(0, len(marks), 2)]


def _extract_weibo(raw: str) -> tuple[str, list[str]]:
    spans = _weibo_spans(raw)
    if not spans:
        return raw.strip(), []

    leading: list[tuple[int, int]] = []
    cursor = 0
    for span in spans:
        if raw[cursor : span[0]].strip() == "":
            leading.append(span)
            cursor = span[1]
        else:
            break

    trailing: list[tuple[int, int]] = []
    cursor = len(raw)
    for span in reversed(spans[len(leading) :]):
        if raw[span[1] : cursor].strip() == "":
            trailing.append(span)
            cursor = span[0]
        else:
            break
    trailing.reverse()

    body_start = leading[-1][1] if leading else 0
    body_end = trailing[0][0] if trailing else len(raw)
    body = raw[body_start:body_end].strip()
    tags = [raw[a + 1 : b - 1].strip() for a, b in leading + trailing]
    return body, [t for t in tags if t]


def _is_tag_token(tok: str) -> bool:
    return tok.startswith("#") and len(tok) > 1


def _extract_twitter(raw: str) -> tuple[str, list[str]]:
    tokens = raw.split()
    lo = 0
    while lo < len(tokens) and _is_tag_token(tokens[lo]):
        lo += 1
    hi = len(tokens)
    while hi > lo and _is_tag_token(tokens[hi - 1]):
        hi -= 1
    tags = [t[1:] for t in tokens[:lo]] + [t[1:] for t in tokens[hi:]]
    return " ".join(tokens[lo:hi]), tags


def extract_hashtags(raw_post: str, style: str) -> tuple[str, list[str]]:
    """Split a raw post into (body, boundary hashtags).

    Marks in the middle of the post stay in the body verbatim.  Returns an
    empty tag list when no boundary hashtag exists; the caller drops such
    records.  Malformed weibo marking raises ExtractionError.
    """
    if style not in STYLES:
        raise ValueError(f"unknown style {style!r}, expected one of {STYLES}")
    if style == "weibo":
        return _extract_weibo(raw_post)
    return _extract_twitter(raw_post)


def render_post(body: str, hashtags: Iterable[str], style: str) -> str:
    """Inverse of extract_hashtags for boundary-only tags (used for synthesis)."""
    if style == "weibo":
        tail = "".join(f"#{h}#" for h in hashtags)
    else:
        tail = " ".join(f"#{h}" for h in hashtags)
    return f"{body} {tail}".strip()


def _clean_tags(tags: Iterable[str]) -> list[str]:
    out = []
    for t in tags:
        t = t.replace("#", " ").strip()
        if t:
            out.append(t)
    return out


def load_raw_records(path, style: str) -> tuple[list[PostRecord], list[str]]:
    """Parse a JSONL file into records, extracting tags where needed.

    Returns (records, diagnostics); a bad line never aborts the run, it is
    reported and skipped.
    """
    records: list[PostRecord] = []
    diagnostics: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                raw = obj["post"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                diagnostics.append(f"line {lineno}: unreadable record ({exc})")
                continue
            source_id = str(obj.get("id", f"r{lineno}"))
            if obj.get("hashtags"):
                body, tags = raw.strip(), _clean_tags(obj["hashtags"])
            else:
                try:
                    body, tags = extract_hashtags(raw, style)
                except ExtractionError as exc:
                    diagnostics.append(f"line {lineno}: {exc}")
                    continue
            if not body:
                diagnostics.append(f"line {lineno}: empty body after extraction")
                continue
            if not tags:
                diagnostics.append(f"line {lineno}: no boundary hashtag")
                continue
            records.append(PostRecord(body=body, hashtags=tags, source_id=source_id))
    return records, diagnostics


def filter_records(records: list[PostRecord], min_body_chars: int) -> list[PostRecord]:
    """Keep records with a long-enough body and at least one tag; drop exact duplicates."""
    if min_body_chars < 0:
        raise ValueError("min_body_chars must be >= 0")
    seen: set[tuple] = set()
    kept: list[PostRecord] = []
    for rec in records:
        if len(rec.body) < min_body_chars or not rec.hashtags:
            continue
        k = rec.key()
        if k in seen:
            continue
        seen.add(k)
        kept.append(rec)
    return kept


def corpus_stats(records: list[PostRecord], tokenize: Callable[[str], list[str]]) -> CorpusStats:
    """Length statistics over tokenized bodies and hashtag sequences.

    cov_*_95 is the smallest length L such that at least 95% of the
    instances have length <= L.
    """
    if not records:
        raise ValueError("corpus_stats over an empty corpus")
    src_lens = [len(tokenize(r.body)) for r in records]
    tgt_lens = [sum(len(tokenize(h)) for h in r.hashtags) for r in records]
    n_tags = [len(r.hashtags) for r in records]
    return CorpusStats(
        pair_count=len(records),
        avg_source_len=float(np.mean(src_lens)),
        cov_source_len_95=coverage_95(src_lens),
        avg_target_len=float(np.mean(tgt_lens)),
        cov_target_len_95=coverage_95(tgt_lens),
        avg_hashtags=float(np.mean(n_tags)),
    )


def coverage_95(lengths: list[int]) -> int:
    ordered = sorted(lengths)
    k = math.ceil(0.95 * len(ordered))
    return int(ordered[k - 1])


def split_corpus(
    records: list[PostRecord], ratios: tuple[float, float, float], seed: int
) -> tuple[list[PostRecord], list[PostRecord], list[PostRecord]]:
    """Deterministic disjoint train/dev/test partition covering the input."""
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must be three nonnegatives summing to 1, got {ratios}")
    order = np.random.default_rng(seed).permutation(len(records))
    n_train = int(len(records) * ratios[0])
    n_dev = int(len(records) * ratios[1])
    shuffled = [records[i] for i in order]
    return (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_dev],
        shuffled[n_train + n_dev :],
    )


def write_records(path, records: Iterable[PostRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(
                json.dumps(
                    {"id": rec.source_id, "post": rec.body, "hashtags": rec.hashtags},
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_records(path) -> list[PostRecord]:
    """Read already-extracted records (body + tags, no marking)."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            records.append(
                PostRecord(
                    body=obj["post"],
                    hashtags=list(obj.get("hashtags", [])),
                    source_id=str(obj.get("id", f"r{lineno}")),
                )
            )
    return records


def stats_table(stats: CorpusStats, title: str = "corpus") -> str:
    rows = [
        ("pairs", f"{stats.pair_count}"),
        ("avg source len", f"{stats.avg_source_len:.1f}"),
        ("cov source len (95%)", f"{stats.cov_source_len_95}"),
        ("avg target len", f"{stats.avg_target_len:.1f}"),
        ("cov target len (95%)", f"{stats.cov_target_len_95}"),
        ("avg hashtags", f"{stats.avg_hashtags:.1f}"),
    ]
    width = max(len(k) for k, _ in rows)
    lines = [f"[{title}]"]
    lines += [f"  {k.ljust(width)}  {v}" for k, v in rows]
    return "\n".join(lines)
