"""Overlap metrics: ROUGE-1/2/L F1, set-level F1@k, and source n-gram overlap.

ROUGE n-gram scores use clipped multiset overlap; ROUGE-L uses the longest
common subsequence.  ROUGE values are percentages, everything else lives in
[0, 1].  Hashtag sequences are scored after joining the tag token lists with
the '#' separator token, so tag ordering matters across the boundary.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable

from .generate import normalize_tag

SEPARATOR_TOKEN = "#"


def ngram_counts(tokens: list, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _clipped_overlap_f1(cand: list, ref: list, n: int) -> float:
    c_counts = ngram_counts(cand, n)
    r_counts = ngram_counts(ref, n)
    overlap = sum(min(c, r_counts.get(g, 0)) for g, c in c_counts.items())
    c_total = sum(c_counts.values())
    r_total = sum(r_counts.values())
    precision = overlap / c_total if c_total else 0.0
    recall = overlap / r_total if r_total else 0.0
    return _f1(precision, recall)


def lcs_length(a: list, b: list) -> int:
    """Longest common subsequence length, single-row dynamic program."""
    if not a or not b:
        return 0
    row = [0] * (len(b) + 1)
    for x in a:
        prev = 0
        for j, y in enumerate(b, start=1):
            cur = row[j]
            row[j] = prev + 1 if x == y else max(row[j], row[j - 1])
            prev = cur
    return row[-1]


def rouge_f1(cand_tokens: list, ref_tokens: list) -> tuple[float, float, float]:
    """(ROUGE-1, ROUGE-2, ROUGE-L) F1 as percentages."""
    r1 = _clipped_overlap_f1(cand_tokens, ref_tokens, 1)
    r2 = _clipped_overlap_f1(cand_tokens, ref_tokens, 2)
    lcs = lcs_length(cand_tokens, ref_tokens)
    precision = lcs / len(cand_tokens) if cand_tokens else 0.0
    recall = lcs / len(ref_tokens) if ref_tokens else 0.0
    return 100.0 * r1, 100.0 * r2, 100.0 * _f1(precision, recall)


def render_sequence(hashtags: list[str], tokenize: Callable[[str], list[str]]) -> list[str]:
    """One token sequence for a tag list, tags joined by the separator token."""
    out: list[str] = []
    for i, tag in enumerate(hashtags):
        if i > 0:
            out.append(SEPARATOR_TOKEN)
        out.extend(tokenize(tag))
    return out


def sequence_rouge(
    predicted: list[str], gold: list[str], tokenize: Callable[[str], list[str]]
) -> tuple[float, float, float]:
    return rouge_f1(render_sequence(predicted, tokenize), render_sequence(gold, tokenize))


def f1_at_k(predicted_set: Iterable[str], gold_set: Iterable[str]) -> float:
    pred = set(predicted_set)
    gold = set(gold_set)
    if not gold:
        raise ValueError("f1_at_k with an empty gold set")
    if not pred:
        return 0.0
    hits = len(pred & gold)
    return _f1(hits / len(pred), hits / len(gold))


def ngram_overlap(generated_tokens: list, source_tokens: list, n: int) -> float:
    """Fraction of the generated text's distinct n-grams found in the source."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    gen = set(ngram_counts(generated_tokens, n))
    if not gen:
        return 0.0
    src = set(ngram_counts(source_tokens, n))
    return len(gen & src) / len(gen)


@dataclass
class EvalReport:
    rouge1_f1: float
    rouge2_f1: float
    rougeL_f1: float
    f1_at_k: dict[int, float]
    ngram_overlap: dict[int, float]
    count: int

    def to_dict(self) -> dict:
        return {
            "rouge1_f1": self.rouge1_f1,
            "rouge2_f1": self.rouge2_f1,
            "rougeL_f1": self.rougeL_f1,
            "f1_at_k": {str(k): v for k, v in self.f1_at_k.items()},
            "ngram_overlap": {str(n): v for n, v in self.ngram_overlap.items()},
            "count": self.count,
        }


def evaluate_predictions(
    predictions: list[dict],
    golds: list[tuple[list[str], str]],
    tokenize: Callable[[str], list[str]],
    ks: tuple[int, ...] = (1, 5),
    overlap_ns: tuple[int, ...] = (1, 2),
) -> EvalReport:
    """Corpus-level report over aligned (prediction, (gold tags, source body)) pairs.

    Each prediction dict carries "hashtags" (best list) and optionally
    "beam_hashtags" (per-beam lists) for F1@k at several k.  Scores are
    means of per-instance values.
    """
    if len(predictions) != len(golds):
        raise ValueError(f"prediction/gold count mismatch: {len(predictions)} vs {len(golds)}")
    if not predictions:
        raise ValueError("evaluate_predictions over an empty set")

    r1s, r2s, rls = [], [], []
    f1s: dict[int, list[float]] = {k: [] for k in ks}
    overlaps: dict[int, list[float]] = {n: [] for n in overlap_ns}
    for pred, (gold_tags, body) in zip(predictions, golds):
        best = list(pred.get("hashtags", []))
        r1, r2, rl = sequence_rouge(best, gold_tags, tokenize)
        r1s.append(r1)
        r2s.append(r2)
        rls.append(rl)
        beams = pred.get("beam_hashtags") or [best]
        gold_set = {normalize_tag(t) for t in gold_tags}
        for k in ks:
            pred_set = {normalize_tag(t) for tags in beams[:k] for t in tags}
            f1s[k].append(f1_at_k(pred_set, gold_set) if gold_set else 0.0)
        gen_tokens = [tok for tag in best for tok in tokenize(tag)]
        src_tokens = tokenize(body)
        for n in overlap_ns:
            overlaps[n].append(ngram_overlap(gen_tokens, src_tokens, n))

    mean = lambda xs: sum(xs) / len(xs)
    return EvalReport(
        rouge1_f1=mean(r1s),
        rouge2_f1=mean(r2s),
        rougeL_f1=mean(rls),
        f1_at_k={k: mean(v) for k, v in f1s.items()},
        ngram_overlap={n: mean(v) for n, v in overlaps.items()},
        count=len(predictions),
    )


def report_table(report: EvalReport, title: str = "evaluation") -> str:
    ks = sorted(report.f1_at_k)
    ns = sorted(report.ngram_overlap)
    header = ["ROUGE-1", "ROUGE-2", "ROUGE-L"] + [f"F1@{k}" for k in ks]
    values = [f"{report.rouge1_f1:.2f}", f"{report.rouge2_f1:.2f}", f"{report.rougeL_f1:.2f}"]
    values += [f"{report.f1_at_k[k]:.4f}" for k in ks]
    widths = [max(len(h), len(v)) for h, v in zip(header, values)]
    lines = [
        f"[{title}]  ({report.count} instances)",
        "  " + "  ".join(h.rjust(w) for h, w in zip(header, widths)),
        "  " + "  ".join(v.rjust(w) for v, w in zip(values, widths)),
        "  " + "  ".join(f"{n}-gram overlap {report.ngram_overlap[n]:.4f}" for n in ns),
    ]
    return "\n".join(lines)
