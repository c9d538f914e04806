"""Beam-search decoding and hashtag-set production.

Beams terminate on the [SEP] terminator or at the length limit and are never
extended afterwards.  During search beams are pruned by cumulative log
probability; the final ranking uses the length-normalized score (mean log
probability per token) unless normalization is turned off.  All ties break
lexicographically on the id sequence, which makes decoding deterministic and
makes beam size 1 coincide with greedy decoding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SegSelModel
from .selection import SelectionResult
from .tokenizer import SEP_ID, SegmentedInput, decode_output


@dataclass(frozen=True)
class Beam:
    ids: tuple[int, ...]
    logp: float
    finished: bool


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits.astype(np.float64) - logits.max()
    return z - np.log(np.exp(z).sum())


def _normalized(beam: Beam, length_norm: bool) -> float:
    if not beam.ids:
        return float("-inf")
    return beam.logp / len(beam.ids) if length_norm else beam.logp


def beam_search(
    si: SegmentedInput,
    model: SegSelModel,
    beam_size: int,
    max_len: int,
    length_norm: bool = True,
    selection: SelectionResult | None = None,
) -> list[tuple[list[int], float, float]]:
    """Ranked (ids, normalized score, cumulative logp) triples, best first."""
    if beam_size < 1:
        raise ValueError(f"beam size must be >= 1, got {beam_size}")
    if selection is None:
        states = model.encode_post(si, training=False)
        selection = model.select(states)

    beams = [Beam((), 0.0, False)]
    for _ in range(max_len):
        if all(b.finished for b in beams):
            break
        candidates = [b for b in beams if b.finished]
        for beam in beams:
            if beam.finished:
                continue
            logp = log_softmax(model.next_logits(list(beam.ids), selection))
            for tok in range(len(logp)):
                ids = beam.ids + (tok,)
                candidates.append(Beam(ids, beam.logp + float(logp[tok]), tok == SEP_ID))
        candidates.sort(key=lambda b: (-b.logp, b.ids))
        beams = candidates[:beam_size]

    ranked = sorted(beams, key=lambda b: (-_normalized(b, length_norm), b.ids))
    return [(list(b.ids), _normalized(b, length_norm), b.logp) for b in ranked]


def greedy_decode(si: SegmentedInput, model: SegSelModel, max_len: int,
                  selection: SelectionResult | None = None) -> list[int]:
    return beam_search(si, model, 1, max_len, selection=selection)[0][0]


def normalize_tag(tag: str) -> str:
    """Equality key for set comparisons: lowercase, collapsed whitespace."""
    return " ".join(tag.lower().split())


def dedupe_tags(tags) -> list[str]:
    seen = set()
    out = []
    for tag in tags:
        key = normalize_tag(tag)
        if key and key not in seen:
            seen.add(key)
            out.append(key)
    return out


def generate_hashtags(
    si: SegmentedInput,
    model: SegSelModel,
    beam_size: int,
    top_k: int,
    max_len: int | None = None,
    length_norm: bool = True,
    selection: SelectionResult | None = None,
) -> dict:
    """Best hashtag list plus the deduplicated union over the top-k beams."""
    if top_k > beam_size:
        raise ValueError(f"top_k {top_k} exceeds beam size {beam_size}")
    if max_len is None:
        max_len = model.cfg.max_target_len
    ranked = beam_search(si, model, beam_size, max_len, length_norm, selection=selection)
    beam_tags = [decode_output(ids, model.vocab) for ids, _, _ in ranked[:top_k]]
    topk_set = dedupe_tags(tag for tags in beam_tags for tag in tags)
    return {
        "hashtags": beam_tags[0] if beam_tags else [],
        "topk_set": topk_set,
        "beam_hashtags": beam_tags,
        "scores": [score for _, score, _ in ranked[:top_k]],
    }
