"""Segment selection: score markers against the global vector, keep top-k,
and recombine hidden rows for the decoder.

Distances convert to similarities by negation, so "highest score" always
means "closest".  Selection itself is a non-differentiable pass-through:
gradient reaches only the rows that survive into the recombined sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, gather_rows
from .encoder import EncoderStates

METRICS = ("es", "cs", "mass", "mhts")
MODES = ("off", "soft", "hard")


@dataclass
class SelectionResult:
    chosen: list[int]  # segment indices, source order
    scores: np.ndarray  # one score per segment
    rows: list[int]  # hidden-row indices fed to the decoder
    h_xs: Tensor  # recombined hidden sequence, row 0 is the global vector
    mode: str


def similarity(h_s: np.ndarray, h_seg: np.ndarray, metric: str,
               seg_population: np.ndarray | None = None) -> float:
    """Score one marker vector against the global vector; higher is closer."""
    a = np.asarray(h_s, dtype=np.float64)
    b = np.asarray(h_seg, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"similarity shape mismatch: {a.shape} vs {b.shape}")
    if metric == "cs":
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na == 0.0 or nb == 0.0:
            return 0.0
        return float(a @ b / (na * nb))
    if metric == "es":
        return float(-np.linalg.norm(a - b))
    if metric == "mhts":
        return float(-np.abs(a - b).sum())
    if metric == "mass":
        if seg_population is None or len(seg_population) < 2:
            return float(-np.linalg.norm(a - b))
        var = np.asarray(seg_population, dtype=np.float64).var(axis=0) + 1e-5
        return float(-np.sqrt(((a - b) ** 2 / var).sum()))
    raise ValueError(f"unknown similarity metric {metric!r}")


def segment_scores(states: EncoderStates, metric: str) -> np.ndarray:
    h = states.h.data
    s_vec = h[states.s_index]
    population = h[states.seg_indices]
    return np.array(
        [similarity(s_vec, h[i], metric, population) for i in states.seg_indices],
        dtype=np.float64,
    )


def select_segments(states: EncoderStates, k: int, metric: str,
                    invert: bool = False) -> tuple[list[int], np.ndarray]:
    """Indices of the k best-scoring segments, returned in source order.

    Ties break toward the lower segment index; k larger than the segment
    count selects everything.  ``invert`` flips the ranking (a deliberately
    bad selector, used for ablations).
    """
    if k < 1:
        raise ValueError(f"selection size must be >= 1, got {k}")
    scores = segment_scores(states, metric)
    effective = -scores if invert else scores
    ranked = sorted(range(len(scores)), key=lambda i: (-effective[i], i))
    chosen = sorted(ranked[: min(k, len(scores))])
    return chosen, scores


def recombine_soft(states: EncoderStates, chosen: list[int]) -> list[int]:
    """Global row, then each chosen marker followed by its content rows."""
    if not chosen:
        raise ValueError("recombine over an empty selection")
    rows = [states.s_index]
    for i in chosen:
        rows.append(states.seg_indices[i])
        lo, hi = states.segment_spans[i]
        rows.extend(range(lo, hi))
    return rows


def recombine_hard(states: EncoderStates, chosen: list[int]) -> list[int]:
    """Global row plus chosen marker rows only; no content tokens."""
    if not chosen:
        raise ValueError("recombine over an empty selection")
    return [states.s_index] + [states.seg_indices[i] for i in chosen]


def apply_selection(states: EncoderStates, mode: str, metric: str, k: int,
                    invert: bool = False) -> SelectionResult:
    if mode not in MODES:
        raise ValueError(f"unknown selection mode {mode!r}")
    if mode == "off":
        chosen = list(range(states.num_segments))
        scores = np.zeros(states.num_segments)
        rows = list(range(states.n_real))
    else:
        chosen, scores = select_segments(states, k, metric, invert=invert)
        rows = recombine_soft(states, chosen) if mode == "soft" else recombine_hard(states, chosen)
    return SelectionResult(
        chosen=chosen,
        scores=scores,
        rows=rows,
        h_xs=gather_rows(states.h, rows),
        mode=mode,
    )
