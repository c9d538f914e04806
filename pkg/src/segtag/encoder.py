"""Encoder with segment-scoped marker attention.

Every row embeds as token + position + interval-segment embedding, then runs
through post-norm self-attention layers.  The binary reach mask from the
tokenizer is realized additively: blocked slots get a large negative logit
offset before softmax, so marker rows see only their own segment while
ordinary rows attend everywhere.  The same mask is reused at every layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import (
    MASK_OFFSET,
    ParamStore,
    Tensor,
    add,
    constant,
    dropout,
    embedding_lookup,
    gelu,
    layer_norm,
    matmul,
    reshape,
    scale,
    softmax,
    transpose,
)
from .tokenizer import SegmentedInput


@dataclass
class EncoderStates:
    """Final hidden rows plus locators into them."""

    h: Tensor  # n x hidden
    s_index: int
    seg_indices: list[int]
    segment_spans: list[tuple[int, int]]
    n_real: int
    attention: list[np.ndarray] | None = field(default=None, repr=False)

    @property
    def num_segments(self) -> int:
        return len(self.seg_indices)


def additive_mask(binary_mask: np.ndarray, dtype) -> np.ndarray:
    """0 where attention is allowed, MASK_OFFSET where blocked."""
    return ((1 - binary_mask.astype(dtype)) * MASK_OFFSET).astype(dtype)


def attention_block(
    h_q: Tensor,
    h_kv: Tensor,
    add_mask: np.ndarray | None,
    params: ParamStore,
    prefix: str,
    heads: int,
    p_drop: float,
    training: bool,
    rng,
    collect: bool = False,
) -> tuple[Tensor, np.ndarray | None]:
    """Multi-head scaled dot-product attention with an optional additive mask.

    Returns (output rows, softmax weights pre-dropout when collected).
    """
    d = h_q.shape[-1]
    dk = d // heads
    q = add(matmul(h_q, params[f"{prefix}.wq"]), params[f"{prefix}.bq"])
    # no key bias: softmax is invariant to a uniform shift per query row,
    # so a key bias would be an exactly-dead parameter
    k = matmul(h_kv, params[f"{prefix}.wk"])
    v = add(matmul(h_kv, params[f"{prefix}.wv"]), params[f"{prefix}.bv"])
    nq, nk = q.shape[0], k.shape[0]
    q = transpose(reshape(q, (nq, heads, dk)), (1, 0, 2))
    k = transpose(reshape(k, (nk, heads, dk)), (1, 0, 2))
    v = transpose(reshape(v, (nk, heads, dk)), (1, 0, 2))

    scores = scale(matmul(q, transpose(k, (0, 2, 1))), 1.0 / math.sqrt(dk))
    if add_mask is not None:
        scores = add(scores, constant(add_mask, dtype=scores.dtype))
    weights = softmax(scores, axis=-1)
    collected = weights.data.copy() if collect else None
    weights = dropout(weights, p_drop, training, rng)
    ctx = reshape(transpose(matmul(weights, v), (1, 0, 2)), (nq, d))
    out = add(matmul(ctx, params[f"{prefix}.wo"]), params[f"{prefix}.bo"])
    return out, collected


def feed_forward(h: Tensor, params: ParamStore, prefix: str) -> Tensor:
    inner = gelu(add(matmul(h, params[f"{prefix}.w1"]), params[f"{prefix}.b1"]))
    return add(matmul(inner, params[f"{prefix}.w2"]), params[f"{prefix}.b2"])


def embed(si: SegmentedInput, params: ParamStore) -> Tensor:
    """Sum of token, position, and interval-segment embeddings per row."""
    max_positions = params["emb.pos_src"].shape[0]
    top = int(si.positions.max())
    if top >= max_positions:
        raise ValueError(f"position {top} exceeds max_positions {max_positions}")
    tok = embedding_lookup(params["emb.tok"], si.ids)
    pos = embedding_lookup(params["emb.pos_src"], si.positions)
    seg = embedding_lookup(params["emb.seg"], si.segment_ids)
    return add(add(tok, pos), seg)


def sgt_layer(
    h: Tensor,
    add_mask: np.ndarray,
    params: ParamStore,
    prefix: str,
    heads: int,
    p_drop: float,
    training: bool,
    rng,
    collect: bool = False,
) -> tuple[Tensor, np.ndarray | None]:
    """One masked self-attention layer: attention, residual+norm, FFN, residual+norm."""
    attn, weights = attention_block(
        h, h, add_mask, params, f"{prefix}.attn", heads, p_drop, training, rng, collect
    )
    h = layer_norm(add(h, dropout(attn, p_drop, training, rng)),
                   params[f"{prefix}.ln1.g"], params[f"{prefix}.ln1.b"])
    ffn = feed_forward(h, params, f"{prefix}.ffn")
    h = layer_norm(add(h, dropout(ffn, p_drop, training, rng)),
                   params[f"{prefix}.ln2.g"], params[f"{prefix}.ln2.b"])
    return h, weights


def encode(
    si: SegmentedInput,
    params: ParamStore,
    layers: int,
    heads: int,
    p_drop: float,
    training: bool = False,
    rng=None,
    collect_attention: bool = False,
) -> EncoderStates:
    h = embed(si, params)
    add_mask = additive_mask(si.mask, h.dtype)
    collected: list[np.ndarray] = []
    for i in range(layers):
        h, weights = sgt_layer(
            h, add_mask, params, f"enc.l{i}", heads, p_drop, training, rng, collect_attention
        )
        if collect_attention:
            collected.append(weights)
    return EncoderStates(
        h=h,
        s_index=0,
        seg_indices=list(si.seg_marker_positions),
        segment_spans=list(si.segment_spans),
        n_real=si.n_real,
        attention=collected if collect_attention else None,
    )
