"""Transformer decoder over the recombined hidden sequence.

Input row 0 is the global post vector taken straight from the encoder (the
begin-of-hashtag state), not a learned token embedding; subsequent rows are
target token embeddings.  All rows get decoder position embeddings.  Output
logits share the token embedding table (transpose tying).
"""

from __future__ import annotations

import numpy as np

from .autodiff import (
    MASK_OFFSET,
    ParamStore,
    Tensor,
    add,
    concat,
    dropout,
    embedding_lookup,
    gather_rows,
    layer_norm,
    matmul,
    transpose,
)
from .encoder import attention_block, feed_forward


def causal_mask(n: int, dtype) -> np.ndarray:
    return (np.triu(np.ones((n, n), dtype=dtype), k=1) * MASK_OFFSET).astype(dtype)


def _decoder_input(prefix_ids, h_xs: Tensor, params: ParamStore) -> Tensor:
    prefix_ids = np.asarray(prefix_ids, dtype=np.int64)
    n = len(prefix_ids) + 1
    max_positions = params["emb.pos_tgt"].shape[0]
    if n > max_positions:
        raise ValueError(f"target prefix length {n} exceeds decoder positions {max_positions}")
    start = gather_rows(h_xs, [0])
    if len(prefix_ids):
        rows = concat([start, embedding_lookup(params["emb.tok"], prefix_ids)], axis=0)
    else:
        rows = start
    pos = embedding_lookup(params["emb.pos_tgt"], np.arange(n))
    return add(rows, pos)


def _decoder_stack(
    rows: Tensor,
    h_xs: Tensor,
    params: ParamStore,
    layers: int,
    heads: int,
    p_drop: float,
    training: bool,
    rng,
    collect: bool = False,
) -> tuple[Tensor, list[np.ndarray]]:
    n = rows.shape[0]
    self_mask = causal_mask(n, rows.dtype)
    cross_weights: list[np.ndarray] = []
    h = rows
    for i in range(layers):
        prefix = f"dec.l{i}"
        sa, _ = attention_block(
            h, h, self_mask, params, f"{prefix}.self", heads, p_drop, training, rng
        )
        h = layer_norm(add(h, dropout(sa, p_drop, training, rng)),
                       params[f"{prefix}.ln1.g"], params[f"{prefix}.ln1.b"])
        ca, cw = attention_block(
            h, h_xs, None, params, f"{prefix}.cross", heads, p_drop, training, rng, collect
        )
        if collect:
            cross_weights.append(cw)
        h = layer_norm(add(h, dropout(ca, p_drop, training, rng)),
                       params[f"{prefix}.ln2.g"], params[f"{prefix}.ln2.b"])
        ffn = feed_forward(h, params, f"{prefix}.ffn")
        h = layer_norm(add(h, dropout(ffn, p_drop, training, rng)),
                       params[f"{prefix}.ln3.g"], params[f"{prefix}.ln3.b"])
    return h, cross_weights


def decoder_forward(
    target_ids,
    h_xs: Tensor,
    params: ParamStore,
    layers: int,
    heads: int,
    p_drop: float,
    training: bool = False,
    rng=None,
    collect_attention: bool = False,
):
    """Teacher-forced logits: row t predicts target token t.

    Returns logits of shape |target| x vocab (plus per-layer cross-attention
    weights when collected).
    """
    target_ids = np.asarray(target_ids, dtype=np.int64)
    if len(target_ids) == 0:
        raise ValueError("decoder_forward on an empty target sequence")
    rows = _decoder_input(target_ids[:-1], h_xs, params)
    h, cross = _decoder_stack(
        rows, h_xs, params, layers, heads, p_drop, training, rng, collect_attention
    )
    logits = matmul(h, transpose(params["emb.tok"], (1, 0)))
    if collect_attention:
        return logits, cross
    return logits


def next_token_logits(
    prefix_ids,
    h_xs: Tensor,
    params: ParamStore,
    layers: int,
    heads: int,
) -> np.ndarray:
    """Distribution inputs for the token following ``prefix_ids`` (inference only)."""
    rows = _decoder_input(prefix_ids, h_xs, params)
    h, _ = _decoder_stack(rows, h_xs, params, layers, heads, 0.0, False, None)
    logits = h.data[-1] @ params["emb.tok"].data.T
    return logits
