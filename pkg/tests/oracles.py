"""Independent reference implementations used only by the test suite.

These are deliberately written as plain numpy forward passes with per-head
loops, separate from the library's graph ops, so they can serve as oracles.
"""

import numpy as np

MASK_OFFSET = -1e9


def oracle_softmax(x, axis=-1):
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def oracle_gelu(x):
    c = np.sqrt(2.0 / np.pi)
    return 0.5 * x * (1.0 + np.tanh(c * (x + 0.044715 * x**3)))


def oracle_layer_norm(x, gamma, beta, eps=1e-5):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return gamma * (x - mu) / np.sqrt(var + eps) + beta


def oracle_attention(h_q, h_kv, params, prefix, heads, add_mask=None):
    """Straightforward multi-head attention, one explicit loop per head."""
    p = lambda name: params[f"{prefix}.{name}"].data
    q = h_q @ p("wq") + p("bq")
    k = h_kv @ p("wk")
    v = h_kv @ p("wv") + p("bv")
    d = q.shape[-1]
    dk = d // heads
    pieces = []
    for i in range(heads):
        sl = slice(i * dk, (i + 1) * dk)
        scores = q[:, sl] @ k[:, sl].T / np.sqrt(dk)
        if add_mask is not None:
            scores = scores + add_mask
        pieces.append(oracle_softmax(scores) @ v[:, sl])
    return np.concatenate(pieces, axis=1) @ p("wo") + p("bo")


def oracle_encoder_layer(h, params, prefix, heads, add_mask=None):
    attn = oracle_attention(h, h, params, f"{prefix}.attn", heads, add_mask)
    h = oracle_layer_norm(h + attn, params[f"{prefix}.ln1.g"].data, params[f"{prefix}.ln1.b"].data)
    inner = oracle_gelu(h @ params[f"{prefix}.ffn.w1"].data + params[f"{prefix}.ffn.b1"].data)
    ffn = inner @ params[f"{prefix}.ffn.w2"].data + params[f"{prefix}.ffn.b2"].data
    return oracle_layer_norm(h + ffn, params[f"{prefix}.ln2.g"].data, params[f"{prefix}.ln2.b"].data)


def oracle_vanilla_encoder(si, params, layers, heads):
    """Unmasked transformer encoder without segment embeddings."""
    h = params["emb.tok"].data[si.ids] + params["emb.pos_src"].data[si.positions]
    for i in range(layers):
        h = oracle_encoder_layer(h, params, f"enc.l{i}", heads, add_mask=None)
    return h


def brute_force_lcs(a, b):
    """Longest common subsequence by enumerating subsequences of the shorter list."""
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)

    def is_subsequence(sub, seq):
        it = iter(seq)
        return all(any(x == y for y in it) for x in sub)

    best = 0
    n = len(short)
    for bits in range(1 << n):
        sub = [short[i] for i in range(n) if bits >> i & 1]
        if len(sub) > best and is_subsequence(sub, long_):
            best = len(sub)
    return best


def enumerate_sequences(model, selection, vocab_size, max_len, sep_id, length_norm=True):
    """Score every terminator-respecting sequence up to max_len exhaustively.

    Returns (ids, normalized score, cumulative logp) ranked like beam search.
    """
    from segtag.generate import log_softmax

    results = []

    def expand(prefix, logp):
        step = len(prefix)
        dist = log_softmax(model.next_logits(list(prefix), selection))
        for tok in range(vocab_size):
            ids = prefix + (tok,)
            total = logp + float(dist[tok])
            if tok == sep_id or len(ids) == max_len:
                results.append((ids, total))
            else:
                expand(ids, total)

    expand((), 0.0)
    scored = [
        (list(ids), (total / len(ids)) if length_norm else total, total)
        for ids, total in results
    ]
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored
