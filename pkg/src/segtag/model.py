"""Model assembly: configuration, parameter init, and the full forward path."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import ParamStore, Tensor, cross_entropy
from .config import RunConfig
from .decoder import decoder_forward, next_token_logits
from .encoder import EncoderStates, encode
from .selection import SelectionResult, apply_selection
from .tokenizer import PAD_ID, SegmentedInput, Vocabulary, segment_encode, tokenize_text

INIT_STD = 0.02


@dataclass
class ModelConfig:
    vocab_size: int
    hidden: int = 128
    enc_layers: int = 2
    dec_layers: int = 2
    enc_heads: int = 4
    dec_heads: int = 4
    enc_ffn: int = 256
    dec_ffn: int = 256
    seg_len: int = 5
    k_intervals: int = 16
    max_positions: int = 256
    max_source_len: int = 64
    max_target_len: int = 16
    dropout: float = 0.1
    ssm_mode: str = "soft"
    ssm_metric: str = "mhts"
    ssm_k: int = 5
    ssm_invert: bool = False

    @classmethod
    def from_run_config(cls, cfg: RunConfig, vocab_size: int) -> "ModelConfig":
        return cls(
            vocab_size=vocab_size,
            hidden=cfg["enc.hidden"],
            enc_layers=cfg["enc.layers"],
            dec_layers=cfg["dec.layers"],
            enc_heads=cfg["enc.heads"],
            dec_heads=cfg["dec.heads"],
            enc_ffn=cfg["enc.ffn"],
            dec_ffn=cfg["dec.ffn"],
            seg_len=cfg["seg.len"],
            k_intervals=cfg["seg.k_embeddings"],
            max_positions=cfg["model.max_positions"],
            max_source_len=cfg["seg.max_source_len"],
            max_target_len=cfg["seg.max_target_len"],
            dropout=cfg["train.dropout"],
            ssm_mode=cfg["ssm.mode"],
            ssm_metric=cfg["ssm.metric"],
            ssm_k=cfg["ssm.k"],
            ssm_invert=cfg["ssm.invert"],
        )


def _attn_params(store: ParamStore, prefix: str, d: int, rng) -> None:
    for name in ("wq", "wk", "wv", "wo"):
        store.add(f"{prefix}.{name}", rng.normal(0.0, INIT_STD, (d, d)))
    for name in ("bq", "bv", "bo"):
        store.add(f"{prefix}.{name}", np.zeros(d))


def _ln_params(store: ParamStore, prefix: str, d: int) -> None:
    store.add(f"{prefix}.g", np.ones(d))
    store.add(f"{prefix}.b", np.zeros(d))


def _ffn_params(store: ParamStore, prefix: str, d: int, inner: int, rng) -> None:
    store.add(f"{prefix}.w1", rng.normal(0.0, INIT_STD, (d, inner)))
    store.add(f"{prefix}.b1", np.zeros(inner))
    store.add(f"{prefix}.w2", rng.normal(0.0, INIT_STD, (inner, d)))
    store.add(f"{prefix}.b2", np.zeros(d))


def init_params(cfg: ModelConfig, seed: int, dtype=np.float32) -> ParamStore:
    rng = np.random.default_rng(seed)
    store = ParamStore(dtype=dtype)
    d = cfg.hidden
    store.add("emb.tok", rng.normal(0.0, INIT_STD, (cfg.vocab_size, d)))
    store.add("emb.pos_src", rng.normal(0.0, INIT_STD, (cfg.max_positions, d)))
    store.add("emb.seg", rng.normal(0.0, INIT_STD, (cfg.k_intervals + 1, d)))
    store.add("emb.pos_tgt", rng.normal(0.0, INIT_STD, (cfg.max_target_len + 1, d)))
    for i in range(cfg.enc_layers):
        _attn_params(store, f"enc.l{i}.attn", d, rng)
        _ln_params(store, f"enc.l{i}.ln1", d)
        _ffn_params(store, f"enc.l{i}.ffn", d, cfg.enc_ffn, rng)
        _ln_params(store, f"enc.l{i}.ln2", d)
    for i in range(cfg.dec_layers):
        _attn_params(store, f"dec.l{i}.self", d, rng)
        _ln_params(store, f"dec.l{i}.ln1", d)
        _attn_params(store, f"dec.l{i}.cross", d, rng)
        _ln_params(store, f"dec.l{i}.ln2", d)
        _ffn_params(store, f"dec.l{i}.ffn", d, cfg.dec_ffn, rng)
        _ln_params(store, f"dec.l{i}.ln3", d)
    return store


class SegSelModel:
    """Encoder, segment selector, and decoder behind one forward interface."""

    def __init__(self, cfg: ModelConfig, params: ParamStore, vocab: Vocabulary):
        self.cfg = cfg
        self.params = params
        self.vocab = vocab

    @classmethod
    def build(cls, cfg: ModelConfig, vocab: Vocabulary, seed: int, dtype=np.float32) -> "SegSelModel":
        return cls(cfg, init_params(cfg, seed, dtype=dtype), vocab)

    def segment_input(self, body: str, pad_to: int | None = None) -> SegmentedInput:
        tokens = tokenize_text(body, self.vocab.mode)
        return segment_encode(
            tokens, self.cfg.seg_len, self.vocab, self.cfg.max_source_len,
            k_intervals=self.cfg.k_intervals, pad_to=pad_to,
        )

    def encode_post(self, si: SegmentedInput, training: bool = False, rng=None,
                    collect_attention: bool = False) -> EncoderStates:
        return encode(
            si, self.params, self.cfg.enc_layers, self.cfg.enc_heads,
            self.cfg.dropout, training, rng, collect_attention,
        )

    def select(self, states: EncoderStates, mode: str | None = None,
               k: int | None = None, invert: bool | None = None) -> SelectionResult:
        return apply_selection(
            states,
            self.cfg.ssm_mode if mode is None else mode,
            self.cfg.ssm_metric,
            self.cfg.ssm_k if k is None else k,
            invert=self.cfg.ssm_invert if invert is None else invert,
        )

    def logits(self, target_ids, sel: SelectionResult, training: bool = False,
               rng=None, collect_attention: bool = False):
        return decoder_forward(
            target_ids, sel.h_xs, self.params, self.cfg.dec_layers,
            self.cfg.dec_heads, self.cfg.dropout, training, rng, collect_attention,
        )

    def next_logits(self, prefix_ids, sel: SelectionResult) -> np.ndarray:
        return next_token_logits(
            prefix_ids, sel.h_xs, self.params, self.cfg.dec_layers, self.cfg.dec_heads
        )

    def loss_terms(self, si: SegmentedInput, target_ids, training: bool = False,
                   rng=None) -> tuple[Tensor, int]:
        """Summed cross entropy over non-PAD target positions, plus the count."""
        states = self.encode_post(si, training=training, rng=rng)
        sel = self.select(states)
        logits = self.logits(target_ids, sel, training=training, rng=rng)
        return cross_entropy(logits, target_ids, ignore_id=PAD_ID)
