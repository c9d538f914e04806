"""Vocabulary, fixed-length segmentation, and target-sequence codecs.

Source layout after insertion, with segment length L:

    [S] [SEG] t1 .. tL [SEG] tL+1 .. t2L ... (ragged tail allowed)

``[S]`` aggregates the whole post, each ``[SEG]`` aggregates the segment it
precedes.  Interval ids distinguish segments: 0 for [S] and padding, then
1..K cycling per segment.  Targets are rendered as

    tokens(tag1) # tokens(tag2) # ... tokens(tagN) [SEP]

with the '#' separator strictly between tags and the terminator last.
"""

from __future__ import annotations

import math
import struct
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

PAD_ID = 0
UNK_ID = 1
S_ID = 2
SEG_ID = 3
SEP_ID = 4
HSEP_ID = 5

RESERVED_TOKENS = ("[PAD]", "[UNK]", "[S]", "[SEG]", "[SEP]", "#")

DATASET_MAGIC = b"SEGTAGDS"
DATASET_VERSION = 1


def tokenize_text(text: str, mode: str) -> list[str]:
    """NFC-normalize and split; word mode is whitespace+lowercase, char mode
    yields individual non-space characters."""
    text = unicodedata.normalize("NFC", text)
    if mode == "word":
        return text.lower().split()
    if mode == "char":
        return [c for c in text.lower() if not c.isspace()]
    raise ValueError(f"unknown tokenize mode {mode!r}")


@dataclass
class Vocabulary:
    token_to_id: dict[str, int]
    id_to_token: list[str]
    mode: str

    def __len__(self) -> int:
        return len(self.id_to_token)

    def encode_tokens(self, tokens: Iterable[str]) -> list[int]:
        get = self.token_to_id.get
        return [get(t, UNK_ID) for t in tokens]

    def encode_text(self, text: str) -> list[int]:
        return self.encode_tokens(tokenize_text(text, self.mode))

    def token(self, token_id: int) -> str:
        return self.id_to_token[token_id]

    def join(self, tokens: list[str]) -> str:
        return (" " if self.mode == "word" else "").join(tokens)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for i, tok in enumerate(self.id_to_token):
                fh.write(f"{tok}\t{i}\n")

    @classmethod
    def load(cls, path, mode: str) -> "Vocabulary":
        id_to_token: list[str] = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                tok, _, idx = line.rpartition("\t")
                if int(idx) != len(id_to_token):
                    raise ValueError(f"vocabulary ids out of order in {path}")
                id_to_token.append(tok)
        if tuple(id_to_token[:6]) != RESERVED_TOKENS:
            raise ValueError(f"vocabulary {path} missing reserved token block")
        return cls({t: i for i, t in enumerate(id_to_token)}, id_to_token, mode)


def build_vocab(texts: Iterable[str], min_freq: int = 2, mode: str = "word") -> Vocabulary:
    """Frequency-filtered vocabulary; ordering is frequency desc then lexicographic."""
    counts: Counter[str] = Counter()
    n_texts = 0
    for text in texts:
        n_texts += 1
        counts.update(tokenize_text(text, mode))
    if n_texts == 0:
        raise ValueError("build_vocab over an empty corpus")
    kept = [
        tok
        for tok, c in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        if c >= min_freq and tok not in RESERVED_TOKENS
    ]
    id_to_token = list(RESERVED_TOKENS) + kept
    return Vocabulary({t: i for i, t in enumerate(id_to_token)}, id_to_token, mode)


@dataclass
class SegmentedInput:
    """One encoded post: token ids plus the locators attention needs."""

    ids: np.ndarray  # int32, full inserted length incl. padding
    positions: np.ndarray
    segment_ids: np.ndarray
    seg_marker_positions: list[int]
    segment_spans: list[tuple[int, int]]  # content rows, end exclusive
    n_real: int  # inserted length before padding
    mask: np.ndarray = field(default=None, repr=False)  # n x n, uint8

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def num_segments(self) -> int:
        return len(self.seg_marker_positions)


def segment_encode(
    tokens: list[str],
    seg_len: int,
    vocab: Vocabulary,
    max_len: int,
    k_intervals: int = 16,
    pad_to: int | None = None,
) -> SegmentedInput:
    """Insert [S]/[SEG] markers around fixed-length blocks of content tokens.

    Content is truncated to ``max_len`` before insertion; every segment except
    possibly the last holds exactly ``seg_len`` tokens.
    """
    if seg_len < 1:
        raise ValueError(f"segment length must be >= 1, got {seg_len}")
    if not tokens:
        raise ValueError("segment_encode on an empty token list")
    content = vocab.encode_tokens(tokens[:max_len])

    ids = [S_ID]
    segment_ids = [0]
    seg_marker_positions: list[int] = []
    segment_spans: list[tuple[int, int]] = []
    for seg_idx in range(math.ceil(len(content) / seg_len)):
        block = content[seg_idx * seg_len : (seg_idx + 1) * seg_len]
        interval = (seg_idx % k_intervals) + 1
        seg_marker_positions.append(len(ids))
        ids.append(SEG_ID)
        segment_ids.append(interval)
        segment_spans.append((len(ids), len(ids) + len(block)))
        ids.extend(block)
        segment_ids.extend([interval] * len(block))

    n_real = len(ids)
    if pad_to is not None:
        if pad_to < n_real:
            raise ValueError(f"pad_to {pad_to} shorter than sequence length {n_real}")
        ids.extend([PAD_ID] * (pad_to - n_real))
        segment_ids.extend([0] * (pad_to - n_real))

    si = SegmentedInput(
        ids=np.asarray(ids, dtype=np.int32),
        positions=np.arange(len(ids), dtype=np.int32),
        segment_ids=np.asarray(segment_ids, dtype=np.int32),
        seg_marker_positions=seg_marker_positions,
        segment_spans=segment_spans,
        n_real=n_real,
    )
    si.mask = build_segment_mask(si)
    return si


def build_segment_mask(si: SegmentedInput) -> np.ndarray:
    """Per-row attention reach as an n x n binary matrix.

    A [SEG] marker row sees exactly itself plus its own segment's content
    tokens; every other row sees all non-padding positions.  Padding columns
    are 0 in all rows.
    """
    n = si.n
    mask = np.zeros((n, n), dtype=np.uint8)
    mask[:, : si.n_real] = 1
    for marker, (lo, hi) in zip(si.seg_marker_positions, si.segment_spans):
        row = np.zeros(n, dtype=np.uint8)
        row[marker] = 1
        row[lo:hi] = 1
        mask[marker] = row
    return mask


def encode_target(hashtags: list[str], vocab: Vocabulary, max_len: int) -> np.ndarray:
    """Render a tag list as one id sequence with '#' separators and a final [SEP]."""
    if not hashtags:
        raise ValueError("encode_target on an empty hashtag list")
    ids: list[int] = []
    for i, tag in enumerate(hashtags):
        if i > 0:
            ids.append(HSEP_ID)
        ids.extend(vocab.encode_text(tag))
    ids = ids[: max_len - 1]
    ids.append(SEP_ID)
    return np.asarray(ids, dtype=np.int32)


def decode_output(ids: Iterable[int], vocab: Vocabulary) -> list[str]:
    """Inverse of encode_target: cut at the first [SEP], split at '#'."""
    kept: list[int] = []
    for t in ids:
        if t == SEP_ID:
            break
        kept.append(int(t))
    tags: list[str] = []
    fragment: list[str] = []
    for t in kept + [HSEP_ID]:
        if t == HSEP_ID:
            text = vocab.join(fragment).strip()
            if text:
                tags.append(text)
            fragment = []
        else:
            fragment.append(vocab.token(t))
    return tags


# ---------------------------------------------------------------------------
# encoded-dataset cache
# ---------------------------------------------------------------------------


def write_encoded_dataset(path, pairs: list[tuple[np.ndarray, np.ndarray]]) -> None:
    """Cache (source ids, target ids) pairs as length-prefixed binary arrays."""
    chunks = [DATASET_MAGIC, struct.pack("<IQ", DATASET_VERSION, len(pairs))]
    for src, tgt in pairs:
        src = np.asarray(src, dtype=np.int32)
        tgt = np.asarray(tgt, dtype=np.int32)
        chunks.append(struct.pack("<I", len(src)))
        chunks.append(src.tobytes())
        chunks.append(struct.pack("<I", len(tgt)))
        chunks.append(tgt.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def read_encoded_dataset(path) -> list[tuple[np.ndarray, np.ndarray]]:
    blob = Path(path).read_bytes()
    if blob[:8] != DATASET_MAGIC:
        raise ValueError(f"{path} is not an encoded dataset cache")
    version, count = struct.unpack_from("<IQ", blob, 8)
    if version != DATASET_VERSION:
        raise ValueError(f"unsupported dataset cache version {version}")
    pos = 8 + struct.calcsize("<IQ")
    pairs: list[tuple[np.ndarray, np.ndarray]] = []
    try:
        for _ in range(count):
            out = []
            for _ in range(2):
                (m,) = struct.unpack_from("<I", blob, pos)
                pos += 4
                out.append(np.frombuffer(blob[pos : pos + 4 * m], dtype=np.int32).copy())
                if len(out[-1]) != m:
                    raise ValueError("truncated record")
                pos += 4 * m
            pairs.append((out[0], out[1]))
    except (struct.error, ValueError) as exc:
        raise ValueError(f"corrupt dataset cache {path}: {exc}") from exc
    return pairs
