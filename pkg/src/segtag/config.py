"""Flat namespaced run configuration with file parsing and validation.

Config files are plain text, one ``key = value`` per line, '#' comments.
Command-line flags override file values.  Unknown keys are rejected.
"""

from __future__ import annotations

import json
from pathlib import Path


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, object] = {
    # vocabulary
    "vocab.mode": "word",  # word | char
    "vocab.min_freq": 2,
    # segmentation
    "seg.len": 5,
    "seg.k_embeddings": 16,
    "seg.max_source_len": 64,
    "seg.max_target_len": 16,
    # encoder / decoder dimensions (hidden size is shared)
    "enc.layers": 2,
    "enc.hidden": 128,
    "enc.heads": 4,
    "enc.ffn": 256,
    "dec.layers": 2,
    "dec.heads": 4,
    "dec.ffn": 256,
    "model.max_positions": 256,
    # segment selection
    "ssm.mode": "soft",  # off | soft | hard
    "ssm.metric": "mhts",  # es | cs | mass | mhts
    "ssm.k": 5,
    "ssm.invert": False,
    # training
    "train.lr_max": 1e-4,
    "train.beta1": 0.9,
    "train.beta2": 0.999,
    "train.eps": 1e-6,
    "train.warmup_ratio": 32.0,
    "train.warmup_proportion": 0.04,
    "train.clip_min": -1.0,
    "train.clip_max": 1.0,
    "train.dropout": 0.1,
    "train.weight_decay": 0.0,
    "train.batch_size": 8,
    "train.total_steps": 2000,
    "train.seed": 13,
    "train.log_every": 20,
    "train.eval_every": 500,
    "train.ckpt_every": 500,
    "train.keep_best": 3,
    # inference
    "infer.beam_size": 20,
    "infer.top_k": 10,
    "infer.length_norm": "mean",  # mean | off
}

_CHOICES = {
    "vocab.mode": ("word", "char"),
    "ssm.mode": ("off", "soft", "hard"),
    "ssm.metric": ("es", "cs", "mass", "mhts"),
    "infer.length_norm": ("mean", "off"),
}


def _coerce(key: str, raw: object) -> object:
    want = type(DEFAULTS[key])
    if isinstance(raw, want):
        return raw
    text = str(raw).strip()
    try:
        if want is bool:
            if text.lower() in ("true", "1", "yes", "on"):
                return True
            if text.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(text)
        if want is int:
            return int(text)
        if want is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {want.__name__}") from None


class RunConfig:
    """Validated flat key-value configuration."""

    def __init__(self, overrides: dict[str, object] | None = None):
        self._values = dict(DEFAULTS)
        if overrides:
            self.update(overrides)

    def update(self, overrides: dict[str, object]) -> None:
        for key, raw in overrides.items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key: {key!r}")
            self._values[key] = _coerce(key, raw)

    def __getitem__(self, key: str):
        if key not in self._values:
            raise ConfigError(f"unknown config key: {key!r}")
        return self._values[key]

    def get(self, key: str):
        return self[key]

    def as_dict(self) -> dict[str, object]:
        return dict(self._values)

    def validate(self) -> None:
        v = self._values
        for key, choices in _CHOICES.items():
            if v[key] not in choices:
                raise ConfigError(f"config key {key!r}: {v[key]!r} not in {choices}")
        if v["enc.hidden"] % v["enc.heads"] != 0 or v["enc.hidden"] % v["dec.heads"] != 0:
            raise ConfigError("config key 'enc.hidden': hidden size must divide evenly by heads")
        if not (0.0 <= v["train.dropout"] < 1.0):
            raise ConfigError("config key 'train.dropout': must be in [0, 1)")
        if not (0.0 < v["train.warmup_proportion"] < 1.0):
            raise ConfigError("config key 'train.warmup_proportion': must be in (0, 1)")
        if v["train.warmup_ratio"] <= 0:
            raise ConfigError("config key 'train.warmup_ratio': must be positive")
        if v["train.clip_min"] >= v["train.clip_max"]:
            raise ConfigError("config key 'train.clip_min': must be below train.clip_max")
        for key in ("seg.len", "seg.k_embeddings", "ssm.k", "train.batch_size", "train.total_steps",
                    "infer.beam_size", "infer.top_k", "enc.layers", "dec.layers"):
            if not isinstance(v[key], int) or (v[key] < 1 and key not in ("enc.layers", "dec.layers")):
                raise ConfigError(f"config key {key!r}: must be a positive integer")
            if key in ("enc.layers", "dec.layers") and v[key] < 0:
                raise ConfigError(f"config key {key!r}: must be >= 0")
        if v["infer.top_k"] > v["infer.beam_size"]:
            raise ConfigError("config key 'infer.top_k': must not exceed infer.beam_size")


def parse_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, raw = line.partition("=")
        values[key.strip()] = raw.strip()
    return values


def load_config(path=None, overrides: dict[str, object] | None = None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        cfg.update(parse_config_file(path))
    if overrides:
        cfg.update(overrides)
    cfg.validate()
    return cfg


def save_resolved(cfg: RunConfig, path, extra: dict | None = None) -> None:
    payload = {"config": cfg.as_dict()}
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")


def load_resolved(path) -> tuple[RunConfig, dict]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    cfg = RunConfig(payload["config"])
    cfg.validate()
    extra = {k: v for k, v in payload.items() if k != "config"}
    return cfg, extra
