"""Teacher-forced training: warmup/decay schedule, Adam with elementwise
gradient clipping, metrics logging, and bit-exact checkpoint round trips.

Batch membership and dropout noise are derived from (seed, step) alone, so
resuming from a checkpoint replays the interrupted run exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ckptio
from .autodiff import ParamStore, add, backward, scale
from .config import RunConfig
from .model import SegSelModel
from .tokenizer import PAD_ID, SegmentedInput


@dataclass
class TrainSettings:
    lr_max: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-6
    warmup_ratio: float = 32.0
    warmup_proportion: float = 0.04
    clip_min: float = -1.0
    clip_max: float = 1.0
    weight_decay: float = 0.0
    batch_size: int = 8
    total_steps: int = 2000
    seed: int = 13

    @classmethod
    def from_run_config(cls, cfg: RunConfig) -> "TrainSettings":
        return cls(
            lr_max=cfg["train.lr_max"],
            beta1=cfg["train.beta1"],
            beta2=cfg["train.beta2"],
            eps=cfg["train.eps"],
            warmup_ratio=cfg["train.warmup_ratio"],
            warmup_proportion=cfg["train.warmup_proportion"],
            clip_min=cfg["train.clip_min"],
            clip_max=cfg["train.clip_max"],
            weight_decay=cfg["train.weight_decay"],
            batch_size=cfg["train.batch_size"],
            total_steps=cfg["train.total_steps"],
            seed=cfg["train.seed"],
        )


def lr_schedule(step: int, ts: TrainSettings) -> float:
    """Linear warmup from lr_max/ratio up to lr_max, then linear decay back."""
    floor = ts.lr_max / ts.warmup_ratio
    peak_at = ts.warmup_proportion * ts.total_steps
    if step <= peak_at:
        return floor + (ts.lr_max - floor) * (step / peak_at)
    return ts.lr_max - (ts.lr_max - floor) * ((step - peak_at) / (ts.total_steps - peak_at))


def _decayable(name: str) -> bool:
    # biases and layer-norm parameters are exempt from weight decay
    leaf = name.rsplit(".", 1)[-1]
    return not (leaf.startswith("b") or ".ln" in name)


class AdamState:
    """First/second moment accumulators, one pair per parameter."""

    def __init__(self, params: ParamStore):
        self.m = {name: np.zeros_like(t.data) for name, t in params.items()}
        self.v = {name: np.zeros_like(t.data) for name, t in params.items()}
        self.t = 0


def adam_update(params: ParamStore, opt: AdamState, lr: float, ts: TrainSettings) -> None:
    """One optimizer step; raw gradients are clipped elementwise first."""
    opt.t += 1
    bc1 = 1.0 - ts.beta1**opt.t
    bc2 = 1.0 - ts.beta2**opt.t
    for name, tensor in params.items():
        if tensor.grad is None:
            continue
        g = np.clip(tensor.grad, ts.clip_min, ts.clip_max)
        if ts.weight_decay > 0.0 and _decayable(name):
            g = g + ts.weight_decay * tensor.data
        m = opt.m[name]
        v = opt.v[name]
        m *= ts.beta1
        m += (1.0 - ts.beta1) * g
        v *= ts.beta2
        v += (1.0 - ts.beta2) * g * g
        tensor.data -= (lr * (m / bc1) / (np.sqrt(v / bc2) + ts.eps)).astype(tensor.data.dtype)


def pad_targets(targets: list[np.ndarray]) -> list[np.ndarray]:
    width = max(len(t) for t in targets)
    return [
        np.concatenate([t, np.full(width - len(t), PAD_ID, dtype=t.dtype)]) for t in targets
    ]


def train_step(
    model: SegSelModel,
    batch: list[tuple[SegmentedInput, np.ndarray]],
    opt: AdamState,
    ts: TrainSettings,
    step: int,
) -> float:
    """Forward, mean token cross entropy over non-PAD positions, clipped Adam step."""
    rng = np.random.default_rng([ts.seed, 101, step])
    model.params.zero_grad()
    padded = pad_targets([tgt for _, tgt in batch])
    total = None
    count = 0
    for (si, _), tgt in zip(batch, padded):
        term, c = model.loss_terms(si, tgt, training=True, rng=rng)
        total = term if total is None else add(total, term)
        count += c
    loss = scale(total, 1.0 / max(count, 1))
    loss_value = loss.item()
    if not np.isfinite(loss_value):
        raise RuntimeError(
            f"non-finite loss {loss_value} at step {step} "
            f"(lr={lr_schedule(step, ts):.3e}, batch={len(batch)})"
        )
    backward(loss)
    adam_update(model.params, opt, lr_schedule(step, ts), ts)
    return loss_value


def batch_indices(n: int, ts: TrainSettings, step: int) -> np.ndarray:
    rng = np.random.default_rng([ts.seed, 7, step])
    size = min(ts.batch_size, n)
    return rng.choice(n, size=size, replace=n < ts.batch_size)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(params: ParamStore, opt: AdamState, step: int, path) -> None:
    arrays: dict[str, np.ndarray] = {}
    for name, tensor in params.items():
        arrays[f"param/{name}"] = tensor.data
    for name in params.names():
        arrays[f"adam_m/{name}"] = opt.m[name]
        arrays[f"adam_v/{name}"] = opt.v[name]
    ckptio.save_arrays(path, arrays, step=step, precision=params.dtype.itemsize)


def load_checkpoint(path, params: ParamStore, opt: AdamState | None = None) -> int:
    """Restore parameter (and optimizer) values in place; returns the step count."""
    arrays, step, precision = ckptio.load_arrays(path)
    if precision != params.dtype.itemsize:
        raise ValueError(
            f"checkpoint precision {precision} does not match model precision {params.dtype.itemsize}"
        )
    for name, tensor in params.items():
        key = f"param/{name}"
        if key not in arrays:
            raise ValueError(f"checkpoint {path} is missing parameter {name}")
        if arrays[key].shape != tensor.data.shape:
            raise ValueError(
                f"checkpoint shape mismatch for {name}: "
                f"{arrays[key].shape} vs {tensor.data.shape}"
            )
        tensor.data[...] = arrays[key]
    if opt is not None:
        for name in params.names():
            opt.m[name][...] = arrays[f"adam_m/{name}"]
            opt.v[name][...] = arrays[f"adam_v/{name}"]
        opt.t = step
    return step


# ---------------------------------------------------------------------------
# training driver
# ---------------------------------------------------------------------------


class MetricsLog:
    """Line-delimited JSON log, append-only."""

    def __init__(self, path):
        self.path = Path(path)

    def write(self, **fields) -> None:
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(fields) + "\n")

    def read(self) -> list[dict]:
        if not self.path.exists():
            return []
        return [json.loads(line) for line in self.path.read_text().splitlines() if line.strip()]


def run_training(
    model: SegSelModel,
    train_pairs: list[tuple[SegmentedInput, np.ndarray]],
    cfg: RunConfig,
    out_dir,
    dev_eval=None,
    resume: bool = False,
    stop_after: int | None = None,
    log=None,
) -> dict:
    """Step loop with periodic logging, dev evaluation, and checkpointing.

    ``dev_eval`` is an optional callable (model) -> float used to rank
    checkpoints; the best ``train.keep_best`` are kept in best.json.
    Returns a small summary dict.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ts = TrainSettings.from_run_config(cfg)
    opt = AdamState(model.params)
    metrics = MetricsLog(out_dir / "metrics.jsonl")
    latest = out_dir / "ckpt_latest.bin"
    best_path = out_dir / "best.json"

    start_step = 0
    best: list[dict] = []
    if resume:
        if not latest.exists():
            raise FileNotFoundError(f"cannot resume: {latest} does not exist")
        start_step = load_checkpoint(latest, model.params, opt)
        if best_path.exists():
            best = json.loads(best_path.read_text())

    n = len(train_pairs)
    last_loss = float("nan")
    stop_at = ts.total_steps if stop_after is None else min(ts.total_steps, stop_after)
    for step in range(start_step, stop_at):
        batch = [train_pairs[i] for i in batch_indices(n, ts, step)]
        last_loss = train_step(model, batch, opt, ts, step)
        done = step + 1
        if done % cfg["train.log_every"] == 0 or done == stop_at:
            metrics.write(step=done, loss=last_loss, lr=lr_schedule(step, ts))
            if log:
                log(f"step {done:>6}  loss {last_loss:.4f}  lr {lr_schedule(step, ts):.3e}")
        if dev_eval is not None and done % cfg["train.eval_every"] == 0:
            score = float(dev_eval(model))
            metrics.write(step=done, dev_rouge1=score)
            if log:
                log(f"step {done:>6}  dev rouge-1 {score:.2f}")
            ckpt_name = f"ckpt_step{done}.bin"
            save_checkpoint(model.params, opt, done, out_dir / ckpt_name)
            best.append({"step": done, "score": score, "file": ckpt_name})
            best.sort(key=lambda e: (-e["score"], e["step"]))
            for dropped in best[cfg["train.keep_best"] :]:
                stale = out_dir / dropped["file"]
                if stale.exists():
                    stale.unlink()
            best = best[: cfg["train.keep_best"]]
            best_path.write_text(json.dumps(best, indent=2))
        if done % cfg["train.ckpt_every"] == 0 or done == stop_at:
            save_checkpoint(model.params, opt, done, latest)

    return {"steps": stop_at, "final_loss": last_loss, "best": best}
