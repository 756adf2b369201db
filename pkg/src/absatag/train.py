"""Gradient-based training for the CRF and the feature emitter.

The schedule ramps the learning rate linearly from zero to its peak over the
first half of all steps (configurable fraction) and decays linearly back to
zero.  Updates are adaptive-moment steps with decoupled weight decay: every
parameter shrinks by (1 - lr_t * weight_decay) each step, gradient or not.

All randomness (parameter init, epoch shuffling) flows from the config seed,
so identical configs produce bit-identical models.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from . import crf as crf_mod
from .align import AlignedSentence, collapse_with_repairs
from .emit import FeatureEmitter
from .errors import EmptySplit, NonFiniteLoss
from .labels import LabelSpace
from .metrics import token_f1
from .model_io import TaggerModel


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    weight_decay: float = 1e-2
    batch_size: int = 32
    epochs: int = 3
    warmup_fraction: float = 0.5
    seed: int = 0
    mask_in_training: bool = False
    mask_in_decoding: bool = False
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    threads: int = 1

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0.0 <= self.warmup_fraction <= 1.0:
            raise ValueError("warmup_fraction must be in [0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @classmethod
    def from_mapping(cls, mapping: dict[str, str], **overrides) -> "TrainConfig":
        """Build from key=value strings (config file), then apply overrides."""
        kwargs = {}
        casts = {f.name: f.type for f in fields(cls)}
        for key, value in mapping.items():
            if key not in casts:
                raise ValueError(f"unknown config key {key!r}")
            current = getattr(cls, key)
            if isinstance(current, bool):
                kwargs[key] = value.strip().lower() in ("1", "true", "yes", "on")
            elif isinstance(current, int):
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        kwargs.update(overrides)
        config = cls(**kwargs)
        config.validate()
        return config

    @classmethod
    def from_file(cls, path: str, **overrides) -> "TrainConfig":
        mapping: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for raw in fh:
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"config line must be key=value: {raw!r}")
                key, value = line.split("=", 1)
                mapping[key.strip()] = value.strip()
        return cls.from_mapping(mapping, **overrides)


def lr_at_step(config: TrainConfig, step: int, total_steps: int) -> float:
    """Piecewise-linear schedule: ramp to the peak, then decay to zero."""
    if not 0 <= step < total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps})")
    warmup = config.warmup_fraction * total_steps
    if step < warmup:
        return config.learning_rate * step / warmup
    return config.learning_rate * (total_steps - step) / (total_steps - warmup)


class AdamW:
    """Adaptive-moment updates with decoupled weight decay on named arrays."""

    def __init__(self, params: dict[str, np.ndarray], config: TrainConfig):
        self.params = params
        self.beta1 = config.adam_beta1
        self.beta2 = config.adam_beta2
        self.epsilon = config.adam_epsilon
        self.weight_decay = config.weight_decay
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray], lr: float) -> None:
        self.t += 1
        bias1 = 1.0 - self.beta1**self.t
        bias2 = 1.0 - self.beta2**self.t
        for key, p in self.params.items():
            g = grads.get(key)
            p *= 1.0 - lr * self.weight_decay
            if g is None:
                g = np.zeros_like(p)
            m = self.m[key]
            v = self.v[key]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            p -= lr * (m / bias1) / (np.sqrt(v / bias2) + self.epsilon)


@dataclass
class EpochRecord:
    epoch: int
    step: int  # global step count after this epoch
    train_nll: float
    val_token_f1: float


@dataclass
class TrainResult:
    model: TaggerModel  # parameters after the last step
    best_model: TaggerModel  # checkpoint of the best validation epoch
    best_epoch: int
    history: list[EpochRecord] = field(default_factory=list)


def _emissions_for(
    sentence: AlignedSentence,
    emitter: FeatureEmitter | None,
    feature_ids: list[np.ndarray] | None,
    external: dict[str, np.ndarray] | None,
) -> np.ndarray:
    if emitter is not None:
        return emitter.emit_from_ids(feature_ids)
    return external[sentence.sid]


def train(
    config: TrainConfig,
    train_sentences: list[AlignedSentence],
    val_sentences: list[AlignedSentence],
    labelspace: LabelSpace,
    emitter: FeatureEmitter | None = None,
    external: dict[str, np.ndarray] | None = None,
    vocab_ref: str | None = None,
) -> TrainResult:
    """Fit CRF parameters (and emitter weights, when given) on aligned data.

    ``emitter`` and ``external`` are mutually exclusive emission sources;
    with external logits only the CRF parameters are trained.
    """
    config.validate()
    if (emitter is None) == (external is None):
        raise ValueError("exactly one of emitter/external must be given")
    if not train_sentences:
        raise EmptySplit("training split is empty")
    if not val_sentences:
        raise EmptySplit("validation split is empty")

    rng = np.random.default_rng(config.seed)
    params = crf_mod.CrfParams.init_random(rng)
    mask_train = labelspace.mask if config.mask_in_training else None
    mask_decode = labelspace.mask if config.mask_in_decoding else None

    gold_indices = [
        labelspace.encode(list(s.subword_labels)) for s in train_sentences
    ]
    ids_train = (
        [emitter.sentence_feature_ids(s) for s in train_sentences]
        if emitter is not None
        else [None] * len(train_sentences)
    )
    ids_val = (
        [emitter.sentence_feature_ids(s) for s in val_sentences]
        if emitter is not None
        else [None] * len(val_sentences)
    )

    opt_params = {
        "transitions": params.transitions,
        "start": params.start,
        "end": params.end,
    }
    if emitter is not None:
        opt_params["weights"] = emitter.weights
    optimizer = AdamW(opt_params, config)

    n = len(train_sentences)
    steps_per_epoch = math.ceil(n / config.batch_size)
    total_steps = config.epochs * steps_per_epoch
    pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None

    def one_sentence(index: int):
        sentence = train_sentences[index]
        emissions = _emissions_for(sentence, emitter, ids_train[index], external)
        return crf_mod.nll_and_grad(
            params, [(emissions, gold_indices[index])], mask_train
        )

    def snapshot() -> TaggerModel:
        emitter_copy = None
        if emitter is not None:
            emitter_copy = FeatureEmitter(
                hash_dim=emitter.hash_dim,
                hash_seed=emitter.hash_seed,
                weights=emitter.weights.copy(),
            )
        return TaggerModel(
            params=params.copy(), emitter=emitter_copy, vocab_ref=vocab_ref
        )

    history: list[EpochRecord] = []
    best_f1 = -1.0
    best_epoch = -1
    best_model = snapshot()
    global_step = 0

    try:
        for epoch in range(config.epochs):
            order = rng.permutation(n)
            epoch_nll = 0.0
            for b in range(steps_per_epoch):
                batch = order[b * config.batch_size : (b + 1) * config.batch_size]
                lr = lr_at_step(config, global_step, total_steps)

                if pool is not None:
                    results = list(pool.map(one_sentence, batch.tolist()))
                else:
                    results = [one_sentence(i) for i in batch.tolist()]

                # Order-fixed reduction: identical bit pattern however the
                # per-sentence work was scheduled.
                nll = 0.0
                g_trans = np.zeros_like(params.transitions)
                g_start = np.zeros_like(params.start)
                g_end = np.zeros_like(params.end)
                g_weights = (
                    np.zeros_like(emitter.weights) if emitter is not None else None
                )
                for j, (sentence_nll, grads) in zip(batch.tolist(), results):
                    nll += sentence_nll
                    g_trans += grads.transitions
                    g_start += grads.start
                    g_end += grads.end
                    if emitter is not None:
                        emitter.accumulate_gradient(
                            g_weights, ids_train[j], grads.emissions[0]
                        )
                k = len(batch)
                nll /= k
                if not math.isfinite(nll):
                    raise NonFiniteLoss(
                        f"non-finite loss at epoch {epoch} step {global_step} "
                        f"(batch sids: {[train_sentences[i].sid for i in batch]})"
                    )
                grad_update = {
                    "transitions": g_trans / k,
                    "start": g_start / k,
                    "end": g_end / k,
                }
                if emitter is not None:
                    grad_update["weights"] = g_weights / k
                optimizer.step(grad_update, lr)
                epoch_nll += nll
                global_step += 1

            val_pred: list[list] = []
            val_gold: list[list] = []
            for i, sentence in enumerate(val_sentences):
                emissions = _emissions_for(sentence, emitter, ids_val[i], external)
                path, _ = crf_mod.viterbi(params, emissions, mask_decode)
                tags = labelspace.decode(path)
                word_labels, _ = collapse_with_repairs(sentence, tags)
                val_pred.append(word_labels)
                val_gold.append(list(sentence.word_labels))
            _, micro = token_f1(val_gold, val_pred)

            history.append(
                EpochRecord(
                    epoch=epoch,
                    step=global_step,
                    train_nll=epoch_nll / steps_per_epoch,
                    val_token_f1=micro.f1,
                )
            )
            if micro.f1 > best_f1:
                best_f1 = micro.f1
                best_epoch = epoch
                best_model = snapshot()
    finally:
        if pool is not None:
            pool.shutdown()

    return TrainResult(
        model=snapshot(),
        best_model=best_model,
        best_epoch=best_epoch,
        history=history,
    )


def history_csv_lines(history: list[EpochRecord]) -> list[str]:
    lines = ["epoch,step,train_nll,val_f1"]
    for record in history:
        lines.append(
            f"{record.epoch},{record.step},{record.train_nll!r},{record.val_token_f1!r}"
        )
    return lines
