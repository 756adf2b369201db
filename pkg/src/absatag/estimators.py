"""Scikit-learn style estimators wrapping the functional core.

X is a list of sentences, each a list of word strings; y is the parallel
list of BIO label-string lists.  Both estimators follow the usual
fit/predict contract and work with ``sklearn.base.clone`` and grid-search
parameter handling.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .align import (
    DEFAULT_SUBWORD_CAP,
    AlignedSentence,
    Segmenter,
    collapse_with_repairs,
    segment_sentence,
    whole_word_segmenter,
)
from .corpus import Corpus, Sentence, split_train_validation
from .crf import viterbi
from .emit import DEFAULT_HASH_DIM, DEFAULT_HASH_SEED, FeatureEmitter
from .errors import LengthMismatch
from .labels import LabelSpace, Tag, parse_tag
from .metrics import FrequencyTable, baseline_fit, baseline_predict, token_f1
from .train import TrainConfig, train
from . import align as align_mod


def _validate_sentences(X) -> list[list[str]]:
    if not isinstance(X, (list, tuple)) or not X:
        raise ValueError("X must be a non-empty list of word-string lists")
    out = []
    for i, sentence in enumerate(X):
        words = list(sentence)
        if not words or not all(isinstance(w, str) and w for w in words):
            raise ValueError(f"sentence {i} must be a non-empty list of words")
        out.append(words)
    return out


def _validate_labels(X: list[list[str]], y) -> list[list[Tag]]:
    if y is None or len(y) != len(X):
        raise LengthMismatch(f"{len(X)} sentences but {0 if y is None else len(y)} label lists")
    out = []
    for i, (words, labels) in enumerate(zip(X, y)):
        tags = [label if isinstance(label, Tag) else parse_tag(label) for label in labels]
        if len(tags) != len(words):
            raise LengthMismatch(
                f"sentence {i}: {len(words)} words but {len(tags)} labels"
            )
        out.append(tags)
    return out


class CrfTagger(BaseEstimator):
    """Subword-aware CRF sequence tagger with a hashed-feature emission model.

    Parameters mirror TrainConfig; ``segmenter`` is any word -> subwords
    callable (defaults to whole words, i.e. no subword splitting).
    """

    def __init__(
        self,
        learning_rate: float = 1e-4,
        weight_decay: float = 1e-2,
        batch_size: int = 32,
        epochs: int = 3,
        warmup_fraction: float = 0.5,
        seed: int = 0,
        mask_in_training: bool = False,
        mask_in_decoding: bool = False,
        hash_dim: int = DEFAULT_HASH_DIM,
        hash_seed: int = DEFAULT_HASH_SEED,
        segmenter: Segmenter | None = None,
        validation_fraction: float = 0.1,
        max_subwords: int = DEFAULT_SUBWORD_CAP,
        use_best_epoch: bool = True,
        threads: int = 1,
    ):
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.epochs = epochs
        self.warmup_fraction = warmup_fraction
        self.seed = seed
        self.mask_in_training = mask_in_training
        self.mask_in_decoding = mask_in_decoding
        self.hash_dim = hash_dim
        self.hash_seed = hash_seed
        self.segmenter = segmenter
        self.validation_fraction = validation_fraction
        self.max_subwords = max_subwords
        self.use_best_epoch = use_best_epoch
        self.threads = threads

    def _config(self) -> TrainConfig:
        config = TrainConfig(
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            batch_size=self.batch_size,
            epochs=self.epochs,
            warmup_fraction=self.warmup_fraction,
            seed=self.seed,
            mask_in_training=self.mask_in_training,
            mask_in_decoding=self.mask_in_decoding,
            threads=self.threads,
        )
        config.validate()
        return config

    def _segmenter(self) -> Segmenter:
        return self.segmenter if self.segmenter is not None else whole_word_segmenter

    def fit(self, X, y, validation=None):
        """Fit on sentences X with BIO labels y.

        ``validation`` may be a (X_val, y_val) pair; otherwise a seeded
        validation_fraction of the training sentences is held out for the
        per-epoch metric and best-epoch selection.
        """
        sentences = _validate_sentences(X)
        labels = _validate_labels(sentences, y)
        segmenter = self._segmenter()
        self.labelspace_ = LabelSpace()

        if validation is not None:
            X_val, y_val = validation
            val_sentences = _validate_sentences(X_val)
            val_labels = _validate_labels(val_sentences, y_val)
            train_aligned = self._align_all(sentences, labels, segmenter, "train")
            val_aligned = self._align_all(val_sentences, val_labels, segmenter, "val")
        else:
            corpus = Corpus(
                sentences=[
                    Sentence(sid=f"train-{i}", words=tuple(w), labels=tuple(l))
                    for i, (w, l) in enumerate(zip(sentences, labels))
                ]
            )
            n_val = max(1, round(self.validation_fraction * len(corpus)))
            corpus = split_train_validation(
                corpus, n_train=len(corpus) - n_val, seed=self.seed
            )
            train_aligned = [
                self._align(s.words, s.labels, segmenter, s.sid)
                for s in corpus.split("train")
            ]
            val_aligned = [
                self._align(s.words, s.labels, segmenter, s.sid)
                for s in corpus.split("validation")
            ]

        emitter = FeatureEmitter(hash_dim=self.hash_dim, hash_seed=self.hash_seed)
        result = train(
            self._config(),
            train_aligned,
            val_aligned,
            self.labelspace_,
            emitter=emitter,
        )
        self.model_ = result.best_model if self.use_best_epoch else result.model
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        return self

    def _align(self, words, labels, segmenter, sid) -> AlignedSentence:
        return align_mod.project(
            list(words), list(labels), segmenter, max_subwords=self.max_subwords,
            sid=str(sid),
        )

    def _align_all(self, sentences, labels, segmenter, prefix) -> list[AlignedSentence]:
        return [
            self._align(w, l, segmenter, f"{prefix}-{i}")
            for i, (w, l) in enumerate(zip(sentences, labels))
        ]

    def _check_fitted(self) -> None:
        if not hasattr(self, "model_"):
            raise NotFittedError("CrfTagger must be fitted before prediction")

    def predict(self, X) -> list[list[str]]:
        """Word-level BIO label strings for each sentence."""
        self._check_fitted()
        sentences = _validate_sentences(X)
        segmenter = self._segmenter()
        mask = self.labelspace_.mask if self.mask_in_decoding else None
        out = []
        for i, words in enumerate(sentences):
            aligned = segment_sentence(
                words, segmenter, max_subwords=self.max_subwords, sid=str(i)
            )
            emissions = self.model_.emitter.emit(aligned)
            path, _ = viterbi(self.model_.params, emissions, mask)
            tags = self.labelspace_.decode(path)
            word_labels, _ = collapse_with_repairs(aligned, tags)
            out.append([t.value for t in word_labels])
        return out

    def score(self, X, y) -> float:
        """Token-level micro F1 of predictions against y."""
        sentences = _validate_sentences(X)
        gold = _validate_labels(sentences, y)
        pred = [[parse_tag(t) for t in row] for row in self.predict(sentences)]
        _, micro = token_f1(gold, pred)
        return micro.f1


class FrequencyBaseline(BaseEstimator):
    """Most-frequent-label-per-token classifier with a majority fallback."""

    def __init__(self):
        pass

    def fit(self, X, y):
        sentences = _validate_sentences(X)
        labels = _validate_labels(sentences, y)
        self.table_: FrequencyTable = baseline_fit(
            [(tuple(w), tuple(l)) for w, l in zip(sentences, labels)]
        )
        return self

    def predict(self, X) -> list[list[str]]:
        if not hasattr(self, "table_"):
            raise NotFittedError("FrequencyBaseline must be fitted before prediction")
        sentences = _validate_sentences(X)
        return [
            [t.value for t in baseline_predict(self.table_, words)]
            for words in sentences
        ]

    def score(self, X, y) -> float:
        sentences = _validate_sentences(X)
        gold = _validate_labels(sentences, y)
        pred = [[parse_tag(t) for t in row] for row in self.predict(sentences)]
        _, micro = token_f1(gold, pred)
        return micro.f1
