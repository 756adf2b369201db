"""Aspect and opinion term extraction with a subword-aware linear-chain CRF."""

from .align import AlignedSentence, WordpieceSegmenter, collapse, project
from .corpus import Corpus, read_conll, split_train_validation, write_conll
from .crf import CrfParams, log_partition, nll_and_grad, sequence_score, viterbi
from .estimators import CrfTagger, FrequencyBaseline
from .labels import LabelSpace, Tag, default_constraint_mask, parse_tag

__version__ = "0.1.0"

__all__ = [
    "AlignedSentence",
    "Corpus",
    "CrfParams",
    "CrfTagger",
    "FrequencyBaseline",
    "LabelSpace",
    "Tag",
    "WordpieceSegmenter",
    "collapse",
    "default_constraint_mask",
    "log_partition",
    "nll_and_grad",
    "parse_tag",
    "project",
    "read_conll",
    "sequence_score",
    "split_train_validation",
    "viterbi",
    "write_conll",
    "__version__",
]
