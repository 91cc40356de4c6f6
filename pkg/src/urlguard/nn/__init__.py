from .data import FeatureBatch, load_features, save_features
from .model import EmptyBatch, ModelConfig, ShapeMismatch, UrlNetPlus, class_probabilities, loss, loss_from_logits, predict
from .serialize import ChecksumMismatch, VersionMismatch, load_model, save_model
from .tokenize import CharVocab, TokenizedUrl, WordVocab, segment_words, tokenize
from .train import Divergence, TrainConfig, predict_in_chunks, train

__all__ = [
    "ChecksumMismatch",
    "CharVocab",
    "Divergence",
    "EmptyBatch",
    "FeatureBatch",
    "ModelConfig",
    "ShapeMismatch",
    "TokenizedUrl",
    "TrainConfig",
    "UrlNetPlus",
    "VersionMismatch",
    "WordVocab",
    "class_probabilities",
    "load_features",
    "load_model",
    "loss",
    "loss_from_logits",
    "predict",
    "predict_in_chunks",
    "save_features",
    "save_model",
    "segment_words",
    "tokenize",
    "train",
]
