"""Dynamic fusion of zero-shot and few-shot embedding classifiers."""

from ._core import (
    DEFAULT_TEMPERATURE,
    ClassifierWeights,
    Embedding,
    Error,
    FormatError,
    FusedClassifierPair,
    FusionConfig,
    InvariantError,
    base_to_novel_eval,
    competition_score,
    contour_grid,
    cosine_similarity,
    fuse_weights,
    generate_synthetic,
    harmonic_mean,
    id_score,
    logits,
    monte_carlo_hmean,
    posterior,
    proposition_hmean,
    read_classifier,
    read_embeddings,
    softmax,
    write_classifier,
    write_embeddings,
    write_embeddings_jsonl,
)

__all__ = [
    "DEFAULT_TEMPERATURE",
    "ClassifierWeights",
    "Embedding",
    "Error",
    "FormatError",
    "FusedClassifierPair",
    "FusionConfig",
    "InvariantError",
    "base_to_novel_eval",
    "competition_score",
    "contour_grid",
    "cosine_similarity",
    "fuse_weights",
    "generate_synthetic",
    "harmonic_mean",
    "id_score",
    "logits",
    "monte_carlo_hmean",
    "posterior",
    "proposition_hmean",
    "read_classifier",
    "read_embeddings",
    "softmax",
    "write_classifier",
    "write_embeddings",
    "write_embeddings_jsonl",
]
