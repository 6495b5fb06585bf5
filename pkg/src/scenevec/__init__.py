"""Context-aware static and temporal embeddings of labeled video objects.

The pipeline: ingest frame annotations into a Corpus, extract weighted
training pairs from spatial co-occurrence (context), fit embedding tables
against one of the distance-target objectives (embed), then inspect the
result (evaluate).  synth builds the scripted scenarios used for testing,
and the `scenevec` console script wires everything together.
"""

from .corpus import Corpus, CorpusError, ObjectInstance, ingest, load_corpus, save_corpus
from .context import (
    ContextConfig,
    TrainingPair,
    generate_pairs,
    negative_samples,
    pairs_neighbor_timestamps,
    pairs_same_frame,
    pairs_surrounding_frames,
    read_pairs,
    write_pairs,
)
from .scoring import (
    DiffusionKernel,
    DiscrepancyScorer,
    FrequencyNormalizer,
    score_gaussian,
    score_minmax,
    score_threshold,
    spatial_distance,
    temporal_weight,
)
from .embed import (
    StaticEmbedding,
    TemporalEmbedding,
    TrainConfig,
    TrainingError,
    cosine_distance,
    diffused_vector,
    gradient,
    load_embedding,
    loss,
    save_embedding,
    train,
)
from .evaluate import (
    NeighborList,
    base_neighbors,
    classify_contexts,
    clustering_consistency,
    hit_at_k,
    kmeans_silhouette,
    narrative_prompt,
    nearest_neighbors,
    pca_2d,
    rand_index,
    similarity_series,
    spearman,
    top_pairs,
)

__version__ = "0.1.0"

__all__ = [
    "Corpus", "CorpusError", "ObjectInstance", "ingest", "load_corpus",
    "save_corpus",
    "ContextConfig", "TrainingPair", "generate_pairs", "negative_samples",
    "pairs_same_frame", "pairs_surrounding_frames", "pairs_neighbor_timestamps",
    "read_pairs", "write_pairs",
    "DiffusionKernel", "DiscrepancyScorer", "FrequencyNormalizer",
    "score_threshold", "score_minmax", "score_gaussian", "spatial_distance",
    "temporal_weight",
    "StaticEmbedding", "TemporalEmbedding", "TrainConfig", "TrainingError",
    "cosine_distance", "diffused_vector", "gradient", "loss", "train",
    "save_embedding", "load_embedding",
    "NeighborList", "base_neighbors", "classify_contexts",
    "clustering_consistency", "hit_at_k", "kmeans_silhouette",
    "narrative_prompt", "nearest_neighbors", "pca_2d", "rand_index",
    "similarity_series", "spearman", "top_pairs",
    "__version__",
]
