"""fairlens: fairness audits for multilingual multimodal embeddings."""

__version__ = "0.1.0"

from .errors import FairlensError
from .vectors import Vector, argmax_similarity, cosine_similarity, euclidean_distance

__all__ = [
    "__version__",
    "FairlensError",
    "Vector",
    "cosine_similarity",
    "euclidean_distance",
    "argmax_similarity",
]
