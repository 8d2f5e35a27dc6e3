"""NER toolkit fusing graph-convolutional global features with contextual embeddings."""

__version__ = "0.1.0"

from . import corpus, embedio, errors, fusion, gcn, metrics  # noqa: F401
