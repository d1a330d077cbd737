"""NAVP remote segmentation service: a standalone backend speaking the
NAVP wire protocol over TCP, with a classical color-clustering model as
the default so it runs without weights or accelerators.
"""

from .server import BackendServer, BackendServerConfig, serve
from .segmenter import build_segmenter, kmeans_segmenter, register_model

__version__ = "0.1.0"

__all__ = [
    "BackendServer",
    "BackendServerConfig",
    "serve",
    "build_segmenter",
    "kmeans_segmenter",
    "register_model",
    "__version__",
]
