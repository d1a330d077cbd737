"""Segmentation models for the backend service.

The default is a classical color-clustering segmenter (k-means in RGB),
so the service runs anywhere without model weights or accelerators. The
registry accepts custom callables for hosting a real model; whatever the
model emits is mapped onto the configured class count.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

Segmenter = Callable[[np.ndarray], np.ndarray]  # (h, w, 3) uint8 -> (h, w) int labels


def kmeans_segmenter(num_classes: int, iterations: int = 8, sample_cap: int = 4096,
                     seed: int = 0) -> Segmenter:
    """Deterministic Lloyd k-means over RGB values.

    Centers start at luminance-ranked quantiles of a strided pixel sample,
    which keeps the result reproducible without an RNG dependency.
    """
    if num_classes < 2:
        raise ValueError("need at least 2 classes")

    def segment(pixels: np.ndarray) -> np.ndarray:
        flat = pixels.reshape(-1, 3).astype(np.float32)
        stride = max(1, len(flat) // sample_cap)
        sample = flat[:: stride]
        luma = sample @ np.array([0.299, 0.587, 0.114], dtype=np.float32)
        order = np.argsort(luma, kind="stable")
        quantiles = (np.arange(num_classes) + 0.5) / num_classes
        centers = sample[order[(quantiles * (len(sample) - 1)).astype(int)]].copy()

        for _ in range(iterations):
            d = ((sample[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            assign = d.argmin(axis=1)
            for c in range(num_classes):
                members = sample[assign == c]
                if len(members):
                    centers[c] = members.mean(axis=0)

        d = ((flat[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        return d.argmin(axis=1).reshape(pixels.shape[:2])

    return segment


_REGISTRY: dict[str, Callable[[int], Segmenter]] = {
    "kmeans": lambda k: kmeans_segmenter(k),
}


def register_model(name: str, factory: Callable[[int], Segmenter]) -> None:
    _REGISTRY[name] = factory


def build_segmenter(model: str, num_classes: int) -> Segmenter:
    try:
        factory = _REGISTRY[model]
    except KeyError:
        raise ValueError(
            f"unknown model {model!r}; available: {sorted(_REGISTRY)}"
        ) from None
    return factory(num_classes)


def clamp_classes(labels: np.ndarray, num_classes: int) -> np.ndarray:
    """Fold arbitrary model class ids onto the service's class space."""
    return (labels % num_classes).astype(np.uint8)
