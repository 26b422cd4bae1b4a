"""Seeded synthetic multi-camera matching instances.

Each identity gets a unit prototype vector; each camera a fixed offset;
every image is normalize(prototype + camera_offset + noise).  The scales
control how ambiguous the resulting similarities are, so desk-scale
instances can imitate the easy/hard regimes of real matching workloads.
Closed-world by construction: every probe identity appears in at least
one gallery camera.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np

from .errors import ParameterError
from .types import Sample, Split


@dataclass(frozen=True)
class SynthConfig:
    n_identities: int
    n_cameras: int
    images_per_identity_per_camera: Union[int, Tuple[int, int]] = 1
    dim: int = 64
    camera_offset_scale: float = 0.0
    noise_scale: float = 0.0
    probe_cameras: Tuple[int, ...] = (0,)
    gallery_cameras: Tuple[int, ...] = (1,)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_identities < 1 or self.n_cameras < 1 or self.dim < 1:
            raise ParameterError("n_identities, n_cameras and dim must be >= 1")
        if not self.probe_cameras or not self.gallery_cameras:
            raise ParameterError("probe and gallery camera sets must be non-empty")
        if set(self.probe_cameras) & set(self.gallery_cameras):
            raise ParameterError("probe and gallery camera sets must be disjoint")
        cams = set(self.probe_cameras) | set(self.gallery_cameras)
        if not cams <= set(range(self.n_cameras)):
            raise ParameterError("camera ids must lie in [0, n_cameras)")
        lo, hi = self._count_range()
        if lo < 1 or hi < lo:
            raise ParameterError("images_per_identity_per_camera must be >= 1")
        if not (np.isfinite(self.camera_offset_scale) and np.isfinite(self.noise_scale)):
            raise ParameterError("scales must be finite")
        if self.camera_offset_scale < 0 or self.noise_scale < 0:
            raise ParameterError("scales must be non-negative")

    def _count_range(self) -> Tuple[int, int]:
        c = self.images_per_identity_per_camera
        if isinstance(c, int):
            return c, c
        return int(c[0]), int(c[1])


def _unit_rows(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    vecs = rng.standard_normal(shape)
    return vecs / np.linalg.norm(vecs, axis=1, keepdims=True)


def generate(config: SynthConfig) -> tuple[list[Sample], np.ndarray]:
    """Build (samples, embeddings); embeddings are unit-normalized float32 rows
    bound to sample order via ``embedding_index``.  Bit-identical per seed.

    Offset and noise vectors are unit directions times their scale, so the
    scales read directly as fractions of the unit prototype magnitude.
    """
    rng = np.random.default_rng(config.seed)
    protos = _unit_rows(rng, (config.n_identities, config.dim))
    offsets = config.camera_offset_scale * _unit_rows(rng, (config.n_cameras, config.dim))

    lo, hi = config._count_range()
    samples: list[Sample] = []
    rows: list[np.ndarray] = []
    for identity in range(config.n_identities):
        for camera in sorted(set(config.probe_cameras) | set(config.gallery_cameras)):
            split = Split.PROBE if camera in config.probe_cameras else Split.GALLERY
            count = int(rng.integers(lo, hi + 1)) if hi > lo else lo
            for shot in range(count):
                noise = rng.standard_normal(config.dim)
                noise_norm = np.linalg.norm(noise)
                if noise_norm > 0.0:
                    noise = noise / noise_norm * config.noise_scale
                vec = protos[identity] + offsets[camera] + noise
                norm = np.linalg.norm(vec)
                if norm == 0.0:
                    vec = protos[identity]
                    norm = 1.0
                rows.append((vec / norm).astype(np.float32))
                samples.append(Sample(
                    image_id=f"id{identity:05d}_c{camera}_s{shot}",
                    camera_id=camera,
                    split=split,
                    identity_label=identity,
                    embedding_index=len(rows) - 1,
                ))
    return samples, np.vstack(rows)
