"""Shared domain types: samples, identity sets, assignments, outcomes, reports.

All types are immutable after construction and safe to share read-only
across concurrent workers.  Matrices are plain numpy arrays validated by
the ``as_*_matrix`` helpers; everything else is a frozen dataclass.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import InputError, SizeError


class Split(Enum):
    PROBE = "probe"
    GALLERY = "gallery"


@dataclass(frozen=True)
class Sample:
    """One person image record.

    ``identity_label`` is ground truth and only present on synthetic or
    labeled data; ``None`` means unknown (there is no sentinel value).
    ``embedding_index`` is the row of this sample in the dataset's
    embedding matrix, bound by metadata order.
    """

    image_id: str
    camera_id: int
    split: Split
    identity_label: Optional[int] = None
    embedding_index: Optional[int] = None

    def __post_init__(self) -> None:
        if self.camera_id < 0:
            raise InputError(f"camera_id must be non-negative, got {self.camera_id}")
        if self.identity_label is not None and self.identity_label < 0:
            raise InputError(f"identity_label must be non-negative, got {self.identity_label}")


def validate_samples(samples: Sequence[Sample]) -> None:
    """Check dataset-level invariants: unique ids, no mixed labeling per split."""
    seen: set[str] = set()
    for s in samples:
        if s.image_id in seen:
            raise InputError(f"duplicate image_id {s.image_id!r}")
        seen.add(s.image_id)
    for split in Split:
        labeled = [s.identity_label is not None for s in samples if s.split is split]
        if labeled and any(labeled) and not all(labeled):
            raise InputError(f"mixed labeling in {split.value} split: "
                             "identity_label must be present for all samples or none")


def as_embedding_matrix(values: np.ndarray) -> np.ndarray:
    """Validate and return a float32 row-major embedding matrix."""
    arr = np.ascontiguousarray(values, dtype=np.float32)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise SizeError(f"embedding matrix must be 2-D and non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError("embedding matrix contains non-finite values")
    return arr


def as_similarity_matrix(values: np.ndarray) -> np.ndarray:
    """Validate and return a float32 probe x gallery similarity matrix."""
    arr = np.ascontiguousarray(values, dtype=np.float32)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise SizeError(f"similarity matrix must be 2-D and non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError("similarity matrix contains non-finite values")
    return arr


@dataclass(frozen=True)
class IdentitySet:
    """A merged group of same-camera, same-split image indices treated as one identity."""

    camera_id: int
    members: Tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise InputError("IdentitySet members must be non-empty")
        if len(set(self.members)) != len(self.members):
            raise InputError("IdentitySet members must be distinct")


@dataclass(frozen=True)
class Assignment:
    """A one-to-one partial row-to-column mapping with its total similarity.

    Row and column indices are each pairwise distinct; rows assigned to
    dummy padding are simply absent from ``pairs``.
    """

    pairs: Tuple[Tuple[int, int], ...]
    total_similarity: float

    def __post_init__(self) -> None:
        rows = [r for r, _ in self.pairs]
        cols = [c for _, c in self.pairs]
        if len(set(rows)) != len(rows):
            raise InputError("assignment rows must be pairwise distinct")
        if len(set(cols)) != len(cols):
            raise InputError("assignment columns must be pairwise distinct")

    def row_to_col(self) -> dict[int, int]:
        return dict(self.pairs)


@dataclass(frozen=True, eq=False)
class ProbeMatch:
    """Final matching result for one probe image.

    ``ranking`` is a permutation of all gallery image indices with the
    matched gallery image at position 0.  ``camera_pair`` is
    (probe_camera, gallery_camera) when camera information exists.
    """

    probe_index: int
    gallery_image: int
    gallery_identity: IdentitySet
    ranking: np.ndarray
    camera_pair: Optional[Tuple[int, int]] = None


@dataclass(frozen=True, eq=False)
class MatchOutcome:
    """Per-probe matches for a whole run, ordered by probe index."""

    matches: Tuple[ProbeMatch, ...]
    n_gallery: int

    def validate(self) -> None:
        """Check the ranking-permutation and rank-1 invariants (O(n*m))."""
        for pm in self.matches:
            r = pm.ranking
            if r.shape != (self.n_gallery,):
                raise SizeError(f"probe {pm.probe_index}: ranking has shape {r.shape}, "
                                f"expected ({self.n_gallery},)")
            if r[0] != pm.gallery_image:
                raise InputError(f"probe {pm.probe_index}: rank-1 entry {r[0]} does not "
                                 f"equal matched gallery image {pm.gallery_image}")
            counts = np.bincount(r, minlength=self.n_gallery)
            if counts.max(initial=0) != 1 or counts.min(initial=1) != 1:
                raise InputError(f"probe {pm.probe_index}: ranking is not a permutation")

    def rank1(self) -> np.ndarray:
        return np.array([pm.gallery_image for pm in self.matches], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class EvalReport:
    """CMC curve, mAP, the unicity fraction, and per-stage wall-clock timings."""

    cmc: np.ndarray
    map: float
    p_um: float
    timings: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        c = np.asarray(self.cmc, dtype=np.float64)
        if c.ndim != 1 or c.size < 1:
            raise SizeError("cmc must be a non-empty 1-D curve")
        if np.any(c < -1e-12) or np.any(c > 1 + 1e-12):
            raise InputError("cmc values must lie in [0, 1]")
        if np.any(np.diff(c) < -1e-12):
            raise InputError("cmc must be non-decreasing")
        for name, value in (("map", self.map), ("p_um", self.p_um)):
            if not 0.0 <= value <= 1.0:
                raise InputError(f"{name} must lie in [0, 1], got {value}")
