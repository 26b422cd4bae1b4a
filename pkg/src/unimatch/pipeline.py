"""End-to-end unicity matching.

One-shot mode solves a single assignment over the full probe x gallery
similarity matrix.  Multi-shot mode merges same-camera images into
identity sets (clustering, or ground-truth oracle), solves one
assignment per cross-camera pair, keeps each probe set's best candidate
across pairs, and finally refines matched set pairs image-by-image.

Index convention: identity-set members are split-local, i.e. probe sets
hold row indices of the probe x gallery similarity matrix and gallery
sets hold column indices.  Rankings are permutations of all gallery
column indices.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Mapping, Optional, Sequence

import numpy as np

from . import cluster as _cluster
from .errors import ConfigError, InfeasibleOneShotError, InputError, SizeError
from .io import cosine_similarity_matrix
from .lap import solve_dense, solve_sparse, sparsify
from .types import (
    Assignment,
    IdentitySet,
    MatchOutcome,
    ProbeMatch,
    Sample,
    Split,
    as_similarity_matrix,
    validate_samples,
)


class MatchMode(Enum):
    ONE_SHOT = "one-shot"
    MULTI_SHOT = "multi-shot"


@dataclass(frozen=True)
class PipelineConfig:
    """Pipeline switches; defaults follow the reference settings (k_c = k_a = 60)."""

    mode: MatchMode = MatchMode.MULTI_SHOT
    k_c: int = 60
    k_a: int = 60
    use_sparse: bool = True
    use_connectivity: bool = True
    workers: int = 0
    cluster_count_override: Optional[Mapping[int, int]] = None
    images_per_identity_hint: int = 4
    use_mergence: bool = True
    use_divide_conquer: bool = True
    oracle_merge: bool = False
    select_max_candidates: int = 24

    def __post_init__(self) -> None:
        if self.k_c < 1 or self.k_a < 1:
            raise InputError("k_c and k_a must be >= 1")
        if self.workers < 0:
            raise InputError("workers must be >= 0")
        if self.images_per_identity_hint < 1:
            raise InputError("images_per_identity_hint must be >= 1")

    @property
    def parallel(self) -> bool:
        return self.workers > 1


@dataclass(frozen=True)
class IdentityMatch:
    """One probe identity set matched to one gallery identity set."""

    probe_identity: IdentitySet
    gallery_identity: IdentitySet
    similarity: float
    camera_pair: tuple[int, int]

    def __post_init__(self) -> None:
        if self.camera_pair[0] == self.camera_pair[1]:
            raise InputError(f"matched sets must come from different cameras, "
                             f"both are {self.camera_pair[0]}")


def _split_samples(samples: Sequence[Sample]) -> tuple[list[Sample], list[Sample]]:
    probes = [s for s in samples if s.split is Split.PROBE]
    gallery = [s for s in samples if s.split is Split.GALLERY]
    return probes, gallery


def _descending_order(sim: np.ndarray) -> np.ndarray:
    """Per-row gallery indices by descending similarity; ties to lower index."""
    return np.argsort(-sim, axis=1, kind="stable").astype(np.int64)


def _solve(matrix: np.ndarray, config: Optional[PipelineConfig]) -> Assignment:
    if config is not None and config.use_sparse:
        return solve_sparse(sparsify(matrix, config.k_a))
    return solve_dense(matrix)


def greedy_baseline(sim: np.ndarray, samples: Optional[Sequence[Sample]] = None) -> MatchOutcome:
    """Rank purely by similarity: the ambiguity-prone per-probe argmax."""
    sim = as_similarity_matrix(sim)
    order = _descending_order(sim)
    gallery_cams = _gallery_cameras(samples, sim.shape[1])
    probe_cams = _probe_cameras(samples, sim.shape[0])
    matches = []
    for i in range(sim.shape[0]):
        top = int(order[i, 0])
        matches.append(ProbeMatch(
            probe_index=i,
            gallery_image=top,
            gallery_identity=IdentitySet(camera_id=int(gallery_cams[top]), members=(top,)),
            ranking=order[i],
            camera_pair=(int(probe_cams[i]), int(gallery_cams[top])) if samples is not None else None,
        ))
    return MatchOutcome(matches=tuple(matches), n_gallery=sim.shape[1])


def _probe_cameras(samples: Optional[Sequence[Sample]], n: int) -> np.ndarray:
    if samples is None:
        return np.full(n, -1, dtype=np.int64)
    probes, _ = _split_samples(samples)
    if len(probes) != n:
        raise SizeError(f"{len(probes)} probe samples but similarity has {n} rows")
    return np.array([s.camera_id for s in probes], dtype=np.int64)


def _gallery_cameras(samples: Optional[Sequence[Sample]], m: int) -> np.ndarray:
    if samples is None:
        return np.full(m, -1, dtype=np.int64)
    _, gallery = _split_samples(samples)
    if len(gallery) != m:
        raise SizeError(f"{len(gallery)} gallery samples but similarity has {m} columns")
    return np.array([s.camera_id for s in gallery], dtype=np.int64)


def one_shot_match(sim: np.ndarray, config: Optional[PipelineConfig] = None,
                   samples: Optional[Sequence[Sample]] = None) -> MatchOutcome:
    """Single assignment over the full matrix; valid when every image is its
    own identity.  Requires n_probe <= n_gallery (closed world)."""
    sim = as_similarity_matrix(sim)
    n, m = sim.shape
    if n > m:
        raise InfeasibleOneShotError(f"one-shot needs n_probe <= n_gallery, got {n} > {m}")
    assignment = _solve(sim, config)
    col_of = assignment.row_to_col()
    order = _descending_order(sim)
    probe_cams = _probe_cameras(samples, n)
    gallery_cams = _gallery_cameras(samples, m)
    matches = []
    for i in range(n):
        j = col_of[i]
        row_order = order[i]
        ranking = np.concatenate(([j], row_order[row_order != j]))
        matches.append(ProbeMatch(
            probe_index=i,
            gallery_image=int(j),
            gallery_identity=IdentitySet(camera_id=int(gallery_cams[j]), members=(int(j),)),
            ranking=ranking,
            camera_pair=(int(probe_cams[i]), int(gallery_cams[j])) if samples is not None else None,
        ))
    return MatchOutcome(matches=tuple(matches), n_gallery=m)


# ---------------------------------------------------------------- mergence

def _singleton_sets(samples_of_split: Sequence[Sample]) -> dict[int, list[IdentitySet]]:
    by_cam: dict[int, list[IdentitySet]] = {}
    for local_idx, s in enumerate(samples_of_split):
        by_cam.setdefault(s.camera_id, []).append(
            IdentitySet(camera_id=s.camera_id, members=(local_idx,)))
    return by_cam


def _oracle_sets(samples_of_split: Sequence[Sample]) -> dict[int, list[IdentitySet]]:
    groups: dict[tuple[int, int], list[int]] = {}
    for local_idx, s in enumerate(samples_of_split):
        if s.identity_label is None:
            raise InputError("oracle merging requires identity labels on every sample")
        groups.setdefault((s.camera_id, s.identity_label), []).append(local_idx)
    by_cam: dict[int, list[IdentitySet]] = {}
    for (cam, _), members in sorted(groups.items()):
        by_cam.setdefault(cam, []).append(
            IdentitySet(camera_id=cam, members=tuple(members)))
    return by_cam


def _cluster_camera(cam: int, local_indices: list[int], points: np.ndarray,
                    config: PipelineConfig) -> list[IdentitySet]:
    n = len(local_indices)
    if n == 1:
        return [IdentitySet(camera_id=cam, members=(local_indices[0],))]
    connectivity = None
    if config.use_connectivity:
        connectivity = _cluster.knn_connectivity(points, config.k_c)
    override = (config.cluster_count_override or {}).get(cam)
    if override is not None:
        n_clusters = int(np.clip(override, 1, n))
    else:
        window = _cluster.default_search_range(n, config.images_per_identity_hint)
        if window is None:
            n_clusters = int(np.clip(round(n / config.images_per_identity_hint), 1, n))
        else:
            n_clusters = _cluster.select_cluster_count(
                points, connectivity, window[0], window[1],
                max_candidates=config.select_max_candidates)
    labels = _cluster.agglomerate(points, n_clusters, connectivity)
    sets = []
    for label in np.unique(labels):
        members = tuple(local_indices[t] for t in np.flatnonzero(labels == label))
        sets.append(IdentitySet(camera_id=cam, members=members))
    return sets


def merge_sisc(samples: Sequence[Sample], embeddings: Optional[np.ndarray],
               config: PipelineConfig) -> tuple[dict[int, list[IdentitySet]],
                                                dict[int, list[IdentitySet]]]:
    """Per-camera identity sets for the probe and gallery splits.

    Ground-truth merging when ``config.oracle_merge``; otherwise
    silhouette-selected agglomerative clustering per camera (cameras with
    one sample yield a singleton without clustering).  Members are
    split-local indices.
    """
    probes, gallery = _split_samples(samples)
    if config.oracle_merge:
        return _oracle_sets(probes), _oracle_sets(gallery)
    if not config.use_mergence:
        return _singleton_sets(probes), _singleton_sets(gallery)
    if embeddings is None:
        raise ConfigError("clustering-based merging requires embeddings; "
                          "pass similarity-only data with oracle_merge or one-shot mode")

    def merge_split(split_samples: Sequence[Sample]) -> dict[int, list[IdentitySet]]:
        by_cam: dict[int, list[int]] = {}
        for local_idx, s in enumerate(split_samples):
            by_cam.setdefault(s.camera_id, []).append(local_idx)
        jobs = []
        for cam in sorted(by_cam):
            local = by_cam[cam]
            if any(split_samples[t].embedding_index is None for t in local):
                raise InputError("every sample needs an embedding_index for clustering")
            rows = np.array([split_samples[t].embedding_index for t in local], dtype=np.int64)
            jobs.append((cam, local, embeddings[rows]))
        results: dict[int, list[IdentitySet]] = {}
        if config.parallel and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                futures = {cam: pool.submit(_cluster_camera, cam, local, pts, config)
                           for cam, local, pts in jobs}
                for cam in sorted(futures):
                    results[cam] = futures[cam].result()
        else:
            for cam, local, pts in jobs:
                results[cam] = _cluster_camera(cam, local, pts, config)
        return results

    return merge_split(probes), merge_split(gallery)


# ---------------------------------------------------------------- identity matching

def identity_similarity(probe_set: IdentitySet, gallery_set: IdentitySet,
                        image_sim: np.ndarray) -> float:
    """Set-to-set similarity: the largest member-pair image similarity."""
    block = image_sim[np.ix_(probe_set.members, gallery_set.members)]
    return float(block.max())


def _grouped_max_rows(image_sim: np.ndarray, sets: list[IdentitySet]) -> np.ndarray:
    """Row-reduce image_sim to one max-row per identity set."""
    order = np.concatenate([s.members for s in sets]).astype(np.int64)
    offsets = np.cumsum([0] + [len(s.members) for s in sets])[:-1]
    return np.maximum.reduceat(image_sim[order], offsets, axis=0)


def _grouped_max_cols(rowmax: np.ndarray, sets: list[IdentitySet]) -> np.ndarray:
    order = np.concatenate([s.members for s in sets]).astype(np.int64)
    offsets = np.cumsum([0] + [len(s.members) for s in sets])[:-1]
    return np.maximum.reduceat(rowmax[:, order], offsets, axis=1)


def _pair_assignment(args: tuple) -> tuple[tuple[int, int], Assignment]:
    (cp, cg), matrix, config = args
    return (cp, cg), _solve(matrix, config)


def divide_and_conquer(probe_sets: dict[int, list[IdentitySet]],
                       gallery_sets: dict[int, list[IdentitySet]],
                       image_sim: np.ndarray,
                       config: PipelineConfig) -> list[IdentityMatch]:
    """Assignment per cross-camera pair, then keep each probe set's best
    candidate (ties: lowest gallery camera, then lowest set index).

    Probe sets that stay unmatched in every pair (dummy-padded rows) fall
    back to the gallery identity holding their highest image similarity.
    """
    image_sim = as_similarity_matrix(image_sim)
    probe_cams = sorted(c for c, sets in probe_sets.items() if sets)
    gallery_cams = sorted(c for c, sets in gallery_sets.items() if sets)
    if not probe_cams or not gallery_cams:
        raise ConfigError("need at least one probe camera and one gallery camera")
    for cp in probe_cams:
        if all(cg == cp for cg in gallery_cams):
            raise ConfigError(f"no gallery camera differs from probe camera {cp}")

    pairs = [(cp, cg) for cp in probe_cams for cg in gallery_cams if cg != cp]
    rowmax_cache = {cp: _grouped_max_rows(image_sim, probe_sets[cp]) for cp in probe_cams}
    jobs = []
    for cp, cg in pairs:
        matrix = _grouped_max_cols(rowmax_cache[cp], gallery_sets[cg])
        jobs.append(((cp, cg), matrix, config))

    solved: dict[tuple[int, int], Assignment] = {}
    if config.parallel and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            for key, assignment in pool.map(_pair_assignment, jobs):
                solved[key] = assignment
    else:
        for job in jobs:
            key, assignment = _pair_assignment(job)
            solved[key] = assignment

    # conquer: per probe set, best candidate across gallery cameras
    best: dict[tuple[int, int], tuple[float, int, int]] = {}
    for cp, cg in pairs:  # pairs iterate with cg ascending per cp
        for u, v in solved[(cp, cg)].pairs:
            sim_uv = float(
                identity_similarity(probe_sets[cp][u], gallery_sets[cg][v], image_sim))
            key = (cp, u)
            if key not in best:
                best[key] = (sim_uv, cg, v)
            else:
                cur = best[key]
                if sim_uv > cur[0] or (sim_uv == cur[0] and (cg, v) < (cur[1], cur[2])):
                    best[key] = (sim_uv, cg, v)

    column_owner: dict[int, tuple[int, int]] = {}
    for cg in gallery_cams:
        for v, gset in enumerate(gallery_sets[cg]):
            for col in gset.members:
                column_owner[col] = (cg, v)
    gallery_cam_of_col = np.full(image_sim.shape[1], -1, dtype=np.int64)
    for col, (cg, _) in column_owner.items():
        gallery_cam_of_col[col] = cg

    matches = []
    for cp in probe_cams:
        for u, pset in enumerate(probe_sets[cp]):
            if (cp, u) in best:
                sim_uv, cg, v = best[(cp, u)]
                matches.append(IdentityMatch(
                    probe_identity=pset,
                    gallery_identity=gallery_sets[cg][v],
                    similarity=sim_uv,
                    camera_pair=(cp, cg)))
                continue
            # unmatched in every pair: argmax image similarity over other cameras
            allowed_cols = np.flatnonzero(gallery_cam_of_col != cp)
            block = image_sim[np.ix_(pset.members, allowed_cols)]
            col = int(allowed_cols[int(np.argmax(block)) % allowed_cols.size])
            cg, v = column_owner[col]
            matches.append(IdentityMatch(
                probe_identity=pset,
                gallery_identity=gallery_sets[cg][v],
                similarity=float(block.max()),
                camera_pair=(cp, cg)))
    return matches


def _pooled_assignment(probe_sets: dict[int, list[IdentitySet]],
                       gallery_sets: dict[int, list[IdentitySet]],
                       image_sim: np.ndarray,
                       config: PipelineConfig) -> list[IdentityMatch]:
    """Single assignment over all set pairs, same-camera pairs masked out.

    This is the mergence-without-divide ablation: cross-camera identity
    duplication is ignored and one global problem is solved.
    """
    all_probe = [(cp, u, s) for cp in sorted(probe_sets) for u, s in enumerate(probe_sets[cp])]
    all_gallery = [(cg, v, s) for cg in sorted(gallery_sets) for v, s in enumerate(gallery_sets[cg])]
    if not all_probe or not all_gallery:
        raise ConfigError("need at least one probe and one gallery identity set")
    rowmax = np.vstack([_grouped_max_rows(image_sim, probe_sets[cp])
                        for cp in sorted(probe_sets)])
    matrix = np.hstack([_grouped_max_cols(rowmax, gallery_sets[cg])
                        for cg in sorted(gallery_sets)])
    row_cams = np.array([cp for cp, _, _ in all_probe], dtype=np.int64)
    col_cams = np.array([cg for cg, _, _ in all_gallery], dtype=np.int64)
    same_camera = row_cams[:, None] == col_cams[None, :]
    if same_camera.any():
        matrix[same_camera] = float(matrix.min()) - 1.0
    assignment = _solve(matrix.astype(np.float32), config)

    column_owner: dict[int, tuple[int, int, IdentitySet]] = {}
    for cg in sorted(gallery_sets):
        for v, gset in enumerate(gallery_sets[cg]):
            for col in gset.members:
                column_owner[col] = (cg, v, gset)
    gallery_cam_of_col = np.full(image_sim.shape[1], -1, dtype=np.int64)
    for col, (cg, _, _) in column_owner.items():
        gallery_cam_of_col[col] = cg

    chosen: dict[int, tuple[float, IdentitySet, tuple[int, int]]] = {}
    for r, c in assignment.pairs:
        cp, _, pset = all_probe[r]
        cg, _, gset = all_gallery[c]
        if cg == cp:
            continue  # forced onto a masked cell; use the fallback below
        chosen[r] = (identity_similarity(pset, gset, image_sim), gset, (cp, cg))
    matches = []
    for r, (cp, _, pset) in enumerate(all_probe):
        if r in chosen:
            sim_uv, gset, campair = chosen[r]
            matches.append(IdentityMatch(probe_identity=pset, gallery_identity=gset,
                                         similarity=sim_uv, camera_pair=campair))
            continue
        allowed_cols = np.flatnonzero(gallery_cam_of_col != cp)
        block = image_sim[np.ix_(pset.members, allowed_cols)]
        col = int(allowed_cols[int(np.argmax(block)) % allowed_cols.size])
        cg, _, gset = column_owner[col]
        matches.append(IdentityMatch(probe_identity=pset, gallery_identity=gset,
                                     similarity=float(block.max()), camera_pair=(cp, cg)))
    return matches


# ---------------------------------------------------------------- image refinement

def image_level_refine(matches: Sequence[IdentityMatch], image_sim: np.ndarray,
                       timings: Optional[dict[str, float]] = None) -> MatchOutcome:
    """Per matched set pair, assign probe images to gallery images inside
    the pair, then build each probe image's refined ranking: the matched
    identity's images first (assigned image at rank 1, the rest by
    descending similarity), then all other galleries by similarity.

    The matched identity is never changed here, only image-level order.
    """
    image_sim = as_similarity_matrix(image_sim)
    n, m = image_sim.shape
    covered = sorted(idx for match in matches for idx in match.probe_identity.members)
    if covered != list(range(n)):
        raise InputError("identity matches must cover every probe image exactly once")

    t0 = time.perf_counter()
    assigned = np.full(n, -1, dtype=np.int64)
    match_of_probe: list[Optional[IdentityMatch]] = [None] * n
    for match in matches:
        pm = list(match.probe_identity.members)
        gm = list(match.gallery_identity.members)
        block = image_sim[np.ix_(pm, gm)]
        sub = solve_dense(block)
        col_of = sub.row_to_col()
        for r, probe_idx in enumerate(pm):
            if r in col_of:
                assigned[probe_idx] = gm[col_of[r]]
            else:
                # more probe than gallery images: argmax inside the identity
                assigned[probe_idx] = gm[int(np.argmax(block[r]))]
            match_of_probe[probe_idx] = match
    t_refine = time.perf_counter() - t0

    t0 = time.perf_counter()
    order = _descending_order(image_sim)
    member_mask = np.zeros(m, dtype=bool)
    matches_out = []
    for probe_idx in range(n):
        match = match_of_probe[probe_idx]
        gm = np.asarray(match.gallery_identity.members, dtype=np.int64)
        member_mask[gm] = True
        row_order = order[probe_idx]
        in_identity = member_mask[row_order]
        identity_sorted = row_order[in_identity]
        rest = row_order[~in_identity]
        member_mask[gm] = False
        top = assigned[probe_idx]
        ranking = np.concatenate(([top], identity_sorted[identity_sorted != top], rest))
        matches_out.append(ProbeMatch(
            probe_index=probe_idx,
            gallery_image=int(top),
            gallery_identity=match.gallery_identity,
            ranking=ranking,
            camera_pair=match.camera_pair,
        ))
    if timings is not None:
        timings["refinement"] = t_refine
        timings["ranking"] = time.perf_counter() - t0
    return MatchOutcome(matches=tuple(matches_out), n_gallery=m)


# ---------------------------------------------------------------- pipeline

def _build_similarity(samples: Sequence[Sample], embeddings: Optional[np.ndarray],
                      similarity: Optional[np.ndarray]) -> np.ndarray:
    probes, gallery = _split_samples(samples)
    if not probes or not gallery:
        raise ConfigError("dataset needs at least one probe and one gallery sample")
    if (similarity is None) == (embeddings is None):
        raise ConfigError("provide exactly one of embeddings or similarity")
    if similarity is not None:
        sim = as_similarity_matrix(similarity)
        if sim.shape != (len(probes), len(gallery)):
            raise SizeError(f"similarity is {sim.shape}, dataset has "
                            f"{len(probes)} probes x {len(gallery)} galleries")
        return sim
    if any(s.embedding_index is None for s in samples):
        raise InputError("every sample needs an embedding_index to use embeddings")
    if max(s.embedding_index for s in samples) >= embeddings.shape[0]:
        raise SizeError("embedding_index out of range for the embedding matrix")
    p_rows = np.array([s.embedding_index for s in probes], dtype=np.int64)
    g_rows = np.array([s.embedding_index for s in gallery], dtype=np.int64)
    return cosine_similarity_matrix(embeddings[p_rows], embeddings[g_rows])


def run_pipeline(samples: Sequence[Sample], config: PipelineConfig,
                 embeddings: Optional[np.ndarray] = None,
                 similarity: Optional[np.ndarray] = None) -> tuple[MatchOutcome, dict[str, float]]:
    """Full matching run; returns the outcome and per-stage wall-clock timings."""
    validate_samples(samples)
    timings: dict[str, float] = {}
    t_total = time.perf_counter()

    t0 = time.perf_counter()
    sim = _build_similarity(samples, embeddings, similarity)
    timings["similarity"] = time.perf_counter() - t0

    if config.mode is MatchMode.ONE_SHOT:
        t0 = time.perf_counter()
        outcome = one_shot_match(sim, config, samples)
        timings["matching"] = time.perf_counter() - t0
    elif not config.use_mergence and not config.use_divide_conquer and not config.oracle_merge:
        t0 = time.perf_counter()
        outcome = greedy_baseline(sim, samples)
        timings["matching"] = time.perf_counter() - t0
    else:
        t0 = time.perf_counter()
        probe_sets, gallery_sets = merge_sisc(samples, embeddings, config)
        timings["mergence"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        if config.use_divide_conquer:
            id_matches = divide_and_conquer(probe_sets, gallery_sets, sim, config)
        else:
            id_matches = _pooled_assignment(probe_sets, gallery_sets, sim, config)
        timings["matching"] = time.perf_counter() - t0

        outcome = image_level_refine(id_matches, sim, timings)

    timings["total"] = time.perf_counter() - t_total
    return outcome, timings


def add_probes(base_outcome: MatchOutcome,
               samples: Sequence[Sample],
               new_samples: Sequence[Sample],
               config: PipelineConfig,
               embeddings: Optional[np.ndarray] = None,
               new_embeddings: Optional[np.ndarray] = None,
               similarity: Optional[np.ndarray] = None) -> tuple[MatchOutcome, dict[str, float]]:
    """Match newly added probes against the full gallery, leaving existing
    probe outcomes untouched; returns the merged outcome.

    ``new_samples`` must be probe-split with image ids disjoint from the
    base dataset.  Provide either stacked embeddings (``embeddings`` for
    the base order plus ``new_embeddings`` for the new probes) or a
    ready-made ``similarity`` of shape (len(new_samples), n_gallery).
    """
    if not new_samples:
        return base_outcome, {"total": 0.0}
    existing_ids = {s.image_id for s in samples}
    for s in new_samples:
        if s.image_id in existing_ids:
            raise InputError(f"added probe duplicates existing image_id {s.image_id!r}")
        if s.split is not Split.PROBE:
            raise InputError(f"added sample {s.image_id!r} must be probe-split")

    probes, gallery = _split_samples(samples)
    if len(probes) != len(base_outcome.matches):
        raise SizeError(f"base outcome covers {len(base_outcome.matches)} probes, "
                        f"dataset lists {len(probes)}")

    merged_samples: list[Sample] = []
    emb_rows: list[np.ndarray] = []
    sim_arg = None
    emb_arg = None
    if similarity is not None:
        for s in new_samples:
            merged_samples.append(replace(s, embedding_index=None))
        for s in gallery:
            merged_samples.append(replace(s, embedding_index=None))
        sim_arg = similarity
    else:
        if embeddings is None or new_embeddings is None:
            raise ConfigError("add_probes needs embeddings+new_embeddings or similarity")
        for s in new_samples:
            if s.embedding_index is None:
                raise InputError(f"added probe {s.image_id!r} has no embedding_index")
            merged_samples.append(replace(s, embedding_index=len(emb_rows)))
            emb_rows.append(new_embeddings[s.embedding_index])
        for s in gallery:
            merged_samples.append(replace(s, embedding_index=len(emb_rows)))
            emb_rows.append(embeddings[s.embedding_index])
        emb_arg = np.vstack(emb_rows)

    new_outcome, timings = run_pipeline(merged_samples, config,
                                        embeddings=emb_arg, similarity=sim_arg)
    offset = len(base_outcome.matches)
    shifted = [replace(pm, probe_index=pm.probe_index + offset) for pm in new_outcome.matches]
    merged = MatchOutcome(matches=base_outcome.matches + tuple(shifted),
                          n_gallery=base_outcome.n_gallery)
    return merged, timings
