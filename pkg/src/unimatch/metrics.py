"""Retrieval evaluation: CMC curve, mean average precision, unicity fraction.

The unicity fraction (p_um) counts a probe image as unambiguous when no
probe of a different identity shares its rank-1 gallery identity and
every probe of its own identity agrees on that gallery identity.  The
probe-side condition can be switched off to count only gallery-side
conflicts.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError, ProtocolError, SizeError
from .types import EvalReport, MatchOutcome, Sample, Split


@dataclass(frozen=True)
class EvalProtocol:
    """Standard closed-world retrieval protocol."""

    exclude_same_camera_same_id: bool = True
    max_rank: int = 50

    def __post_init__(self) -> None:
        if self.max_rank < 1:
            raise InputError(f"max_rank must be >= 1, got {self.max_rank}")


def _split_arrays(samples: Sequence[Sample]) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    probes = [s for s in samples if s.split is Split.PROBE]
    gallery = [s for s in samples if s.split is Split.GALLERY]
    if any(s.identity_label is None for s in probes) or any(s.identity_label is None for s in gallery):
        raise InputError("evaluation requires identity labels on every probe and gallery sample")
    p_ids = np.array([s.identity_label for s in probes], dtype=np.int64)
    g_ids = np.array([s.identity_label for s in gallery], dtype=np.int64)
    p_cams = np.array([s.camera_id for s in probes], dtype=np.int64)
    g_cams = np.array([s.camera_id for s in gallery], dtype=np.int64)
    return p_ids, g_ids, p_cams, g_cams


def _first_hit_and_ap(outcome: MatchOutcome, p_ids, g_ids, p_cams, g_cams,
                      protocol: EvalProtocol) -> tuple[np.ndarray, np.ndarray]:
    """Per probe: rank (0-based) of the first correct gallery hit, and AP."""
    n = len(outcome.matches)
    if p_ids.shape[0] != n:
        raise SizeError(f"outcome has {n} probes but labels describe {p_ids.shape[0]}")
    if g_ids.shape[0] != outcome.n_gallery:
        raise SizeError(f"outcome has {outcome.n_gallery} gallery images but labels "
                        f"describe {g_ids.shape[0]}")
    first = np.empty(n, dtype=np.int64)
    ap = np.empty(n, dtype=np.float64)
    for idx, pm in enumerate(outcome.matches):
        ranking = pm.ranking
        keep = np.ones(outcome.n_gallery, dtype=bool)
        if protocol.exclude_same_camera_same_id:
            keep = ~((g_ids == p_ids[idx]) & (g_cams == p_cams[idx]))
        kept = ranking[keep[ranking]]
        correct = g_ids[kept] == p_ids[idx]
        n_correct = int(correct.sum())
        if n_correct == 0:
            raise ProtocolError(f"probe {pm.probe_index} has no correct gallery image "
                                "after protocol exclusion")
        hits = np.flatnonzero(correct)
        first[idx] = hits[0]
        precisions = np.arange(1, n_correct + 1, dtype=np.float64) / (hits + 1.0)
        ap[idx] = precisions.mean()
    return first, ap


def cmc(outcome: MatchOutcome, samples: Sequence[Sample],
        protocol: EvalProtocol = EvalProtocol()) -> np.ndarray:
    """cmc[k] = fraction of probes whose first correct hit has rank <= k+1."""
    p_ids, g_ids, p_cams, g_cams = _split_arrays(samples)
    first, _ = _first_hit_and_ap(outcome, p_ids, g_ids, p_cams, g_cams, protocol)
    within = first[first < protocol.max_rank]
    counts = np.bincount(within, minlength=protocol.max_rank)[:protocol.max_rank]
    return np.cumsum(counts).astype(np.float64) / first.shape[0]


def mean_average_precision(outcome: MatchOutcome, samples: Sequence[Sample],
                           protocol: EvalProtocol = EvalProtocol()) -> float:
    """Mean over probes of average precision across all correct gallery images."""
    p_ids, g_ids, p_cams, g_cams = _split_arrays(samples)
    _, ap = _first_hit_and_ap(outcome, p_ids, g_ids, p_cams, g_cams, protocol)
    return float(ap.mean())


def p_um(outcome: MatchOutcome, samples: Sequence[Sample],
         require_probe_consistency: bool = True) -> float:
    """Fraction of probe images whose rank-1 matching is unambiguous.

    A probe counts when (a) no probe of a different identity resolves to
    the same rank-1 gallery identity, and, if ``require_probe_consistency``,
    (b) all probes sharing its identity resolve to the same gallery
    identity.
    """
    p_ids, g_ids, _, _ = _split_arrays(samples)
    n = len(outcome.matches)
    if p_ids.shape[0] != n:
        raise SizeError(f"outcome has {n} probes but labels describe {p_ids.shape[0]}")
    rank1_gid = g_ids[outcome.rank1()]

    ok = np.ones(n, dtype=bool)
    # gallery-side: two different probe identities claiming one gallery identity
    for gid in np.unique(rank1_gid):
        claimants = np.flatnonzero(rank1_gid == gid)
        if np.unique(p_ids[claimants]).size > 1:
            ok[claimants] = False
    if require_probe_consistency:
        # probe-side: one probe identity split across gallery identities
        for pid in np.unique(p_ids):
            members = np.flatnonzero(p_ids == pid)
            if np.unique(rank1_gid[members]).size > 1:
                ok[members] = False
    return float(ok.mean())


def evaluate(outcome: MatchOutcome, samples: Sequence[Sample],
             protocol: EvalProtocol = EvalProtocol(),
             timings: dict[str, float] | None = None) -> EvalReport:
    """Assemble the full report for an outcome over a labeled dataset."""
    t0 = time.perf_counter()
    curve = cmc(outcome, samples, protocol)
    mAP = mean_average_precision(outcome, samples, protocol)
    unicity = p_um(outcome, samples)
    out_timings = dict(timings or {})
    out_timings["evaluation"] = time.perf_counter() - t0
    return EvalReport(cmc=curve, map=mAP, p_um=unicity, timings=out_timings)
