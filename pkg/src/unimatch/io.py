"""Dataset ingestion and result persistence.

Formats (all multi-byte integers little-endian):

* metadata: UTF-8 CSV with header ``image_id,camera_id,split,person_id``;
  ``person_id`` may be empty.  Row order binds samples to matrix rows.
* embeddings: magic ``UEMB``, u32 version, u64 rows, u64 dim, then
  rows*dim float32 values row-major.
* similarity: magic ``USIM``, u32 version, u64 n_probe, u64 n_gallery,
  float32 values row-major.
* outcome: magic ``UOUT``, u32 version, u64 n_probe, u64 n_gallery,
  per-probe records and ranking matrix (see ``save_outcome``).
* manifest: JSON naming the metadata file plus exactly one of
  embeddings/similarity; relative paths resolve against the manifest.
* report: sectioned ``key = value`` text, parseable by ``load_report``.

Loaders validate sizes before allocating and raise typed errors on any
malformed input; they never crash on truncated or garbage bytes.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import FormatError, InputError, IntegrityError, SizeError
from .types import (
    IdentitySet,
    MatchOutcome,
    ProbeMatch,
    Sample,
    Split,
    validate_samples,
)

FORMAT_VERSION = 1
_EMB_MAGIC = b"UEMB"
_SIM_MAGIC = b"USIM"
_OUT_MAGIC = b"UOUT"


# ---------------------------------------------------------------- metadata

def parse_metadata(text: str) -> list[Sample]:
    lines = text.splitlines()
    if not lines:
        raise FormatError("metadata: empty file, expected a header line")
    header = lines[0].strip()
    if header != "image_id,camera_id,split,person_id":
        raise FormatError(f"metadata line 1: bad header {header!r}")
    samples: list[Sample] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise FormatError(f"metadata line {lineno}: expected 4 fields, got {len(parts)}")
        image_id, camera_raw, split_raw, person_raw = (p.strip() for p in parts)
        if not image_id:
            raise FormatError(f"metadata line {lineno}: empty image_id")
        if image_id in seen:
            raise IntegrityError(f"metadata line {lineno}: duplicate image_id {image_id!r}")
        seen.add(image_id)
        try:
            camera_id = int(camera_raw)
        except ValueError:
            raise FormatError(f"metadata line {lineno}: bad camera_id {camera_raw!r}") from None
        if split_raw not in ("probe", "gallery"):
            raise FormatError(f"metadata line {lineno}: split must be probe or gallery, "
                              f"got {split_raw!r}")
        person_id: Optional[int] = None
        if person_raw:
            try:
                person_id = int(person_raw)
            except ValueError:
                raise FormatError(f"metadata line {lineno}: bad person_id {person_raw!r}") from None
        try:
            samples.append(Sample(
                image_id=image_id,
                camera_id=camera_id,
                split=Split(split_raw),
                identity_label=person_id,
                embedding_index=len(samples),
            ))
        except InputError as exc:
            raise FormatError(f"metadata line {lineno}: {exc}") from None
    validate_samples(samples)
    return samples


def load_metadata(path: str | Path) -> list[Sample]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"metadata: not valid UTF-8 ({exc})") from None
    return parse_metadata(text)


def save_metadata(samples: Sequence[Sample], path: str | Path) -> None:
    lines = ["image_id,camera_id,split,person_id"]
    for s in samples:
        person = "" if s.identity_label is None else str(s.identity_label)
        lines.append(f"{s.image_id},{s.camera_id},{s.split.value},{person}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- binary matrices

def _parse_matrix(data: bytes, magic: bytes, kind: str) -> np.ndarray:
    head = struct.calcsize("<4sIQQ")
    if len(data) < head:
        raise FormatError(f"{kind}: truncated header, {len(data)} bytes < {head}")
    got_magic, version, rows, cols = struct.unpack_from("<4sIQQ", data, 0)
    if got_magic != magic:
        raise FormatError(f"{kind}: bad magic {got_magic!r} at offset 0")
    if version != FORMAT_VERSION:
        raise FormatError(f"{kind}: unsupported version {version} at offset 4")
    if rows < 1 or cols < 1:
        raise FormatError(f"{kind}: dimensions must be >= 1, got {rows} x {cols}")
    expected = rows * cols * 4
    if len(data) - head != expected:
        raise FormatError(f"{kind}: payload at offset {head} has {len(data) - head} bytes, "
                          f"expected {expected}")
    values = np.frombuffer(data, dtype="<f4", count=rows * cols, offset=head)
    matrix = values.reshape(int(rows), int(cols)).astype(np.float32)
    if not np.all(np.isfinite(matrix)):
        raise FormatError(f"{kind}: non-finite value in payload")
    return matrix


def _dump_matrix(matrix: np.ndarray, magic: bytes) -> bytes:
    arr = np.ascontiguousarray(matrix, dtype="<f4")
    head = struct.pack("<4sIQQ", magic, FORMAT_VERSION, arr.shape[0], arr.shape[1])
    return head + arr.tobytes()


def parse_embeddings(data: bytes) -> np.ndarray:
    return _parse_matrix(data, _EMB_MAGIC, "embeddings")


def load_embeddings(path: str | Path) -> np.ndarray:
    return parse_embeddings(Path(path).read_bytes())


def save_embeddings(matrix: np.ndarray, path: str | Path) -> None:
    Path(path).write_bytes(_dump_matrix(matrix, _EMB_MAGIC))


def parse_similarity(data: bytes) -> np.ndarray:
    return _parse_matrix(data, _SIM_MAGIC, "similarity")


def load_similarity(path: str | Path) -> np.ndarray:
    return parse_similarity(Path(path).read_bytes())


def save_similarity(matrix: np.ndarray, path: str | Path) -> None:
    Path(path).write_bytes(_dump_matrix(matrix, _SIM_MAGIC))


# ---------------------------------------------------------------- cosine similarity

def cosine_similarity_matrix(probe: np.ndarray, gallery: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarities, accumulated in float64, stored float32."""
    p = np.asarray(probe, dtype=np.float64)
    g = np.asarray(gallery, dtype=np.float64)
    if p.ndim != 2 or g.ndim != 2 or p.shape[1] != g.shape[1]:
        raise InputError(f"probe {p.shape} and gallery {g.shape} rows must share one dimension")
    p_norm = np.linalg.norm(p, axis=1)
    g_norm = np.linalg.norm(g, axis=1)
    for name, norms in (("probe", p_norm), ("gallery", g_norm)):
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise InputError(f"zero-norm {name} row {zero[0]}")
    sim = (p / p_norm[:, None]) @ (g / g_norm[:, None]).T
    return sim.astype(np.float32)


# ---------------------------------------------------------------- outcome

def dump_outcome(outcome: MatchOutcome) -> bytes:
    n = len(outcome.matches)
    members_flat: list[int] = []
    counts = np.empty(n, dtype="<i8")
    probe_idx = np.empty(n, dtype="<i8")
    gallery_image = np.empty(n, dtype="<i8")
    cam_p = np.empty(n, dtype="<i8")
    cam_g = np.empty(n, dtype="<i8")
    ident_cam = np.empty(n, dtype="<i8")
    for t, pm in enumerate(outcome.matches):
        probe_idx[t] = pm.probe_index
        gallery_image[t] = pm.gallery_image
        cam_p[t], cam_g[t] = pm.camera_pair if pm.camera_pair is not None else (-1, -1)
        ident_cam[t] = pm.gallery_identity.camera_id
        counts[t] = len(pm.gallery_identity.members)
        members_flat.extend(pm.gallery_identity.members)
    rankings = np.vstack([pm.ranking for pm in outcome.matches]).astype("<i4") if n else \
        np.empty((0, outcome.n_gallery), dtype="<i4")
    head = struct.pack("<4sIQQ", _OUT_MAGIC, FORMAT_VERSION, n, outcome.n_gallery)
    blob = (head + probe_idx.tobytes() + gallery_image.tobytes() + cam_p.tobytes()
            + cam_g.tobytes() + ident_cam.tobytes() + counts.tobytes()
            + np.asarray(members_flat, dtype="<i8").tobytes() + rankings.tobytes())
    return blob


def parse_outcome(data: bytes) -> MatchOutcome:
    head = struct.calcsize("<4sIQQ")
    if len(data) < head:
        raise FormatError(f"outcome: truncated header, {len(data)} bytes < {head}")
    magic, version, n, n_gallery = struct.unpack_from("<4sIQQ", data, 0)
    if magic != _OUT_MAGIC:
        raise FormatError(f"outcome: bad magic {magic!r} at offset 0")
    if version != FORMAT_VERSION:
        raise FormatError(f"outcome: unsupported version {version} at offset 4")
    if n_gallery < 1 or n > 10**9 or n_gallery > 10**9:
        raise FormatError(f"outcome: implausible sizes {n} x {n_gallery}")
    offset = head

    def take(dtype: str, count: int, what: str) -> np.ndarray:
        nonlocal offset
        nbytes = np.dtype(dtype).itemsize * count
        if len(data) - offset < nbytes:
            raise FormatError(f"outcome: truncated {what} at offset {offset}")
        out = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
        offset += nbytes
        return out

    probe_idx = take("<i8", int(n), "probe indices")
    gallery_image = take("<i8", int(n), "gallery images")
    cam_p = take("<i8", int(n), "probe cameras")
    cam_g = take("<i8", int(n), "gallery cameras")
    ident_cam = take("<i8", int(n), "identity cameras")
    counts = take("<i8", int(n), "member counts")
    if np.any(counts < 1):
        raise FormatError("outcome: identity member count below 1")
    total_members = int(counts.sum())
    members_flat = take("<i8", total_members, "identity members")
    rankings = take("<i4", int(n) * int(n_gallery), "rankings").reshape(int(n), int(n_gallery))
    if offset != len(data):
        raise FormatError(f"outcome: {len(data) - offset} trailing bytes at offset {offset}")

    matches = []
    pos = 0
    for t in range(int(n)):
        k = int(counts[t])
        members = tuple(int(v) for v in members_flat[pos:pos + k])
        pos += k
        if np.any(rankings[t] < 0) or np.any(rankings[t] >= n_gallery):
            raise FormatError(f"outcome: ranking entry out of range for probe {t}")
        camera_pair = None
        if cam_p[t] >= 0 and cam_g[t] >= 0:
            camera_pair = (int(cam_p[t]), int(cam_g[t]))
        try:
            matches.append(ProbeMatch(
                probe_index=int(probe_idx[t]),
                gallery_image=int(gallery_image[t]),
                gallery_identity=IdentitySet(camera_id=int(ident_cam[t]), members=members),
                ranking=rankings[t].astype(np.int64),
                camera_pair=camera_pair,
            ))
        except InputError as exc:
            raise FormatError(f"outcome: probe record {t}: {exc}") from None
    outcome = MatchOutcome(matches=tuple(matches), n_gallery=int(n_gallery))
    try:
        outcome.validate()
    except (InputError, SizeError) as exc:
        raise FormatError(f"outcome: {exc}") from None
    return outcome


def load_outcome(path: str | Path) -> MatchOutcome:
    return parse_outcome(Path(path).read_bytes())


def save_outcome(outcome: MatchOutcome, path: str | Path) -> None:
    Path(path).write_bytes(dump_outcome(outcome))


# ---------------------------------------------------------------- manifest

@dataclass(frozen=True)
class DatasetManifest:
    """Locates the metadata file and exactly one of embeddings/similarity."""

    metadata_path: Path
    embeddings_path: Optional[Path] = None
    similarity_path: Optional[Path] = None
    version: int = FORMAT_VERSION

    def __post_init__(self) -> None:
        if (self.embeddings_path is None) == (self.similarity_path is None):
            raise InputError("manifest must name exactly one of embeddings/similarity")


def parse_manifest(text: str, base: Path) -> DatasetManifest:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise FormatError("manifest: top level must be an object")
    version = doc.get("version")
    if version != FORMAT_VERSION:
        raise FormatError(f"manifest: unsupported version {version!r}")
    if "metadata" not in doc or not isinstance(doc["metadata"], str):
        raise FormatError("manifest: missing string field 'metadata'")
    emb = doc.get("embeddings")
    sim = doc.get("similarity")
    if (emb is None) == (sim is None):
        raise FormatError("manifest: exactly one of 'embeddings'/'similarity' required")
    field = emb if emb is not None else sim
    if not isinstance(field, str):
        raise FormatError("manifest: matrix path must be a string")
    return DatasetManifest(
        metadata_path=base / doc["metadata"],
        embeddings_path=base / emb if emb is not None else None,
        similarity_path=base / sim if sim is not None else None,
    )


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"manifest: not valid UTF-8 ({exc})") from None
    return parse_manifest(text, path.parent)


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    path = Path(path)
    doc: dict = {"version": manifest.version,
                 "metadata": str(manifest.metadata_path.name)}
    if manifest.embeddings_path is not None:
        doc["embeddings"] = str(manifest.embeddings_path.name)
    if manifest.similarity_path is not None:
        doc["similarity"] = str(manifest.similarity_path.name)
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_dataset(manifest: DatasetManifest) -> tuple[list[Sample], Optional[np.ndarray], Optional[np.ndarray]]:
    """Load (samples, embeddings, similarity) and cross-check shapes."""
    samples = load_metadata(manifest.metadata_path)
    embeddings = similarity = None
    if manifest.embeddings_path is not None:
        embeddings = load_embeddings(manifest.embeddings_path)
        if embeddings.shape[0] != len(samples):
            raise IntegrityError(f"embeddings have {embeddings.shape[0]} rows but metadata "
                                 f"lists {len(samples)} samples")
    else:
        similarity = load_similarity(manifest.similarity_path)
        n_probe = sum(1 for s in samples if s.split is Split.PROBE)
        n_gallery = sum(1 for s in samples if s.split is Split.GALLERY)
        if similarity.shape != (n_probe, n_gallery):
            raise IntegrityError(f"similarity is {similarity.shape} but metadata lists "
                                 f"{n_probe} probes x {n_gallery} galleries")
    return samples, embeddings, similarity


# ---------------------------------------------------------------- report

_REPORT_HEADER = "unimatch-report v1"


def dump_report(outcome: MatchOutcome,
                metrics: Optional[dict[str, float]] = None,
                timings: Optional[dict[str, float]] = None,
                config: Optional[dict[str, object]] = None) -> str:
    """Deterministic sectioned text; floats use repr for exact round-trips."""
    lines = [_REPORT_HEADER, "", "[config]"]
    for key in sorted(config or {}):
        lines.append(f"{key} = {(config or {})[key]}")
    lines.append("")
    lines.append("[metrics]")
    if metrics:
        for key in sorted(metrics):
            lines.append(f"{key} = {metrics[key]!r}")
    else:
        lines.append("available = false")
    lines.append("")
    lines.append("[timings]")
    for key in sorted(timings or {}):
        lines.append(f"{key} = {(timings or {})[key]!r}")
    lines.append("")
    lines.append("[matches]")
    lines.append("# probe gallery_image probe_camera gallery_camera")
    for pm in outcome.matches:
        cp, cg = pm.camera_pair if pm.camera_pair is not None else (-1, -1)
        lines.append(f"{pm.probe_index} {pm.gallery_image} {cp} {cg}")
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict:
    lines = text.splitlines()
    if not lines or lines[0] != _REPORT_HEADER:
        raise FormatError("report: missing header line")
    section = None
    out: dict = {"config": {}, "metrics": None, "timings": {}, "matches": []}
    metrics: dict[str, float] = {}
    metrics_available = False
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1]
            if section not in ("config", "metrics", "timings", "matches"):
                raise FormatError(f"report line {lineno}: unknown section {section!r}")
            continue
        if section == "matches":
            parts = line.split()
            if len(parts) != 4:
                raise FormatError(f"report line {lineno}: match rows need 4 fields")
            try:
                out["matches"].append(tuple(int(p) for p in parts))
            except ValueError:
                raise FormatError(f"report line {lineno}: bad match row") from None
            continue
        if section is None or "=" not in line:
            raise FormatError(f"report line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if section == "config":
            out["config"][key] = value
        elif section == "metrics":
            if key == "available" and value == "false":
                continue
            try:
                metrics[key] = float(value)
                metrics_available = True
            except ValueError:
                raise FormatError(f"report line {lineno}: bad metric value {value!r}") from None
        elif section == "timings":
            try:
                out["timings"][key] = float(value)
            except ValueError:
                raise FormatError(f"report line {lineno}: bad timing value {value!r}") from None
    if metrics_available:
        out["metrics"] = metrics
    return out


def save_report(outcome: MatchOutcome, path: str | Path,
                metrics: Optional[dict[str, float]] = None,
                timings: Optional[dict[str, float]] = None,
                config: Optional[dict[str, object]] = None) -> None:
    Path(path).write_text(dump_report(outcome, metrics, timings, config), encoding="utf-8")


def load_report(path: str | Path) -> dict:
    return parse_report(Path(path).read_text(encoding="utf-8"))


def metrics_dict(cmc_curve: np.ndarray, map_value: float, p_um_value: float) -> dict[str, float]:
    """Report metrics at the conventional ranks."""
    out = {}
    for rank in (1, 5, 10, 20):
        if rank <= cmc_curve.size:
            out[f"rank{rank}"] = float(cmc_curve[rank - 1])
    out["map"] = float(map_value)
    out["p_um"] = float(p_um_value)
    return out
