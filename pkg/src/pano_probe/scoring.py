"""Embedding records, alignment scores, the line-oriented embedding store,
and the provider abstraction (file store lookup or remote HTTP service).

Store format: UTF-8 text, line 1 a JSON header {"dim", "count", "normalized"},
then one JSON object per record.  Vector components are serialized with 17
significant digits, which makes the 64-bit round trip exact.
"""

from __future__ import annotations

import base64
import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import httpx
import numpy as np

from .errors import (
    MissingEmbeddingError,
    ServiceTransportError,
    StoreFormatError,
    ValidationError,
)

__all__ = [
    "KIND_IMAGE",
    "KIND_TEXT",
    "PROMPT_ORIG",
    "EmbeddingRecord",
    "EmbeddingStore",
    "EmbeddingProvider",
    "ServiceProvider",
    "normalize",
    "clip_score",
    "store_read",
    "store_write",
    "generic_prompt_variant",
]

KIND_IMAGE = "image"
KIND_TEXT = "text"

PROMPT_ORIG = "prompt:orig"

NORM_TOLERANCE = 1e-4


def generic_prompt_variant(generic_cue: str) -> str:
    """Stable variant label for text embeddings of a generic-cue prompt.

    The label carries a content hash of the cue so that experiments with many
    cues coexist in one store.
    """
    digest = hashlib.sha256(generic_cue.encode("utf-8")).hexdigest()[:12]
    return f"prompt:generic:{digest}"


def normalize(vector) -> np.ndarray:
    """Scale a vector to unit Euclidean norm, preserving direction."""
    v = np.asarray(vector, dtype=float)
    if v.ndim != 1:
        raise ValidationError("expected a 1-d vector")
    n = float(np.linalg.norm(v))
    if n == 0.0 or not np.isfinite(n):
        raise ValidationError("cannot normalize a zero or non-finite vector")
    return v / n


def clip_score(image_emb, text_emb) -> float:
    """Alignment score max(100 * image . text, 0) for unit-norm embeddings."""
    a = np.asarray(image_emb, dtype=float)
    b = np.asarray(text_emb, dtype=float)
    if a.shape != b.shape:
        raise ValidationError(f"embedding dimensions differ: {a.shape} vs {b.shape}")
    return max(100.0 * float(np.dot(a, b)), 0.0)


@dataclass
class EmbeddingRecord:
    """Unit-norm vector keyed by (pair_id, kind, variant)."""

    pair_id: str
    kind: str
    variant: str
    vector: np.ndarray

    def __post_init__(self):
        if self.kind not in (KIND_IMAGE, KIND_TEXT):
            raise ValidationError(f"unknown embedding kind {self.kind!r}")
        self.vector = np.asarray(self.vector, dtype=float)
        n = float(np.linalg.norm(self.vector))
        if abs(n - 1.0) > NORM_TOLERANCE:
            raise ValidationError(
                f"record ({self.pair_id!r}, {self.kind!r}, {self.variant!r}) "
                f"is not unit-norm (|v| = {n:.6g})"
            )

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.pair_id, self.kind, self.variant)


class EmbeddingProvider(Protocol):
    def fetch(self, pair_id: str, kind: str, variant: str) -> np.ndarray: ...


class EmbeddingStore:
    """In-memory embedding collection with pure, repeatable lookup."""

    def __init__(self, records=()):
        self._records: dict[tuple[str, str, str], EmbeddingRecord] = {}
        self.dim: int | None = None
        for r in records:
            self.add(r)

    def __len__(self):
        return len(self._records)

    def add(self, record: EmbeddingRecord) -> None:
        if self.dim is None:
            self.dim = record.vector.size
        elif record.vector.size != self.dim:
            raise StoreFormatError(
                f"record {record.key} has dimension {record.vector.size}, "
                f"store dimension is {self.dim}"
            )
        if record.key in self._records:
            raise StoreFormatError(f"duplicate record key {record.key}")
        self._records[record.key] = record

    def records(self) -> list[EmbeddingRecord]:
        return list(self._records.values())

    def fetch(self, pair_id: str, kind: str, variant: str) -> np.ndarray:
        try:
            return self._records[(pair_id, kind, variant)].vector
        except KeyError:
            raise MissingEmbeddingError(pair_id, kind, variant) from None


def _format_vector(vector: np.ndarray) -> str:
    return "[" + ", ".join(format(float(v), ".17g") for v in vector) + "]"


def store_write(records, path) -> None:
    """Serialize records to the store file format (sorted by key, so output
    bytes are independent of input order)."""
    records = sorted(records, key=lambda r: r.key)
    dims = {r.vector.size for r in records}
    if len(dims) > 1:
        raise StoreFormatError(f"records mix dimensions: {sorted(dims)}")
    dim = dims.pop() if dims else 0
    lines = [json.dumps({"dim": int(dim), "count": len(records), "normalized": True})]
    for r in records:
        head = json.dumps(
            {"pair_id": r.pair_id, "kind": r.kind, "variant": r.variant},
            ensure_ascii=False,
        )
        lines.append(head[:-1] + ', "vector": ' + _format_vector(r.vector) + "}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def store_read(path) -> EmbeddingStore:
    """Parse a store file, validating the header against the records."""
    path = Path(path)
    try:
        fh = path.open("r", encoding="utf-8")
    except OSError as exc:
        raise StoreFormatError(f"cannot read store {path}: {exc}") from exc
    with fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise StoreFormatError(f"{path}: empty store file (missing header)")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise StoreFormatError(f"{path}: invalid header: {exc.msg}") from exc
        for field in ("dim", "count", "normalized"):
            if field not in header:
                raise StoreFormatError(f"{path}: header missing {field!r}")
        store = EmbeddingStore()
        expected_dim = int(header["dim"])
        count = 0
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StoreFormatError(
                    f"{path}: record {i}: invalid JSON: {exc.msg}"
                ) from exc
            vector = np.asarray(doc["vector"], dtype=float)
            if vector.size != expected_dim:
                raise StoreFormatError(
                    f"{path}: record {i}: dimension {vector.size}, "
                    f"header says {expected_dim}"
                )
            try:
                store.add(
                    EmbeddingRecord(
                        pair_id=doc["pair_id"],
                        kind=doc["kind"],
                        variant=doc["variant"],
                        vector=vector,
                    )
                )
            except (KeyError, ValidationError) as exc:
                raise StoreFormatError(f"{path}: record {i}: {exc}") from exc
            count += 1
    if count != int(header["count"]):
        raise StoreFormatError(
            f"{path}: header declares {header['count']} records, found {count} "
            "(truncated file?)"
        )
    return store


class ServiceProvider:
    """Embedding provider backed by an HTTP service (POST /embed).

    Keys are resolved to payloads through the dataset (prompt text) and the
    variant index (image files); responses are normalized and cached, so
    repeated fetches are pure.  Transport failures are retried a bounded
    number of times before aborting.
    """

    def __init__(
        self,
        url: str,
        dataset,
        variant_index=None,
        generic_cues=(),
        max_retries: int = 3,
        retry_wait: float = 0.2,
        client: httpx.Client | None = None,
    ):
        self.url = url.rstrip("/")
        self._pairs = {p.id: p for p in dataset.pairs}
        self._index = variant_index
        self._cue_by_variant = {
            generic_prompt_variant(c): c for c in generic_cues
        }
        self.max_retries = max_retries
        self.retry_wait = retry_wait
        self._client = client or httpx.Client()
        self._cache: dict[tuple[str, str, str], np.ndarray] = {}

    def _payload(self, pair_id: str, kind: str, variant: str) -> dict:
        if pair_id not in self._pairs:
            raise MissingEmbeddingError(pair_id, kind, variant)
        pair = self._pairs[pair_id]
        if kind == KIND_TEXT:
            if variant == PROMPT_ORIG:
                return {"kind": KIND_TEXT, "data": pair.prompt}
            if variant in self._cue_by_variant:
                cue = self._cue_by_variant[variant]
                return {"kind": KIND_TEXT, "data": cue + pair.content}
            raise MissingEmbeddingError(pair_id, kind, variant)
        try:
            if self._index is not None:
                image_path = self._index.path(pair_id, variant)
            elif variant == "orig":
                # the original image is reachable without a variant index
                image_path = pair.image_path
            else:
                raise MissingEmbeddingError(pair_id, kind, variant)
            raw = Path(image_path).read_bytes()
        except (ValidationError, OSError):
            raise MissingEmbeddingError(pair_id, kind, variant) from None
        return {
            "kind": KIND_IMAGE,
            "data": base64.b64encode(raw).decode("ascii"),
        }

    def fetch(self, pair_id: str, kind: str, variant: str) -> np.ndarray:
        key = (pair_id, kind, variant)
        if key in self._cache:
            return self._cache[key]
        payload = self._payload(pair_id, kind, variant)
        last_error = None
        for attempt in range(self.max_retries):
            try:
                resp = self._client.post(self.url + "/embed", json=payload)
                resp.raise_for_status()
                vector = normalize(resp.json()["vector"])
                self._cache[key] = vector
                return vector
            except (httpx.TransportError, httpx.HTTPStatusError) as exc:
                last_error = exc
                if attempt + 1 < self.max_retries:
                    time.sleep(self.retry_wait * (attempt + 1))
        raise ServiceTransportError(
            f"embedding service failed after {self.max_retries} attempts "
            f"for {key}: {last_error}"
        )
