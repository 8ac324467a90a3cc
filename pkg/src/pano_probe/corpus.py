"""Manifest ingestion: prompt decomposition into format cue + content
descriptor, directional-cue filtering and generic-prompt synthesis.

Prompts are treated as opaque strings; the only operations performed on them
are prefix decomposition and case-insensitive substring matching.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .errors import ManifestError, ValidationError

__all__ = [
    "ImageTextPair",
    "Dataset",
    "GenericPrompt",
    "parse_manifest",
    "substitute_cue",
    "filter_directional",
    "default_directional_cues",
]


@dataclass(frozen=True)
class ImageTextPair:
    """One panorama with its prompt, decomposed as prompt == format_cue + content."""

    id: str
    image_path: Path
    prompt: str
    format_cue: str
    content: str

    def __post_init__(self):
        if self.format_cue + self.content != self.prompt:
            raise ValidationError(
                f"pair {self.id!r}: format_cue + content does not reconstruct prompt"
            )


@dataclass(frozen=True)
class Dataset:
    pairs: tuple[ImageTextPair, ...]
    width: int
    height: int
    name: str

    def __post_init__(self):
        if len(self.pairs) < 1:
            raise ValidationError("a dataset needs at least one pair")
        seen = set()
        for p in self.pairs:
            if p.id in seen:
                raise ValidationError(f"duplicate pair id {p.id!r}")
            seen.add(p.id)

    def __len__(self):
        return len(self.pairs)


@dataclass(frozen=True)
class GenericPrompt:
    """Prompt variant with the format cue swapped for a generic cue."""

    pair_id: str
    generic_cue: str
    text: str


def _decompose(prompt: str, cue: str) -> tuple[str, str]:
    if cue and prompt.startswith(cue):
        return cue, prompt[len(cue):]
    return "", prompt


def parse_manifest(path) -> Dataset:
    """Load a dataset manifest (JSON, see README for the schema).

    Each entry's prompt is decomposed against the manifest's declared format
    cue (or the entry's own override); entries whose prompt does not start
    with the cue get format_cue "" and content == prompt.  Image paths are
    resolved relative to the manifest's directory.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc

    if not isinstance(doc, dict):
        raise ManifestError(f"{path}: top level must be a JSON object")
    for field in ("name", "width", "height", "format_cue", "pairs"):
        if field not in doc:
            raise ManifestError(f"{path}: missing required field {field!r}")
    if not isinstance(doc["pairs"], list):
        raise ManifestError(f"{path}: 'pairs' must be a list")
    if len(doc["pairs"]) == 0:
        raise ValidationError(f"{path}: manifest declares no pairs")

    base = path.parent
    default_cue = doc["format_cue"]
    pairs = []
    for i, entry in enumerate(doc["pairs"]):
        if not isinstance(entry, dict):
            raise ManifestError(f"{path}: pairs[{i}] is not an object")
        for field in ("id", "image", "prompt"):
            if field not in entry:
                raise ManifestError(f"{path}: pairs[{i}] missing field {field!r}")
        cue = entry.get("format_cue", default_cue)
        format_cue, content = _decompose(entry["prompt"], cue)
        pairs.append(
            ImageTextPair(
                id=str(entry["id"]),
                image_path=base / entry["image"],
                prompt=entry["prompt"],
                format_cue=format_cue,
                content=content,
            )
        )
    try:
        return Dataset(
            pairs=tuple(pairs),
            width=int(doc["width"]),
            height=int(doc["height"]),
            name=str(doc["name"]),
        )
    except ValidationError as exc:
        raise ManifestError(f"{path}: {exc}") from exc


def substitute_cue(pair: ImageTextPair, generic_cue: str) -> GenericPrompt:
    """Replace the pair's format cue with a generic cue.

    When the pair carries no format cue the generic cue is simply prepended
    to the content; the original pair is never modified.
    """
    return GenericPrompt(
        pair_id=pair.id,
        generic_cue=generic_cue,
        text=generic_cue + pair.content,
    )


def filter_directional(dataset: Dataset, cues) -> Dataset:
    """Drop pairs whose prompt contains any of the given cue substrings.

    Matching is case-insensitive on the raw prompt; order is preserved.
    Idempotent, and monotone in the cue list.  Raises if every pair would be
    removed (a dataset may not be empty).
    """
    cues = list(cues)
    if not cues:
        raise ValidationError("cue list must be non-empty")
    lowered = [c.lower() for c in cues]
    kept = tuple(
        p for p in dataset.pairs
        if not any(c in p.prompt.lower() for c in lowered)
    )
    if not kept:
        raise ValidationError("directional-cue filter removed every pair")
    return replace(dataset, pairs=kept)


def default_directional_cues() -> list[str]:
    """Directional-cue list shipped as package data (editable config, not
    hard-coded truth)."""
    data = resources.files("pano_probe").joinpath("data/directional_cues.json")
    return json.loads(data.read_text(encoding="utf-8"))
