"""Shared fixtures: synthetic datasets, analytically constructed embedding
stores with known geometry, and a tiny on-disk image corpus.

Synthetic embeddings live in a 16-d space.  Each pair gets an orthonormal
triple (a, b, c); the text embedding is a and image embeddings are planar
rotations of a toward b, so every score is 100*cos(angle) by construction
and score differences are controlled exactly by the chosen angles.
"""

import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from pano_probe.corpus import Dataset, ImageTextPair
from pano_probe.scoring import (
    KIND_IMAGE,
    KIND_TEXT,
    PROMPT_ORIG,
    EmbeddingRecord,
    EmbeddingStore,
    generic_prompt_variant,
    normalize,
)
from pano_probe.transforms import (
    VARIANT_FLIP,
    VARIANT_ORIG,
    shift_schedule,
    shift_variant_label,
)

DIM = 16
FORMAT_CUE = "<360panorama>, "
GENERIC_CUES = ("", "image, ", "photo, ", "picture, ")

# Angle layout for the synthetic stores (radians).  The column-sensitive
# store rotates the image embedding by SHIFT_GAIN * sin(pi*delta/W)^2, which
# keeps the W/8 and 7W/8 shifts inside the flip-derived bound and pushes all
# middle shifts far outside it.
BASE_ANGLE = 0.3
BASE_JITTER = 0.02
FLIP_ANGLE_LO = 0.002
FLIP_ANGLE_SPAN = 0.002
SHIFT_GAIN = 0.02
CUE_ANGLE = 0.4
CUE_NUDGE = 0.05


def _orthonormal_triple(rng: np.random.RandomState):
    q, _ = np.linalg.qr(rng.randn(DIM, 3))
    return q[:, 0], q[:, 1], q[:, 2]


def _rot(a, b, angle):
    return np.cos(angle) * a + np.sin(angle) * b


def make_synthetic_dataset(n_pairs=50, width=1024, height=512, name="synthetic"):
    pairs = tuple(
        ImageTextPair(
            id=f"p{i:03d}",
            image_path=Path(f"images/p{i:03d}.png"),
            prompt=f"{FORMAT_CUE}scene number {i}",
            format_cue=FORMAT_CUE,
            content=f"scene number {i}",
        )
        for i in range(n_pairs)
    )
    return Dataset(pairs=pairs, width=width, height=height, name=name)


def build_synthetic_store(dataset, mode, divisions=8, cues=GENERIC_CUES):
    """Analytic embedding store over the given dataset.

    Modes:
      shift_invariant  -- all shifted image embeddings equal the original;
                          the flip is rotated by a small per-pair angle so
                          the stability bound stays positive.
      column_sensitive -- shifted embeddings rotate with the shift magnitude
                          (scores drift far outside the bound mid-schedule).
      cue_sensitive    -- original-prompt text embeddings are nudged toward
                          the image embedding; generic prompts are not.
      degenerate_textual -- generic text embeddings equal the original ones.
    """
    schedule = shift_schedule(dataset.width, divisions)
    records = []
    for i, pair in enumerate(dataset.pairs):
        rng = np.random.RandomState(7000 + i)
        a, b, c = _orthonormal_triple(rng)
        base = BASE_ANGLE + (rng.rand() - 0.5) * BASE_JITTER
        flip_angle = FLIP_ANGLE_LO + rng.rand() * FLIP_ANGLE_SPAN

        if mode in ("cue_sensitive", "degenerate_textual"):
            image_orig = _rot(a, b, CUE_ANGLE)
            generic_text = a
            if mode == "cue_sensitive":
                orig_text = normalize(a + CUE_NUDGE * image_orig)
            else:
                orig_text = a
            image_by_variant = {
                VARIANT_ORIG: image_orig,
                VARIANT_FLIP: image_orig,
                **{
                    shift_variant_label(d): image_orig
                    for d in schedule.magnitudes
                },
            }
        else:
            orig_text = a
            generic_text = _rot(a, c, 0.1)
            image_by_variant = {
                VARIANT_ORIG: _rot(a, b, base),
                VARIANT_FLIP: _rot(a, b, base + flip_angle),
            }
            for d in schedule.magnitudes:
                if mode == "shift_invariant":
                    shifted = image_by_variant[VARIANT_ORIG]
                else:  # column_sensitive
                    theta = SHIFT_GAIN * np.sin(np.pi * d / dataset.width) ** 2
                    shifted = _rot(a, b, base + theta)
                image_by_variant[shift_variant_label(d)] = shifted

        for variant, vec in image_by_variant.items():
            records.append(EmbeddingRecord(pair.id, KIND_IMAGE, variant, vec))
        records.append(EmbeddingRecord(pair.id, KIND_TEXT, PROMPT_ORIG, orig_text))
        for cue in cues:
            records.append(
                EmbeddingRecord(
                    pair.id, KIND_TEXT, generic_prompt_variant(cue), generic_text
                )
            )
    return EmbeddingStore(records)


@pytest.fixture(scope="session")
def synthetic_dataset():
    return make_synthetic_dataset()


@pytest.fixture(scope="session")
def frozen_store(synthetic_dataset):
    return build_synthetic_store(synthetic_dataset, "column_sensitive")


@pytest.fixture(scope="session")
def tuned_store(synthetic_dataset):
    return build_synthetic_store(synthetic_dataset, "shift_invariant")


@pytest.fixture(scope="session")
def textual_store(synthetic_dataset):
    return build_synthetic_store(synthetic_dataset, "cue_sensitive")


@pytest.fixture(scope="session")
def degenerate_store(synthetic_dataset):
    return build_synthetic_store(synthetic_dataset, "degenerate_textual")


def write_image_corpus(root: Path, n_pairs=2, width=16, height=8):
    """Tiny real image corpus: seeded random RGB panoramas plus a manifest."""
    images = root / "images"
    images.mkdir(parents=True, exist_ok=True)
    rng = np.random.RandomState(42)
    entries = []
    for i in range(n_pairs):
        arr = rng.randint(0, 256, size=(height, width, 3), dtype=np.uint8)
        name = f"pano{i}.png"
        Image.fromarray(arr).save(images / name)
        entries.append(
            {
                "id": f"pano{i}",
                "image": f"images/{name}",
                "prompt": f"{FORMAT_CUE}a tiny test scene {i}",
            }
        )
    manifest = {
        "name": "tiny",
        "width": width,
        "height": height,
        "format_cue": FORMAT_CUE,
        "pairs": entries,
    }
    path = root / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def image_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    return write_image_corpus(root)


class SyntheticEnv:
    """On-disk twin of the in-memory synthetic fixtures, for CLI/service use."""

    def __init__(self, root: Path, dataset, stores: dict):
        from pano_probe.scoring import store_write

        self.root = root
        self.dataset = dataset
        entries = [
            {"id": p.id, "image": str(p.image_path), "prompt": p.prompt}
            for p in dataset.pairs
        ]
        self.manifest = root / "manifest.json"
        self.manifest.write_text(
            json.dumps(
                {
                    "name": dataset.name,
                    "width": dataset.width,
                    "height": dataset.height,
                    "format_cue": FORMAT_CUE,
                    "pairs": entries,
                },
                indent=2,
            ),
            encoding="utf-8",
        )
        self.stores = {}
        for name, store in stores.items():
            path = root / f"{name}_store.jsonl"
            store_write(store.records(), path)
            self.stores[name] = path


@pytest.fixture(scope="session")
def synthetic_env(tmp_path_factory, synthetic_dataset, frozen_store, tuned_store,
                  textual_store):
    root = tmp_path_factory.mktemp("synthetic_env")
    return SyntheticEnv(
        root,
        synthetic_dataset,
        {"frozen": frozen_store, "tuned": tuned_store, "textual": textual_store},
    )


def write_engineered_curves(root: Path):
    """Loss-curve pair whose knee sits at epoch 3 with the reference values."""
    c1 = [1.0 / (e + 1) for e in range(20)]
    c1[3] = 0.0212
    c0 = [2.0 + 0.01 * e for e in range(20)]
    c0[3] = 1.8854
    p1, p0 = root / "curve_lambda1.csv", root / "curve_lambda0.csv"
    p1.write_text(
        "epoch,loss\n" + "\n".join(f"{e},{v}" for e, v in enumerate(c1)) + "\n"
    )
    p0.write_text(
        "epoch,loss\n" + "\n".join(f"{e},{v}" for e, v in enumerate(c0)) + "\n"
    )
    return p1, p0
