"""
Synthetic dataset writing and loading.

Layout of a dataset directory:

    images/NNNN.pgm   16-bit scene images
    masks/NNNN.pgm    8-bit masks (0 or 255)
    manifest.json     template spec, per-scene seeds, file pairs, centroids

Usage:
    # Write three 64x64 scenes
    python -m lohgnet gen --out data/train --count 3 --size 64 --seed 7

Per-scene seeds are drawn from ``np.random.SeedSequence(seed)``, so the
same arguments always give byte-identical directories.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from lohgnet.core.constants import SCALE_DIVISOR
from lohgnet.core.errors import DimensionError, FormatError, InputError
from lohgnet.data.pgm import read_pgm, write_pgm
from lohgnet.data.synth import SceneSpec, generate
from lohgnet.schemas.manifest import DatasetEntry, Manifest

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
IMAGE_DIR = "images"
MASK_DIR = "masks"
IMAGE_BITS = 16
PROBABILITY_SUFFIX = ".prob.pgm"
MAX_SEED = 2 ** 64


@dataclass
class Sample:
    """Image (1 x H x W in [0, 1]) and binary mask (1 x H x W) read from disk."""

    name: str
    image: np.ndarray
    mask: np.ndarray


def scene_seeds(seed: int, count: int) -> List[int]:
    """Independent 64-bit seeds for ``count`` scenes."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]


def write_dataset(
    out: Path,
    count: int,
    size: int,
    seed: int,
    template: Optional[SceneSpec] = None,
) -> Manifest:
    """
    Generate ``count`` scenes of ``size`` x ``size`` into ``out``.

    Args:
        out: Dataset root (created if missing)
        count: Number of scenes
        size: Square extent; must be divisible by 16
        seed: Master seed
        template: Scene parameters other than extents and seed

    Returns:
        The manifest that was written

    Raises:
        DimensionError: ``size`` not divisible by 16
        InputError: Negative ``count``, or ``seed`` outside [0, 2**64)
        GenerationError: A scene could not be placed
    """
    if count < 0:
        raise InputError(f"scene count must be non-negative, got {count}")
    if not 0 <= seed < MAX_SEED:
        raise InputError(f"seed must lie in [0, 2**64), got {seed}")
    if size < SCALE_DIVISOR or size % SCALE_DIVISOR:
        raise DimensionError(f"scene size {size} must be a positive multiple of {SCALE_DIVISOR}")
    out = Path(out)
    spec = (template or SceneSpec()).model_copy(update={"width": size, "height": size, "seed": seed})

    entries = []
    for index, scene_seed in enumerate(scene_seeds(seed, count)):
        scene = generate(spec.model_copy(update={"seed": scene_seed}))
        image_rel = f"{IMAGE_DIR}/{index:04d}.pgm"
        mask_rel = f"{MASK_DIR}/{index:04d}.pgm"
        write_pgm(out / image_rel, scene.image[0], bits=IMAGE_BITS)
        write_pgm(out / mask_rel, scene.mask[0].astype(np.float64), bits=8)
        entries.append(DatasetEntry(
            index=index,
            seed=scene_seed,
            image=image_rel,
            mask=mask_rel,
            centroids=scene.target_centroids,
        ))

    manifest = Manifest(seed=seed, count=count, spec=spec, entries=entries)
    (out / MANIFEST_NAME).write_text(
        json.dumps(manifest.model_dump(mode="json"), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    logger.info("wrote %d scenes (%dx%d) to %s", count, size, size, out)
    return manifest


def read_manifest(root: Path) -> Manifest:
    path = Path(root) / MANIFEST_NAME
    try:
        return Manifest.model_validate_json(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise InputError(f"dataset manifest not found: {path}") from exc
    except ValidationError as exc:
        raise FormatError(f"{path} is not a valid manifest: {exc}") from exc


def load_mask(path: Path) -> np.ndarray:
    """Read a mask PGM as uint8 {0, 1} (any sample above half of maxval is set)."""
    return (read_pgm(path) > 0.5).astype(np.uint8)


def load_dataset(root: Path) -> Tuple[Manifest, List[Sample]]:
    """
    Read every image/mask pair listed in the manifest.

    Raises:
        InputError: Manifest or listed file missing
        FormatError: Corrupt manifest or PGM
    """
    root = Path(root)
    manifest = read_manifest(root)
    samples = [
        Sample(
            name=Path(entry.image).stem,
            image=read_pgm(root / entry.image)[np.newaxis],
            mask=load_mask(root / entry.mask)[np.newaxis],
        )
        for entry in manifest.entries
    ]
    return manifest, samples


def load_mask_dir(directory: Path) -> List[Tuple[str, np.ndarray]]:
    """
    All ``*.pgm`` masks of a directory, sorted by name.

    ``NAME.prob.pgm`` probability maps written next to masks are skipped.

    Accepts a dataset root (uses its ``masks/``) or a plain directory of PGMs.
    """
    directory = Path(directory)
    if (directory / MASK_DIR).is_dir():
        directory = directory / MASK_DIR
    if not directory.is_dir():
        raise InputError(f"mask directory not found: {directory}")
    paths = sorted(p for p in directory.glob("*.pgm") if not p.name.endswith(PROBABILITY_SUFFIX))
    if not paths:
        raise InputError(f"no .pgm mask files in {directory}")
    return [(path.stem, load_mask(path)) for path in paths]
