"""Dataset ingestion, seeded splits, and synthetic texture corpora.

Directory datasets follow the one-subdirectory-per-class layout
(root/<class_name>/*.png|jpg) with deterministic byte-wise lexicographic
ordering and lazy decoding. The synthetic generator produces 64 x 64 RGB
sinusoid textures whose class identity is a (hue, frequency, noise) triple,
giving reproducible stand-ins for experiments when no image corpus is at
hand.
"""

import colorsys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .color_flow import read_image

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


@dataclass(frozen=True)
class Dataset:
    """Items are (id, source, label) with dense class indices.

    A source is either an image path (decoded lazily) or an in-memory uint8
    array for synthetic data.
    """

    ids: list
    sources: list
    labels: np.ndarray
    class_names: list
    origin: str

    def __len__(self):
        return len(self.sources)

    @property
    def n_classes(self):
        return len(self.class_names)

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.n_classes)

    def image(self, i):
        """Decode item i to an (H, W, 3) uint8 array."""
        src = self.sources[i]
        if isinstance(src, np.ndarray):
            return src
        try:
            return read_image(src)
        except Exception as exc:
            raise ValueError(f"cannot read image {src}: {exc}") from exc

    def subset(self, indices):
        indices = list(indices)
        return Dataset(
            ids=[self.ids[i] for i in indices],
            sources=[self.sources[i] for i in indices],
            labels=self.labels[indices],
            class_names=list(self.class_names),
            origin=self.origin,
        )


@dataclass(frozen=True)
class SplitSpec:
    """Seeded train/test split parameters."""

    test_fraction: float
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")


@dataclass(frozen=True)
class TextureSpec:
    """One synthetic texture class: base hue, sinusoid frequency, noise level.

    orientation (radians) is optional; when omitted, a fixed default angle is
    used, so classes with equal (hue, frequency, noise) are indistinguishable.
    """

    hue: float
    frequency: float
    noise: float
    orientation: float = None


def load_dir(root, class_filter=None):
    """Load a directory dataset with deterministic ordering.

    Classes are the subdirectory names sorted lexicographically; files sort
    the same way within each class. Decoding happens lazily at access time.

    Parameters
    ----------
    root : dataset root containing one subdirectory per class
    class_filter : optional list of class names to keep (indices reassigned
        densely, in lexicographic order)

    Returns
    -------
    Dataset
    """
    root = Path(root)
    if not root.is_dir():
        raise ValueError(f"dataset root {root} is not a directory")
    names = sorted(p.name for p in root.iterdir() if p.is_dir())
    if class_filter is not None:
        wanted = set(class_filter)
        missing = wanted - set(names)
        if missing:
            raise ValueError(f"class_filter names not found under {root}: {sorted(missing)}")
        names = [n for n in names if n in wanted]
    if not names:
        raise ValueError(f"no class directories found under {root}")
    ids, sources, labels = [], [], []
    for label, name in enumerate(names):
        files = sorted(
            p for p in (root / name).iterdir()
            if p.is_file() and p.suffix.lower() in _IMAGE_SUFFIXES
        )
        if not files:
            raise ValueError(f"class directory {name!r} contains no images")
        for p in files:
            ids.append(f"{name}/{p.name}")
            sources.append(p)
            labels.append(label)
    return Dataset(ids=ids, sources=sources, labels=np.array(labels, dtype=np.int64),
                   class_names=names, origin=str(root))


def _round_half_up(x):
    # Schoolbook rounding; avoids banker's rounding of round().
    return int(np.floor(x + 0.5))


def split(ds, spec):
    """Split a dataset into disjoint train and test parts.

    Stratified (default): each class contributes round(count * test_fraction)
    test items, drawn by a seeded shuffle. The union of the parts is exactly
    the input; an error is raised if any class would end up empty on either
    side.

    Returns
    -------
    (train, test) : Dataset pair
    """
    gen = np.random.Generator(np.random.Philox(spec.seed))
    if spec.stratified:
        train_idx, test_idx = [], []
        for c in range(ds.n_classes):
            members = np.flatnonzero(ds.labels == c)
            if len(members) < 2:
                raise ValueError(f"class {ds.class_names[c]!r} has fewer than 2 items")
            n_test = _round_half_up(len(members) * spec.test_fraction)
            if n_test == 0 or n_test == len(members):
                raise ValueError(
                    f"test_fraction {spec.test_fraction} leaves class "
                    f"{ds.class_names[c]!r} empty on one side"
                )
            perm = gen.permutation(len(members))
            test_idx.extend(members[perm[:n_test]])
            train_idx.extend(members[perm[n_test:]])
    else:
        n_test = _round_half_up(len(ds) * spec.test_fraction)
        if n_test == 0 or n_test == len(ds):
            raise ValueError(
                f"test_fraction {spec.test_fraction} leaves one side of the split empty"
            )
        perm = gen.permutation(len(ds))
        test_idx = perm[:n_test].tolist()
        train_idx = perm[n_test:].tolist()
    return ds.subset(train_idx), ds.subset(test_idx)


def synth_image(gen, spec, orientation, size=64):
    """Render one synthetic texture sample.

    The pattern is a rotated sinusoid whose phase jitter scales with the
    noise level (a noiseless class is perfectly repeatable), colored by the
    class hue, plus white pixel noise.
    """
    yy, xx = np.mgrid[0:size, 0:size] / size
    phase = gen.uniform(-np.pi, np.pi) * min(1.0, 2.0 * spec.noise)
    wave = xx * np.cos(orientation) + yy * np.sin(orientation)
    pattern = np.sin(2.0 * np.pi * spec.frequency * wave + phase)
    base = np.array(colorsys.hsv_to_rgb(spec.hue % 1.0, 0.85, 0.9))
    img = base[None, None, :] * (0.55 + 0.35 * pattern)[..., None]
    img = img + gen.normal(0.0, 0.5 * spec.noise, img.shape)
    return (np.clip(img, 0.0, 1.0) * 255.0).round().astype(np.uint8)


def synth_textures(n_per_class, classes, seed=0):
    """Generate a synthetic texture dataset.

    Parameters
    ----------
    n_per_class : samples per class, >= 1
    classes : sequence of TextureSpec (or (hue, frequency, noise) tuples)
    seed : generator seed; the same seed gives bit-identical images

    Returns
    -------
    Dataset with in-memory images
    """
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")
    specs = [c if isinstance(c, TextureSpec) else TextureSpec(*c) for c in classes]
    if not specs:
        raise ValueError("need at least one class spec")
    gen = np.random.Generator(np.random.Philox(seed))
    ids, sources, labels = [], [], []
    for label, spec in enumerate(specs):
        orientation = spec.orientation
        if orientation is None:
            orientation = 0.25 * np.pi
        for j in range(n_per_class):
            ids.append(f"class{label}/{j:04d}")
            sources.append(synth_image(gen, spec, orientation))
            labels.append(label)
    return Dataset(ids=ids, sources=sources, labels=np.array(labels, dtype=np.int64),
                   class_names=[f"class{i}" for i in range(len(specs))],
                   origin="synthetic")


def synth_preset(name):
    """Frozen texture presets.

    "distinctive": well-separated hues and frequencies, near-noiseless, one
    orientation per class. "overlapped": adjacent hues and frequencies at a
    shared orientation under heavy noise, deliberately hard to separate.
    """
    if name == "distinctive":
        return [
            TextureSpec(hue=0.2 * i, frequency=f, noise=0.02,
                        orientation=(0.2 * np.pi * i) % np.pi)
            for i, f in enumerate([2.0, 5.0, 9.0, 14.0, 20.0])
        ]
    if name == "overlapped":
        return [
            TextureSpec(hue=0.50 + 0.02 * i, frequency=6.0 + 0.3 * i, noise=0.5,
                        orientation=0.25 * np.pi)
            for i in range(5)
        ]
    raise ValueError(f"unknown preset {name!r}, expected 'distinctive' or 'overlapped'")
