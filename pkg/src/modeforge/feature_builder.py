"""Fixed-dimension feature vectors from DMD low-rank / sparse components.

The pipeline per image: convert to Lab, assemble snapshots, run DMD at rank
J, split into background L and residual S, take the column corresponding to
the first luminance snapshot from each, pool both planes down to a small
grid, min-max normalize each pooled block independently, and concatenate.
With the default 16 x 20 pooling the result is 2 * 320 = 640 dimensions.
"""

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .color_flow import DEFAULT_ORDER, build_snapshots, rgb_to_lab
from .dmd_core import dmd, lowrank_sparse_split

DMDF_MAGIC = b"DMDF"
DMDF_VERSION = 1


@dataclass(frozen=True)
class FeatureConfig:
    """Feature extraction knobs.

    2 * pool_shape[0] * pool_shape[1] must equal D; the default 16 x 20
    pooling of the two component planes yields the default D = 640.
    """

    J: int = 5
    D: int = 640
    pool_shape: tuple = (16, 20)
    eps: float = 1e-2
    order: tuple = DEFAULT_ORDER

    def __post_init__(self):
        rows, cols = self.pool_shape
        if 2 * rows * cols != self.D:
            raise ValueError(
                f"pool shape {self.pool_shape} yields {2 * rows * cols} dims, expected D={self.D}"
            )
        if self.J < 1:
            raise ValueError(f"J must be >= 1, got {self.J}")
        if self.J > len(self.order) - 1:
            raise ValueError(
                f"J={self.J} exceeds the {len(self.order) - 1} snapshot transitions of order {self.order}"
            )

    def digest(self):
        """Short stable hash of the configuration."""
        key = repr((self.J, self.D, tuple(self.pool_shape), self.eps, tuple(self.order)))
        return hashlib.sha1(key.encode()).hexdigest()[:10]


@dataclass(frozen=True)
class FeatureVector:
    """One image's feature vector plus provenance metadata."""

    values: np.ndarray
    meta: dict = field(default_factory=dict)


def minmax_normalize(block):
    """Map a finite block affinely onto [0, 1]; constant blocks map to zeros.

    Constancy is judged against a relative floor: a span below 1e-12 of the
    block magnitude is rounding noise (pooling a constant plane leaves ulp
    level ripples), and stretching it to [0, 1] would fabricate structure.
    """
    block = np.asarray(block, dtype=np.float64)
    lo = block.min()
    hi = block.max()
    span = hi - lo
    if span <= 1e-12 * max(abs(lo), abs(hi), 1.0):
        return np.zeros_like(block)
    return (block - lo) / span


def average_pool(plane, target):
    """Average-pool a plane onto a target grid of near-equal cells.

    The plane is partitioned into target[0] x target[1] rectangular cells;
    when the plane size does not divide evenly, the remainder pixels go to
    the leading cells. Each output entry is the mean of its cell.
    """
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2:
        raise ValueError(f"expected a 2-D plane, got shape {plane.shape}")
    H, W = plane.shape
    rows, cols = target
    if rows > H or cols > W:
        raise ValueError(f"pool target {target} exceeds plane shape {plane.shape}")

    def sizes(n, parts):
        q, r = divmod(n, parts)
        return np.array([q + 1] * r + [q] * (parts - r))

    rs = sizes(H, rows)
    cs = sizes(W, cols)
    rstart = np.concatenate([[0], np.cumsum(rs)[:-1]])
    cstart = np.concatenate([[0], np.cumsum(cs)[:-1]])
    sums = np.add.reduceat(np.add.reduceat(plane, rstart, axis=0), cstart, axis=1)
    return sums / np.outer(rs, cs)


def extract_feature(image, cfg=FeatureConfig(), image_id=None):
    """Extract the pooled, normalized low-rank / sparse feature vector.

    Parameters
    ----------
    image : (H, W, 3) uint8 array
    cfg : FeatureConfig
    image_id : optional identifier recorded in the metadata

    Returns
    -------
    FeatureVector with cfg.D values in [0, 1]
    """
    lab = rgb_to_lab(image)
    snaps = build_snapshots(lab, cfg.order)
    try:
        col = cfg.order.index("L")
    except ValueError:
        raise ValueError(f"snapshot order {cfg.order} contains no L plane") from None
    shape = (snaps.height, snaps.width)
    if not np.any(snaps.data):
        # All-black image: no dynamics to decompose, both components vanish.
        low_plane = np.zeros(shape)
        sparse_plane = np.zeros(shape)
    else:
        result = dmd(snaps, cfg.J)
        pair = lowrank_sparse_split(result, snaps, cfg.eps)
        low_plane = pair.lowrank[:, col].reshape(shape)
        sparse_plane = pair.sparse[:, col].reshape(shape)
    low_block = minmax_normalize(average_pool(low_plane, cfg.pool_shape))
    sparse_block = minmax_normalize(average_pool(sparse_plane, cfg.pool_shape))
    values = np.concatenate([low_block.ravel(), sparse_block.ravel()])
    meta = {"image_id": image_id, "J": cfg.J, "config": cfg.digest()}
    return FeatureVector(values=values, meta=meta)


def _format_value(v):
    # Shortest decimal that round-trips the float32 value exactly.
    return np.format_float_positional(np.float32(v), unique=True, trim="-")


def write_features_csv(path, ids, labels, values):
    """Write a feature table as CSV: id, label, then D feature columns.

    Values are stored at float32 precision so the CSV and DMDF formats carry
    bit-identical numbers.
    """
    values = np.asarray(values)
    n, D = values.shape
    header = "id,label," + ",".join(f"f{j:03d}" for j in range(D))
    lines = [header]
    for i in range(n):
        row = ",".join(_format_value(v) for v in values[i])
        lines.append(f"{ids[i]},{labels[i]},{row}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_features_csv(path):
    """Read a feature CSV back into (ids, labels, float32 matrix)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if len(lines) < 2:
        raise ValueError(f"feature file {path} has no data rows")
    ids, labels, rows = [], [], []
    for ln in lines[1:]:
        parts = ln.split(",")
        ids.append(parts[0])
        labels.append(int(parts[1]))
        rows.append([np.float32(p) for p in parts[2:]])
    return ids, np.array(labels, dtype=np.int32), np.array(rows, dtype=np.float32)


def write_features_dmdf(path, ids, labels, values):
    """Write a feature table in the compact DMDF binary format.

    Layout (little endian): magic "DMDF", version u16, D u32, n u32,
    n*D float32 row-major values, n int32 labels, then n ids each as a
    u16 byte length plus UTF-8 bytes.
    """
    values = np.asarray(values, dtype=np.float32)
    n, D = values.shape
    with open(path, "wb") as fh:
        fh.write(DMDF_MAGIC)
        fh.write(struct.pack("<HII", DMDF_VERSION, D, n))
        fh.write(values.astype("<f4").tobytes())
        fh.write(np.asarray(labels, dtype="<i4").tobytes())
        for image_id in ids:
            raw = str(image_id).encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)


def read_features_dmdf(path):
    """Read a DMDF binary feature file back into (ids, labels, float32 matrix)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 14 or blob[:4] != DMDF_MAGIC:
        raise ValueError(f"{path} is not a DMDF feature file")
    version, D, n = struct.unpack_from("<HII", blob, 4)
    if version != DMDF_VERSION:
        raise ValueError(f"unsupported DMDF version {version}")
    off = 14
    values = np.frombuffer(blob, dtype="<f4", count=n * D, offset=off).reshape(n, D)
    off += 4 * n * D
    labels = np.frombuffer(blob, dtype="<i4", count=n, offset=off)
    off += 4 * n
    ids = []
    for _ in range(n):
        (length,) = struct.unpack_from("<H", blob, off)
        off += 2
        ids.append(blob[off:off + length].decode("utf-8"))
        off += length
    return ids, labels.astype(np.int32), values.astype(np.float32)


def read_features(path):
    """Read a feature file, CSV or DMDF, by sniffing the leading bytes."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == DMDF_MAGIC:
        return read_features_dmdf(path)
    return read_features_csv(path)
