"""Synthetic finite tasks with known ground truth, plus IDX file I/O.

Synthetic tasks are the primary verification vehicle: every bound needs
the exact joint distribution, which only a constructed table provides.
The IDX reader/writer covers the classic big-endian image/label format
(uncompressed; decompress files beforehand) for qualitative runs on
real data subsets.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .bounds import FinitePD
from .errors import IdxFormatError, InputError

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass(frozen=True)
class SyntheticTaskSpec:
    """Parameters of a generated finite task.

    ``conditional_sharpness`` is the symmetric Dirichlet concentration
    of the label conditionals; zero requests deterministic (one-hot)
    rows.  The feature marginal is always uniform and each feature index
    is embedded as a fixed random unit vector.
    """

    card_x: int
    card_y: int
    embed_dim: int
    conditional_sharpness: float
    seed: int

    def __post_init__(self):
        if int(self.card_x) < 2 or int(self.card_y) < 2:
            raise InputError("card_x and card_y must be >= 2")
        if int(self.embed_dim) < 1:
            raise InputError("embed_dim must be positive")
        if float(self.conditional_sharpness) < 0.0:
            raise InputError("conditional_sharpness must be >= 0")

    def to_dict(self):
        return {
            "cardX": self.card_x,
            "cardY": self.card_y,
            "embedDim": self.embed_dim,
            "conditionalSharpness": self.conditional_sharpness,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d):
        return SyntheticTaskSpec(
            card_x=int(d["cardX"]),
            card_y=int(d["cardY"]),
            embed_dim=int(d["embedDim"]),
            conditional_sharpness=float(d["conditionalSharpness"]),
            seed=int(d["seed"]),
        )


def make_synthetic(spec: SyntheticTaskSpec) -> FinitePD:
    """Deterministic finite task from a seeded generator.

    Conditionals are normalized Gamma draws (the generator's gamma
    sampler is the Marsaglia-Tsang method), giving symmetric Dirichlet
    rows; sharpness zero yields a one-hot row at the argmax of a uniform
    draw.  Embeddings are unit vectors.
    """
    rng = np.random.default_rng(int(spec.seed))
    cx, cy = int(spec.card_x), int(spec.card_y)
    conc = float(spec.conditional_sharpness)
    rows = np.zeros((cx, cy))
    for x in range(cx):
        if conc == 0.0:
            rows[x, int(np.argmax(rng.random(cy)))] = 1.0
            continue
        draws = rng.gamma(shape=conc, scale=1.0, size=cy)
        total = draws.sum()
        if total <= 0.0 or not np.isfinite(total):
            # degenerate underflow at extreme concentrations
            rows[x, int(np.argmax(draws))] = 1.0
        else:
            rows[x] = draws / total
    joint = rows / cx

    emb = rng.standard_normal((cx, int(spec.embed_dim)))
    emb /= np.linalg.norm(emb, axis=1, keepdims=True)
    return FinitePD(joint=joint, feature_embedding=emb)


def sample(q: FinitePD, n: int, seed: int):
    """n i.i.d. (x, y) pairs from the joint table (inverse-CDF, seeded)."""
    return q.sample(n, seed)


def labeled_arrays(q: FinitePD, pairs):
    """(features, labels) arrays for a list of sampled (x, y) pairs."""
    xs = np.array([p[0] for p in pairs], dtype=np.int64)
    ys = np.array([p[1] for p in pairs], dtype=np.int64)
    return q.feature_embedding[xs], ys


@dataclass(frozen=True)
class IdxDataset:
    """Images scaled to [0, 1] plus byte labels (< 10)."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        imgs = np.asarray(self.images, dtype=float)
        labs = np.asarray(self.labels)
        if imgs.ndim != 3:
            raise InputError("images must be an (n, rows, cols) tensor")
        if labs.ndim != 1 or labs.shape[0] != imgs.shape[0]:
            raise InputError("image count and label count differ")
        if labs.size and int(labs.max()) > 9:
            raise InputError("labels must be < 10")
        object.__setattr__(self, "images", imgs)
        object.__setattr__(self, "labels", labs.astype(np.int64))

    def __len__(self):
        return self.images.shape[0]

    def flattened(self):
        return self.images.reshape(len(self), -1)


def _read_be32(data: bytes, offset: int, what: str) -> int:
    if offset + 4 > len(data):
        raise IdxFormatError(f"truncated while reading {what}", offset)
    return struct.unpack(">I", data[offset:offset + 4])[0]


def _parse_idx(path, expected_magic: int, expected_dims: int):
    with open(path, "rb") as fh:
        data = fh.read()
    magic = _read_be32(data, 0, "magic")
    if magic != expected_magic:
        raise IdxFormatError(
            f"bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}", 0
        )
    dims = []
    offset = 4
    for _ in range(expected_dims):
        dims.append(_read_be32(data, offset, "dimension size"))
        offset += 4
    payload = int(np.prod(dims)) if dims else 0
    if len(data) - offset != payload:
        raise IdxFormatError(
            f"payload has {len(data) - offset} bytes, header promises {payload}",
            offset,
        )
    return np.frombuffer(data, dtype=np.uint8, offset=offset).reshape(dims)


def load_idx(images_path, labels_path) -> IdxDataset:
    """Parse an images/labels IDX pair into an IdxDataset.

    Pixel bytes are divided by 255.  Malformed headers, truncated
    payloads, and image/label count mismatches raise IdxFormatError
    carrying the byte offset of the failure.
    """
    raw_images = _parse_idx(images_path, IDX_IMAGE_MAGIC, 3)
    raw_labels = _parse_idx(labels_path, IDX_LABEL_MAGIC, 1)
    if raw_images.shape[0] != raw_labels.shape[0]:
        raise IdxFormatError(
            f"images file has {raw_images.shape[0]} items, labels file has "
            f"{raw_labels.shape[0]}",
            4,
        )
    return IdxDataset(images=raw_images.astype(float) / 255.0,
                      labels=raw_labels.astype(np.int64))


def save_idx_images(path, images_u8):
    """Write an images IDX file (uint8 pixels); used to build fixtures."""
    arr = np.ascontiguousarray(images_u8, dtype=np.uint8)
    if arr.ndim != 3:
        raise InputError("images must be (n, rows, cols) uint8")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, *arr.shape))
        fh.write(arr.tobytes())


def save_idx_labels(path, labels_u8):
    """Write a labels IDX file (uint8 labels)."""
    arr = np.ascontiguousarray(labels_u8, dtype=np.uint8)
    if arr.ndim != 1:
        raise InputError("labels must be a 1-d uint8 array")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABEL_MAGIC, arr.shape[0]))
        fh.write(arr.tobytes())


def subsample(ds: IdxDataset, per_class: int, seed: int) -> IdxDataset:
    """Seeded uniform choice of ``per_class`` items per label.

    Selected indices are re-sorted so the output preserves the original
    item order; a class with fewer than ``per_class`` items is rejected.
    """
    if int(per_class) < 1:
        raise InputError("per_class must be >= 1")
    rng = np.random.default_rng(int(seed))
    chosen = []
    for label in sorted(set(ds.labels.tolist())):
        idx = np.flatnonzero(ds.labels == label)
        if idx.size < per_class:
            raise InputError(
                f"class {label} has {idx.size} items, fewer than {per_class}"
            )
        chosen.append(rng.choice(idx, size=int(per_class), replace=False))
    keep = np.sort(np.concatenate(chosen))
    return IdxDataset(images=ds.images[keep], labels=ds.labels[keep])
