"""Training data: a 2-D Gaussian mixture and MNIST 0/1 digits pooled to 4x4."""

from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .binn import LabeledDataset

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


@dataclass(frozen=True)
class GaussianMixtureSpec:
    """One red component (label 1) with weight 1/2, three blue ones (label 0) with 1/6 each."""

    red_mean: tuple[float, float] = (0.0, 0.0)
    red_cov: tuple[tuple[float, float], ...] = ((0.5, 0.0), (0.0, 0.5))
    blue_means: tuple[tuple[float, float], ...] = ((3.0, 0.0), (0.0, 3.0), (3.0, 3.0))
    blue_covs: tuple[tuple[tuple[float, float], ...], ...] = (
        ((0.5, 0.0), (0.0, 0.5)),
        ((0.5, 0.0), (0.0, 0.5)),
        ((0.5, 0.0), (0.0, 0.5)),
    )
    red_weight: float = 0.5

    def closer(self, factor: float) -> "GaussianMixtureSpec":
        """Move every blue mean toward the red mean; ``factor=1`` leaves them unchanged."""
        red = np.asarray(self.red_mean)
        means = tuple(tuple((red + factor * (np.asarray(m) - red)).tolist()) for m in self.blue_means)
        return replace(self, blue_means=means)

    @property
    def weights(self) -> np.ndarray:
        k = len(self.blue_means)
        return np.array([self.red_weight] + [(1.0 - self.red_weight) / k] * k)

    def components(self):
        yield np.asarray(self.red_mean, float), np.asarray(self.red_cov, float)
        for m, c in zip(self.blue_means, self.blue_covs):
            yield np.asarray(m, float), np.asarray(c, float)

    def to_dict(self) -> dict:
        return {
            "red_mean": list(self.red_mean),
            "red_cov": [list(r) for r in self.red_cov],
            "blue_means": [list(m) for m in self.blue_means],
            "blue_covs": [[list(r) for r in c] for c in self.blue_covs],
            "red_weight": self.red_weight,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianMixtureSpec":
        return cls(
            red_mean=tuple(d["red_mean"]),
            red_cov=tuple(tuple(r) for r in d["red_cov"]),
            blue_means=tuple(tuple(m) for m in d["blue_means"]),
            blue_covs=tuple(tuple(tuple(r) for r in c) for c in d["blue_covs"]),
            red_weight=d["red_weight"],
        )


def sample_gaussian_mixture(spec: GaussianMixtureSpec, n: int, seed=None) -> LabeledDataset:
    """Draw ``n`` labelled points; the label records which component produced the point."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(spec.blue_means) != len(spec.blue_covs):
        raise ValueError("one covariance per blue component required")
    chols = []
    for _, cov in spec.components():
        if cov.shape != (2, 2) or not np.allclose(cov, cov.T):
            raise ValueError("covariances must be symmetric 2x2 matrices")
        try:
            chols.append(np.linalg.cholesky(cov))
        except np.linalg.LinAlgError:
            raise ValueError("covariances must be positive definite") from None
    rng = np.random.default_rng(seed)
    comp = rng.choice(len(chols), size=n, p=spec.weights)
    z = rng.standard_normal((n, 2))
    means = np.array([m for m, _ in spec.components()])
    x = means[comp] + np.einsum("nij,nj->ni", np.array(chols)[comp], z)
    return LabeledDataset(x, (comp == 0).astype(float))


# --- IDX -------------------------------------------------------------------

def _read_bytes(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def read_idx_images(path) -> np.ndarray:
    """Images from an IDX3 file (optionally gzipped) as ``uint8`` of shape ``(count, rows, cols)``."""
    raw = _read_bytes(path)
    if len(raw) < 16:
        raise ValueError(f"{path}: truncated IDX header")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IMAGE_MAGIC:
        raise ValueError(f"{path}: bad image magic 0x{magic:08x}")
    size = count * rows * cols
    if len(raw) - 16 < size:
        raise ValueError(f"{path}: truncated payload ({len(raw) - 16} of {size} bytes)")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=16).reshape(count, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    raw = _read_bytes(path)
    if len(raw) < 8:
        raise ValueError(f"{path}: truncated IDX header")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != LABEL_MAGIC:
        raise ValueError(f"{path}: bad label magic 0x{magic:08x}")
    if len(raw) - 8 < count:
        raise ValueError(f"{path}: truncated payload ({len(raw) - 8} of {count} bytes)")
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=8).copy()


def write_idx_images(path, images: np.ndarray) -> None:
    images = np.asarray(images, dtype=np.uint8)
    count, rows, cols = images.shape
    Path(path).write_bytes(struct.pack(">IIII", IMAGE_MAGIC, count, rows, cols) + images.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    Path(path).write_bytes(struct.pack(">II", LABEL_MAGIC, labels.size) + labels.tobytes())


def bundled_mnist_paths() -> tuple[Path, Path]:
    """The packaged 1000-image MNIST subset (500 zeros, 500 ones)."""
    base = resources.files("qhypernet") / "data"
    return (Path(str(base / "mnist01-images-idx3-ubyte.gz")),
            Path(str(base / "mnist01-labels-idx1-ubyte.gz")))


# --- MNIST reduction -------------------------------------------------------

@dataclass(frozen=True)
class MnistReductionSpec:
    """Where to read digits and how to reduce them.

    ``images``/``labels`` default to the bundled subset; ``source="synthetic"``
    uses the built-in stroke generator instead.
    """

    images: str | None = None
    labels: str | None = None
    source: str = "idx"
    classes: tuple[int, int] = (0, 1)
    grid: int = 4
    per_class: int | None = 100
    seed: int = 0

    def to_dict(self) -> dict:
        return {"images": self.images, "labels": self.labels, "source": self.source,
                "classes": list(self.classes), "grid": self.grid,
                "per_class": self.per_class, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "MnistReductionSpec":
        return cls(images=d.get("images"), labels=d.get("labels"), source=d.get("source", "idx"),
                   classes=tuple(d.get("classes", (0, 1))), grid=d.get("grid", 4),
                   per_class=d.get("per_class", 100), seed=d.get("seed", 0))


def average_pool(images: np.ndarray, grid: int = 4) -> np.ndarray:
    """Mean over disjoint square blocks, scaled from 0..255 to [0, 1]; returns ``(count, grid*grid)``."""
    count, rows, cols = images.shape
    if rows % grid or cols % grid:
        raise ValueError(f"{rows}x{cols} images do not tile into a {grid}x{grid} grid")
    br, bc = rows // grid, cols // grid
    blocks = images.astype(np.float64).reshape(count, grid, br, grid, bc)
    return blocks.mean(axis=(2, 4)).reshape(count, grid * grid) / 255.0


def synthetic_digits(n_per_class: int, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """28x28 stand-ins: ring-shaped "0"s and slanted stroke "1"s with jitter and noise."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:28, 0:28].astype(float)
    images, labels = [], []
    for label in (0, 1):
        for _ in range(n_per_class):
            cy, cx = 14 + rng.normal(0, 1.2), 14 + rng.normal(0, 1.2)
            if label == 0:
                ry, rx = rng.uniform(7, 10), rng.uniform(5, 8)
                r = np.sqrt(((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2)
                img = np.exp(-((r - 1.0) / 0.18) ** 2)
            else:
                slope = rng.normal(0, 0.25)
                half = rng.uniform(8, 11)
                dist = np.abs((xx - cx) - slope * (yy - cy))
                img = np.exp(-(dist / 1.3) ** 2) * (np.abs(yy - cy) < half)
            img = img + rng.normal(0, 0.05, img.shape)
            images.append(np.clip(img * 255, 0, 255).astype(np.uint8))
            labels.append(label)
    return np.array(images), np.array(labels, dtype=np.uint8)


def load_reduced_mnist(spec: MnistReductionSpec = MnistReductionSpec()) -> LabeledDataset:
    """Digits of ``spec.classes`` pooled to ``grid x grid`` features; label 1 for the second class."""
    if spec.source == "synthetic":
        cap = spec.per_class or 500
        images, labels = synthetic_digits(cap, seed=spec.seed)
        classes = (0, 1)
    else:
        img_path, lbl_path = bundled_mnist_paths()
        images = read_idx_images(spec.images or img_path)
        labels = read_idx_labels(spec.labels or lbl_path)
        classes = spec.classes
    if images.shape[0] != labels.shape[0]:
        raise ValueError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    rng = np.random.default_rng(spec.seed)
    keep = []
    for c in classes:
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.size)]
        if spec.per_class is not None:
            idx = idx[:spec.per_class]
        keep.append(idx)
    keep = np.concatenate(keep)
    keep = keep[rng.permutation(keep.size)]
    x = average_pool(images[keep], spec.grid)
    y = (labels[keep] == classes[1]).astype(float)
    return LabeledDataset(x, y)


def split(data: LabeledDataset, train_n: int, valid_n: int, seed=None) -> tuple[LabeledDataset, LabeledDataset]:
    """Disjoint seeded train/validation subsets."""
    if train_n < 1 or valid_n < 1:
        raise ValueError("both subsets need at least one point")
    if train_n + valid_n > len(data):
        raise ValueError(f"need {train_n + valid_n} points, dataset has {len(data)}")
    perm = np.random.default_rng(seed).permutation(len(data))
    tr, va = perm[:train_n], perm[train_n:train_n + valid_n]
    return LabeledDataset(data.x[tr], data.y[tr]), LabeledDataset(data.x[va], data.y[va])


def write_csv(data: LabeledDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(data.input_dim)] + ["y"])
        for x, y in zip(data.x, data.y):
            w.writerow([repr(float(v)) for v in x] + [int(y)])
