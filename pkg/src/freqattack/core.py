"""Dense float64 image arrays, deterministic RNG, dataset ingestion and
the raw-tensor interchange format shared by every other module.

Conventions: images are ``(H, W, C)`` float64 arrays with values in
``[0, 1]`` and ``C`` in {1, 3}; all arithmetic stays in double precision
and quantization to 8 bits happens only on PNG export.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from PIL import Image as _PILImage
from PIL import UnidentifiedImageError

RNG_ALGORITHM = "PCG64"

CIFAR10_RECORD_BYTES = 1 + 3 * 32 * 32


def make_rng(seed):
    """Deterministic generator (numpy PCG64); same seed, same stream."""
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rng(seed, index):
    """Independent per-item stream derived from (seed, index).

    Used by the harness so that image ``index`` sees the same stream no
    matter which band subset / worker processes it.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(index)])))


def as_image(arr):
    """Validate and return an (H, W, C) float64 image in [0, 1]."""
    img = np.asarray(arr, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ValueError(f"expected (H, W, C) with C in {{1, 3}}, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("image values outside [0, 1]")
    return img


def clip01(t):
    """Elementwise clamp to [0, 1] (valid-pixel projection)."""
    return np.clip(t, 0.0, 1.0)


def load_png(path):
    """Load an 8-bit grayscale or RGB PNG as an (H, W, C) image in [0, 1]."""
    try:
        with _PILImage.open(path) as im:
            if im.format != "PNG":
                raise ValueError(f"{path}: not a PNG file (format={im.format})")
            if im.mode not in ("L", "RGB"):
                raise ValueError(
                    f"{path}: unsupported PNG mode {im.mode!r} (need 8-bit L or RGB)"
                )
            arr = np.asarray(im, dtype=np.float64) / 255.0
    except UnidentifiedImageError as exc:
        raise ValueError(f"{path}: malformed image file") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def save_png(path, img):
    """Quantize to 8 bits (round(v*255)) and write a PNG."""
    img = as_image(img)
    data = np.rint(img * 255.0).astype(np.uint8)
    if data.shape[2] == 1:
        _PILImage.fromarray(data[:, :, 0], mode="L").save(path, format="PNG")
    else:
        _PILImage.fromarray(data, mode="RGB").save(path, format="PNG")


def save_raw_tensor(path, arr):
    """Write the raw-tensor format: one JSON header line + f64 LE payload."""
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    header = {"shape": list(arr.shape), "dtype": "f64", "order": "little"}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("ascii") + b"\n")
        fh.write(arr.astype("<f8").tobytes())


def load_raw_tensor(path):
    """Read a raw-tensor file; bit-exact inverse of save_raw_tensor."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: bad raw-tensor header") from exc
        if header.get("dtype") != "f64" or header.get("order") != "little":
            raise ValueError(f"{path}: unsupported raw-tensor header {header}")
        shape = tuple(int(s) for s in header["shape"])
        count = int(np.prod(shape)) if shape else 1
        payload = fh.read()
    if len(payload) != 8 * count:
        raise ValueError(
            f"{path}: payload has {len(payload)} bytes, expected {8 * count}"
        )
    return np.frombuffer(payload, dtype="<f8").reshape(shape).astype(np.float64)


@dataclass
class LabeledDataset:
    """Images plus integer class labels in [0, num_classes)."""

    images: np.ndarray  # (N, H, W, C)
    labels: np.ndarray  # (N,)
    num_classes: int
    class_names: tuple = field(default=())

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise ValueError("images must be (N, H, W, C)")
        if len(self.images) != len(self.labels):
            raise ValueError("images and labels length mismatch")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("labels outside [0, num_classes)")

    def __len__(self):
        return len(self.labels)

    def subset(self, indices):
        return LabeledDataset(
            self.images[indices], self.labels[indices], self.num_classes, self.class_names
        )


def load_cifar10_binary(path, count):
    """Read the first `count` records of a CIFAR-10 binary batch file.

    Each record is 1 label byte followed by 3072 pixel bytes in planar
    R, G, B order; pixels map to v/255.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) % CIFAR10_RECORD_BYTES != 0:
        raise ValueError(
            f"{path}: size {len(blob)} is not a multiple of {CIFAR10_RECORD_BYTES} (truncated file?)"
        )
    available = len(blob) // CIFAR10_RECORD_BYTES
    if count > available:
        raise ValueError(f"{path}: asked for {count} records, file has {available}")
    records = np.frombuffer(blob, dtype=np.uint8).reshape(available, CIFAR10_RECORD_BYTES)[:count]
    labels = records[:, 0].astype(np.int64)
    pixels = records[:, 1:].reshape(count, 3, 32, 32).transpose(0, 2, 3, 1)
    images = pixels.astype(np.float64) / 255.0
    return LabeledDataset(images, labels, num_classes=10)


SYNTHETIC_CLASS_NAMES = ("gradient", "stripes", "disk")


def synthetic_dataset(count, seed, size=32, noise_sigma=0.05):
    """Seeded desk-scale stand-in dataset: 3 classes of smooth 32x32x3
    patterns (gradient / stripes / disk) plus Gaussian noise, clipped to
    [0, 1].  Labels cycle 0,1,2,... so class counts stay balanced.
    """
    rng = make_rng(seed)
    h = w = size
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    images = np.empty((count, h, w, 3))
    labels = np.empty(count, dtype=np.int64)
    for i in range(count):
        cls = i % 3
        labels[i] = cls
        if cls == 0:
            # linear ramp, random mild tilt and contrast
            theta = rng.uniform(-0.6, 0.6)
            ramp = np.cos(theta) * xx + np.sin(theta) * yy
            ramp = (ramp - ramp.min()) / (ramp.max() - ramp.min())
            lo = rng.uniform(0.05, 0.2)
            hi = rng.uniform(0.75, 0.95)
            base = lo + (hi - lo) * ramp
            tint = np.array([1.0, rng.uniform(0.7, 0.9), rng.uniform(0.5, 0.7)])
        elif cls == 1:
            # vertical sinusoidal stripes, random frequency and phase
            freq = rng.uniform(3.0, 5.0)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            base = 0.5 + rng.uniform(0.25, 0.4) * np.sin(2.0 * np.pi * freq * xx / w + phase)
            tint = np.array([rng.uniform(0.5, 0.7), 1.0, rng.uniform(0.7, 0.9)])
        else:
            # bright disk with a smooth edge on a dark background
            cy = h / 2.0 + rng.uniform(-4.0, 4.0)
            cx = w / 2.0 + rng.uniform(-4.0, 4.0)
            radius = rng.uniform(6.0, 10.0)
            dist = np.sqrt((yy - cy) ** 2 + (xx - cx) ** 2)
            base = 0.15 + 0.75 / (1.0 + np.exp((dist - radius) / 1.5))
            tint = np.array([rng.uniform(0.7, 0.9), rng.uniform(0.5, 0.7), 1.0])
        img = base[:, :, None] * tint[None, None, :]
        img = img + rng.normal(0.0, noise_sigma, size=(h, w, 3))
        images[i] = np.clip(img, 0.0, 1.0)
    return LabeledDataset(images, labels, num_classes=3, class_names=SYNTHETIC_CLASS_NAMES)


def save_dataset(dirpath, dataset):
    """Write a dataset directory: images.rt stack + labels.json."""
    import os

    os.makedirs(dirpath, exist_ok=True)
    save_raw_tensor(os.path.join(dirpath, "images.rt"), dataset.images)
    meta = {
        "labels": [int(v) for v in dataset.labels],
        "num_classes": int(dataset.num_classes),
        "class_names": list(dataset.class_names),
    }
    with open(os.path.join(dirpath, "labels.json"), "w") as fh:
        json.dump(meta, fh)


def load_dataset(dirpath):
    import os

    images = load_raw_tensor(os.path.join(dirpath, "images.rt"))
    with open(os.path.join(dirpath, "labels.json")) as fh:
        meta = json.load(fh)
    return LabeledDataset(
        images,
        np.asarray(meta["labels"], dtype=np.int64),
        int(meta["num_classes"]),
        tuple(meta.get("class_names", ())),
    )
