"""Orthonormal wavelet packet decomposition (WPD) of images into a binary
band tree, and its exact inverse.

A depth-``n`` decomposition splits the image into ``2**n`` bands addressed
by path strings over {a, d}: character ``i`` names the filter applied at
level ``i + 1`` ("a" low-pass, "d" high-pass).  Levels alternate axes:
width at level 1, height at level 2, width at level 3, and so on, which
keeps the tree binary (2**n bands, not 4**n).

Filters are orthonormal with periodic boundary extension, so the analysis
operator is orthogonal: reconstruction is its adjoint, Parseval holds
exactly, and distinct coefficient directions map to orthogonal unit-norm
image-space vectors.
"""

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import _kernels

_SQRT3 = math.sqrt(3.0)
_SQRT2 = math.sqrt(2.0)

# Orthonormal low-pass coefficient tables (sum of squares = 1).
_LOWPASS_TABLES = {
    "haar": [1.0 / _SQRT2, 1.0 / _SQRT2],
    "db2": [
        (1.0 + _SQRT3) / (4.0 * _SQRT2),
        (3.0 + _SQRT3) / (4.0 * _SQRT2),
        (3.0 - _SQRT3) / (4.0 * _SQRT2),
        (1.0 - _SQRT3) / (4.0 * _SQRT2),
    ],
    "db4": [
        0.23037781330885523,
        0.7148465705525415,
        0.6308807679295904,
        -0.02798376941698385,
        -0.18703481171888114,
        0.030841381835986965,
        0.032883011666982945,
        -0.010597401784997278,
    ],
}


@dataclass(frozen=True)
class WaveletFilter:
    """Orthonormal quadrature-mirror filter pair."""

    name: str
    lowpass: np.ndarray
    highpass: np.ndarray

    def __post_init__(self):
        low = np.ascontiguousarray(self.lowpass, dtype=np.float64)
        high = np.ascontiguousarray(self.highpass, dtype=np.float64)
        taps = low.shape[0]
        if low.ndim != 1 or taps < 2 or taps % 2 != 0:
            raise ValueError("lowpass must be 1-D with an even length >= 2")
        if high.shape != low.shape:
            raise ValueError("lowpass and highpass must have equal length")
        if abs(np.dot(low, low) - 1.0) > 1e-10:
            raise ValueError(f"filter {self.name!r}: sum of squared taps != 1")
        for m in range(1, taps // 2):
            if abs(np.dot(low[: taps - 2 * m], low[2 * m :])) > 1e-10:
                raise ValueError(f"filter {self.name!r}: double-shift orthogonality fails")
        qmf = np.array([(-1.0) ** k * low[taps - 1 - k] for k in range(taps)])
        if np.max(np.abs(high - qmf)) > 1e-12:
            raise ValueError(f"filter {self.name!r}: highpass is not the quadrature mirror")
        low.setflags(write=False)
        high.setflags(write=False)
        object.__setattr__(self, "lowpass", low)
        object.__setattr__(self, "highpass", high)

    @property
    def taps(self):
        return self.lowpass.shape[0]


def get_filter(name):
    """Look up a shipped filter by name ("haar", "db2", "db4")."""
    try:
        low = np.asarray(_LOWPASS_TABLES[name], dtype=np.float64)
    except KeyError:
        raise ValueError(f"unknown wavelet filter {name!r}; have {sorted(_LOWPASS_TABLES)}")
    taps = low.shape[0]
    high = np.array([(-1.0) ** k * low[taps - 1 - k] for k in range(taps)])
    return WaveletFilter(name, low, high)


def filter_names():
    return sorted(_LOWPASS_TABLES)


def all_band_paths(depth):
    """All 2**depth band paths at `depth`, in lexicographic order."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    paths = [""]
    for _ in range(depth):
        paths = [p + c for p in paths for c in "ad"]
    return paths


def level_axis(level):
    """Image axis halved at a 1-based level: width (1) at odd levels,
    height (0) at even levels."""
    return 1 if level % 2 == 1 else 0


def validate_band_path(path, depth):
    if len(path) != depth or any(c not in "ad" for c in path):
        raise ValueError(f"invalid band path {path!r} for depth {depth}")


def _check_signal(n, taps):
    if n % 2 != 0:
        raise ValueError(f"signal length {n} is odd")
    if n < taps:
        raise ValueError(f"signal length {n} shorter than filter ({taps} taps)")


def wpd_step_1d(signal, filt):
    """One analysis step: circular correlation with each filter, then
    downsample by 2.  Returns (approx, detail), each of length len/2."""
    signal = np.ascontiguousarray(signal, dtype=np.float64)
    if signal.ndim != 1:
        raise ValueError("signal must be 1-D")
    _check_signal(signal.shape[0], filt.taps)
    approx, detail = _kernels.wpd_step_rows(signal[None, :], filt.lowpass, filt.highpass)
    return approx[0], detail[0]


def iwpd_step_1d(approx, detail, filt):
    """Exact inverse of wpd_step_1d (adjoint of the analysis step)."""
    approx = np.ascontiguousarray(approx, dtype=np.float64)
    detail = np.ascontiguousarray(detail, dtype=np.float64)
    if approx.shape != detail.shape or approx.ndim != 1:
        raise ValueError("approx and detail must be 1-D of equal length")
    out = _kernels.iwpd_step_rows(approx[None, :], detail[None, :], filt.lowpass, filt.highpass)
    return out[0]


def _step_along_axis(arr, axis, filt):
    # arr: (H, W, C); returns (approx, detail) with `axis` halved
    moved = np.moveaxis(arr, axis, -1)
    lead = moved.shape[:-1]
    n = moved.shape[-1]
    _check_signal(n, filt.taps)
    rows = np.ascontiguousarray(moved.reshape(-1, n))
    a, d = _kernels.wpd_step_rows(rows, filt.lowpass, filt.highpass)
    a = np.moveaxis(a.reshape(lead + (n // 2,)), -1, axis)
    d = np.moveaxis(d.reshape(lead + (n // 2,)), -1, axis)
    return a, d


def _istep_along_axis(a, d, axis, filt):
    moved_a = np.ascontiguousarray(np.moveaxis(a, axis, -1))
    moved_d = np.ascontiguousarray(np.moveaxis(d, axis, -1))
    if moved_a.shape != moved_d.shape:
        raise ValueError("inconsistent band shapes")
    lead = moved_a.shape[:-1]
    half = moved_a.shape[-1]
    out = _kernels.iwpd_step_rows(
        moved_a.reshape(-1, half), moved_d.reshape(-1, half), filt.lowpass, filt.highpass
    )
    return np.moveaxis(out.reshape(lead + (2 * half,)), -1, axis)


def band_shape(image_shape, path):
    """Coefficient-array shape of a band under the alternating halving rule."""
    h, w, c = image_shape
    for level, _ in enumerate(path, start=1):
        if level_axis(level) == 1:
            w //= 2
        else:
            h //= 2
    return (h, w, c)


@dataclass(frozen=True)
class TreeLayout:
    """Shapes of every band of a decomposition, without the coefficients."""

    depth: int
    image_shape: tuple
    band_shapes: dict

    def coordinate_count(self, path):
        return int(np.prod(self.band_shapes[path]))


def tree_layout(image_shape, depth):
    check_dimensions(image_shape, depth)
    shapes = {p: band_shape(image_shape, p) for p in all_band_paths(depth)}
    return TreeLayout(depth, tuple(image_shape), shapes)


def check_dimensions(image_shape, depth):
    """decompose_image precondition: width divisible by 2^ceil(depth/2),
    height by 2^floor(depth/2)."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    h, w = image_shape[0], image_shape[1]
    wdiv = 2 ** ((depth + 1) // 2)
    hdiv = 2 ** (depth // 2)
    if w % wdiv != 0 or h % hdiv != 0:
        raise ValueError(
            f"image {h}x{w} not divisible for depth {depth}: "
            f"need width % {wdiv} == 0 and height % {hdiv} == 0"
        )


@dataclass
class BandTree:
    """Wavelet packet coefficients addressed by band path; channels are
    stacked in each band's (H_b, W_b, C) array."""

    depth: int
    filter_name: str
    image_shape: tuple
    bands: dict

    @property
    def layout(self):
        return TreeLayout(
            self.depth, tuple(self.image_shape), {p: a.shape for p, a in self.bands.items()}
        )

    def energy(self):
        return float(sum(np.sum(a * a) for a in self.bands.values()))

    def copy(self):
        return BandTree(
            self.depth,
            self.filter_name,
            tuple(self.image_shape),
            {p: a.copy() for p, a in self.bands.items()},
        )


def decompose_image(img, filt, depth):
    """Full wavelet packet decomposition into 2**depth bands.

    Every band produced at the previous level is split again, alternating
    the axis per level; channels are transformed independently.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError("image must be (H, W, C)")
    check_dimensions(arr.shape, depth)
    current = {"": arr}
    for level in range(1, depth + 1):
        axis = level_axis(level)
        nxt = {}
        for path in sorted(current):
            a, d = _step_along_axis(current[path], axis, filt)
            nxt[path + "a"] = a
            nxt[path + "d"] = d
        current = nxt
    return BandTree(depth, filt.name, arr.shape, current)


def reconstruct_image(tree, filt):
    """Exact left inverse of decompose_image (no clipping applied)."""
    expected = {p: band_shape(tree.image_shape, p) for p in all_band_paths(tree.depth)}
    if set(tree.bands) != set(expected):
        raise ValueError("band set does not match a full tree of the stated depth")
    for p, arr in tree.bands.items():
        if tuple(arr.shape) != expected[p]:
            raise ValueError(
                f"inconsistent band shapes: {p!r} is {arr.shape}, expected {expected[p]}"
            )
    current = tree.bands
    for level in range(tree.depth, 0, -1):
        axis = level_axis(level)
        parents = {}
        for path in sorted({p[:-1] for p in current}):
            parents[path] = _istep_along_axis(
                current[path + "a"], current[path + "d"], axis, filt
            )
        current = parents
    return current[""]


def zero_tree(layout, filter_name):
    bands = {p: np.zeros(s) for p, s in layout.band_shapes.items()}
    return BandTree(layout.depth, filter_name, tuple(layout.image_shape), bands)


def basis_image(layout, band, coordinate, filt):
    """Image-space vector of one coefficient direction: reconstruction of
    an all-zero tree with a single 1 at (band, coordinate).  Unit L2 norm
    by orthonormality.  `coordinate` is a flat row-major index into the
    band's (H_b, W_b, C) array."""
    validate_band_path(band, layout.depth)
    size = layout.coordinate_count(band)
    if not 0 <= coordinate < size:
        raise ValueError(f"coordinate {coordinate} out of range for band {band!r} ({size})")
    tree = zero_tree(layout, filt.name)
    tree.bands[band].flat[coordinate] = 1.0
    return reconstruct_image(tree, filt)


def save_band_tree(dirpath, tree):
    """Serialize a BandTree: JSON manifest + one raw-tensor file per band,
    lexicographic by path."""
    from .core import save_raw_tensor

    os.makedirs(dirpath, exist_ok=True)
    entries = []
    for path in sorted(tree.bands):
        fname = f"band_{path}.rt"
        save_raw_tensor(os.path.join(dirpath, fname), tree.bands[path])
        entries.append(
            {"path": path, "shape": list(tree.bands[path].shape), "file": fname}
        )
    manifest = {
        "depth": tree.depth,
        "filter": tree.filter_name,
        "image_shape": list(tree.image_shape),
        "bands": entries,
    }
    with open(os.path.join(dirpath, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)


def load_band_tree(dirpath):
    from .core import load_raw_tensor

    with open(os.path.join(dirpath, "manifest.json")) as fh:
        manifest = json.load(fh)
    bands = {}
    for entry in manifest["bands"]:
        arr = load_raw_tensor(os.path.join(dirpath, entry["file"]))
        if list(arr.shape) != list(entry["shape"]):
            raise ValueError(f"band {entry['path']!r}: shape mismatch with manifest")
        bands[entry["path"]] = arr
    return BandTree(
        int(manifest["depth"]),
        manifest["filter"],
        tuple(manifest["image_shape"]),
        bands,
    )
