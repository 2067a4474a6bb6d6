"""Grayscale image reading/writing (PGM and PNG) and detection overlays.

PGM is parsed directly (binary P5 and plain P2, 8- or 16-bit); everything
else goes through Pillow with color inputs reduced to luminance.  Overlays
draw each centerline in blue and the two width-delimiting parallels in red
on top of the input image.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .model import ImageDomain, LagmixError
from .em import MixtureState


class ImageIOError(LagmixError):
    """Unreadable or unsupported image file."""


def _read_pgm(data: bytes) -> np.ndarray:
    def tokens():
        i = 0
        while i < len(data):
            c = data[i : i + 1]
            if c == b"#":
                while i < len(data) and data[i : i + 1] != b"\n":
                    i += 1
            elif c.isspace():
                i += 1
            else:
                j = i
                while j < len(data) and not data[j : j + 1].isspace():
                    j += 1
                yield i, data[i:j]
                i = j

    it = tokens()
    try:
        _, magic = next(it)
        header = [next(it) for _ in range(3)]
    except StopIteration:
        raise ImageIOError("truncated PGM header")
    width, height, maxval = (int(tok) for _, tok in header)
    if maxval <= 0 or maxval > 65535:
        raise ImageIOError(f"unsupported PGM maxval {maxval}")

    if magic == b"P2":
        values = [int(tok) for _, tok in it]
        if len(values) != width * height:
            raise ImageIOError("wrong number of PGM samples")
        return np.array(values, dtype=float).reshape(height, width)
    if magic != b"P5":
        raise ImageIOError(f"not a PGM file (magic {magic!r})")

    offset = header[-1][0] + len(header[-1][1]) + 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    raw = data[offset : offset + width * height * dtype.itemsize]
    if len(raw) != width * height * dtype.itemsize:
        raise ImageIOError("truncated PGM pixel data")
    return np.frombuffer(raw, dtype=dtype).reshape(height, width).astype(float)


def read_image(path: str | Path) -> np.ndarray:
    """Load a grayscale image as a float array (color inputs via luminance)."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ImageIOError(f"cannot read {path}: {exc}") from exc
    if data[:2] in (b"P5", b"P2"):
        return _read_pgm(data)
    if data[:6] == b"\x93NUMPY":
        try:
            arr = np.load(path)
        except Exception as exc:
            raise ImageIOError(f"cannot decode {path}: {exc}") from exc
        if arr.ndim != 2:
            raise ImageIOError(f"{path}: expected a 2-D array, got shape {arr.shape}")
        return np.asarray(arr, dtype=float)
    try:
        with Image.open(path) as im:
            if im.mode in ("I;16", "I;16B", "I"):
                return np.asarray(im, dtype=float)
            if im.mode != "L":
                im = im.convert("L")
            return np.asarray(im, dtype=float)
    except Exception as exc:
        raise ImageIOError(f"cannot decode {path}: {exc}") from exc


def write_image(path: str | Path, img: np.ndarray) -> None:
    """Save a float image; 16-bit PGM/PNG when values exceed 255."""
    path = Path(path)
    arr = np.clip(np.asarray(img, dtype=float), 0, 65535)
    wide = arr.max(initial=0.0) > 255
    if path.suffix.lower() == ".pgm":
        maxval = 65535 if wide else 255
        dtype = np.dtype(">u2") if wide else np.dtype("u1")
        header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n{maxval}\n".encode()
        path.write_bytes(header + arr.round().astype(dtype).tobytes())
        return
    if wide:
        Image.fromarray(arr.round().astype(np.uint32), mode="I").save(path)
    else:
        Image.fromarray(arr.round().astype(np.uint8), mode="L").save(path)


CENTERLINE_COLOR = (60, 100, 255)
EDGE_COLOR = (255, 60, 60)
#: A pixel belongs to a drawn line when its center is within this distance.
LINE_HALF_WIDTH = 0.5


def render_overlay(img: np.ndarray, state: MixtureState) -> np.ndarray:
    """RGB overlay: centerlines in blue, +/- w/2 parallels in red."""
    img = np.asarray(img, dtype=float)
    lo, hi = float(img.min()), float(img.max())
    scaled = np.zeros_like(img) if hi <= lo else (img - lo) / (hi - lo) * 255.0
    rgb = np.repeat(scaled[:, :, None], 3, axis=2)
    domain = ImageDomain(img.shape[1], img.shape[0])
    X, Y = domain.grids()
    for c in state.components:
        d = c.line.signed_distance(X, Y)
        half = c.width / 2.0
        for target, color in ((-half, EDGE_COLOR), (half, EDGE_COLOR), (0.0, CENTERLINE_COLOR)):
            sel = np.abs(d - target) <= LINE_HALF_WIDTH
            rgb[sel] = color
    return rgb.astype(np.uint8)


def write_overlay(path: str | Path, img: np.ndarray, state: MixtureState) -> None:
    Image.fromarray(render_overlay(img, state), mode="RGB").save(path)
