"""Image loading, grayscale conversion and patch cropping.

Images are plain numpy arrays:

* ``GrayImage``: 2-D float64, row-major, intensities in [0, 255]. Values
  stay real-valued end to end; nothing downstream re-quantizes to 8 bit.
* ``RgbImage``: (h, w, 3) uint8.

Two file formats are supported, dispatched by file signature rather than
extension:

* binary PGM (P5): magic ``P5``, ASCII width / height / maxval (must be
  255), a single whitespace byte, then ``width * height`` raw bytes in
  row-major order. The encoder emits the canonical header
  ``P5\\n<w> <h>\\n255\\n`` so decode/encode round-trips are bit-exact.
  ``#`` comments are tolerated when reading.
* PNG: 8-bit grayscale or RGB via Pillow; an alpha channel, if present,
  is dropped.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import FormatError
from .ioutil import atomic_write_bytes

GrayImage = np.ndarray  # (h, w) float64 in [0, 255]
RgbImage = np.ndarray  # (h, w, 3) uint8

_PNG_SIG = b"\x89PNG\r\n\x1a\n"

# BT.601 luma weights
_LUMA_R, _LUMA_G, _LUMA_B = 0.299, 0.587, 0.114


def load_image(path: str | Path) -> GrayImage | RgbImage:
    """Decode a PNG or binary PGM file.

    PGM decodes directly to a GrayImage; PNG decodes to an RgbImage, or
    to a GrayImage when the file is single-channel. Raises FormatError
    for unsupported or corrupt content, OSError for unreadable files.
    """
    path = Path(path)
    data = path.read_bytes()
    if data[:2] == b"P5":
        return decode_pgm(data, name=str(path))
    if data[:8] == _PNG_SIG:
        return _decode_png(data, name=str(path))
    raise FormatError(f"{path}: unsupported image format (need PNG or binary PGM)")


def decode_pgm(data: bytes, name: str = "<bytes>") -> GrayImage:
    """Decode a binary (P5) PGM payload."""
    pos = 0

    def next_token() -> bytes:
        nonlocal pos
        while pos < len(data):
            c = data[pos : pos + 1]
            if c == b"#":  # comment runs to end of line
                while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            elif c.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{name}: truncated PGM header")
        return data[start:pos]

    magic = next_token()
    if magic != b"P5":
        raise FormatError(f"{name}: not a binary PGM (magic {magic!r})")
    try:
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError as exc:
        raise FormatError(f"{name}: malformed PGM header: {exc}") from exc
    if width < 1 or height < 1:
        raise FormatError(f"{name}: invalid PGM dimensions {width}x{height}")
    if maxval != 255:
        raise FormatError(f"{name}: unsupported PGM maxval {maxval} (need 255)")
    pos += 1  # exactly one whitespace byte separates header and payload
    payload = data[pos : pos + width * height]
    if len(payload) != width * height:
        raise FormatError(
            f"{name}: truncated PGM payload "
            f"(expected {width * height} bytes, got {len(payload)})"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    return pixels.reshape(height, width)


def encode_pgm(img: GrayImage) -> bytes:
    """Encode a GrayImage as canonical binary PGM.

    Intensities are rounded to the nearest integer and clipped to
    [0, 255]; integer-valued images round-trip exactly.
    """
    img = _check_gray(img)
    h, w = img.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    body = np.clip(np.rint(img), 0, 255).astype(np.uint8).tobytes()
    return header + body


def save_pgm(img: GrayImage, path: str | Path) -> None:
    atomic_write_bytes(path, encode_pgm(img))


def _decode_png(data: bytes, name: str) -> GrayImage | RgbImage:
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            mode = im.mode
            if mode in ("L", "LA", "I", "I;16"):
                arr = np.asarray(im.convert("L"), dtype=np.float64)
                return arr
            arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
            return arr
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise FormatError(f"{name}: corrupt PNG: {exc}") from exc


def to_grayscale(img: RgbImage) -> GrayImage:
    """BT.601 luma: 0.299 r + 0.587 g + 0.114 b, kept real-valued.

    The result is clamped to [0, 255] to absorb last-ulp rounding of the
    weight sum.
    """
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected (h, w, 3) RGB image, got shape {arr.shape}")
    arr = arr.astype(np.float64)
    gray = _LUMA_R * arr[:, :, 0] + _LUMA_G * arr[:, :, 1] + _LUMA_B * arr[:, :, 2]
    return np.clip(gray, 0.0, 255.0)


def crop_patch(img: GrayImage, x0: int, y0: int, side: int) -> GrayImage:
    """Copy out the side x side block with top-left corner (x0, y0)."""
    img = _check_gray(img)
    h, w = img.shape
    if side < 1:
        raise ValueError(f"crop side must be >= 1, got {side}")
    if x0 < 0 or y0 < 0 or x0 + side > w or y0 + side > h:
        raise ValueError(
            f"crop ({x0}, {y0}, side {side}) out of bounds for {w}x{h} image"
        )
    return img[y0 : y0 + side, x0 : x0 + side].copy()


def _check_gray(img: np.ndarray) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected 2-D grayscale image, got shape {arr.shape}")
    return arr
