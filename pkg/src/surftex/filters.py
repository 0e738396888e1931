"""Feature-extraction filters: Gabor kernels and the windowed std-dev filter.

A Gabor kernel is a cosine carrier under a Gaussian envelope evaluated on
the integer grid [-half_size, half_size]^2::

    tap(x, y) = exp(-0.5 * (xr^2 / sigma_x^2 + yr^2 / sigma_y^2))
                * cos(2 pi freq * xr)
    xr =  x cos(theta) + y sin(theta)
    yr = -x sin(theta) + y cos(theta)

with y as the row index. The envelope and carrier are both even, so every
kernel is point-symmetric: tap(x, y) == tap(-x, -y).

The windowed standard-deviation filter replaces each pixel with the
population standard deviation (1/N divisor) of the side x side window
centered on it.

Both filters share a "same"-size spatial convolution engine. Out-of-image
reads are resolved by an edge policy: ``replicate`` (clamp to the nearest
edge pixel, the default; zero padding would fabricate strong artificial
edges at patch borders) or ``zero``.

Accumulation order is part of the contract: convolution sums kernel taps
row-major (rows then columns), and the std-dev filter accumulates the
window sum and the squared deviations in the same row-major window order.
This makes the vectorized implementations bitwise identical to the naive
reference loops used for verification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError
from .imgio import GrayImage
from .ioutil import atomic_write_text

PADDINGS = ("replicate", "zero")


@dataclass(frozen=True)
class GaborParams:
    """Parameters of one Gabor kernel.

    sigma_x, sigma_y: Gaussian envelope widths (pixels) along the rotated
    x and y axes; theta: orientation in radians, [0, pi); freq: carrier
    frequency in cycles/pixel; half_size: the kernel spans
    [-half_size, half_size] in both axes (side = 2 * half_size + 1).
    """

    sigma_x: float
    sigma_y: float
    theta: float
    freq: float
    half_size: int

    def __post_init__(self):
        if not (self.sigma_x > 0 and self.sigma_y > 0):
            raise ValueError(f"sigma_x/sigma_y must be > 0, got {self.sigma_x}, {self.sigma_y}")
        if not self.freq > 0:
            raise ValueError(f"freq must be > 0, got {self.freq}")
        if not (0.0 <= self.theta < math.pi):
            raise ValueError(f"theta must be in [0, pi), got {self.theta}")
        if self.half_size < 1:
            raise ValueError(f"half_size must be >= 1, got {self.half_size}")


@dataclass(frozen=True, eq=False)
class Kernel:
    """A realized square filter kernel with odd side."""

    side: int
    taps: np.ndarray  # (side, side) float64, row-major, y is the row axis

    def __post_init__(self):
        if self.side % 2 != 1 or self.side < 1:
            raise ValueError(f"kernel side must be odd and >= 1, got {self.side}")
        if self.taps.shape != (self.side, self.side):
            raise ValueError(f"taps shape {self.taps.shape} != ({self.side}, {self.side})")
        if not np.all(np.isfinite(self.taps)):
            raise ValueError("kernel taps must be finite")


@dataclass(frozen=True)
class BankConfig:
    """Filter-bank layout: orientations x frequencies plus sizing rules.

    sigma_constant maps frequency to envelope width (sigma = c / freq,
    roughly one octave of bandwidth at the default 0.56); the kernel half
    size is ceil(half_size_constant * sigma), which keeps the Gaussian
    tail under 1% at the kernel edge for the default constant 3.
    """

    orientations: tuple[float, ...] = field(
        default_factory=lambda: tuple(k * math.pi / 8 for k in range(8))
    )
    frequencies: tuple[float, ...] = (1 / 16, 1 / 8, 1 / 4)
    sigma_constant: float = 0.56
    half_size_constant: float = 3.0

    def __post_init__(self):
        if not self.orientations or not self.frequencies:
            raise ValueError("bank needs at least one orientation and one frequency")
        for th in self.orientations:
            if not (0.0 <= th < math.pi):
                raise ValueError(f"orientation {th} outside [0, pi)")
        for f in self.frequencies:
            if not f > 0:
                raise ValueError(f"frequency {f} must be > 0")
        if not (self.sigma_constant > 0 and self.half_size_constant > 0):
            raise ValueError("sigma_constant and half_size_constant must be > 0")

    def sigma_for(self, freq: float) -> float:
        return self.sigma_constant / freq

    def half_size_for(self, sigma: float) -> int:
        return max(1, math.ceil(self.half_size_constant * sigma))


def make_gabor_kernel(p: GaborParams) -> Kernel:
    """Evaluate the Gabor formula on the integer tap grid."""
    h = p.half_size
    ys, xs = np.mgrid[-h : h + 1, -h : h + 1]
    xs = xs.astype(np.float64)
    ys = ys.astype(np.float64)
    xr = xs * math.cos(p.theta) + ys * math.sin(p.theta)
    yr = -xs * math.sin(p.theta) + ys * math.cos(p.theta)
    envelope = np.exp(-0.5 * ((xr / p.sigma_x) ** 2 + (yr / p.sigma_y) ** 2))
    taps = envelope * np.cos(2.0 * math.pi * p.freq * xr)
    return Kernel(side=2 * h + 1, taps=taps)


def make_gabor_bank(cfg: BankConfig) -> list[tuple[GaborParams, Kernel]]:
    """One kernel per (frequency, orientation) pair, frequency-major order."""
    bank = []
    for freq in cfg.frequencies:
        sigma = cfg.sigma_for(freq)
        half = cfg.half_size_for(sigma)
        for theta in cfg.orientations:
            p = GaborParams(sigma_x=sigma, sigma_y=sigma, theta=theta,
                            freq=freq, half_size=half)
            bank.append((p, make_gabor_kernel(p)))
    return bank


def _pad(img: np.ndarray, h: int, padding: str) -> np.ndarray:
    if padding == "replicate":
        return np.pad(img, h, mode="edge")
    if padding == "zero":
        return np.pad(img, h, mode="constant")
    raise ValueError(f"unknown padding {padding!r} (choose from {PADDINGS})")


def convolve_same(img: GrayImage, kernel: Kernel, padding: str = "replicate") -> np.ndarray:
    """True 2-D convolution (kernel flipped) with same-size output.

    out(x, y) = sum over offsets (dx, dy) of tap(dx, dy) * in(x - dx, y - dy),
    accumulated in row-major tap order.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"expected 2-D image, got shape {img.shape}")
    hgt, wid = img.shape
    side = kernel.side
    if side > min(hgt, wid):
        raise ValueError(f"kernel side {side} exceeds image {wid}x{hgt}")
    h = side // 2
    pad = _pad(img, h, padding)
    taps = kernel.taps
    out = np.zeros_like(img)
    for ky in range(side):
        r0 = 2 * h - ky  # src row offset for in(y - (ky - h))
        for kx in range(side):
            c0 = 2 * h - kx
            out += taps[ky, kx] * pad[r0 : r0 + hgt, c0 : c0 + wid]
    return out


def stddev_filter(img: GrayImage, side: int, padding: str = "replicate") -> np.ndarray:
    """Population standard deviation over the side x side window at each pixel.

    Two passes in fixed row-major window order: the window sum gives the
    mean, then the squared deviations from that mean are accumulated.
    Output dimensions equal the input's; edges use the padding policy.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"expected 2-D image, got shape {img.shape}")
    if side % 2 != 1 or side < 3:
        raise ValueError(f"window side must be odd and >= 3, got {side}")
    hgt, wid = img.shape
    if side > min(hgt, wid):
        raise ValueError(f"window side {side} exceeds image {wid}x{hgt}")
    h = side // 2
    pad = _pad(img, h, padding)
    n = float(side * side)
    total = np.zeros_like(img)
    for ky in range(side):
        for kx in range(side):
            total += pad[ky : ky + hgt, kx : kx + wid]
    mean = total / n
    sq = np.zeros_like(img)
    for ky in range(side):
        for kx in range(side):
            d = pad[ky : ky + hgt, kx : kx + wid] - mean
            sq += d * d
    return np.sqrt(sq / n)


# -- inspection / config surfaces -------------------------------------------

def kernel_text(kernel: Kernel) -> str:
    """Plain-text tap grid: one row per line, space-separated, full precision."""
    lines = []
    for row in kernel.taps:
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def kernel_image(kernel: Kernel) -> GrayImage:
    """Taps rescaled min..max -> 0..255 for an 8-bit visualization dump."""
    taps = kernel.taps
    lo = float(taps.min())
    span = float(taps.max()) - lo
    if span == 0.0:
        return np.full_like(taps, 128.0)
    return (taps - lo) * (255.0 / span)


def save_bank_config(cfg: BankConfig, path: str | Path) -> None:
    text = (
        "orientations = " + ",".join(repr(float(t)) for t in cfg.orientations) + "\n"
        "frequencies = " + ",".join(repr(float(f)) for f in cfg.frequencies) + "\n"
        f"sigma_constant = {cfg.sigma_constant!r}\n"
        f"half_size_constant = {cfg.half_size_constant!r}\n"
    )
    atomic_write_text(path, text)


def load_bank_config(path: str | Path) -> BankConfig:
    """Parse the key/value bank-config format written by save_bank_config."""
    fields: dict[str, str] = {}
    for ln, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{ln}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    try:
        orientations = tuple(float(t) for t in fields["orientations"].split(",") if t.strip())
        frequencies = tuple(float(f) for f in fields["frequencies"].split(",") if f.strip())
        sigma_c = float(fields.get("sigma_constant", "0.56"))
        half_c = float(fields.get("half_size_constant", "3.0"))
    except KeyError as exc:
        raise FormatError(f"{path}: missing bank config key {exc}") from exc
    except ValueError as exc:
        raise FormatError(f"{path}: malformed bank config value: {exc}") from exc
    try:
        return BankConfig(orientations, frequencies, sigma_c, half_c)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
