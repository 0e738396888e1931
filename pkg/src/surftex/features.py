"""Fixed-length feature vectors from filter responses, plus their file format.

Two extraction methods:

* ``gabor``: for each kernel of a bank (in bank order) convolve with
  replicate padding and keep two statistics, the mean of the absolute
  response and the population standard deviation of the response, so
  dim = 2 * bank size (48 for the default 8 x 3 bank).
* ``stddev``: for each window size (in order) run the std-dev filter with
  replicate padding and pool the map into grid x grid block means,
  concatenated row-major per window, so dim = windows * grid^2 (192 for
  the default windows {3, 5, 7} and grid 8). Setting grid equal to the
  patch side reproduces the raw per-pixel map as the feature vector.

Feature file format (UTF-8 CSV):

    #method=<gabor|stddev>,dim=<n>,classes=<c1|c2|...>
    <label>,<source-id>,<v1>,...,<vn>

Values are rendered with Python's shortest round-trippable float
representation, so write -> read is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError
from .filters import BankConfig, Kernel, convolve_same, make_gabor_bank, stddev_filter
from .imgio import GrayImage
from .ioutil import atomic_write_text

METHODS = ("gabor", "stddev")


@dataclass(frozen=True, eq=False)
class FeatureVector:
    method: str
    values: np.ndarray  # 1-D float64

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown feature method {self.method!r}")
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise ValueError(f"feature values must be a non-empty 1-D array, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return int(self.values.size)

    def comparable(self, other: "FeatureVector") -> bool:
        return self.method == other.method and self.dim == other.dim


@dataclass(frozen=True, eq=False)
class LabeledFeature:
    feature: FeatureVector
    label: str
    source: str


def gabor_features(img: GrayImage, bank: list[Kernel]) -> FeatureVector:
    """Mean-|response| and response std per kernel; dim = 2 * len(bank)."""
    img = _check_patch(img)
    if not bank:
        raise ValueError("empty kernel bank")
    values = []
    for kernel in bank:
        resp = convolve_same(img, kernel, padding="replicate")
        values.append(float(np.mean(np.abs(resp))))
        values.append(float(np.std(resp)))
    return FeatureVector("gabor", np.array(values))


def stddev_features(img: GrayImage, windows: tuple[int, ...] = (3, 5, 7),
                    grid: int = 8) -> FeatureVector:
    """Block-mean pooled std-dev maps; dim = len(windows) * grid^2."""
    img = _check_patch(img)
    side = img.shape[0]
    if not windows:
        raise ValueError("need at least one window size")
    if grid < 1 or side % grid != 0:
        raise ValueError(f"patch side {side} not divisible by grid {grid}")
    block = side // grid
    values = []
    for w in windows:
        smap = stddev_filter(img, w, padding="replicate")
        for by in range(grid):
            for bx in range(grid):
                values.append(float(np.mean(
                    smap[by * block : (by + 1) * block, bx * block : (bx + 1) * block]
                )))
    return FeatureVector("stddev", np.array(values))


def _check_patch(img: np.ndarray) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected a square grayscale patch, got shape {arr.shape}")
    return arr


# -- extraction configs -------------------------------------------------------

@dataclass(frozen=True)
class GaborConfig:
    """Gabor extraction settings; the bank is realized once per extractor."""

    bank: BankConfig = field(default_factory=BankConfig)

    method = "gabor"

    def describe(self) -> list[tuple[str, str]]:
        return [
            ("method", "gabor"),
            ("orientations", "|".join(repr(float(t)) for t in self.bank.orientations)),
            ("frequencies", "|".join(repr(float(f)) for f in self.bank.frequencies)),
            ("sigma_constant", repr(float(self.bank.sigma_constant))),
            ("half_size_constant", repr(float(self.bank.half_size_constant))),
        ]


@dataclass(frozen=True)
class StddevConfig:
    windows: tuple[int, ...] = (3, 5, 7)
    grid: int = 8

    method = "stddev"

    def describe(self) -> list[tuple[str, str]]:
        return [
            ("method", "stddev"),
            ("windows", "|".join(str(w) for w in self.windows)),
            ("grid", str(self.grid)),
        ]


FeatureConfig = GaborConfig | StddevConfig


def make_extractor(cfg: FeatureConfig):
    """Callable img -> FeatureVector with the bank prebuilt."""
    if isinstance(cfg, GaborConfig):
        kernels = [k for _, k in make_gabor_bank(cfg.bank)]
        return lambda img: gabor_features(img, kernels)
    if isinstance(cfg, StddevConfig):
        return lambda img: stddev_features(img, cfg.windows, cfg.grid)
    raise ValueError(f"unknown feature config {cfg!r}")


# -- optional per-dimension min-max scaling (off by default) ------------------

def fit_minmax(feats: list[LabeledFeature]) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension (low, span) fitted on a feature list (typically train)."""
    if not feats:
        raise ValueError("cannot fit scaler on an empty feature list")
    mat = np.stack([f.feature.values for f in feats])
    lo = mat.min(axis=0)
    span = mat.max(axis=0) - lo
    return lo, span


def apply_minmax(feat: LabeledFeature, lo: np.ndarray,
                 span: np.ndarray) -> LabeledFeature:
    """Scale into [0, 1] per dimension; constant dimensions map to 0."""
    safe = np.where(span > 0, span, 1.0)
    scaled = np.where(span > 0, (feat.feature.values - lo) / safe, 0.0)
    return LabeledFeature(FeatureVector(feat.feature.method, scaled),
                          feat.label, feat.source)


# -- feature file I/O ---------------------------------------------------------

def write_features(path: str | Path, feats: list[LabeledFeature], *,
                   method: str | None = None, dim: int | None = None,
                   classes: tuple[str, ...] | None = None) -> None:
    """Write a feature CSV. method/dim are inferred from a non-empty list."""
    if feats:
        method = feats[0].feature.method
        dim = feats[0].feature.dim
        for f in feats:
            if f.feature.method != method or f.feature.dim != dim:
                raise FormatError(
                    f"mixed features: {f.source} is {f.feature.method}/dim "
                    f"{f.feature.dim}, expected {method}/dim {dim}"
                )
    else:
        if method is None:
            raise ValueError("method is required when writing an empty feature list")
        dim = 0 if dim is None else dim
    if classes is None:
        classes = tuple(sorted({f.label for f in feats}))
    lines = [f"#method={method},dim={dim},classes={'|'.join(classes)}"]
    for f in feats:
        for fieldval in (f.label, f.source):
            if any(c in fieldval for c in ",\n\r"):
                raise FormatError(f"illegal character in field {fieldval!r}")
        if classes and f.label not in classes:
            raise FormatError(f"label {f.label!r} not in declared classes {classes}")
        row = [f.label, f.source] + [repr(float(v)) for v in f.feature.values]
        lines.append(",".join(row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_features(path: str | Path) -> list[LabeledFeature]:
    """Read a feature CSV back; exact inverse of write_features."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#method="):
        raise FormatError(f"{path}: missing feature file header")
    header = lines[0][1:]
    meta: dict[str, str] = {}
    for part in header.split(","):
        key, _, value = part.partition("=")
        meta[key] = value
    try:
        method = meta["method"]
        dim = int(meta["dim"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: malformed header {lines[0]!r}") from exc
    if method not in METHODS:
        raise FormatError(f"{path}: unknown method tag {method!r}")
    classes = tuple(c for c in meta.get("classes", "").split("|") if c)
    feats: list[LabeledFeature] = []
    for ln, line in enumerate(lines[1:], 2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2 + dim:
            raise FormatError(
                f"{path}:{ln}: expected {2 + dim} fields, got {len(parts)}"
            )
        label, source = parts[0], parts[1]
        if classes and label not in classes:
            raise FormatError(f"{path}:{ln}: label {label!r} not in {classes}")
        try:
            values = np.array([float(v) for v in parts[2:]])
        except ValueError as exc:
            raise FormatError(f"{path}:{ln}: bad value: {exc}") from exc
        if not np.all(np.isfinite(values)):
            raise FormatError(f"{path}:{ln}: non-finite feature value")
        feats.append(LabeledFeature(FeatureVector(method, values), label, source))
    return feats
