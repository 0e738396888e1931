"""Synthetic labeled texture corpora, plus naive reference implementations.

The generated classes are texture analogs with controllable separability,
not simulations of real surfaces: the default trio gives one smooth
low-roughness class ("water"), one high-roughness fine-grain class
("snow"), and one oriented grating with bright streaks ("ice"). Their
separation is asserted by the end-to-end test gates, never assumed.

Patch recipes:

* noise(base, roughness, blur): base + roughness * N(0,1) per pixel,
  optionally box-blurred with the given radius, then clamped to [0, 255]
  and rounded (the corpus is stored as 8-bit PGM).
* grating(theta, freq, amplitude, noise, streaks): 128 + amplitude *
  sin(2 pi freq * (x cos theta + y sin theta)) plus optional Gaussian
  noise and ``streaks`` bright bands parallel to the grating, then
  clamp + round.

Each patch draws from its own SplitMix64 stream seeded with
substream(seed, global_index), so corpora are reproducible byte for byte
and patches could be generated in any order. Within one patch the draw
order is: the noise block (one Gaussian per pixel, consumed row-major),
then one uniform per streak offset.

The oracle_* functions are deliberately naive reference implementations
(plain Python loops, documented summation order: row-major over the
kernel/window, index order over feature dimensions, left-to-right
accumulation into a float). They share no code with the fast paths and
exist so those paths can be checked for exact agreement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import FormatError
from .evaluate import Manifest, ManifestEntry, save_manifest
from .features import LabeledFeature
from .filters import Kernel, convolve_same
from .imgio import GrayImage, save_pgm
from .rng import SplitMix64, substream


@dataclass(frozen=True)
class NoiseRecipe:
    base: float = 128.0
    roughness: float = 20.0
    blur: int = 0  # box-blur radius in pixels, 0 = none

    def __post_init__(self):
        if not (0 <= self.base <= 255):
            raise ValueError(f"base {self.base} outside [0, 255]")
        if self.roughness < 0 or self.blur < 0:
            raise ValueError("roughness and blur must be >= 0")


@dataclass(frozen=True)
class GratingRecipe:
    theta: float = 0.0
    freq: float = 0.125
    amplitude: float = 50.0
    noise: float = 0.0
    streaks: int = 0
    streak_width: float = 1.5
    streak_boost: float = 70.0

    def __post_init__(self):
        if self.freq <= 0 or self.amplitude < 0 or self.noise < 0 or self.streaks < 0:
            raise ValueError("freq must be > 0; amplitude/noise/streaks must be >= 0")


Recipe = NoiseRecipe | GratingRecipe


def default_recipes() -> tuple[tuple[str, Recipe], ...]:
    return (
        ("water", NoiseRecipe(base=128.0, roughness=6.0, blur=2)),
        ("snow", NoiseRecipe(base=128.0, roughness=40.0, blur=0)),
        ("ice", GratingRecipe(theta=math.pi / 3, freq=0.125, amplitude=45.0,
                              noise=10.0, streaks=4)),
    )


@dataclass(frozen=True)
class SynthConfig:
    class_recipes: tuple[tuple[str, Recipe], ...] = field(default_factory=default_recipes)
    per_class: int = 100
    patch_side: int = 64
    seed: int = 0

    def __post_init__(self):
        if not self.class_recipes:
            raise ValueError("need at least one class recipe")
        if self.per_class < 1:
            raise ValueError(f"per_class must be >= 1, got {self.per_class}")
        if self.patch_side < 8:
            raise ValueError(f"patch_side must be >= 8, got {self.patch_side}")
        tags = [tag for tag, _ in self.class_recipes]
        if len(set(tags)) != len(tags):
            raise ValueError(f"duplicate class tags in {tags}")


def render_patch(recipe: Recipe, side: int, rng: SplitMix64) -> GrayImage:
    """One patch as an integer-valued float image in [0, 255]."""
    if isinstance(recipe, NoiseRecipe):
        img = recipe.base + recipe.roughness * rng.gauss_block(side * side).reshape(side, side)
        if recipe.blur > 0:
            from .filters import convolve_same

            bside = 2 * recipe.blur + 1
            box = Kernel(bside, np.full((bside, bside), 1.0 / (bside * bside)))
            img = convolve_same(img, box, padding="replicate")
    elif isinstance(recipe, GratingRecipe):
        ys, xs = np.mgrid[0:side, 0:side].astype(np.float64)
        proj = xs * math.cos(recipe.theta) + ys * math.sin(recipe.theta)
        img = 128.0 + recipe.amplitude * np.sin(2.0 * math.pi * recipe.freq * proj)
        if recipe.noise > 0:
            img = img + recipe.noise * rng.gauss_block(side * side).reshape(side, side)
        lo, hi = float(proj.min()), float(proj.max())
        for _ in range(recipe.streaks):
            c = lo + rng.random() * (hi - lo)
            img = img + recipe.streak_boost * (np.abs(proj - c) < recipe.streak_width)
    else:
        raise ValueError(f"unknown recipe {recipe!r}")
    return np.rint(np.clip(img, 0.0, 255.0))


def gen_corpus(cfg: SynthConfig, out_dir: str | Path) -> Manifest:
    """Write per_class patches per recipe as PGM plus a manifest.csv."""
    out = Path(out_dir)
    entries: list[ManifestEntry] = []
    gindex = 0
    for tag, recipe in cfg.class_recipes:
        for i in range(cfg.per_class):
            rng = SplitMix64(substream(cfg.seed, gindex))
            img = render_patch(recipe, cfg.patch_side, rng)
            sid = f"{tag}-{i:04d}"
            rel = f"{tag}/{sid}.pgm"
            save_pgm(img, out / rel)
            entries.append(ManifestEntry(sid, rel, tag))
            gindex += 1
    manifest = Manifest(
        classes=tuple(sorted(tag for tag, _ in cfg.class_recipes)),
        entries=entries,
        root=out,
    )
    save_manifest(manifest, out / "manifest.csv")
    return manifest


def shuffle_manifest_labels(manifest: Manifest, seed: int) -> Manifest:
    """Permute entry labels (multiset preserved); breaks any feature-label link."""
    labels = [e.label for e in manifest.entries]
    SplitMix64(seed).shuffle(labels)
    entries = [replace(e, label=lab) for e, lab in zip(manifest.entries, labels)]
    return Manifest(classes=manifest.classes, entries=entries, root=manifest.root)


# -- recipes file --------------------------------------------------------------

_RECIPE_KEYS = {
    "noise": {"base": float, "roughness": float, "blur": int},
    "grating": {"theta": float, "freq": float, "amplitude": float, "noise": float,
                "streaks": int, "streak_width": float, "streak_boost": float},
}


def parse_recipes(path: str | Path) -> tuple[tuple[str, Recipe], ...]:
    """Read a recipes file: one `<class> <noise|grating> key=value...` per line."""
    out: list[tuple[str, Recipe]] = []
    for ln, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 2 or parts[1] not in _RECIPE_KEYS:
            raise FormatError(f"{path}:{ln}: expected '<class> <noise|grating> k=v ...'")
        tag, kind = parts[0], parts[1]
        kwargs = {}
        for item in parts[2:]:
            key, eq, value = item.partition("=")
            if not eq or key not in _RECIPE_KEYS[kind]:
                raise FormatError(f"{path}:{ln}: bad recipe field {item!r}")
            try:
                kwargs[key] = _RECIPE_KEYS[kind][key](value)
            except ValueError as exc:
                raise FormatError(f"{path}:{ln}: bad value in {item!r}: {exc}") from exc
        try:
            recipe = NoiseRecipe(**kwargs) if kind == "noise" else GratingRecipe(**kwargs)
        except ValueError as exc:
            raise FormatError(f"{path}:{ln}: {exc}") from exc
        out.append((tag, recipe))
    if not out:
        raise FormatError(f"{path}: no recipes found")
    return tuple(out)


# -- naive reference implementations -------------------------------------------

def _fetch(grid: list[list[float]], y: int, x: int, h: int, w: int, padding: str) -> float:
    if 0 <= y < h and 0 <= x < w:
        return grid[y][x]
    if padding == "replicate":
        return grid[min(max(y, 0), h - 1)][min(max(x, 0), w - 1)]
    if padding == "zero":
        return 0.0
    raise ValueError(f"unknown padding {padding!r}")


def oracle_convolve(img: GrayImage, kernel: Kernel, padding: str = "replicate") -> np.ndarray:
    """Quadruple-loop convolution; taps accumulated row-major per pixel."""
    grid = np.asarray(img, dtype=np.float64).tolist()
    h, w = len(grid), len(grid[0])
    side = kernel.side
    half = side // 2
    taps = kernel.taps.tolist()
    out = [[0.0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for ky in range(side):
                sy = y - (ky - half)
                for kx in range(side):
                    sx = x - (kx - half)
                    acc += taps[ky][kx] * _fetch(grid, sy, sx, h, w, padding)
            out[y][x] = acc
    return np.array(out)


def oracle_stddev(img: GrayImage, side: int, padding: str = "replicate") -> np.ndarray:
    """Per-window recomputed population std; two row-major passes per pixel."""
    grid = np.asarray(img, dtype=np.float64).tolist()
    h, w = len(grid), len(grid[0])
    half = side // 2
    n = float(side * side)
    out = [[0.0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            total = 0.0
            for ky in range(side):
                for kx in range(side):
                    total += _fetch(grid, y + ky - half, x + kx - half, h, w, padding)
            mean = total / n
            sq = 0.0
            for ky in range(side):
                for kx in range(side):
                    d = _fetch(grid, y + ky - half, x + kx - half, h, w, padding) - mean
                    sq += d * d
            out[y][x] = math.sqrt(sq / n)
    return np.array(out)


def oracle_nn(train: list[LabeledFeature], query, k: int = 1):
    """Exhaustive scan; distances accumulated left to right in index order.

    Returns (label, neighbor_ids, distances) with the same tie rules the
    classifier documents.
    """
    qv = query.values.tolist()
    scored = []
    for item in train:
        d = 0.0
        for a, b in zip(item.feature.values.tolist(), qv):
            d += abs(a - b)
        scored.append((d, item.source, item.label))
    scored.sort()
    top = scored[:k]
    votes: dict[str, int] = {}
    summed: dict[str, float] = {}
    for d, _, lab in top:
        votes[lab] = votes.get(lab, 0) + 1
        summed[lab] = summed.get(lab, 0.0) + d
    best = max(votes.values())
    tied = [lab for lab, c in votes.items() if c == best]
    label = min(tied, key=lambda lab: (summed[lab], lab))
    return label, tuple(s for _, s, _ in top), tuple(d for d, _, _ in top)
