"""Dataset manifests, reproducible splits, and the accuracy-vs-train-size harness.

Manifest file (UTF-8 CSV)::

    sample_id,path,label[,x0,y0,side]

Paths are resolved relative to the manifest's directory. The optional
crop columns extract the (x0, y0, side) square patch at load time; rows
may leave them empty.

Splits are stratified by default and fully determined by (seed, trial):
trial t draws from a SplitMix64 stream seeded with substream(seed, t)
(see rng module for the exact generator and shuffle definitions), so
partitions reproduce across machines and processes. Per-class train
quotas for fractional splits are allocated by largest remainder, which
keeps per-class proportions within one sample of the target.

The report file is a CSV with one detail row per (training size, trial),
one aggregate row per training size (mean and population std of the
per-trial accuracies, confusion counts summed over trials), and a
leading ``#config=`` comment echoing the full configuration. Identical
inputs produce a byte-identical file.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .classify import KnnModel, classify_batch
from .errors import FormatError
from .features import (FeatureConfig, LabeledFeature, apply_minmax,
                       fit_minmax, make_extractor)
from .imgio import GrayImage, crop_patch, load_image, to_grayscale
from .ioutil import atomic_write_text
from .rng import SplitMix64, substream


@dataclass(frozen=True)
class ManifestEntry:
    sample_id: str
    path: str
    label: str
    crop: tuple[int, int, int] | None = None  # (x0, y0, side)


@dataclass
class Manifest:
    classes: tuple[str, ...]
    entries: list[ManifestEntry]
    root: Path | None = None  # base directory for relative entry paths


def load_manifest(path: str | Path, expected_classes: tuple[str, ...] | None = None,
                  check_files: bool = True) -> Manifest:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise FormatError(f"{path}: empty manifest")
    header = rows[0]
    if header == ["sample_id", "path", "label"]:
        has_crop = False
    elif header == ["sample_id", "path", "label", "x0", "y0", "side"]:
        has_crop = True
    else:
        raise FormatError(f"{path}: unexpected manifest header {header}")

    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    dupes: list[str] = []
    for ln, row in enumerate(rows[1:], 2):
        if not row:
            continue
        if len(row) != len(header):
            raise FormatError(f"{path}:{ln}: expected {len(header)} fields, got {len(row)}")
        sid, rel, label = row[0], row[1], row[2]
        if not sid or not rel or not label:
            raise FormatError(f"{path}:{ln}: empty sample_id, path or label")
        if sid in seen:
            dupes.append(sid)
        seen.add(sid)
        crop = None
        if has_crop and any(cell.strip() for cell in row[3:6]):
            try:
                x0, y0, side = (int(cell) for cell in row[3:6])
            except ValueError as exc:
                raise FormatError(f"{path}:{ln}: bad crop columns: {exc}") from exc
            crop = (x0, y0, side)
        entries.append(ManifestEntry(sid, rel, label, crop))
    if dupes:
        raise FormatError(f"{path}: duplicate sample ids: {', '.join(sorted(set(dupes)))}")

    classes = expected_classes or tuple(sorted({e.label for e in entries}))
    unknown = sorted({e.label for e in entries} - set(classes))
    if unknown:
        raise FormatError(f"{path}: unknown classes: {', '.join(unknown)}")

    root = path.parent
    if check_files:
        missing = [e.sample_id for e in entries if not (root / e.path).is_file()]
        if missing:
            raise FormatError(
                f"{path}: missing image files for: {', '.join(missing[:10])}"
                + (f" (+{len(missing) - 10} more)" if len(missing) > 10 else "")
            )
    return Manifest(classes=classes, entries=entries, root=root)


def save_manifest(manifest: Manifest, path: str | Path) -> None:
    has_crop = any(e.crop is not None for e in manifest.entries)
    header = ["sample_id", "path", "label"] + (["x0", "y0", "side"] if has_crop else [])
    lines = [",".join(header)]
    for e in manifest.entries:
        for fieldval in (e.sample_id, e.path, e.label):
            if any(c in fieldval for c in ",\n\r\""):
                raise FormatError(f"illegal character in manifest field {fieldval!r}")
        row = [e.sample_id, e.path, e.label]
        if has_crop:
            row += [str(v) for v in e.crop] if e.crop else ["", "", ""]
        lines.append(",".join(row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_sample(manifest: Manifest, entry: ManifestEntry) -> GrayImage:
    """Load one manifest entry as a grayscale patch (crop applied if set)."""
    base = manifest.root or Path(".")
    img = load_image(base / entry.path)
    if img.ndim == 3:
        img = to_grayscale(img)
    if entry.crop is not None:
        img = crop_patch(img, *entry.crop)
    return img


# -- splitting ----------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    """How to partition: a train fraction or a per-class train count."""

    train_fraction: float | None = None
    train_count: int | None = None
    trials: int = 10
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if (self.train_fraction is None) == (self.train_count is None):
            raise ValueError("set exactly one of train_fraction / train_count")
        if self.train_fraction is not None and not (0.0 < self.train_fraction < 1.0):
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.train_count is not None and self.train_count < 1:
            raise ValueError(f"train_count must be >= 1, got {self.train_count}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")


def _fraction_quotas(sizes: list[int], fraction: float) -> list[int]:
    # largest-remainder allocation of round(fraction * total) across classes
    total_target = math.floor(fraction * sum(sizes) + 0.5)
    quotas = [fraction * n for n in sizes]
    base = [math.floor(q) for q in quotas]
    rem = total_target - sum(base)
    order = sorted(range(len(sizes)), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in order[: max(rem, 0)]:
        base[i] += 1
    return [min(b, n) for b, n in zip(base, sizes)]


def split(items: list, spec: SplitSpec, trial: int) -> tuple[list, list]:
    """Disjoint, exhaustive (train, test) partition of labeled items.

    Items need a ``label`` attribute (manifest entries and labeled
    features both qualify). Fully determined by (spec.seed, trial).
    """
    if not (0 <= trial < spec.trials):
        raise ValueError(f"trial {trial} outside [0, {spec.trials})")
    rng = SplitMix64(substream(spec.seed, trial))
    classes = sorted({it.label for it in items})

    if spec.stratified:
        by_class = {c: [i for i, it in enumerate(items) if it.label == c] for c in classes}
        sizes = [len(by_class[c]) for c in classes]
        if spec.train_count is not None:
            for c, n in zip(classes, sizes):
                if spec.train_count >= n:
                    raise ValueError(
                        f"class {c!r} has {n} samples, cannot train on {spec.train_count}"
                    )
            quotas = [spec.train_count] * len(classes)
        else:
            quotas = _fraction_quotas(sizes, spec.train_fraction)
        train_idx: list[int] = []
        test_idx: list[int] = []
        for c, quota in zip(classes, quotas):
            idx = list(by_class[c])
            rng.shuffle(idx)
            train_idx.extend(idx[:quota])
            test_idx.extend(idx[quota:])
    else:
        idx = list(range(len(items)))
        rng.shuffle(idx)
        if spec.train_count is not None:
            n_train = spec.train_count * len(classes)
            if n_train >= len(items):
                raise ValueError(
                    f"train size {n_train} leaves no test samples out of {len(items)}"
                )
        else:
            n_train = math.floor(spec.train_fraction * len(items) + 0.5)
        train_idx, test_idx = idx[:n_train], idx[n_train:]

    return [items[i] for i in train_idx], [items[i] for i in test_idx]


# -- evaluation ---------------------------------------------------------------

@dataclass
class SizePoint:
    train_per_class: int | None  # None for fraction-mode points
    train_total: int
    accuracies: list[float]
    mean: float
    std: float  # population std over trials
    confusions: list[np.ndarray]  # one (C, C) int matrix per trial; rows = true


@dataclass
class EvalReport:
    config: list[tuple[str, str]]
    classes: tuple[str, ...]
    points: list[SizePoint]


def extract_manifest_features(manifest: Manifest, cfg: FeatureConfig,
                              threads: int | None = None) -> list[LabeledFeature]:
    """Extract features for every manifest entry, in manifest order."""
    extractor = make_extractor(cfg)

    def one(entry: ManifestEntry) -> LabeledFeature:
        try:
            img = load_sample(manifest, entry)
            return LabeledFeature(extractor(img), entry.label, entry.sample_id)
        except OSError as exc:
            raise OSError(f"sample {entry.sample_id}: {exc}") from exc
        except (FormatError, ValueError) as exc:
            raise FormatError(f"sample {entry.sample_id}: {exc}") from exc

    if threads == 1 or len(manifest.entries) < 2:
        return [one(e) for e in manifest.entries]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, manifest.entries))


def evaluate_features(feats: list[LabeledFeature], classes: tuple[str, ...],
                      spec: SplitSpec, k: int = 1,
                      train_sizes: list[int] | None = None,
                      normalize: bool = False,
                      config: list[tuple[str, str]] | None = None) -> EvalReport:
    """Repeated-split evaluation over precomputed features."""
    class_index = {c: i for i, c in enumerate(classes)}
    specs: list[tuple[int | None, SplitSpec]]
    if train_sizes:
        specs = [(s, replace(spec, train_count=s, train_fraction=None)) for s in train_sizes]
    else:
        specs = [(spec.train_count, spec)]

    points: list[SizePoint] = []
    for per_class, sp in specs:
        accuracies: list[float] = []
        confusions: list[np.ndarray] = []
        train_total = 0
        for trial in range(sp.trials):
            train, test = split(feats, sp, trial)
            train_total = len(train)
            if normalize:
                lo, span = fit_minmax(train)
                train = [apply_minmax(f, lo, span) for f in train]
                test = [apply_minmax(f, lo, span) for f in test]
            model = KnnModel(train, k=k)
            preds = classify_batch(model, [f.feature for f in test])
            conf = np.zeros((len(classes), len(classes)), dtype=np.int64)
            correct = 0
            for f, p in zip(test, preds):
                conf[class_index[f.label], class_index[p.label]] += 1
                correct += int(p.label == f.label)
            accuracies.append(correct / len(test))
            confusions.append(conf)
        points.append(SizePoint(
            train_per_class=per_class,
            train_total=train_total,
            accuracies=accuracies,
            mean=float(np.mean(accuracies)),
            std=float(np.std(accuracies)),
            confusions=confusions,
        ))
    return EvalReport(config=list(config or []), classes=tuple(classes), points=points)


def evaluate(manifest: Manifest, cfg: FeatureConfig, spec: SplitSpec, k: int = 1,
             train_sizes: list[int] | None = None, normalize: bool = False,
             threads: int | None = None) -> EvalReport:
    """Full pipeline: load images, extract once per sample, evaluate splits."""
    feats = extract_manifest_features(manifest, cfg, threads=threads)
    config = cfg.describe() + [
        ("k", str(k)),
        ("seed", str(spec.seed)),
        ("trials", str(spec.trials)),
        ("stratified", str(spec.stratified)),
        ("normalize", str(normalize)),
        ("train_fraction", "" if spec.train_fraction is None else repr(spec.train_fraction)),
        ("train_sizes", "|".join(str(s) for s in train_sizes) if train_sizes else ""),
        ("classes", "|".join(manifest.classes)),
        ("accuracy_std", "population"),
    ]
    return evaluate_features(feats, manifest.classes, spec, k=k,
                             train_sizes=train_sizes, normalize=normalize,
                             config=config)


# -- report file --------------------------------------------------------------

def render_report(report: EvalReport) -> str:
    """Deterministic CSV rendering of an EvalReport."""
    classes = report.classes
    conf_cols = [f"n_{t}_{p}" for t in classes for p in classes]
    lines = []
    lines.append("#config=" + ";".join(f"{k}={v}" for k, v in report.config))
    lines.append(",".join(
        ["kind", "train_per_class", "train_total", "trial", "accuracy",
         "accuracy_mean", "accuracy_std"] + conf_cols
    ))
    for pt in report.points:
        size_cell = "" if pt.train_per_class is None else str(pt.train_per_class)
        for trial, (acc, conf) in enumerate(zip(pt.accuracies, pt.confusions)):
            row = ["trial", size_cell, str(pt.train_total), str(trial),
                   repr(float(acc)), "", ""]
            row += [str(int(v)) for v in conf.ravel()]
            lines.append(",".join(row))
        total_conf = np.sum(pt.confusions, axis=0)
        row = ["aggregate", size_cell, str(pt.train_total), "", "",
               repr(float(pt.mean)), repr(float(pt.std))]
        row += [str(int(v)) for v in total_conf.ravel()]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_report(report: EvalReport, path: str | Path) -> None:
    atomic_write_text(path, render_report(report))
