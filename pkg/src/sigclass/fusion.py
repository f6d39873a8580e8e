"""Weighted sensor fusion and discriminative frequency selection.

Fusion collapses the per-channel spectra of one time block into a single
300-bin row via a normalized weighted average.  Selection then keeps the bins
where some class's mean response stands out against the grand mean across all
classes, while dropping bins that are hot for too many classes at once (those
cannot identify anything).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, SelectionError, ValidationError
from .spectral import N_BINS


@dataclass
class FusionWeights:
    """Per-channel weights w_j over an ordered channel subset."""

    weights: dict
    selected_channels: list

    def __post_init__(self):
        if not self.selected_channels:
            raise ValidationError("need at least one fused channel")
        for cid in self.selected_channels:
            w = self.weights.get(cid)
            if w is None:
                raise ConfigurationError(f"no weight for selected channel {cid!r}")
            if not math.isfinite(w) or w < 0:
                raise ValidationError(f"weight for {cid!r} must be finite and >= 0")

    @classmethod
    def uniform(cls, channels):
        return cls(weights={cid: 1.0 for cid in channels}, selected_channels=list(channels))


@dataclass
class SpectrumRow:
    """One fused 300-bin magnitude row plus its class label."""

    bins: np.ndarray
    label: str


@dataclass
class FeatureMask:
    """Sorted distinct 1-based bin indices retained for the classifier."""

    kept: list

    def __post_init__(self):
        kept = sorted(set(int(b) for b in self.kept))
        if not kept or kept[0] < 1 or kept[-1] > N_BINS:
            raise ValidationError("mask must keep between 1 and 300 bins inside [1, 300]")
        self.kept = kept

    def __len__(self):
        return len(self.kept)


@dataclass
class SelectionReport:
    """All selection intermediates, for inspection and the report CSV."""

    class_means: dict
    global_mean: np.ndarray
    ratios: dict
    threshold: float
    per_bin_class_counts: np.ndarray
    warnings: list = field(default_factory=list)


def fuse(spectra, fusion_weights):
    """Weighted average of per-channel magnitudes at each frequency.

    bins[i] = sum_j w_j * |S_ij| / sum_j w_j over the selected channels.
    All spectra must come from the same time block and share one label.
    """
    total = 0.0
    acc = np.zeros(N_BINS)
    labels = set()
    for cid in fusion_weights.selected_channels:
        spec = spectra.get(cid)
        if spec is None:
            raise ConfigurationError(f"fusion needs channel {cid!r} but it is missing")
        w = fusion_weights.weights[cid]
        acc += w * spec.bins
        total += w
        labels.add(spec.label)
    if total <= 0:
        raise ValidationError("total fusion weight must be > 0")
    if len(labels) != 1:
        raise ValidationError(f"fused spectra carry mixed labels {sorted(labels)}")
    return SpectrumRow(bins=acc / total, label=labels.pop())


def default_max_classes_per_bin(n_classes):
    """Guard default: ceil(T/2) - 1 super-threshold classes per bin, floor 1."""
    return max(1, math.ceil(n_classes / 2) - 1)


def compute_selection(rows, threshold, max_classes_per_bin):
    """Pick the discriminative frequency bins from labeled fused rows.

    Per class, the mean response at each bin is divided by the grand mean over
    all rows; a bin is kept when at least one class ratio strictly exceeds
    `threshold`, unless more than `max_classes_per_bin` classes exceed it
    there (such bins identify nothing).  Bins whose grand mean is zero have
    undefined ratios and are excluded with a warning.

    Returns (FeatureMask, SelectionReport); raises SelectionError (with the
    report attached) when nothing survives.
    """
    if threshold <= 1:
        raise ValidationError("threshold must be > 1")
    by_label = {}
    for row in rows:
        by_label.setdefault(row.label, []).append(row.bins)
    if len(by_label) < 2:
        raise ValidationError("selection needs at least 2 distinct labels")
    for label, stack in by_label.items():
        if len(stack) < 10:
            raise ValidationError(f"label {label!r} has {len(stack)} rows; need >= 10")

    class_means = {label: np.mean(np.stack(stack), axis=0) for label, stack in by_label.items()}
    global_mean = np.mean(np.stack([row.bins for row in rows]), axis=0)

    warnings = []
    zero = global_mean == 0
    if np.any(zero):
        bins = [int(i) + 1 for i in np.flatnonzero(zero)]
        warnings.append(f"{len(bins)} bins have zero grand mean and were excluded: {bins[:10]}")

    ratios = {}
    counts = np.zeros(N_BINS, dtype=int)
    for label, mean in class_means.items():
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(zero, np.nan, mean / np.where(zero, 1.0, global_mean))
        ratios[label] = ratio
        counts += (~zero) & (ratio > threshold)

    keep = (counts >= 1) & (counts <= max_classes_per_bin)
    report = SelectionReport(
        class_means=class_means,
        global_mean=global_mean,
        ratios=ratios,
        threshold=float(threshold),
        per_bin_class_counts=counts,
        warnings=warnings,
    )
    kept = [int(i) + 1 for i in np.flatnonzero(keep)]
    if not kept:
        best = max(float(np.nanmax(r)) for r in ratios.values())
        raise SelectionError(
            f"no frequency bin exceeded threshold {threshold} for <= "
            f"{max_classes_per_bin} classes (best ratio {best:.3f})",
            report=report,
        )
    return FeatureMask(kept=kept), report


def apply_mask(row, mask):
    """Project one fused row onto the kept bins, in ascending bin order."""
    idx = np.asarray(mask.kept, dtype=int) - 1
    return row.bins[idx].astype(float)


def write_selection_report_csv(path, report):
    """Class x bin table of means and ratios, plus the super-threshold counts."""
    bins_header = ",".join(f"hz_{i}" for i in range(1, N_BINS + 1))
    lines = [f"row,{bins_header}"]

    def fmt(arr):
        return ",".join(repr(float(v)) for v in arr)

    lines.append("global_mean," + fmt(report.global_mean))
    for label in report.class_means:
        lines.append(f"mean:{label}," + fmt(report.class_means[label]))
    for label in report.ratios:
        lines.append(f"ratio:{label}," + fmt(report.ratios[label]))
    lines.append("superthreshold_classes," + ",".join(str(int(c)) for c in report.per_bin_class_counts))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_mask(path, mask):
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(str(b) for b in mask.kept) + "\n")


def load_mask(path):
    with open(path, "r", encoding="ascii") as fh:
        kept = [int(t) for t in fh.read().split()]
    return FeatureMask(kept=kept)
