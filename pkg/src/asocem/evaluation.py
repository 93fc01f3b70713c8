"""Pixelwise sensitivity / specificity of contamination masks."""

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .micrograph import read_micrograph

logger = logging.getLogger(__name__)

MASK_SUFFIXES = (".png", ".mrc", ".tif", ".tiff")


@dataclass
class Metrics:
    sensitivity: float
    specificity: float
    sensitivity_defined: bool = True
    specificity_defined: bool = True


@dataclass
class MetricEntry:
    name: str
    sensitivity: float
    specificity: float
    sensitivity_defined: bool
    specificity_defined: bool


@dataclass
class MetricsReport:
    per_micrograph: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    include_undefined: bool = False

    def _mean(self, key):
        vals = [
            getattr(e, key)
            for e in self.per_micrograph
            if self.include_undefined or getattr(e, key + "_defined")
        ]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def mean_sensitivity(self):
        return self._mean("sensitivity")

    @property
    def mean_specificity(self):
        return self._mean("specificity")

    @property
    def ok(self):
        return bool(self.per_micrograph) and not self.errors

    def to_dict(self):
        return {
            "per_micrograph": [asdict(e) for e in self.per_micrograph],
            "mean_sensitivity": self.mean_sensitivity,
            "mean_specificity": self.mean_specificity,
            "errors": list(self.errors),
        }

    def write_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["name", "sensitivity", "specificity", "sensitivity_defined", "specificity_defined"]
            )
            for e in self.per_micrograph:
                writer.writerow(
                    [e.name, e.sensitivity, e.specificity, e.sensitivity_defined, e.specificity_defined]
                )
            writer.writerow(["MEAN", self.mean_sensitivity, self.mean_specificity, "", ""])


def _as_bool(mask):
    return np.asarray(getattr(mask, "pixels", mask)) != 0


def compute_metrics(pred, gt):
    """Sensitivity and specificity of ``pred`` against ``gt``.

    A ground truth without contamination has undefined sensitivity; it is
    reported as 1.0 with ``sensitivity_defined=False``. Likewise for
    specificity when the ground truth is fully contaminated.
    """
    p = _as_bool(pred)
    g = _as_bool(gt)
    if p.shape != g.shape:
        raise ValueError(f"mask shapes differ: {p.shape} vs {g.shape}")
    pos = np.count_nonzero(g)
    neg = g.size - pos
    tp = np.count_nonzero(p & g)
    tn = np.count_nonzero(~p & ~g)
    sens = tp / pos if pos else 1.0
    spec = tn / neg if neg else 1.0
    return Metrics(float(sens), float(spec), pos > 0, neg > 0)


def _index(directory):
    out = {}
    for p in sorted(Path(directory).iterdir()):
        if p.is_file() and p.suffix.lower() in MASK_SUFFIXES:
            out.setdefault(p.stem, p)
    return out


def batch_evaluate(pred_dir, gt_dir, include_undefined=False):
    """Pair masks by filename stem and collect per-file metrics.

    Unpaired files and pairs with mismatched dimensions are recorded in
    ``report.errors`` and skipped; no resampling is attempted.
    """
    preds = _index(pred_dir)
    gts = _index(gt_dir)
    report = MetricsReport(include_undefined=include_undefined)
    for stem in sorted(set(preds) | set(gts)):
        if stem not in gts:
            report.errors.append(f"{stem}: no ground truth")
            continue
        if stem not in preds:
            report.errors.append(f"{stem}: no prediction")
            continue
        pred = read_micrograph(preds[stem]).pixels
        gt = read_micrograph(gts[stem]).pixels
        if pred.shape != gt.shape:
            report.errors.append(f"{stem}: shape {pred.shape} vs ground truth {gt.shape}")
            continue
        m = compute_metrics(pred, gt)
        report.per_micrograph.append(
            MetricEntry(stem, m.sensitivity, m.specificity, m.sensitivity_defined, m.specificity_defined)
        )
    if not preds and not gts:
        report.errors.append("no masks found")
    for err in report.errors:
        logger.warning(err)
    return report
