"""Positive-class precision / recall / F1 and variant-by-dataset report tables."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping, Sequence

from .errors import ValidationError

__all__ = [
    "ConfusionCounts",
    "Metrics",
    "confusion",
    "precision_recall_f1",
    "ablation_report",
    "AblationReport",
    "reference_tables",
]

POSITIVE = "positive"
MISSING = "—"
METRICS = ("f1", "precision", "recall")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValidationError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class Metrics:
    """Percentages, unrounded; use ``formatted`` for the 3-decimal style."""

    precision: float
    recall: float
    f1: float

    def formatted(self) -> tuple[str, str, str]:
        return tuple(f"{v:.3f}" for v in (self.precision, self.recall, self.f1))

    def __getitem__(self, name: str) -> float:
        return getattr(self, name)


def _is_pos(label) -> bool:
    if isinstance(label, str):
        return label == POSITIVE
    return bool(label)


def confusion(preds: Iterable[tuple[str, object]], gold: Iterable[tuple[str, object]]) -> ConfusionCounts:
    """Count agreement between (pmid, label) pairs; labels are "positive"/"negative" or truthy ints."""
    p = dict(preds)
    g = dict(gold)
    if p.keys() != g.keys():
        only_p = sorted(set(p) - set(g))
        only_g = sorted(set(g) - set(p))
        raise ValidationError(f"pmid sets differ: only in predictions {only_p[:10]}, only in gold {only_g[:10]}")
    tp = fp = fn = tn = 0
    for pmid, gl in g.items():
        pp, gp = _is_pos(p[pmid]), _is_pos(gl)
        if pp and gp:
            tp += 1
        elif pp:
            fp += 1
        elif gp:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


def _ratio(a: int, b: int) -> float:
    return a / b if b else 0.0


def precision_recall_f1(c: ConfusionCounts) -> Metrics:
    p = _ratio(c.tp, c.tp + c.fp)
    r = _ratio(c.tp, c.tp + c.fn)
    f = 2 * p * r / (p + r) if p + r else 0.0
    return Metrics(100 * p, 100 * r, 100 * f)


# -- reports -----------------------------------------------------------------

VARIANT_LABELS = {
    "plain_cnn": "CNN",
    "mcnn": "MCNN",
    "kcnn": "KCNN",
    "kmcnn": "KMCNN",
}


@dataclass
class AblationReport:
    variants: list[str]
    datasets: list[str]
    cells: dict[tuple[str, str], Metrics]

    def value(self, variant: str, dataset: str, metric: str) -> float | None:
        m = self.cells.get((variant, dataset))
        return None if m is None else m[metric]

    def rows(self, metric: str = "f1") -> list[list[str]]:
        if metric not in METRICS:
            raise ValidationError(f"unknown metric {metric!r}")
        out = [[""] + list(self.datasets)]
        for v in self.variants:
            row = [VARIANT_LABELS.get(v, v)]
            for d in self.datasets:
                val = self.value(v, d, metric)
                row.append(MISSING if val is None else f"{val:.3f}")
            out.append(row)
        return out

    def to_csv(self, metric: str = "f1") -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(self.rows(metric))
        return buf.getvalue()

    def to_text(self, metric: str = "f1") -> str:
        rows = self.rows(metric)
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines = []
        for j, r in enumerate(rows):
            cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
            lines.append("  ".join(cells).rstrip())
            if j == 0:
                lines.append("-" * len(lines[0]))
        return "\n".join(lines) + "\n"


def ablation_report(
    runs: Mapping[str, Mapping[str, Metrics]], datasets: Sequence[str] | None = None
) -> AblationReport:
    """Variant x dataset matrix; cells absent from ``runs`` render as a dash."""
    variants = list(runs)
    if datasets is None:
        seen: dict[str, None] = {}
        for per in runs.values():
            seen.update(dict.fromkeys(per))
        datasets = list(seen)
    cells = {(v, d): m for v, per in runs.items() for d, m in per.items()}
    return AblationReport(variants, list(datasets), cells)


def reference_tables() -> AblationReport:
    """Published F1 / precision / recall values, shipped as a golden fixture
    for checking report layout (not reproducible without the original data)."""
    text = resources.files("litriage").joinpath("data/reference_tables.csv").read_text(encoding="utf-8")
    rows = list(csv.DictReader(io.StringIO(text)))
    datasets = list(dict.fromkeys(r["dataset"] for r in rows))
    variants = list(dict.fromkeys(r["method"] for r in rows))
    cells = {
        (r["method"], r["dataset"]): Metrics(float(r["precision"]), float(r["recall"]), float(r["f1"]))
        for r in rows
    }
    return AblationReport(variants, datasets, cells)
