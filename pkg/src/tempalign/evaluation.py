"""Temporal grounding metrics: IoU, R@1 at IoU thresholds, mIoU, and RC."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Sequence, Tuple

from .records import Dataset

DEFAULT_THRESHOLDS = (0.1, 0.3, 0.5, 0.7, 0.9)
# RC averages the drop over these keys; the IoU=0.1 column is not part of it
RC_KEYS = ("r1@0.3", "r1@0.5", "r1@0.7", "r1@0.9", "miou")

Interval = Tuple[float, float]


def iou(a: Interval, b: Interval) -> float:
    """Temporal IoU.  A degenerate ``a`` (start >= end) scores 0."""
    a_s, a_e = a
    b_s, b_e = b
    if a_s >= a_e:
        return 0.0
    inter = min(a_e, b_e) - max(a_s, b_s)
    if inter <= 0:
        return 0.0
    return inter / (max(a_e, b_e) - min(a_s, b_s))


def threshold_key(t: float) -> str:
    return f"r1@{t:g}"


@dataclass
class PredictionSet:
    """Per-sample predicted and reference intervals."""

    pairs: Dict[str, Tuple[Interval, Interval]]

    def __post_init__(self):
        for sid, (_, ref) in self.pairs.items():
            if not ref[0] < ref[1]:
                raise ValueError(f"sample {sid!r}: reference interval {ref} is not well-formed")

    def __len__(self):
        return len(self.pairs)

    @classmethod
    def from_files(cls, pred_path, dataset: Dataset, split: str = None) -> "PredictionSet":
        refs = {r.sample_id: (r.t_s, r.t_e) for r in dataset.records if split is None or r.split == split}
        preds = load_predictions(pred_path)
        missing = sorted(set(refs) - set(preds))
        if missing:
            shown = ", ".join(missing[:20]) + (" ..." if len(missing) > 20 else "")
            raise ValueError(f"{len(missing)} sample ids lack predictions: {shown}")
        return cls({sid: (preds[sid], refs[sid]) for sid in sorted(refs)})


def load_predictions(path) -> Dict[str, Interval]:
    """Read JSONL lines of ``{sample_id, pred_start, pred_end}``."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                out[row["sample_id"]] = (float(row["pred_start"]), float(row["pred_end"]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad prediction line ({exc})") from None
    return out


@dataclass
class MetricReport:
    r1_at: Dict[float, float]
    miou: float
    count: int = 0

    def as_dict(self) -> Dict[str, float]:
        out = {threshold_key(t): v for t, v in sorted(self.r1_at.items())}
        out["miou"] = self.miou
        return out

    def to_dict(self) -> dict:
        return {"count": self.count, **self.as_dict()}


def evaluate(preds, thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> MetricReport:
    """R@1 at each IoU threshold and mIoU, all as percentages."""
    pairs: Iterable = preds.pairs.values() if isinstance(preds, PredictionSet) else preds
    scores = [iou(p, r) for p, r in pairs]
    if not scores:
        raise ValueError("evaluate: empty prediction set")
    m = len(scores)
    # 1e-9 slack keeps e.g. an IoU of exactly 0.5 from failing on rounding
    r1 = {float(t): 100.0 * sum(s >= t - 1e-9 for s in scores) / m for t in thresholds}
    return MetricReport(r1, 100.0 * sum(scores) / m, m)


def rc(
    report_high: Mapping[str, float] | MetricReport,
    report_low: Mapping[str, float] | MetricReport,
    metric_keys: Sequence[str] = RC_KEYS,
) -> float:
    """Robustness consistency: mean drop from the high-bias to the low-bias test set."""
    high = report_high.as_dict() if isinstance(report_high, MetricReport) else report_high
    low = report_low.as_dict() if isinstance(report_low, MetricReport) else report_low
    for name, rep in (("high", high), ("low", low)):
        missing = [k for k in metric_keys if k not in rep]
        if missing:
            raise KeyError(f"{name} report lacks {missing}")
    return sum(high[k] - low[k] for k in metric_keys) / len(metric_keys)
