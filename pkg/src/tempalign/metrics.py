"""Temporal binning, Jensen-Shannon divergence and the TJSD bias audit.

A video is cut into ``n`` equal moments.  An annotated interval falls in
the (start-moment, end-moment) cell ``(i, j)`` with ``i <= j``, which gives
``n(n+1)/2`` temporal bins.  TJSD is the base-2 JSD between the binned
counts and the uniform distribution over those bins.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .records import Dataset

LEVELS = ("process", "verb", "object", "composition")

_SNAP = 1e-9


def _snap(x: float) -> float:
    # absorb float noise so values like 3.0000000004 land on the boundary
    r = round(x)
    return float(r) if abs(x - r) < _SNAP else x


@dataclass(frozen=True)
class TemporalBinGrid:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")

    @property
    def size(self) -> int:
        return self.n * (self.n + 1) // 2

    def index(self, i: int, j: int) -> int:
        """Row-major position of cell ``(i, j)``."""
        if not 0 <= i <= j < self.n:
            raise ValueError(f"invalid bin ({i}, {j}) for n={self.n}")
        return i * self.n - i * (i - 1) // 2 + (j - i)

    def pairs(self) -> List[Tuple[int, int]]:
        return [(i, j) for i in range(self.n) for j in range(i, self.n)]


@dataclass
class TemporalHistogram:
    grid: TemporalBinGrid
    counts: np.ndarray = None

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros(self.grid.size, dtype=np.int64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} counts, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def add(self, t_s: float, t_e: float, duration: float) -> int:
        k = self.grid.index(*bin_of(t_s, t_e, duration, self.grid.n))
        self.counts[k] += 1
        return k

    def merge(self, other: "TemporalHistogram") -> "TemporalHistogram":
        if other.grid != self.grid:
            raise ValueError("cannot merge histograms on different grids")
        return TemporalHistogram(self.grid, self.counts + other.counts)

    @classmethod
    def from_records(cls, records: Iterable, n: int) -> "TemporalHistogram":
        hist = cls(TemporalBinGrid(n))
        for rec in records:
            hist.add(rec.t_s, rec.t_e, rec.video_duration)
        return hist


def bin_of(t_s: float, t_e: float, duration: float, n: int) -> Tuple[int, int]:
    """Map an interval to its (start-moment, end-moment) cell.

    An end time lying exactly on a moment boundary belongs to the moment it
    closes, so a full-span interval maps to ``(0, n - 1)``.
    """
    if duration <= 0:
        raise ValueError(f"duration must be > 0, got {duration}")
    if not t_s < t_e:
        raise ValueError(f"need t_s < t_e, got t_s={t_s}, t_e={t_e}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    i = math.floor(_snap(n * t_s / duration))
    j = math.ceil(_snap(n * t_e / duration)) - 1
    i = min(max(i, 0), n - 1)
    j = min(max(j, 0), n - 1)
    return i, max(i, j)


def _kl2(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    return float(np.sum(p[mask] * np.log2(p[mask] / q[mask])))


def jsd(p: Sequence[float], q: Sequence[float]) -> float:
    """Base-2 Jensen-Shannon divergence of two normalized distributions."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    for name, d in (("P", p), ("Q", q)):
        if (d < 0).any() or abs(d.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} is not a normalized distribution")
    m = (p + q) / 2
    value = 0.5 * _kl2(p, m) + 0.5 * _kl2(q, m)
    return min(max(value, 0.0), 1.0)


def tjsd(hist: TemporalHistogram) -> float:
    """JSD between the histogram's bin distribution and the uniform one."""
    total = hist.total
    if total <= 0:
        raise ValueError("tjsd of an empty histogram")
    p = hist.counts / total
    return jsd(p, np.full(len(p), 1.0 / len(p)))


@dataclass
class AuditReport:
    level: str
    n: int
    weighting: str
    per_group: Dict[str, Tuple[int, float]]
    aggregate: float
    excluded_groups: List[Tuple[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "n": self.n,
            "bins": TemporalBinGrid(self.n).size,
            "weighting": self.weighting,
            "aggregate": self.aggregate,
            "per_group": {k: {"count": c, "tjsd": v} for k, (c, v) in sorted(self.per_group.items())},
            "excluded_groups": [{"group": g, "reason": r} for g, r in self.excluded_groups],
        }


def group_key(record, level: str) -> str:
    if level == "process":
        return "all"
    if level == "verb":
        return record.verb
    if level == "object":
        return record.object
    if level == "composition":
        return f"{record.verb}/{record.object}"
    raise ValueError(f"unknown level {level!r}; expected one of {LEVELS}")


def multilevel_tjsd(
    dataset: Dataset,
    level: str,
    n: int = 10,
    min_group_size: int = 10,
    weighting: str = "weighted",
) -> AuditReport:
    """TJSD per group at one bias level plus a count-weighted (or plain) mean."""
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}; expected one of {LEVELS}")
    if weighting not in ("weighted", "unweighted"):
        raise ValueError(f"unknown weighting {weighting!r}")
    if not dataset.records:
        raise ValueError("multilevel_tjsd: empty dataset")
    groups = defaultdict(list)
    for rec in dataset.records:
        groups[group_key(rec, level)].append(rec)
    per_group, excluded = {}, []
    for key in sorted(groups):
        recs = groups[key]
        if len(recs) < min_group_size:
            excluded.append((key, f"{len(recs)} records < min_group_size {min_group_size}"))
            continue
        per_group[key] = (len(recs), tjsd(TemporalHistogram.from_records(recs, n)))
    if not per_group:
        raise ValueError(f"level {level!r}: all {len(groups)} groups excluded (min_group_size={min_group_size})")
    if weighting == "weighted":
        total = sum(c for c, _ in per_group.values())
        aggregate = sum(c * v for c, v in per_group.values()) / total
    else:
        aggregate = sum(v for _, v in per_group.values()) / len(per_group)
    return AuditReport(level, n, weighting, per_group, aggregate, excluded)


def heatmap_matrix(dataset: Dataset, resolution: int = 20) -> np.ndarray:
    """Density over (normalized start, normalized end); rows index the start."""
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")
    if not dataset.records:
        raise ValueError("heatmap_matrix: empty dataset")
    mat = np.zeros((resolution, resolution))
    for rec in dataset.records:
        i, j = bin_of(rec.t_s, rec.t_e, rec.video_duration, resolution)
        mat[i, j] += 1
    return mat / mat.sum()


def boundary_profiles(dataset: Dataset, bins: int = 20) -> Dict[str, np.ndarray]:
    """Normalized start- and end-time densities (the flatness curves)."""
    edges = np.linspace(0.0, 1.0, bins + 1)
    starts = np.array([r.t_s / r.video_duration for r in dataset.records])
    ends = np.array([r.t_e / r.video_duration for r in dataset.records])
    out = {"edges": edges}
    for name, values in (("start", starts), ("end", ends)):
        counts, _ = np.histogram(values, bins=edges)
        out[name] = counts / max(counts.sum(), 1)
    return out
