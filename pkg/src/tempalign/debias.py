"""Budgeted filtering toward a uniform temporal distribution, and biased splits.

The filtering objective for one group is the L1 distance between its kept
bin counts and their own mean, ``sum_b |c'_b - S/B|`` with ``S = sum c'``.
Only removals are allowed and at most ``floor(rho * N_g)`` records may go.

ICGF solves this exactly.  For a fixed kept total ``S`` the cost is
separable and convex per bin, so adding units in order of increasing
marginal cost is optimal.  Bin ``b`` offers ``min(c_b, floor(S/B))`` units
at -1, at most one unit at ``1 - 2 frac(S/B)`` and the rest at +1.  The
best ``S`` is found by scanning the budget range.  The kept histogram is
then produced by repeatedly trimming the fullest bin, which attains the
same optimum and only ever removes from above-mean bins.

AF is the greedy baseline: it drops one record at a time from the bin
furthest above the current mean until the budget runs out.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .metrics import TemporalBinGrid, TemporalHistogram, bin_of, tjsd
from .records import Dataset

GROUPINGS = ("per_action", "global")
SPLIT_NAMES = ("train", "val", "test_high", "test_low", "unassigned")


def l1_to_uniform(counts) -> float:
    c = np.asarray(counts, dtype=float)
    return float(np.abs(c - c.mean()).sum())


def min_objective_at(counts, kept_total: int) -> float:
    """Smallest ``sum |c'_b - S/B|`` over integer ``0 <= c' <= c`` summing to ``S``."""
    c = np.asarray(counts, dtype=np.int64)
    nbins = len(c)
    s = int(kept_total)
    if not 0 <= s <= c.sum():
        raise ValueError(f"kept total {s} outside [0, {c.sum()}]")
    level = s / nbins
    fl = math.floor(level)
    frac = level - fl
    n_neg = int(np.minimum(c, fl).sum())
    n_mid = int((c > fl).sum()) if frac > 0 else 0
    take_neg = min(s, n_neg)
    take_mid = min(s - take_neg, n_mid)
    take_pos = s - take_neg - take_mid
    return s - take_neg + take_mid * (1 - 2 * frac) + take_pos


def optimal_kept_total(counts, budget: int) -> Tuple[int, float]:
    """Kept total minimizing the objective within the removal budget.

    Ties go to the larger total so no record is dropped without gain.
    """
    total = int(np.sum(counts))
    best_s, best_f = total, min_objective_at(counts, total)
    for s in range(total - 1, max(total - budget, 0) - 1, -1):
        f = min_objective_at(counts, s)
        if f < best_f - 1e-9:
            best_s, best_f = s, f
    return best_s, best_f


def trim_fullest(counts, removals: int) -> np.ndarray:
    """Remove ``removals`` units, each from the currently fullest bin (lowest index on ties)."""
    c = np.array(counts, dtype=np.int64)
    for _ in range(removals):
        c[int(np.argmax(c))] -= 1
    return c


def greedy_filter_counts(counts, budget: int) -> np.ndarray:
    """AF: strip the bin with the largest positive deviation, one record at a time."""
    c = np.array(counts, dtype=np.int64)
    for _ in range(budget):
        dev = c - c.mean()
        b = int(np.argmax(dev))
        if dev[b] <= 1e-12:
            break
        c[b] -= 1
    return c


def removal_budget(n_records: int, rho: float) -> int:
    return int(math.floor(rho * n_records + 1e-9))


@dataclass
class FilterResult:
    method: str
    grouping: str
    n: int
    rho: float
    kept_ids: List[str] = field(default_factory=list)
    removed_ids: List[str] = field(default_factory=list)
    groups: Dict[str, dict] = field(default_factory=dict)

    @property
    def objective_before(self) -> float:
        return sum(g["objective_before"] for g in self.groups.values())

    @property
    def objective_after(self) -> float:
        return sum(g["objective_after"] for g in self.groups.values())

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "grouping": self.grouping,
            "n": self.n,
            "rho": self.rho,
            "num_kept": len(self.kept_ids),
            "num_removed": len(self.removed_ids),
            "objective_before": self.objective_before,
            "objective_after": self.objective_after,
            "groups": {k: self.groups[k] for k in sorted(self.groups)},
            "kept_ids": self.kept_ids,
            "removed_ids": self.removed_ids,
        }


def _check(dataset: Dataset, rho: float, grouping: str) -> None:
    if not 0 <= rho < 1:
        raise ValueError(f"rho must be in [0, 1), got {rho}")
    if grouping not in GROUPINGS:
        raise ValueError(f"unknown grouping {grouping!r}; expected one of {GROUPINGS}")
    if not dataset.records:
        raise ValueError("cannot filter an empty dataset")


def _grouped_bins(dataset: Dataset, n: int, grouping: str):
    grid = TemporalBinGrid(n)
    groups = defaultdict(lambda: defaultdict(list))
    for rec in dataset.records:
        key = rec.action_id if grouping == "per_action" else "all"
        k = grid.index(*bin_of(rec.t_s, rec.t_e, rec.video_duration, n))
        groups[key][k].append(rec.sample_id)
    return grid, groups


def _filter(dataset, n, rho, grouping, seed, method, solve) -> FilterResult:
    _check(dataset, rho, grouping)
    grid, groups = _grouped_bins(dataset, n, grouping)
    rng = np.random.default_rng(seed)
    result = FilterResult(method, grouping, n, rho)
    removed = set()
    for key in sorted(groups):
        bins = groups[key]
        counts = np.zeros(grid.size, dtype=np.int64)
        for k, ids in bins.items():
            counts[k] = len(ids)
        budget = removal_budget(int(counts.sum()), rho)
        kept = solve(counts, budget)
        for k in sorted(bins):
            drop = int(counts[k] - kept[k])
            if drop:
                ids = bins[k]
                removed.update(ids[i] for i in rng.choice(len(ids), size=drop, replace=False))
        result.groups[key] = {
            "budget": budget,
            "before": counts.tolist(),
            "after": kept.tolist(),
            "objective_before": l1_to_uniform(counts),
            "objective_after": l1_to_uniform(kept),
        }
    for rec in dataset.records:
        (result.removed_ids if rec.sample_id in removed else result.kept_ids).append(rec.sample_id)
    return result


def _icgf_counts(counts, budget):
    s, _ = optimal_kept_total(counts, budget)
    return trim_fullest(counts, int(counts.sum()) - s)


def icgf(
    dataset: Dataset,
    n: int = 10,
    rho: float = 0.3,
    grouping: str = "per_action",
    seed: int = 0,
) -> FilterResult:
    """Inequality Constrained Global Filtering.

    Each group gets ``floor(rho * group size)`` removals; records dropped
    from a bin are chosen uniformly at random with ``seed``.
    """
    return _filter(dataset, n, rho, grouping, seed, "icgf", _icgf_counts)


def adversarial_filter(
    dataset: Dataset,
    n: int = 10,
    rho: float = 0.3,
    grouping: str = "global",
    seed: int = 0,
) -> FilterResult:
    return _filter(dataset, n, rho, grouping, seed, "af", greedy_filter_counts)


def apply_filter(dataset: Dataset, result: FilterResult) -> Dataset:
    return dataset.subset(result.kept_ids)


def longtail_split(
    dataset: Dataset,
    skew: float = 1.5,
    ratios: Sequence[float] = (0.6, 0.1, 0.1),
    seed: int = 0,
    rho: float = 0.3,
    n: int = 10,
    grouping: str = "global",
) -> Dataset:
    """Label records train/val/test_high (long-tailed) and test_low (ICGF-balanced).

    Bins are ranked by a seeded random permutation and a record in the bin
    of rank ``r`` is accepted with probability ``r ** -skew``.  The accepted
    pool is shuffled and cut by ``ratios`` into train, val and test_high.
    Rejected and unallocated records form the remainder; ICGF filters it and
    the kept part becomes test_low.  Everything else is ``unassigned``.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError(f"ratios must be three non-negative fractions, got {ratios}")
    if sum(ratios) > 1 + 1e-12:
        raise ValueError(f"ratios sum to {sum(ratios):.6f} > 1")
    if skew < 0:
        raise ValueError(f"skew must be >= 0, got {skew}")
    if not dataset.records:
        raise ValueError("cannot split an empty dataset")
    ss = np.random.SeedSequence(seed)
    accept_rng, shuffle_rng, filter_rng = [np.random.default_rng(s) for s in ss.spawn(3)]
    grid = TemporalBinGrid(n)
    rank = np.empty(grid.size)
    rank[accept_rng.permutation(grid.size)] = np.arange(1, grid.size + 1)
    accept_p = rank ** -float(skew)
    pool, rest = [], []
    for rec in dataset.records:
        k = grid.index(*bin_of(rec.t_s, rec.t_e, rec.video_duration, n))
        (pool if accept_rng.random() < accept_p[k] else rest).append(rec.sample_id)
    order = shuffle_rng.permutation(len(pool))
    pool = [pool[i] for i in order]
    sizes = [int(math.floor(r * len(pool))) for r in ratios]
    assignment = {}
    start = 0
    for name, size, r in zip(("train", "val", "test_high"), sizes, ratios):
        if r > 0 and size == 0:
            raise ValueError(f"split {name!r} would be empty; dataset too small for ratios {ratios}")
        for sid in pool[start:start + size]:
            assignment[sid] = name
        start += size
    rest.extend(pool[start:])
    if not rest:
        raise ValueError("no records left over to build test_low")
    remaining = dataset.subset(rest)
    kept = icgf(remaining, n, rho, grouping, int(filter_rng.integers(2**63))).kept_ids
    if not kept:
        raise ValueError("test_low is empty after filtering")
    for sid in kept:
        assignment[sid] = "test_low"
    for rec in dataset.records:
        assignment.setdefault(rec.sample_id, "unassigned")
    return dataset.with_splits(assignment)


def split_summary(dataset: Dataset, n: int = 10) -> Dict[str, Tuple[int, float]]:
    """Record count and process-level TJSD for each non-empty split."""
    out = {}
    for name in SPLIT_NAMES:
        recs = [r for r in dataset.records if r.split == name]
        if recs:
            out[name] = (len(recs), tjsd(TemporalHistogram.from_records(recs, n)))
    return out
