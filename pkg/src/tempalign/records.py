"""Core annotation types and the JSONL on-disk format.

Every annotation file is UTF-8 JSONL with one record per line.  Keys are
written in the order of ``RECORD_KEYS`` and floats are printed with six
decimals, so an identical dataset always serializes to identical bytes.
Dataset-level metadata (seed and digests) lives in a ``<file>.meta.json``
sidecar next to the JSONL file.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Mapping, Optional, Tuple

SPLITS = ("train", "val", "test_high", "test_low", "unassigned")
PROVENANCES = ("template", "rewritten")

RECORD_KEYS = (
    "sample_id",
    "video_id",
    "video_duration",
    "query",
    "t_s",
    "t_e",
    "action_id",
    "verb",
    "object",
    "scene",
    "agent",
    "split",
    "provenance",
)
_FLOAT_KEYS = frozenset({"video_duration", "t_s", "t_e"})


class DatasetError(ValueError):
    """Raised for malformed annotation files or invariant violations."""


def quantize(x: float) -> float:
    """Round a timestamp to the serialized precision (1e-6 s)."""
    return round(float(x), 6)


@dataclass(frozen=True)
class ActionSpec:
    action_id: str
    verb: str
    object: str
    base_duration: float
    valid_scenes: frozenset
    # third-person verb phrase used by sentence templates, e.g. "sits on"
    phrase: str = ""

    def __post_init__(self):
        if self.base_duration <= 0:
            raise DatasetError(f"action {self.action_id!r}: base_duration must be > 0")
        if not self.valid_scenes:
            raise DatasetError(f"action {self.action_id!r}: valid_scenes is empty")
        object.__setattr__(self, "valid_scenes", frozenset(self.valid_scenes))
        if not self.phrase:
            object.__setattr__(self, "phrase", self.verb + "s")

    @property
    def object_text(self) -> str:
        return self.object.replace("_", " ")


@dataclass(frozen=True)
class AnnotationRecord:
    sample_id: str
    video_id: str
    video_duration: float
    query: str
    t_s: float
    t_e: float
    action_id: str
    verb: str
    object: str
    scene: str
    agent: str
    split: str = "unassigned"
    provenance: str = "template"

    def __post_init__(self):
        for key in _FLOAT_KEYS:
            object.__setattr__(self, key, quantize(getattr(self, key)))
        problem = self.violation()
        if problem:
            raise DatasetError(f"record {self.sample_id!r}: {problem}")

    def violation(self) -> Optional[str]:
        if not (0.0 <= self.t_s < self.t_e <= self.video_duration):
            return (
                f"field t_s/t_e: need 0 <= t_s < t_e <= video_duration, got "
                f"t_s={self.t_s}, t_e={self.t_e}, video_duration={self.video_duration}"
            )
        if not self.query.strip():
            return "field query: empty"
        if self.split not in SPLITS:
            return f"field split: unknown value {self.split!r}"
        if self.provenance not in PROVENANCES:
            return f"field provenance: unknown value {self.provenance!r}"
        return None

    @property
    def moment_duration(self) -> float:
        return self.t_e - self.t_s

    def to_line(self) -> str:
        parts = []
        for key in RECORD_KEYS:
            value = getattr(self, key)
            if key in _FLOAT_KEYS:
                text = f"{value:.6f}"
            else:
                text = json.dumps(value, ensure_ascii=False)
            parts.append(f"{json.dumps(key)}: {text}")
        return "{" + ", ".join(parts) + "}"

    @classmethod
    def from_mapping(cls, row: Mapping) -> "AnnotationRecord":
        missing = [k for k in RECORD_KEYS if k not in row]
        if missing:
            raise DatasetError(f"missing keys {missing}")
        extra = sorted(set(row) - set(RECORD_KEYS))
        if extra:
            raise DatasetError(f"unknown keys {extra}")
        kwargs = {}
        for key in RECORD_KEYS:
            value = row[key]
            if key in _FLOAT_KEYS:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise DatasetError(f"field {key}: expected a number, got {value!r}")
                if not math.isfinite(value):
                    raise DatasetError(f"field {key}: not finite")
                value = float(value)
            elif not isinstance(value, str):
                raise DatasetError(f"field {key}: expected a string, got {value!r}")
            kwargs[key] = value
        return cls(**kwargs)


@dataclass(frozen=True)
class Dataset:
    records: Tuple[AnnotationRecord, ...] = ()
    meta: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen = {}
        ids = set()
        for rec in self.records:
            key = (rec.video_id, rec.t_s, rec.t_e, rec.query)
            if key in seen:
                raise DatasetError(
                    f"record {rec.sample_id!r} duplicates {seen[key]!r} "
                    "(video_id, t_s, t_e, query must be unique)"
                )
            seen[key] = rec.sample_id
            if rec.sample_id in ids:
                raise DatasetError(f"duplicate sample_id {rec.sample_id!r}")
            ids.add(rec.sample_id)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def subset(self, sample_ids: Iterable[str]) -> "Dataset":
        keep = set(sample_ids)
        return Dataset(tuple(r for r in self.records if r.sample_id in keep), dict(self.meta))

    def with_splits(self, assignment: Mapping[str, str]) -> "Dataset":
        """Return a copy with ``split`` replaced for the given sample ids."""
        return Dataset(
            tuple(replace(r, split=assignment.get(r.sample_id, r.split)) for r in self.records),
            dict(self.meta),
        )

    def by_split(self, split: str) -> "Dataset":
        return Dataset(tuple(r for r in self.records if r.split == split), dict(self.meta))

    def check_catalog(self, catalog: Mapping[str, ActionSpec]) -> None:
        """Check every record's verb/object against the catalog decomposition."""
        for rec in self.records:
            spec = catalog.get(rec.action_id)
            if spec is None:
                raise DatasetError(f"record {rec.sample_id!r}: field action_id: unknown {rec.action_id!r}")
            if (spec.verb, spec.object) != (rec.verb, rec.object):
                raise DatasetError(
                    f"record {rec.sample_id!r}: field verb/object: ({rec.verb}, {rec.object}) "
                    f"does not match catalog ({spec.verb}, {spec.object})"
                )


def _meta_path(path) -> str:
    return os.fspath(path) + ".meta.json"


def write_jsonl(dataset: Dataset, path) -> int:
    """Write ``dataset`` to ``path`` and return the number of bytes written."""
    data = "".join(rec.to_line() + "\n" for rec in dataset.records).encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(data)
        meta = _meta_path(path)
        if dataset.meta:
            with open(meta, "w", encoding="utf-8") as fh:
                json.dump(dataset.meta, fh, sort_keys=True, indent=2)
                fh.write("\n")
        elif os.path.exists(meta):
            os.remove(meta)
    except OSError as exc:
        raise DatasetError(f"cannot write {os.fspath(path)!r}: {exc}") from exc
    return len(data)


def load_jsonl(path, catalog: Optional[Mapping[str, ActionSpec]] = None) -> Dataset:
    """Inverse of :func:`write_jsonl`.  Errors carry the offending line number."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{os.fspath(path)}:{lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(row, dict):
                raise DatasetError(f"{os.fspath(path)}:{lineno}: expected a JSON object")
            try:
                records.append(AnnotationRecord.from_mapping(row))
            except DatasetError as exc:
                raise DatasetError(f"{os.fspath(path)}:{lineno}: {exc}") from None
    meta = {}
    if os.path.exists(_meta_path(path)):
        with open(_meta_path(path), encoding="utf-8") as fh:
            meta = json.load(fh)
    dataset = Dataset(tuple(records), meta)
    if catalog is not None:
        dataset.check_catalog(catalog)
    return dataset


def dataset_stats(dataset: Dataset) -> Dict[str, float]:
    """Table-1 style statistics: video/annotation/action counts and mean durations."""
    if not dataset.records:
        raise DatasetError("dataset_stats: empty dataset")
    videos = {}
    for rec in dataset.records:
        videos.setdefault(rec.video_id, rec.video_duration)
    return {
        "num_videos": len(videos),
        "num_annotations": len(dataset.records),
        "num_actions": len({r.action_id for r in dataset.records}),
        "avg_video_duration": sum(videos.values()) / len(videos),
        "avg_moment_duration": sum(r.moment_duration for r in dataset.records) / len(dataset.records),
    }
