"""End-to-end generation: graph -> chains -> AP/ADD -> execution -> sentences -> records.

Randomness
----------
Every stage draws from its own stream, derived from the master seed with
``numpy.random.SeedSequence(master_seed, spawn_key=(stage_id, *index))``.
Stage ids are fixed in ``STAGES``.  Per-video streams use the video index
as the extra key, so any stage or single video can be replayed alone.
"""

from __future__ import annotations

import contextlib
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import debias
from .graph import ActivityGraph, CommonsenseRuleSet, SamplerState, build_graph, parse_catalog, sample_chain
from .language import align, load_templates, make_rewriter, provenance_for, trace_sentences
from .manuscript import DEFAULT_MULTIPLIERS, PositionLedger, assign_durations, assign_scenes, permute_chain
from .records import Dataset, dataset_stats, write_jsonl
from .simulate import ExecutionTrace, execute, export_program

STAGES = {"chains": 1, "permute": 2, "video": 3, "filter": 4}

DEFAULT_SCENES = ("kitchen", "livingroom", "bedroom", "bathroom", "diningroom", "office", "entrance")
DEFAULT_AGENTS = ("female1", "male1", "female2", "male2", "female4", "male6")

SEED_ENV = "TEMPALIGN_SEED"
OUTPUT_ENV = "TEMPALIGN_OUTPUT_DIR"


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@contextlib.contextmanager
def stage(name: str, context: str = ""):
    try:
        yield
    except PipelineError:
        raise
    except (ValueError, KeyError, RuntimeError, OSError) as exc:
        suffix = f" ({context})" if context else ""
        raise PipelineError(name, f"{exc}{suffix}") from exc


def stage_rng(master_seed: int, name: str, *index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(STAGES[name], *index)))


def _data_text(name: str) -> str:
    return resources.files("tempalign.data").joinpath(name).read_text("utf-8")


def _read(path: Optional[str], default: str) -> str:
    if path is None:
        return _data_text(default)
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass
class PipelineConfig:
    catalog: Optional[str] = None
    rules: Optional[str] = None
    templates: Optional[str] = None
    scenes: Tuple[str, ...] = DEFAULT_SCENES
    agents: Tuple[str, ...] = DEFAULT_AGENTS
    chain_length: Tuple[int, int] = (4, 8)
    chains: int = 500
    permutations: int = 4
    multipliers: Tuple[float, ...] = DEFAULT_MULTIPLIERS
    gap_min: float = 0.0
    gap_max: float = 2.0
    n_bins: int = 10
    icgf_rho: float = 0.3
    icgf_grouping: str = "per_action"
    split_skew: float = 1.5
    split_ratios: Tuple[float, float, float] = (0.6, 0.1, 0.1)
    seed: int = 0
    enable_ap: bool = True
    enable_add: bool = True
    enable_icgf: bool = True
    sampling_strategy: str = "inverse_count"
    rewriter: str = "identity"
    rewriter_options: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("scenes", "agents", "chain_length", "multipliers", "split_ratios"):
            setattr(self, name, tuple(getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        lo, hi = self.chain_length
        checks = [
            (len(self.chain_length) == 2 and 1 <= lo <= hi, f"chain_length {self.chain_length} invalid"),
            (self.chains >= 0, "chains must be >= 0"),
            (self.permutations >= 1, "permutations must be >= 1"),
            (self.multipliers and all(m > 0 for m in self.multipliers), "multipliers must be positive"),
            (0 <= self.gap_min <= self.gap_max, "need 0 <= gap_min <= gap_max"),
            (self.n_bins >= 1, "n_bins must be >= 1"),
            (0 <= self.icgf_rho < 1, "icgf_rho must be in [0, 1)"),
            (self.icgf_grouping in debias.GROUPINGS, f"icgf_grouping must be one of {debias.GROUPINGS}"),
            (bool(self.scenes) and bool(self.agents), "scenes and agents must be non-empty"),
        ]
        for ok, message in checks:
            if not ok:
                raise ValueError(f"config: {message}")
        for path in (self.catalog, self.rules, self.templates):
            if path is not None and not os.path.exists(path):
                raise ValueError(f"config: file not found: {path}")

    @classmethod
    def from_file(cls, path, **overrides) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"config {path}: unknown keys {unknown}")
        base = os.path.dirname(os.path.abspath(path))
        for key in ("catalog", "rules", "templates"):
            if raw.get(key) is not None and not os.path.isabs(raw[key]):
                raw[key] = os.path.join(base, raw[key])
        raw.update(overrides)
        return cls(**raw)

    def input_texts(self) -> Dict[str, str]:
        return {
            "catalog": _read(self.catalog, "catalog.txt"),
            "rules": _read(self.rules, "rules.txt"),
            "templates": _read(self.templates, "templates.json"),
        }

    def canonical(self) -> dict:
        """Config values with input paths replaced by content hashes."""
        out = dataclasses.asdict(self)
        for key, text in self.input_texts().items():
            out[key] = sha256_bytes(text.encode("utf-8"))
        return out

    def digest(self) -> str:
        return sha256_bytes(json.dumps(self.canonical(), sort_keys=True).encode("utf-8"))

    def catalog_digest(self) -> str:
        texts = self.input_texts()
        return sha256_bytes((texts["catalog"] + "\0" + texts["rules"]).encode("utf-8"))


def build_inputs(config: PipelineConfig) -> Tuple[ActivityGraph, dict]:
    texts = config.input_texts()
    catalog = parse_catalog(texts["catalog"].splitlines())
    rules = CommonsenseRuleSet.parse(catalog, texts["rules"].splitlines())
    scenes = set(config.scenes)
    for spec in catalog.values():
        if not spec.valid_scenes & scenes:
            raise ValueError(f"action {spec.action_id!r} has no valid scene among {sorted(scenes)}")
    # room choice is restricted to the configured scenes
    catalog = {
        k: dataclasses.replace(v, valid_scenes=v.valid_scenes & scenes) for k, v in catalog.items()
    }
    return build_graph(dataclasses.replace(rules, catalog=catalog)), catalog


@dataclass
class GenerationResult:
    dataset: Dataset
    unfiltered: Dataset
    traces: List[ExecutionTrace]
    scripts: Dict[str, str]
    filter_result: Optional[debias.FilterResult] = None


def generate(config: PipelineConfig) -> GenerationResult:
    """Run the whole generation pipeline in memory."""
    seed = config.seed
    with stage("inputs"):
        graph, catalog = build_inputs(config)
        templates = load_templates(config.templates)
        rewriter = make_rewriter(config.rewriter, config.rewriter_options)
    provenance = provenance_for(rewriter)

    chains = []
    with stage("chains", f"seed={seed}"):
        chain_rng = stage_rng(seed, "chains")
        state = SamplerState(
            rng_seed=int(chain_rng.integers(2**63)), strategy=config.sampling_strategy
        )
        lo, hi = config.chain_length
        for _ in range(config.chains):
            chains.append(sample_chain(graph, int(chain_rng.integers(lo, hi + 1)), state))

    orderings = []
    with stage("permute", f"seed={seed}"):
        perm_rng = stage_rng(seed, "permute")
        ledger = PositionLedger()
        for chain in chains:
            if config.enable_ap:
                orderings.extend(permute_chain(chain, graph, config.permutations, ledger, perm_rng))
            else:
                orderings.extend([tuple(chain)] * config.permutations)

    multipliers = config.multipliers if config.enable_add else (1.0,)
    records, traces, scripts = [], [], {}
    for v, ordering in enumerate(orderings):
        video_id = f"v{v:05d}"
        with stage("execute", f"seed={seed}, video={video_id}"):
            rng = stage_rng(seed, "video", v)
            agent = config.agents[int(rng.integers(len(config.agents)))]
            rooms = assign_scenes(ordering, catalog, rng)
            manuscript = assign_durations(ordering, catalog, multipliers, rng, rooms[0], agent, rooms)
            trace = execute(manuscript, video_id, config.gap_min, config.gap_max, rng)
            scripts[video_id] = export_program(manuscript, catalog)
        with stage("align", f"seed={seed}, video={video_id}"):
            sentences = trace_sentences(trace, catalog, templates, rewriter)
            records.extend(align(trace, [s for s, _ in sentences], catalog, provenance))
        traces.append(trace)

    meta = {"seed": seed, "config_digest": config.digest(), "catalog_digest": config.catalog_digest()}
    with stage("dataset"):
        unfiltered = Dataset(tuple(records), meta)
    dataset, result = unfiltered, None
    if config.enable_icgf and records:
        with stage("filter", f"seed={seed}"):
            filter_seed = int(stage_rng(seed, "filter").integers(2**63))
            result = debias.icgf(unfiltered, config.n_bins, config.icgf_rho, config.icgf_grouping, filter_seed)
            dataset = debias.apply_filter(unfiltered, result)
    return GenerationResult(dataset, unfiltered, traces, scripts, result)


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_outputs(config: PipelineConfig, result: GenerationResult, out_dir: str) -> Dict[str, str]:
    """Write annotations, traces, scripts and a manifest; return ``relpath -> sha256``."""
    with stage("write", out_dir):
        os.makedirs(os.path.join(out_dir, "scripts"), exist_ok=True)
        written = ["annotations.jsonl", "traces.jsonl"]
        write_jsonl(result.dataset, os.path.join(out_dir, "annotations.jsonl"))
        if result.dataset.meta:
            written.append("annotations.jsonl.meta.json")
        _write_text(
            os.path.join(out_dir, "traces.jsonl"),
            "".join(json.dumps(t.to_dict()) + "\n" for t in result.traces),
        )
        for video_id, text in sorted(result.scripts.items()):
            _write_text(os.path.join(out_dir, "scripts", f"{video_id}.txt"), text)
            written.append(f"scripts/{video_id}.txt")
        if result.filter_result is not None:
            _write_text(
                os.path.join(out_dir, "filter_result.json"),
                json.dumps(result.filter_result.to_dict(), indent=1) + "\n",
            )
            written.append("filter_result.json")
        files = {}
        for rel in written:
            with open(os.path.join(out_dir, rel), "rb") as fh:
                files[rel] = sha256_bytes(fh.read())
        manifest = {
            "seed": config.seed,
            "config_digest": config.digest(),
            "catalog_digest": config.catalog_digest(),
            "config": config.canonical(),
            "stats": dataset_stats(result.dataset) if result.dataset.records else None,
            "num_videos_generated": len(result.traces),
            "num_records_before_filter": len(result.unfiltered),
            "files": dict(sorted(files.items())),
        }
        _write_text(os.path.join(out_dir, "manifest.json"), json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest["files"]
