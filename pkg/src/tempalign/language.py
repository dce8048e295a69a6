"""Template sentences for executed actions and alignment into annotations."""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass
from importlib import resources
from typing import Dict, List, Mapping, Optional, Protocol, Sequence, Tuple

from .records import ActionSpec, AnnotationRecord
from .simulate import ExecutionTrace

TEMPLATE_IDS = ("T1_same_scene", "T2_scene_change", "T3_scene_intro")
_SLOT = re.compile(r"\{(\w+)\}")
KNOWN_SLOTS = frozenset({"verb", "object", "scene", "agent"})


@dataclass(frozen=True)
class SentenceTemplate:
    template_id: str
    pattern: str

    def __post_init__(self):
        if self.template_id not in TEMPLATE_IDS:
            raise ValueError(f"unknown template id {self.template_id!r}")
        unknown = set(self.slots) - KNOWN_SLOTS
        if unknown:
            raise ValueError(f"{self.template_id}: unknown slots {sorted(unknown)}")

    @property
    def slots(self) -> Tuple[str, ...]:
        return tuple(dict.fromkeys(_SLOT.findall(self.pattern)))

    def realize(self, **values) -> str:
        missing = [s for s in self.slots if not values.get(s)]
        if missing:
            raise ValueError(f"{self.template_id}: missing slot values {missing}")
        text = self.pattern.format(**{s: values[s] for s in self.slots})
        return text[:1].upper() + text[1:]


def load_templates(path=None) -> Dict[str, SentenceTemplate]:
    """Read a JSON mapping ``template_id -> pattern`` (packaged default if no path)."""
    if path is None:
        raw = json.loads(resources.files("tempalign.data").joinpath("templates.json").read_text("utf-8"))
    else:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    missing = set(TEMPLATE_IDS) - set(raw)
    if missing:
        raise ValueError(f"template file lacks {sorted(missing)}")
    return {tid: SentenceTemplate(tid, raw[tid]) for tid in TEMPLATE_IDS}


@dataclass(frozen=True)
class SceneContext:
    current: str
    previous: Optional[str] = None
    agent: str = "person"


def choose_template(position: int, context: SceneContext) -> str:
    if position == 0:
        return "T3_scene_intro"
    if context.previous != context.current:
        return "T2_scene_change"
    return "T1_same_scene"


def realize_sentence(
    action: ActionSpec,
    position: int,
    context: SceneContext,
    templates: Mapping[str, SentenceTemplate],
) -> Tuple[str, str]:
    tid = choose_template(position, context)
    text = templates[tid].realize(
        verb=action.phrase,
        object=action.object_text,
        scene=context.current,
        agent=context.agent,
    )
    return text, tid


class Rewriter(Protocol):
    """Sentence rewriting plug-in; ``rewrite`` must return a non-empty string."""

    name: str
    deterministic: bool
    reentrant: bool

    def rewrite(self, sentence: str) -> str: ...


class IdentityRewriter:
    name = "identity"
    deterministic = True
    reentrant = True

    def rewrite(self, sentence: str) -> str:
        return sentence


class RecordedRewriter:
    """Replays canned rewrites; used as a stand-in for a remote LLM in tests."""

    name = "recorded"
    deterministic = True
    reentrant = True

    def __init__(self, responses: Mapping[str, str], strict: bool = False):
        self.responses = dict(responses)
        self.strict = strict

    @classmethod
    def from_file(cls, path, strict: bool = False) -> "RecordedRewriter":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh), strict=strict)

    def rewrite(self, sentence: str) -> str:
        if sentence in self.responses:
            return self.responses[sentence]
        if self.strict:
            raise KeyError(f"no recorded rewrite for {sentence!r}")
        return sentence


def make_rewriter(name: str = "identity", options: Optional[Mapping] = None) -> Rewriter:
    options = dict(options or {})
    if name == "identity":
        return IdentityRewriter()
    if name == "recorded":
        if "path" in options:
            return RecordedRewriter.from_file(options["path"], strict=options.get("strict", False))
        return RecordedRewriter(options.get("responses", {}), strict=options.get("strict", False))
    raise ValueError(f"unknown rewriter {name!r}")


_rewrite_lock = threading.Lock()


def apply_rewriter(rewriter: Rewriter, sentence: str) -> str:
    if getattr(rewriter, "reentrant", False):
        out = rewriter.rewrite(sentence)
    else:
        with _rewrite_lock:
            out = rewriter.rewrite(sentence)
    if not out or not out.strip():
        raise ValueError(f"rewriter {rewriter.name!r} returned an empty sentence for {sentence!r}")
    return out


def trace_sentences(
    trace: ExecutionTrace,
    catalog: Mapping[str, ActionSpec],
    templates: Mapping[str, SentenceTemplate],
    rewriter: Optional[Rewriter] = None,
    agent_word: str = "person",
) -> List[Tuple[str, str]]:
    """One ``(sentence, template_id)`` per trace step, in step order."""
    out = []
    previous = None
    for k, step in enumerate(trace.steps):
        ctx = SceneContext(step.scene, previous, agent_word)
        text, tid = realize_sentence(catalog[step.action_id], k, ctx, templates)
        if rewriter is not None:
            text = apply_rewriter(rewriter, text)
        out.append((text, tid))
        previous = step.scene
    return out


def align(
    trace: ExecutionTrace,
    sentences: Sequence[str],
    catalog: Mapping[str, ActionSpec],
    provenance: str = "template",
) -> List[AnnotationRecord]:
    """Pair each trace step with its sentence, producing one record per step."""
    if len(sentences) != len(trace.steps):
        raise ValueError(f"{len(sentences)} sentences for {len(trace.steps)} trace steps")
    records = []
    for k, (step, text) in enumerate(zip(trace.steps, sentences)):
        spec = catalog[step.action_id]
        records.append(AnnotationRecord(
            sample_id=f"{trace.video_id}_{k:02d}",
            video_id=trace.video_id,
            video_duration=trace.total_duration,
            query=text,
            t_s=step.t_s,
            t_e=step.t_e,
            action_id=step.action_id,
            verb=spec.verb,
            object=spec.object,
            scene=step.scene,
            agent=trace.agent,
            provenance=provenance,
        ))
    return records


def provenance_for(rewriter: Optional[Rewriter]) -> str:
    if rewriter is None or isinstance(rewriter, IdentityRewriter):
        return "template"
    return "rewritten"
