import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tempalign.language import (
    IdentityRewriter,
    RecordedRewriter,
    SceneContext,
    SentenceTemplate,
    align,
    apply_rewriter,
    choose_template,
    load_templates,
    make_rewriter,
    provenance_for,
    realize_sentence,
    trace_sentences,
)
from tempalign.manuscript import assign_durations
from tempalign.records import Dataset
from tempalign.simulate import ExecutionTrace, TraceStep, execute

from conftest import spec

TPL = load_templates()
CAT = {
    "sit_sofa": spec("sit_sofa", "sit", "sofa", scenes=("livingroom",), phrase="sits on"),
    "open_fridge": spec("open_fridge", "open", "fridge"),
    "lie_bed": spec("lie_bed", "lie", "bed", scenes=("bedroom",), phrase="lies on"),
    "grab_milk": spec("grab_milk", "grab", "milk"),
    "walk_fridge": spec("walk_fridge", "walk", "fridge", phrase="walks to"),
}


def test_first_action_uses_scene_intro():
    text, tid = realize_sentence(CAT["sit_sofa"], 0, SceneContext("livingroom"), TPL)
    assert tid == "T3_scene_intro"
    assert text == "In the livingroom, the person sits on the sofa."


def test_same_scene_template():
    text, tid = realize_sentence(CAT["open_fridge"], 1, SceneContext("kitchen", "kitchen"), TPL)
    assert tid == "T1_same_scene"
    assert text == "The person opens the fridge."


def test_scene_change_template():
    text, tid = realize_sentence(CAT["lie_bed"], 2, SceneContext("bedroom", "kitchen"), TPL)
    assert tid == "T2_scene_change"
    assert text == "The person goes to the bedroom and lies on the bed."


@given(st.integers(0, 20), st.sampled_from(["kitchen", "office"]), st.sampled_from(["kitchen", "office", None]))
def test_template_choice_rule(pos, cur, prev):
    tid = choose_template(pos, SceneContext(cur, prev))
    if pos == 0:
        assert tid == "T3_scene_intro"
    elif cur != prev:
        assert tid == "T2_scene_change"
    else:
        assert tid == "T1_same_scene"


def test_template_validation(tmp_path):
    with pytest.raises(ValueError, match="missing slot"):
        TPL["T2_scene_change"].realize(verb="opens", object="door", agent="person")
    with pytest.raises(ValueError, match="unknown slots"):
        SentenceTemplate("T1_same_scene", "the {agent} {mood}")
    with pytest.raises(ValueError, match="unknown template id"):
        SentenceTemplate("T9", "x")
    path = tmp_path / "t.json"
    path.write_text(json.dumps({"T1_same_scene": "x {verb}"}))
    with pytest.raises(ValueError, match="lacks"):
        load_templates(path)


def test_custom_template_file(tmp_path):
    path = tmp_path / "t.json"
    path.write_text(json.dumps({
        "T1_same_scene": "then the {agent} {verb} the {object}",
        "T2_scene_change": "in the {scene} the {agent} {verb} the {object}",
        "T3_scene_intro": "first the {agent} {verb} the {object}",
    }))
    tpl = load_templates(path)
    assert realize_sentence(CAT["grab_milk"], 0, SceneContext("kitchen"), tpl)[0] == "First the person grabs the milk"


def test_align_copies_fields():
    tr = ExecutionTrace("v1", "kitchen", "male1", (TraceStep("open_fridge", "kitchen", 6.0, 12.0),), 30.0)
    [rec] = align(tr, ["The person opens the fridge."], CAT)
    assert (rec.t_s, rec.t_e, rec.video_duration) == (6.0, 12.0, 30.0)
    assert (rec.verb, rec.object, rec.agent, rec.scene) == ("open", "fridge", "male1", "kitchen")
    assert rec.sample_id == "v1_00" and rec.provenance == "template"


def test_align_empty_and_mismatch():
    tr = ExecutionTrace("v", "kitchen", "x", (), 1.0)
    assert align(tr, [], CAT) == []
    with pytest.raises(ValueError, match="1 sentences for 0"):
        align(tr, ["extra"], CAT)


def test_end_to_end_five_actions():
    order = ("walk_fridge", "open_fridge", "grab_milk", "sit_sofa", "lie_bed")
    rng = np.random.default_rng(8)
    scenes = ("kitchen", "kitchen", "kitchen", "livingroom", "bedroom")
    m = assign_durations(order, CAT, (0.5, 1.0, 1.5), rng, "kitchen", "female2", scenes)
    tr = execute(m, "v7", seed=rng)
    sents = trace_sentences(tr, CAT, TPL)
    assert [t for _, t in sents] == [
        "T3_scene_intro", "T1_same_scene", "T1_same_scene", "T2_scene_change", "T2_scene_change",
    ]
    recs = align(tr, [s for s, _ in sents], CAT)
    assert len(recs) == 5
    Dataset(tuple(recs)).check_catalog(CAT)
    assert sorted((r.t_s, r.t_e) for r in recs) == sorted((round(s.t_s, 6), round(s.t_e, 6)) for s in tr.steps)
    for r in recs:
        assert r.violation() is None


def test_rewriters_and_provenance(tmp_path):
    assert provenance_for(IdentityRewriter()) == "template"
    assert provenance_for(None) == "template"
    rec = RecordedRewriter({"The person opens the fridge.": "Someone pulls the fridge open."})
    assert provenance_for(rec) == "rewritten"
    assert apply_rewriter(rec, "The person opens the fridge.") == "Someone pulls the fridge open."
    assert apply_rewriter(rec, "other") == "other"
    with pytest.raises(KeyError):
        RecordedRewriter({}, strict=True).rewrite("x")
    with pytest.raises(ValueError, match="empty"):
        apply_rewriter(RecordedRewriter({"x": " "}), "x")
    path = tmp_path / "r.json"
    path.write_text(json.dumps({"a": "b"}))
    assert make_rewriter("recorded", {"path": str(path)}).rewrite("a") == "b"
    with pytest.raises(ValueError):
        make_rewriter("gpt")


def test_non_reentrant_rewriter_is_serialized():
    calls = []

    class Upper:
        name = "upper"
        deterministic = True
        reentrant = False

        def rewrite(self, sentence):
            calls.append(sentence)
            return sentence.upper()

    assert apply_rewriter(Upper(), "abc") == "ABC"
    assert calls == ["abc"]
