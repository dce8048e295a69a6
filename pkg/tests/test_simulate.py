import numpy as np
import pytest

from tempalign.manuscript import ActivityManuscript, assign_durations
from tempalign.simulate import TraceStep, execute, export_program

from conftest import spec


def manuscript(durations, scene="kitchen", agent="male1"):
    ids = tuple(f"a{k}" for k in range(len(durations)))
    return ActivityManuscript(ids, (1.0,) * len(ids), tuple(durations), scene, agent)


def test_single_step_no_gaps():
    tr = execute(manuscript([10.0]), gap_min=0, gap_max=0)
    assert tr.steps == (TraceStep("a0", "kitchen", 0.0, 10.0),)
    assert tr.total_duration == 10.0


def test_two_steps_fixed_gaps():
    tr = execute(manuscript([4.0, 6.0]), gap_min=1, gap_max=1)
    assert [(s.action_id, s.t_s, s.t_e) for s in tr.steps] == [("a0", 1, 5), ("a1", 6, 12)]
    assert tr.total_duration == 13


def test_property_sweep():
    cat = {f"a{k}": spec(f"a{k}", duration=d) for k, d in enumerate([3, 8, 15, 40, 90])}
    order = tuple(cat)
    rng = np.random.default_rng(123)
    for seed in range(1000):
        m = assign_durations(order, cat, (0.5, 0.75, 1.0, 1.25, 1.5), rng)
        tr = execute(m, f"v{seed}", 0.0, 2.0, seed)
        assert [s.action_id for s in tr.steps] == list(order)
        prev_end = 0.0
        for step, d in zip(tr.steps, m.durations):
            assert 0 <= step.t_s < step.t_e <= tr.total_duration
            assert step.t_s >= prev_end
            assert abs((step.t_e - step.t_s) - d) < 1e-6
            prev_end = step.t_e
        assert sum(m.durations) <= tr.total_duration
        assert tr.total_duration - tr.steps[-1].t_e <= 2.0


def test_fixed_seed_reproduces():
    m = manuscript([5.0, 7.0, 2.0])
    assert execute(m, seed=9) == execute(m, seed=9)
    assert execute(m, seed=9) != execute(m, seed=10)


def test_negative_gap_bounds():
    with pytest.raises(ValueError, match="non-negative"):
        execute(manuscript([1.0]), gap_min=-1, gap_max=1)
    with pytest.raises(ValueError):
        execute(manuscript([1.0]), gap_min=2, gap_max=1)


def test_per_action_scenes_carried_into_steps():
    m = ActivityManuscript(("a", "b"), (1.0, 1.0), (2.0, 3.0), "kitchen", "male1", ("kitchen", "bedroom"))
    tr = execute(m, gap_min=0, gap_max=0)
    assert [s.scene for s in tr.steps] == ["kitchen", "bedroom"]


CAT = {
    "walk_fridge": spec("walk_fridge", "walk", "fridge"),
    "open_fridge": spec("open_fridge", "open", "fridge"),
    "grab_milk": spec("grab_milk", "grab", "milk"),
    "bad": spec("bad", "put on", "shirt"),
}


def test_script_line_format():
    m = ActivityManuscript(("walk_fridge",), (1.0,), (3.0,), "kitchen", "female1")
    assert export_program(m, CAT) == "# scene: kitchen\n# agent: female1\n[WALK] <fridge> (1)\n"


def test_empty_manuscript_header_only():
    m = ActivityManuscript((), (), (), "office", "male2")
    assert export_program(m, CAT).splitlines() == ["# scene: office", "# agent: male2"]


def test_script_preserves_order():
    m = ActivityManuscript(("open_fridge", "grab_milk", "walk_fridge"), (1.0,) * 3, (1.0,) * 3, "kitchen", "x")
    body = export_program(m, CAT).splitlines()[2:]
    assert body == ["[OPEN] <fridge> (1)", "[GRAB] <milk> (1)", "[WALK] <fridge> (1)"]


def test_script_rejects_whitespace_tokens():
    m = ActivityManuscript(("bad",), (1.0,), (1.0,), "kitchen", "x")
    with pytest.raises(ValueError, match="put on"):
        export_program(m, CAT)
