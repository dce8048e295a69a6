import pytest

from tempalign.graph import CommonsenseRuleSet, build_graph
from tempalign.pipeline import PipelineConfig, generate
from tempalign.records import ActionSpec, AnnotationRecord, Dataset

# filled by test_acceptance; printed at the end of every run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


def spec(action_id, verb=None, obj="thing", duration=10.0, scenes=("kitchen",), phrase=""):
    return ActionSpec(action_id, verb or action_id.lower(), obj, duration, frozenset(scenes), phrase)


def small_graph(ids, pre=(), block=()):
    catalog = {a: spec(a) for a in ids}
    return build_graph(CommonsenseRuleSet(catalog, tuple(pre), tuple(block)))


def record(sample_id, t_s, t_e, duration=100.0, video_id=None, action_id="walk_fridge",
           verb="walk", obj="fridge", query=None, split="unassigned"):
    return AnnotationRecord(
        sample_id=sample_id,
        video_id=video_id or f"vid_{sample_id}",
        video_duration=duration,
        query=query or f"The person {verb}s to the {obj}.",
        t_s=t_s,
        t_e=t_e,
        action_id=action_id,
        verb=verb,
        object=obj,
        scene="kitchen",
        agent="female1",
        split=split,
    )


def dataset_from_intervals(intervals, duration=100.0, **kw):
    return Dataset(tuple(record(f"s{k:05d}", s, e, duration, **kw) for k, (s, e) in enumerate(intervals)))


@pytest.fixture(scope="session")
def desk_result():
    """The default desk-scale generation run (seed 0)."""
    return generate(PipelineConfig())


@pytest.fixture(scope="session")
def small_result():
    return generate(PipelineConfig(chains=50, seed=7))


def dataset_from_bin_counts(counts, n, duration=100.0):
    """Records landing in the row-major bins of an ``n`` grid with the given counts."""
    from tempalign.metrics import TemporalBinGrid

    ivs = []
    for (i, j), c in zip(TemporalBinGrid(n).pairs(), counts):
        ivs.extend([((i + 0.2) * duration / n, (j + 0.8) * duration / n)] * int(c))
    return dataset_from_intervals(ivs, duration)
