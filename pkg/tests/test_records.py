import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tempalign.records import (
    RECORD_KEYS,
    AnnotationRecord,
    Dataset,
    DatasetError,
    dataset_stats,
    load_jsonl,
    write_jsonl,
)

from conftest import record, spec


def test_empty_dataset_writes_zero_lines(tmp_path):
    path = tmp_path / "a.jsonl"
    assert write_jsonl(Dataset(), path) == 0
    assert path.read_bytes() == b""
    assert load_jsonl(path) == Dataset()


def test_single_record_round_trip(tmp_path):
    ds = Dataset((record("x", 10, 30),))
    path = tmp_path / "a.jsonl"
    nbytes = write_jsonl(ds, path)
    assert nbytes == len(path.read_bytes())
    lines = path.read_text().splitlines()
    assert len(lines) == 1
    row = json.loads(lines[0])
    assert list(row) == list(RECORD_KEYS)
    assert AnnotationRecord.from_mapping(row) == ds.records[0]


def test_floats_printed_with_six_decimals(tmp_path):
    path = tmp_path / "a.jsonl"
    write_jsonl(Dataset((record("x", 1 / 3, 2.5, duration=10),)), path)
    text = path.read_text()
    assert '"t_s": 0.333333' in text
    assert '"t_e": 2.500000' in text
    assert '"video_duration": 10.000000' in text


def test_generated_round_trip_is_byte_stable(tmp_path, small_result):
    ds = small_result.unfiltered
    ds = ds.subset([r.sample_id for r in ds.records[:1000]])
    assert len(ds) == 1000
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_jsonl(ds, a)
    loaded = load_jsonl(a)
    assert loaded == ds
    write_jsonl(loaded, b)
    assert a.read_bytes() == b.read_bytes()


def test_meta_sidecar_round_trip(tmp_path):
    ds = Dataset((record("x", 1, 2),), {"seed": 3, "config_digest": "ab"})
    path = tmp_path / "a.jsonl"
    write_jsonl(ds, path)
    assert load_jsonl(path).meta == ds.meta


def test_invariant_violation_names_record(tmp_path):
    row = json.loads(record("bad_one", 10, 30).to_line())
    row["t_s"], row["t_e"] = 40.0, 30.0
    path = tmp_path / "a.jsonl"
    path.write_text(json.dumps(row) + "\n")
    with pytest.raises(DatasetError, match=r"a.jsonl:1: record 'bad_one': field t_s/t_e"):
        load_jsonl(path)


def test_truncated_last_line_reports_line_number(tmp_path):
    path = tmp_path / "a.jsonl"
    write_jsonl(Dataset((record("a", 1, 2), record("b", 3, 4))), path)
    data = path.read_bytes()
    path.write_bytes(data[:-15])
    with pytest.raises(DatasetError, match=r":2: malformed JSON"):
        load_jsonl(path)


def test_unknown_and_missing_keys(tmp_path):
    row = json.loads(record("a", 1, 2).to_line())
    path = tmp_path / "a.jsonl"
    path.write_text(json.dumps({**row, "extra": 1}) + "\n")
    with pytest.raises(DatasetError, match="unknown keys"):
        load_jsonl(path)
    del row["agent"]
    path.write_text(json.dumps(row) + "\n")
    with pytest.raises(DatasetError, match="missing keys"):
        load_jsonl(path)


def test_unwritable_path(tmp_path):
    with pytest.raises(DatasetError, match="cannot write"):
        write_jsonl(Dataset(), tmp_path / "missing" / "a.jsonl")


def test_record_rejects_empty_query_and_bad_enums():
    with pytest.raises(DatasetError, match="query"):
        record("a", 1, 2, query="   ")
    with pytest.raises(DatasetError, match="split"):
        record("a", 1, 2, split="holdout")


def test_duplicate_alignment_rejected():
    a = record("a", 1, 2, video_id="v")
    b = record("b", 1, 2, video_id="v")
    with pytest.raises(DatasetError, match="duplicates"):
        Dataset((a, b))


def test_catalog_consistency_check(tmp_path):
    catalog = {"walk_fridge": spec("walk_fridge", "walk", "fridge")}
    ds = Dataset((record("a", 1, 2),))
    ds.check_catalog(catalog)
    bad = Dataset((record("a", 1, 2, verb="open"),))
    with pytest.raises(DatasetError, match="does not match catalog"):
        bad.check_catalog(catalog)
    path = tmp_path / "a.jsonl"
    write_jsonl(bad, path)
    with pytest.raises(DatasetError):
        load_jsonl(path, catalog)


def test_stats_single_record():
    stats = dataset_stats(Dataset((record("a", 10, 30, duration=100),)))
    assert stats == {
        "num_videos": 1,
        "num_annotations": 1,
        "num_actions": 1,
        "avg_video_duration": 100.0,
        "avg_moment_duration": 20.0,
    }


def test_stats_group_by_video():
    ds = Dataset((record("a", 10, 30, video_id="v"), record("b", 40, 50, video_id="v")))
    stats = dataset_stats(ds)
    assert stats["num_videos"] == 1
    assert stats["num_annotations"] == 2


def test_stats_empty():
    with pytest.raises(DatasetError):
        dataset_stats(Dataset())


_text = st.text(st.characters(blacklist_categories=("Cs", "Cc")), min_size=1, max_size=30).filter(str.strip)


@st.composite
def records(draw, idx):
    dur_us = draw(st.integers(2, 10**9))
    s = draw(st.integers(0, dur_us - 1))
    e = draw(st.integers(s + 1, dur_us))
    return AnnotationRecord(
        sample_id=f"s{idx}",
        video_id=draw(st.sampled_from(["v0", "v1", "v2"])),
        video_duration=dur_us / 1e6,
        query=draw(_text),
        t_s=s / 1e6,
        t_e=e / 1e6,
        action_id=draw(st.from_regex(r"[a-z_]{1,10}", fullmatch=True)),
        verb=draw(_text),
        object=draw(_text),
        scene="kitchen",
        agent="male1",
        split=draw(st.sampled_from(["train", "val", "test_high", "test_low", "unassigned"])),
        provenance=draw(st.sampled_from(["template", "rewritten"])),
    )


@st.composite
def datasets(draw):
    n = draw(st.integers(0, 8))
    recs = [draw(records(k)) for k in range(n)]
    seen, keep = set(), []
    for r in recs:
        key = (r.video_id, r.t_s, r.t_e, r.query)
        if key not in seen:
            seen.add(key)
            keep.append(r)
    return Dataset(tuple(keep))


@settings(max_examples=60, deadline=None)
@given(datasets())
def test_round_trip_property(tmp_path_factory, ds):
    path = tmp_path_factory.mktemp("rt") / "d.jsonl"
    write_jsonl(ds, path)
    first = path.read_bytes()
    loaded = load_jsonl(path)
    assert loaded == ds
    write_jsonl(loaded, path)
    assert path.read_bytes() == first
