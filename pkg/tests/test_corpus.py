import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfgloc.corpus import (BugReport, Changeset, DiffLine, FileDiff, LineKind, SyntheticSpec, encode_changeset,
                           expand_granularity, load_dataset, make_hunk, parse_unified_diff, preprocess,
                           serialize_diff, split_chronological, strip_comments, synthetic_methods,
                           write_synthetic_dataset)
from sfgloc.errors import DiffParseError, InputError, SplitError
from sfgloc.frontend import parse_method

TWO_FILES = """commit 1234
Author: someone

diff --git a/src/A.java b/src/A.java
--- a/src/A.java
+++ b/src/A.java
@@ -1,3 +1,3 @@ class A
 int a = 0;
-int b = 1;
+int b = 2;
 int c = 3;
@@ -10,2 +10,3 @@
 x = 1;
+y = 2;
 z = 3;
diff --git a/src/B.java b/src/B.java
--- a/src/B.java
+++ b/src/B.java
@@ -5 +5 @@
-old();
+fresh();
"""


def lines(*spec):
    kinds = {"+": LineKind.Added, "-": LineKind.Removed, " ": LineKind.Context}
    return [DiffLine(kinds[s[0]], s[1:]) for s in spec]


def test_marker_rule():
    (f,) = parse_unified_diff("--- a/X.java\n+++ b/X.java\n@@ -0,0 +1 @@\n+x = 1;\n")
    assert f.lines == (DiffLine(LineKind.Added, "x = 1;"),)


def test_hunks_and_files():
    files = parse_unified_diff(TWO_FILES)
    assert [f.path for f in files] == ["src/A.java", "src/B.java"]
    assert [len(f.hunks) for f in files] == [2, 1]
    assert files[0].hunks[0].section.strip() == "class A"


def test_content_without_header_is_rejected():
    with pytest.raises(DiffParseError):
        parse_unified_diff("--- a/X.java\n+++ b/X.java\n+x = 1;\n")
    with pytest.raises(DiffParseError):
        parse_unified_diff("--- a/X.java\n+++ b/X.java\n@@ -1,2 +1,2 @@\n x\n")


def test_serialize_round_trip():
    files = parse_unified_diff(TWO_FILES)
    assert parse_unified_diff(serialize_diff(files)) == files


diff_line = st.builds(DiffLine, st.sampled_from(list(LineKind)),
                      st.text(st.characters(min_codepoint=32, max_codepoint=126), max_size=20))


@settings(max_examples=80, deadline=None)
@given(st.lists(st.lists(st.lists(diff_line, min_size=1, max_size=6), min_size=1, max_size=3), min_size=1,
                max_size=3))
def test_generated_diffs_round_trip(spec):
    files = tuple(FileDiff(f"p{i}.java", f"p{i}.java", tuple(make_hunk(h, 1 + 50 * j, 1 + 50 * j) for j, h in
                                                             enumerate(hs)))
                  for i, hs in enumerate(spec))
    assert tuple(parse_unified_diff(serialize_diff(files))) == files


def test_encodings():
    ls = lines("+a", "-b", " c")
    assert encode_changeset(ls, "d") == "a b c"
    assert encode_changeset(ls, "arc") == "[ADD] a [REM] b [CTX] c"
    assert encode_changeset(ls, "arcl") == "[ADD] a [REM] b [CTX] c"
    mixed = lines("+a", "-b", "+c")
    assert encode_changeset(mixed, "arc") == "[ADD] a c [REM] b"
    assert encode_changeset(mixed, "ARC_L") == "[ADD] a [REM] b [ADD] c"
    assert encode_changeset([], "arc") == ""


def test_expansion_counts():
    cs = Changeset.from_diff("h1", TWO_FILES)
    files, hunks = expand_granularity(cs)
    assert len(files) == 2 and len(hunks) == 3
    assert {h.commit_hash for h in hunks} == {"h1"}


def test_single_hunk_file_equals_hunk():
    cs = Changeset.from_diff("h2", "--- a/X.java\n+++ b/X.java\n@@ -1 +1 @@\n-a\n+b\n")
    (f,), (h,) = expand_granularity(cs)
    assert f.lines == h.lines


def test_empty_diff_expands_to_nothing():
    assert expand_granularity(Changeset.from_diff("h3", "")) == ([], [])


def test_comment_stripping():
    got = strip_comments(lines("+int a = 1; // note", "+/* start", " still comment */ b = 2;", "+c = '/';"))
    # lines left empty by stripping are dropped
    assert [ln.text.strip() for ln in got] == ["int a = 1;", "b = 2;", "c = '/';"]
    cs = preprocess(Changeset.from_diff("h", "--- a/X\n+++ b/X\n@@ -0,0 +1 @@\n+x = 1; // why\n"))
    assert cs.lines[0].text.strip() == "x = 1;"


def _reports(n):
    return {f"B{i}": BugReport(f"B{i}", "s", "d", f"2020-01-{i + 1:02d}T00:00:00") for i in range(n)}


def test_split_even_and_odd():
    r4 = _reports(4)
    s = split_chronological([(b, f"c{b}") for b in r4], r4)
    assert s.train_reports == ["B0", "B1"] and s.test_reports == ["B2", "B3"]
    r5 = _reports(5)
    s = split_chronological([(b, f"c{b}") for b in r5], r5)
    assert len(s.train_reports) == 3 and len(s.test_reports) == 2


def test_split_ties_break_by_id():
    reps = {k: BugReport(k, "s", "d", "2020-01-01T00:00:00") for k in ("Z", "A", "M", "C")}
    s = split_chronological([(k, k.lower()) for k in reps], reps)
    assert s.train_reports == ["A", "C"]


def test_split_negatives_follow_time():
    r4 = _reports(4)
    times = {"early": "2020-01-01T12:00:00", "late": "2020-01-03T00:00:00"}
    s = split_chronological([(b, f"c{b}") for b in r4], r4, times, ["early", "late", "undated"])
    assert s.train_negatives == ["early", "undated"] and s.test_negatives == ["late", "undated"]


def test_split_needs_two_reports():
    with pytest.raises(SplitError):
        split_chronological([("B0", "c")], _reports(1))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 14)), min_size=2, max_size=40))
def test_split_is_disjoint_and_ordered(raw):
    reps = _reports(10)
    pairs = sorted({(f"B{r}", f"c{c}") for r, c in raw})
    if len({r for r, _ in pairs}) < 2:
        return
    s = split_chronological(pairs, reps)
    if not s.test_pairs:  # every test pair pointed at a training positive
        return
    assert not set(s.train_reports) & set(s.test_reports)
    assert not {c for _, c in s.train_pairs} & {c for _, c in s.test_pairs}
    assert max(reps[r].opened for r in s.train_reports) <= min(reps[r].opened for r in s.test_reports)


def test_synthetic_dataset_loads(tmp_path):
    root = write_synthetic_dataset(tmp_path, seed=3, spec=SyntheticSpec(n_pairs=6, n_distractors=10))
    ds = load_dataset(root)
    assert len(ds.reports) == 6 and len(ds.commits) == 16 and len(ds.links) == 6
    # every planted name of a report occurs in its commit's added lines
    for bug, h in ds.links:
        added = " ".join(ln.text for ln in ds.commits[h].lines if ln.kind is LineKind.Added)
        words = [w for w in ds.reports[bug].description.replace(".", " ").split() if w[0].islower() and
                 any(c.isupper() for c in w)]
        assert words and all(w in added for w in words)


def test_synthetic_is_deterministic(tmp_path):
    a = write_synthetic_dataset(tmp_path / "a", seed=1, spec=SyntheticSpec(n_pairs=4, n_distractors=4))
    b = write_synthetic_dataset(tmp_path / "b", seed=1, spec=SyntheticSpec(n_pairs=4, n_distractors=4))
    for name in ("reports.jsonl", "manifest.csv"):
        assert (a / name).read_text() == (b / name).read_text()


def test_synthetic_methods_parse():
    for src in synthetic_methods(20, seed=0):
        parse_method(src)


def test_dataset_errors(tmp_path):
    with pytest.raises(InputError):
        load_dataset(tmp_path)
    root = write_synthetic_dataset(tmp_path / "d", seed=0, spec=SyntheticSpec(n_pairs=2, n_distractors=1))
    with open(root / "reports.jsonl", "a") as fh:
        fh.write(json.dumps({"id": "BUG-0001", "summary": "x", "description": "y",
                             "openedAt": "2020-01-01T00:00:00"}) + "\n")
    with pytest.raises(InputError, match="duplicate"):
        load_dataset(root)
