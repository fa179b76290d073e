"""On-disk dataset layout, loading and the chronological train/test split.

Layout of a dataset directory::

    reports.jsonl   one bug report per line: id, summary, description, openedAt
    manifest.csv    commit_hash, bug_id, diff_path, committed_at
    diffs/          raw ``git diff`` output, one file per commit

A manifest row with an empty ``bug_id`` is a changeset not linked to any
report; a commit linked to several reports appears once per report.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from ..errors import InputError, SplitError
from .changeset import Changeset, Granularity, at_granularity

MANIFEST_FIELDS = ["commit_hash", "bug_id", "diff_path", "committed_at"]


def parse_time(s: str) -> datetime:
    try:
        return datetime.fromisoformat(s.replace("Z", "+00:00"))
    except (AttributeError, ValueError) as exc:
        raise InputError(f"not an ISO-8601 timestamp: {s!r}") from exc


@dataclass(frozen=True)
class BugReport:
    id: str
    summary: str
    description: str
    opened_at: str

    @property
    def text(self) -> str:
        return f"{self.summary}\n{self.description}".strip()

    @property
    def opened(self) -> datetime:
        return parse_time(self.opened_at)

    def to_json(self) -> dict:
        return {"id": self.id, "summary": self.summary, "description": self.description, "openedAt": self.opened_at}

    @classmethod
    def from_json(cls, d: dict) -> "BugReport":
        try:
            r = cls(str(d["id"]), d.get("summary", ""), d.get("description", ""), d["openedAt"])
        except KeyError as exc:
            raise InputError(f"bug report missing field {exc}") from exc
        r.opened  # validates the timestamp
        return r


@dataclass(frozen=True)
class ManifestRow:
    commit_hash: str
    bug_id: str
    diff_path: str
    committed_at: str


@dataclass
class Dataset:
    root: Path
    reports: dict  # id -> BugReport
    commits: dict  # hash -> Changeset (commit level)
    links: list  # (bug id, commit hash)
    committed_at: dict  # hash -> timestamp text

    def changesets(self, granularity) -> tuple[dict, list]:
        """Records at a granularity and the (report id, changeset id) positive pairs."""
        records, by_commit = {}, {}
        for h, cs in self.commits.items():
            recs = at_granularity(cs, granularity)
            by_commit[h] = [r.id for r in recs]
            for r in recs:
                records[r.id] = r
        pairs = [(b, cid) for b, h in self.links for cid in by_commit.get(h, [])]
        return records, pairs


def write_reports(path, reports):
    with open(path, "w") as fh:
        for r in reports:
            fh.write(json.dumps(r.to_json()) + "\n")


def read_reports(path) -> dict:
    out = {}
    with open(path) as fh:
        for k, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                r = BugReport.from_json(json.loads(line))
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{k}: {exc}") from exc
            if r.id in out:
                raise InputError(f"{path}:{k}: duplicate bug report id {r.id}")
            out[r.id] = r
    return out


def write_manifest(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MANIFEST_FIELDS)
        for r in rows:
            w.writerow([r.commit_hash, r.bug_id, r.diff_path, r.committed_at])


def read_manifest(path) -> list[ManifestRow]:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        missing = set(MANIFEST_FIELDS) - set(rd.fieldnames or [])
        if missing:
            raise InputError(f"{path}: manifest lacks columns {sorted(missing)}")
        return [ManifestRow(r["commit_hash"], r["bug_id"] or "", r["diff_path"], r["committed_at"] or "")
                for r in rd]


def load_dataset(root) -> Dataset:
    root = Path(root)
    for name in ("reports.jsonl", "manifest.csv"):
        if not (root / name).is_file():
            raise InputError(f"{root}: missing {name}")
    reports = read_reports(root / "reports.jsonl")
    rows = read_manifest(root / "manifest.csv")
    commits, links, when = {}, [], {}
    for r in rows:
        if r.commit_hash not in commits:
            p = root / r.diff_path
            if not p.is_file():
                raise InputError(f"{root}: manifest references missing diff {r.diff_path}")
            commits[r.commit_hash] = Changeset.from_diff(r.commit_hash, p.read_text())
            when[r.commit_hash] = r.committed_at
        if r.bug_id:
            if r.bug_id not in reports:
                raise InputError(f"{root}: manifest links unknown bug report {r.bug_id}")
            links.append((r.bug_id, r.commit_hash))
    return Dataset(root, reports, commits, links, when)


@dataclass
class DatasetSplit:
    train_pairs: list
    test_pairs: list
    train_negatives: list = field(default_factory=list)
    test_negatives: list = field(default_factory=list)
    boundary: str = ""  # openedAt of the last training report

    @property
    def train_reports(self):
        return sorted({r for r, _ in self.train_pairs})

    @property
    def test_reports(self):
        return sorted({r for r, _ in self.test_pairs})


def split_chronological(pairs, reports: dict, changeset_times: dict | None = None,
                        all_changesets=None) -> DatasetSplit:
    """First ceil(n/2) reports by (openedAt, id) train, the rest test.

    Test pairs whose changeset is already a training positive are dropped so
    the two positive sets are disjoint. Changesets that are never positive
    become negatives of the split their timestamp falls in (train when at or
    before the boundary); undated ones serve both splits.
    """
    ids = sorted({r for r, _ in pairs}, key=lambda r: (reports[r].opened, r))
    if len(ids) < 2:
        raise SplitError(f"need at least 2 bug reports to split, got {len(ids)}")
    n_train = math.ceil(len(ids) / 2)
    train_ids = set(ids[:n_train])
    boundary = reports[ids[n_train - 1]].opened
    train = [(r, c) for r, c in pairs if r in train_ids]
    train_pos = {c for _, c in train}
    test = [(r, c) for r, c in pairs if r not in train_ids and c not in train_pos]
    split = DatasetSplit(train, test, boundary=reports[ids[n_train - 1]].opened_at)
    if all_changesets is not None:
        positives = {c for _, c in pairs}
        times = changeset_times or {}
        for c in all_changesets:
            if c in positives:
                continue
            t = times.get(c)
            if not t:
                split.train_negatives.append(c)
                split.test_negatives.append(c)
            elif parse_time(t) <= boundary:
                split.train_negatives.append(c)
            else:
                split.test_negatives.append(c)
    return split


def sample_negatives(pool, exclude, k: int, rng: np.random.Generator) -> list:
    """k draws (with replacement) uniformly from ``pool`` minus ``exclude``."""
    cand = [c for c in pool if c not in exclude]
    if not cand:
        raise InputError("no negative changesets available")
    return [cand[i] for i in rng.integers(len(cand), size=k)]
