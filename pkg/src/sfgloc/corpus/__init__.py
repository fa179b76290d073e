"""Bug reports, diffs, changeset encodings and dataset splits."""
from .changeset import (Changeset, Granularity, Strategy, at_granularity, encode_changeset, encoded_lines,
                        expand_granularity, preprocess, strip_comments)
from .dataset import (BugReport, Dataset, DatasetSplit, ManifestRow, load_dataset, read_manifest, read_reports,
                      split_chronological, write_manifest, write_reports)
from .diff import DiffLine, FileDiff, Hunk, LineKind, make_hunk, parse_unified_diff, serialize_diff
from .synthetic import SyntheticSpec, synthetic_methods, write_synthetic_dataset
