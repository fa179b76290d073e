"""The ``sfgloc`` command line.

Exit codes: 0 success, 2 input error, 3 config error, 4 internal check failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import shutil
import sys
from dataclasses import asdict
from pathlib import Path

from .errors import ConfigError, InputError, SfglocError

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("sfgloc")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_INTERNAL = 0, 2, 3, 4


# -- helpers ---------------------------------------------------------------

def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _ks(text: str):
    try:
        ks = [int(k) for k in text.split(",") if k.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad cutoff list {text!r}") from exc
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError("cutoffs must be positive integers")
    return ks


def _seed(args) -> int:
    return 0 if args.seed is None else args.seed


# -- subcommands -----------------------------------------------------------

def cmd_parse(args):
    from .frontend import parse_method, print_method, tokenize

    src = _read(args.file)
    if args.emit_ast:
        from .frontend.ast import dump, to_tree

        tree = parse_method(src)
        _emit(json.dumps(to_tree(tree), indent=2) + "\n" if args.emit_ast == "json" else dump(tree), args.out)
    elif args.format == "tokens":
        _emit("".join(f"{t.line}:{t.col}\t{t.kind}\t{t.text}\n" for t in tokenize(src).tokens), args.out)
    else:
        _emit(print_method(parse_method(src)), args.out)


def cmd_sfg(args):
    from .frontend import parse_method, resolve_types
    from .sfg import build_sfg, to_dot, to_json

    typed = resolve_types(parse_method(_read(args.file)), strict=not args.lenient)
    g = build_sfg(typed, args.method_id)
    g.check()
    _emit(to_json(g) if args.format == "json" else to_dot(g), args.out)


def cmd_mask(args):
    from .pipeline import method_input
    from .sequence import build_attention_mask, expected_zero_count

    inp = method_input(_read(args.file))
    m = build_attention_mask(inp)
    zeros = int((m == 0).sum())
    if zeros != expected_zero_count(inp):
        raise SfglocError("attention mask disagrees with its closed-form entry count")
    if args.emit_matrix:
        lines = [",".join("0" if v == 0 else "-inf" for v in row) for row in m]
    else:
        segs = " ".join(f"{k}={a}:{b}" for k, (a, b) in inp.segments.items())
        rel = " ".join(f"{k}={len(v)}" for k, v in inp.relations.items())
        lines = [f"length {len(inp)}", f"segments {segs}", f"relations {rel}", f"allowed {zeros} of {m.size}"]
    _emit("\n".join(lines) + "\n", args.out)
    if args.tokens:
        Path(args.tokens).write_text("\n".join(inp.tokens) + "\n")


def _pretrain_inputs(corpus: Path, vocab=None):
    from .corpus import load_dataset
    from .pipeline import build_vocab, changeset_input, method_input

    if (corpus / "manifest.csv").is_file():
        ds = load_dataset(corpus)
        records, _ = ds.changesets("commit")
        vocab = vocab or build_vocab(ds, records, "arcl")
        return [changeset_input(cs, "arcl", vocab) for cs in records.values()], vocab
    from .vocab import Vocab

    files = sorted(corpus.glob("*.java"))
    if not files:
        raise InputError(f"{corpus}: neither a dataset (manifest.csv) nor a directory of .java methods")
    raw = [method_input(_read(f)) for f in files]
    vocab = vocab or Vocab.build([x.tokens for x in raw])
    return [method_input(_read(f), vocab) for f in files], vocab


def cmd_pretrain(args):
    import torch

    from .encoder import EncoderConfig, init_params, pretrain, save_params

    torch.manual_seed(_seed(args))
    inputs, vocab = _pretrain_inputs(Path(args.corpus))
    cfg = EncoderConfig(len(vocab), d=args.dim, layers=args.layers, heads=args.heads)
    params = init_params(cfg, _seed(args))
    hist = pretrain(inputs, params, cfg, args.steps, _seed(args), lr=args.lr, batch_size=args.batch_size,
                    vocab_size=len(vocab), n_reserved=vocab.n_reserved,
                    log=lambda r: log.info("step %d total %.4f", r["step"], r["total"]))
    save_params(args.out, params, asdict(cfg), {"vocab": vocab.itos[vocab.n_reserved:], "steps": args.steps})
    if hist:
        log.info("pre-training loss %.4f -> %.4f", hist[0]["total"], hist[-1]["total"])
    if args.log:
        with open(args.log, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(hist[0]) if hist else ["step"])
            w.writeheader()
            w.writerows(hist)


def _hmcbl_config(args):
    from .hmcbl import HmcblConfig

    cfg = HmcblConfig(d_proj=args.proj_dim, momentum=args.momentum, bank_size=args.bank_size,
                      batch_size=args.batch_size, lr=args.lr, gamma=args.gamma, alpha_f=args.alpha_f,
                      alpha_m=args.alpha_m, alpha_b=args.alpha_b, pool=args.pool)
    cfg.validate()
    return cfg


def cmd_train(args):
    from .encoder import EncoderConfig, load_params
    from .hmcbl import write_log
    from .pipeline import prepare, save_model, train_model
    from .vocab import Vocab

    hcfg = _hmcbl_config(args)
    enc_params, vocab, enc_cfg = None, None, None
    if args.pretrained:
        enc_params, manifest = load_params(args.pretrained)
        vocab = Vocab(manifest["extra"]["vocab"])
        enc_cfg = EncoderConfig(**manifest["config"])
    prep = prepare(args.data, args.granularity, args.encoding, vocab)
    enc_cfg = enc_cfg or EncoderConfig(len(prep.vocab), d=args.dim, layers=args.layers, heads=args.heads)
    model, hist = train_model(prep, hcfg, args.steps, _seed(args), enc_cfg, enc_params,
                              on_step=lambda r: log.info("step %d L %.4f", r["step"], r["L"]))
    out = Path(args.out)
    save_model(out, model, prep.vocab, {"granularity": prep.granularity, "encoding": prep.encoding,
                                        "seed": _seed(args), "data": str(Path(args.data).resolve())})
    write_log(out / "train_log.csv", hist)


def cmd_index(args):
    from .pipeline import load_model, prepare
    from .pipeline import index_changesets
    from .retrieval import PqConfig

    model, vocab, info = load_model(args.model)
    prep = prepare(args.changesets, info.get("granularity", "commit"), info.get("encoding", "arcl"), vocab)
    ids = {"all": sorted(prep.records), "train": prep.train_pool(), "test": prep.test_pool()}[args.split]
    pq = PqConfig(enabled=args.pq, m=args.pq_m, k=args.pq_k)
    bundle = index_changesets(model, prep, ids, args.partitions, pq, _seed(args))
    bundle.save(args.out, {"model": str(Path(args.model).resolve()), "split": args.split,
                           "granularity": prep.granularity, "encoding": prep.encoding})
    log.info("indexed %d changesets in %d partitions", len(ids), bundle.index.n_partitions)


def _load_index(path):
    from .pipeline import IndexBundle, load_model

    bundle, meta = IndexBundle.load(path)
    model, vocab, _ = load_model(meta["model"])
    return bundle, meta, model, vocab


def cmd_query(args):
    from .hmcbl import embed_reports
    from .pipeline import rank, report_ids

    bundle, _, model, vocab = _load_index(args.index)
    text = _read(args.report)
    try:
        d = json.loads(text)
        text = f"{d.get('summary', '')}\n{d.get('description', '')}" if isinstance(d, dict) else text
    except json.JSONDecodeError:
        pass
    q = embed_reports(model, [report_ids(text, vocab)])[0]
    ranked = rank(bundle, q, args.nprobe, max(args.topk, args.candidates))[: args.topk]
    lines = ["rank,changeset_id,score"] + [f"{i},{c},{s!r}" for i, (c, s) in enumerate(ranked, 1)]
    _emit("\n".join(lines) + "\n", args.out)


def cmd_eval(args):
    from .pipeline import evaluate, prepare

    bundle, meta, model, vocab = _load_index(args.index)
    prep = prepare(args.dataset, meta["granularity"], meta["encoding"], vocab)
    metrics, _ = evaluate(model, prep, bundle, args.ks, args.nprobe, args.candidates)
    lines = ["metric,value"] + [f"{k},{v!r}" for k, v in metrics.items()]
    _emit("\n".join(lines) + "\n", args.out)


def cmd_ingest(args):
    from .corpus import BugReport, ManifestRow, parse_unified_diff, write_manifest, write_reports
    from .corpus import SyntheticSpec, write_synthetic_dataset

    out = Path(args.out)
    if args.synthetic:
        write_synthetic_dataset(out, _seed(args), SyntheticSpec(args.pairs, args.distractors))
        return
    if not (args.reports and args.diffs and args.links):
        raise InputError("ingest needs --reports, --diffs and --links (or --synthetic)")
    text = _read(args.reports)
    try:
        if args.reports.endswith(".jsonl"):
            raw = [json.loads(ln) for ln in text.splitlines() if ln.strip()]
        else:
            raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.reports}: {exc}") from exc
    reports = [BugReport.from_json(d) for d in raw]
    known = {r.id for r in reports}
    if len(known) != len(reports):
        raise InputError("duplicate bug report ids")
    (out / "diffs").mkdir(parents=True, exist_ok=True)
    rows = []
    with open(args.links, newline="") as fh:
        for row in csv.DictReader(fh):
            h, bug = row.get("commit_hash", ""), row.get("bug_id", "") or ""
            if not h:
                raise InputError(f"{args.links}: row without commit_hash")
            if bug and bug not in known:
                raise InputError(f"{args.links}: unknown bug id {bug}")
            src = Path(args.diffs) / f"{h}.diff"
            parse_unified_diff(_read(src))  # validate before copying
            shutil.copyfile(src, out / "diffs" / f"{h}.diff")
            rows.append(ManifestRow(h, bug, f"diffs/{h}.diff", row.get("committed_at", "") or ""))
    write_reports(out / "reports.jsonl", reports)
    write_manifest(out / "manifest.csv", rows)


# -- argument parsing ------------------------------------------------------

def _global_flags(p, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=default, help="random seed")
    p.add_argument("--config", default=default, help="TOML file with option defaults")
    p.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS if suppress else False)


def _model_flags(p):
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=4)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sfgloc", description="Semantic-flow-graph changeset retrieval for bug reports.")
    _global_flags(ap, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=func)
        return p

    p = add("parse", cmd_parse, "parse one Java method")
    p.add_argument("file")
    p.add_argument("--format", choices=["source", "tokens"], default="source")
    p.add_argument("--emit-ast", nargs="?", const="text", choices=["text", "json"],
                   help="print the syntax tree (indented text, or JSON) instead of --format output")
    p.add_argument("--out")

    p = add("sfg", cmd_sfg, "build the semantic flow graph of a method")
    p.add_argument("file")
    p.add_argument("--format", choices=["json", "dot"], default="json")
    p.add_argument("--method-id")
    p.add_argument("--lenient", action="store_true", help="treat undeclared names as fields")
    p.add_argument("--out")

    p = add("mask", cmd_mask, "graph-guided attention mask of a method")
    p.add_argument("file")
    p.add_argument("--emit-matrix", action="store_true", help="write the 0/-inf matrix as CSV instead of a summary")
    p.add_argument("--out")
    p.add_argument("--tokens", help="also write the sequence tokens, one per line")

    p = add("pretrain", cmd_pretrain, "pre-train the changeset encoder")
    p.add_argument("--corpus", required=True)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--out", required=True)
    p.add_argument("--log")
    _model_flags(p)

    p = add("train", cmd_train, "contrastive training on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--granularity", choices=["commit", "file", "hunk"], default="commit")
    p.add_argument("--encoding", choices=["d", "arc", "arcl"], default="arcl")
    p.add_argument("--bank-size", type=int, default=512)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--lr", type=float, default=3e-5)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--momentum", type=float, default=0.999)
    p.add_argument("--gamma", type=float, default=0.07)
    p.add_argument("--alpha-f", type=float, default=1.0)
    p.add_argument("--alpha-m", type=float, default=1.0)
    p.add_argument("--alpha-b", type=float, default=1.0)
    p.add_argument("--pool", choices=["mean", "first"], default="mean", help="token pooling for sequence vectors")
    p.add_argument("--proj-dim", type=int, default=128)
    p.add_argument("--pretrained", help="encoder checkpoint from `sfgloc pretrain`")
    p.add_argument("--out", required=True)
    _model_flags(p)

    p = add("index", cmd_index, "embed and index changesets")
    p.add_argument("--model", required=True)
    p.add_argument("--changesets", required=True, help="dataset directory")
    p.add_argument("--split", choices=["all", "train", "test"], default="all")
    p.add_argument("--partitions", type=int, help="default: floor(sqrt(n))")
    p.add_argument("--pq", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--pq-m", type=int, default=8)
    p.add_argument("--pq-k", type=int, default=256)
    p.add_argument("--out", required=True)

    p = add("query", cmd_query, "rank indexed changesets for one bug report")
    p.add_argument("--index", required=True)
    p.add_argument("--report", required=True, help="JSON bug report or plain text")
    p.add_argument("--topk", type=int, default=10)
    p.add_argument("--nprobe", type=int, default=4)
    p.add_argument("--candidates", type=int, default=100)
    p.add_argument("--out")

    p = add("eval", cmd_eval, "evaluate an index on a dataset's test split")
    p.add_argument("--index", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--ks", type=_ks, default=[1, 3, 5])
    p.add_argument("--nprobe", type=int, default=4)
    p.add_argument("--candidates", type=int, default=100)
    p.add_argument("--out")

    p = add("ingest", cmd_ingest, "assemble a dataset directory")
    p.add_argument("--reports", help="bug reports (.json list or .jsonl)")
    p.add_argument("--diffs", help="directory of <commit>.diff files")
    p.add_argument("--links", help="CSV with commit_hash, bug_id[, committed_at]")
    p.add_argument("--synthetic", action="store_true", help="generate the synthetic corpus instead")
    p.add_argument("--pairs", type=int, default=60)
    p.add_argument("--distractors", type=int, default=540)
    p.add_argument("--out", required=True)
    return ap


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _apply_config(ap, argv, args):
    """Re-parse with defaults taken from the config file; explicit flags still win.

    Top-level keys apply to every subcommand, a ``[name]`` table only to
    that subcommand.
    """
    cfg = load_config(args.config)
    choices = next(a for a in ap._actions if isinstance(a, argparse._SubParsersAction)).choices
    for key, val in cfg.items():
        if isinstance(val, dict) and key not in choices:
            raise ConfigError(f"unknown table [{key}] in {args.config}")
    values = {k: v for k, v in cfg.items() if not isinstance(v, dict)}
    values.update(cfg.get(args.command, {}))
    sub = choices[args.command]
    dests = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, val in values.items():
        dest = key.replace("-", "_")
        if dest in ("config", "func", "command", "help") or dest not in dests:
            raise ConfigError(f"unknown option {key!r} for `{args.command}` in {args.config}")
        if dest == "ks" and isinstance(val, list):
            val = [int(v) for v in val]
        defaults[dest] = val
    for a in sub._actions:
        if a.dest in defaults:
            a.required = False
    cli_seed = args.seed
    sub.set_defaults(**defaults)
    args = ap.parse_args(argv)
    if cli_seed is not None:
        args.seed = cli_seed
    elif "seed" in defaults:
        args.seed = defaults["seed"]
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config:
            args = _apply_config(ap, argv, args)
        args.func(args)
    except ConfigError as exc:
        print(f"sfgloc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"sfgloc: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SfglocError as exc:
        print(f"sfgloc: internal check failed: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (OSError, ValueError) as exc:
        print(f"sfgloc: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
