"""Command-line entry point: ``abstain-ea {forge,train,eval,analyze}``.

Every command writes ``manifest.json`` next to its outputs.  Failures print
a one-line JSON object on stderr and exit nonzero (2 for usage and config
errors, 1 for everything else); out-of-range hyper-parameters only warn.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import warnings
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from . import FORMAT_VERSION, __version__
from .detect import read_verdicts, write_verdicts
from .evaluate import (
    EvalReport,
    consolidated_eval,
    detection_eval,
    relaxed_eval,
    similarity_distribution,
    write_similarity_csv,
)
from .forge import (
    ForgeConfig,
    average_neighbor_overlap,
    config_dict,
    degree_histogram,
    forge,
    load_dataset,
    save_dataset,
)
from .kg import ParseError, parse_links, parse_triples
from .nnindex import csls_matrix, nearest
from .trainer import (
    ConfigError,
    ConfigRangeWarning,
    TrainConfig,
    TrainingDiverged,
    dump_config,
    load_config,
    load_model,
    paper_scale,
    parse_config_text,
    save_model,
    train,
)

logger = logging.getLogger("abstain_ea")

TIMING_KEYS = ("epoch_seconds_align", "epoch_seconds_dangling")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# manifests


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _digests(paths) -> dict[str, str]:
    out = {}
    for p in paths:
        p = Path(p)
        if p.is_dir():
            for f in sorted(p.iterdir()):
                if f.is_file() and f.name != "manifest.json":
                    out[str(f)] = sha256_file(f)
        elif p.exists():
            out[str(p)] = sha256_file(p)
    return out


def write_manifest(out_dir, command, argv, config, seed, inputs, artifacts, extra=None):
    """Write ``manifest.json``; returns its dict."""
    manifest = {
        "command": command,
        "argv": list(argv),
        "tool_version": __version__,
        "format_version": FORMAT_VERSION,
        "seed": seed,
        "config": config,
        "inputs": _digests(inputs),
        "artifacts": artifacts,
    }
    manifest.update(extra or {})
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def log_digest(records) -> str:
    """Digest of a training log with the wall-clock fields removed."""
    h = hashlib.sha256()
    for r in records:
        r = {k: v for k, v in r.items() if k not in TIMING_KEYS}
        h.update((json.dumps(r, sort_keys=True) + "\n").encode())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# parser


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    group = p.add_argument_group("config overrides")
    for f in fields(TrainConfig):
        flag = "--" + f.name.replace("_", "-")
        group.add_argument(flag, dest=f"cfg_{f.name}", default=None, metavar=f.type.upper()
                           if isinstance(f.type, str) else f.type.__name__.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="abstain-ea", description="Entity alignment with dangling-entity abstention.")
    parser.add_argument("--version", action="store_true", help="print tool and format versions")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("forge", help="build a dangling-aware dataset from triples and links")
    p.add_argument("--kg1", required=True)
    p.add_argument("--kg2", required=True)
    p.add_argument("--links", required=True)
    p.add_argument("--out", "--out-dir", dest="out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--removal-source", "--frac1", dest="removal_source", type=float, default=0.25)
    p.add_argument("--removal-target", "--frac2", dest="removal_target", type=float, default=0.40)
    p.add_argument("--split", type=float, nargs=3, default=(0.3, 0.2, 0.5),
                   metavar=("TRAIN", "VALID", "TEST"))
    p.add_argument("--lenient", action="store_true", help="skip links naming unknown entities")

    p = sub.add_parser("train", help="train an aligner and optional detector")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--paper-scale", action="store_true",
                   help="use the reference full-scale hyper-parameters")
    _add_config_flags(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--protocol", choices=("relaxed", "consolidated"), default="consolidated")
    p.add_argument("--split", choices=("train", "valid", "test"), default="test")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--filter-targets", metavar="VERDICTS_CSV",
                   help="target-side verdicts; flagged targets leave the candidate set")

    p = sub.add_parser("analyze", help="dataset and embedding diagnostics")
    p.add_argument("kind", choices=("degree", "overlap", "similarity", "nn"))
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", help="needed for similarity and nn")
    p.add_argument("--split", choices=("train", "valid", "test"), default="test")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1)
    return parser


# ---------------------------------------------------------------------------
# commands


def cmd_forge(args, argv) -> dict:
    kg1 = parse_triples(args.kg1)
    kg2 = parse_triples(args.kg2)
    links, skipped = parse_links(args.links, kg1, kg2, lenient=args.lenient)
    cfg = ForgeConfig(args.removal_source, args.removal_target, tuple(args.split), args.seed)
    d1, d2, store = forge(kg1, kg2, links, cfg)
    written = save_dataset(args.out, d1, d2, store)
    out = Path(args.out)
    artifacts = {name: sha256_file(out / name) for name in written}
    write_manifest(out, "forge", argv, config_dict(cfg), args.seed,
                   [args.kg1, args.kg2, args.links], artifacts, {"skipped_links": skipped})
    return json.loads((out / "stats.json").read_text())


def resolve_train_config(args) -> TrainConfig:
    overrides = {}
    if args.paper_scale:
        aligner = getattr(args, "cfg_aligner", None)
        if aligner is None and args.config:
            aligner = parse_config_text(Path(args.config).read_text(encoding="utf-8")).get("aligner")
        overrides.update(paper_scale(aligner or "mtranse"))
    types = {f.name: f.type for f in fields(TrainConfig)}
    for name in types:
        raw = getattr(args, f"cfg_{name}", None)
        if raw is not None:
            overrides[name] = parse_config_text(f"{name} = {raw}")[name]
    base = load_config(args.config) if args.config else TrainConfig()
    values = asdict(base)
    values.update(overrides)
    return TrainConfig(**values)


def cmd_train(args, argv) -> dict:
    cfg = resolve_train_config(args)
    cfg.validate()
    kg1, kg2, store = load_dataset(args.dataset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        result = train(kg1, kg2, store, cfg)
    except TrainingDiverged as exc:
        save_model(out / "diverged.ckpt", exc.checkpoint)
        raise
    save_model(out / "model.ckpt", result.model,
               {"best_epoch": result.best_epoch, "best_val": result.best_val,
                "val_metric": result.val_metric})
    with open(out / "train_log.jsonl", "w", encoding="utf-8") as fh:
        for rec in result.log:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    (out / "config.txt").write_text(dump_config(result.model.cfg), encoding="utf-8")
    artifacts = {
        "model.ckpt": sha256_file(out / "model.ckpt"),
        "config.txt": sha256_file(out / "config.txt"),
        "train_log.jsonl": {"sha256_without_timings": log_digest(result.log)},
    }
    summary = {"best_epoch": result.best_epoch, "best_val": result.best_val,
               "val_metric": result.val_metric, "epochs": len(result.log)}
    write_manifest(out, "train", argv, result.model.cfg.to_dict(), cfg.seed,
                   [args.dataset] + ([args.config] if args.config else []), artifacts, summary)
    return summary


def _load(args):
    kg1, kg2, store = load_dataset(args.dataset)
    model = load_model(args.checkpoint, kg1, kg2)
    return kg1, kg2, store, model


def cmd_eval(args, argv) -> dict:
    kg1, kg2, store, model = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pairs = store.pairs_in(args.split)
    dangling = store.dangling_source_in(args.split)
    src, tgt = model.source_vectors(), model.target_vectors()
    k_csls = model.cfg.k_csls
    report = EvalReport(extra={"protocol": args.protocol, "split": args.split,
                               "aligner": model.cfg.aligner, "detector": model.cfg.detector})
    inputs = [args.dataset, args.checkpoint]
    artifacts = {}
    if args.protocol == "relaxed":
        report.relaxed = relaxed_eval(src, tgt, pairs, k_csls)
    else:
        if model.cfg.detector == "none":
            raise ConfigError("consolidated evaluation needs a model trained with a detector")
        ids = np.r_[pairs[:, 0], dangling].astype(np.int64)
        verdicts = model.detect(ids, args.workers)
        gold = {int(e): False for e in pairs[:, 0]}
        gold.update({int(e): True for e in dangling})
        candidates = None
        if args.filter_targets:
            flagged = read_verdicts(args.filter_targets, kg2.entity_id)
            candidates = np.ones(kg2.num_entities, dtype=bool)
            candidates[[v.entity for v in flagged if v.is_dangling]] = False
            inputs.append(args.filter_targets)
        report.detection = detection_eval(verdicts, gold)
        report.consolidated = consolidated_eval(src, tgt, pairs, dangling, verdicts, 10, k_csls,
                                                candidates)
        report.relaxed = relaxed_eval(src, tgt, pairs, k_csls)
        nn_csls = csls_matrix(src[ids], tgt, k_csls).max(axis=1)
        write_verdicts(out / "verdicts.csv", verdicts, kg1.entities, nn_csls)
        artifacts["verdicts.csv"] = sha256_file(out / "verdicts.csv")
    data = report.to_dict()
    (out / "report.json").write_text(json.dumps(data, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
    artifacts["report.json"] = sha256_file(out / "report.json")
    write_manifest(out, "eval", argv, model.cfg.to_dict(), model.cfg.seed, inputs, artifacts)
    return data


def cmd_analyze(args, argv) -> dict:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = [args.dataset]
    artifacts = {}
    if args.kind in ("degree", "overlap"):
        kg1, kg2, store = load_dataset(args.dataset)
        seed = None
        if args.kind == "degree":
            matchable = sorted({s for s, _, _ in store.pairs})
            dangling = sorted({e for e, _ in store.dangling_source})
            result = {
                "matchable": {str(k): v for k, v in degree_histogram(kg1, matchable).items()},
                "dangling": {str(k): v for k, v in degree_histogram(kg1, dangling).items()},
            }
        else:
            links = [(s, t) for s, t, _ in store.pairs]
            result = {"average_neighbor_overlap": average_neighbor_overlap(kg1, kg2, links),
                      "links": len(links)}
    else:
        if not args.checkpoint:
            raise UsageError(f"analyze {args.kind} needs --checkpoint")
        kg1, kg2, store, model = _load(args)
        inputs.append(args.checkpoint)
        seed = model.cfg.seed
        pairs = store.pairs_in(args.split)
        dangling = store.dangling_source_in(args.split)
        src, tgt = model.source_vectors(), model.target_vectors()
        if args.kind == "similarity":
            records, result = similarity_distribution(src, tgt, pairs[:, 0], dangling)
            write_similarity_csv(out / "similarity.csv", records, kg1.entities)
            artifacts["similarity.csv"] = sha256_file(out / "similarity.csv")
        else:
            ids = np.r_[pairs[:, 0], dangling].astype(np.int64)
            nn, dist = nearest(src[ids], tgt, args.workers)
            gold = dict(pairs.tolist())
            with open(out / "nn.csv", "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["entity", "label", "nn_target", "nn_distance", "gold_target"])
                for e, n, d in zip(ids.tolist(), nn.tolist(), dist.tolist()):
                    g = gold.get(e)
                    w.writerow([kg1.entities[e], "dangling" if g is None else "matchable",
                                kg2.entities[n], repr(d), "" if g is None else kg2.entities[g]])
            artifacts["nn.csv"] = sha256_file(out / "nn.csv")
            hit = [gold[e] == n for e, n in zip(ids.tolist(), nn.tolist()) if e in gold]
            result = {"queries": int(len(ids)),
                      "nn_hits1": float(np.mean(hit)) if hit else None}
    (out / f"{args.kind}.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n",
                                           encoding="utf-8")
    artifacts[f"{args.kind}.json"] = sha256_file(out / f"{args.kind}.json")
    write_manifest(out, "analyze", argv, {"kind": args.kind, "split": args.split}, seed,
                   inputs, artifacts)
    return result


COMMANDS = {"forge": cmd_forge, "train": cmd_train, "eval": cmd_eval, "analyze": cmd_analyze}


def _emit_error(kind: str, exc: BaseException) -> None:
    print(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}),
          file=sys.stderr)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _emit_error("usage", exc)
        return 2
    if args.version:
        print(f"abstain-ea {__version__} (format {FORMAT_VERSION})")
        return 0
    if not args.command:
        _emit_error("usage", UsageError("missing subcommand"))
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            result = COMMANDS[args.command](args, argv)
            code = 0
        except (UsageError, ConfigError) as exc:
            _emit_error("usage" if isinstance(exc, UsageError) else "config", exc)
            code = 2
        except FileNotFoundError as exc:
            _emit_error("missing_file", exc)
            code = 1
        except (ParseError, ValueError) as exc:
            _emit_error("input", exc)
            code = 1
        except TrainingDiverged as exc:
            _emit_error("diverged", exc)
            code = 1
    seen = set()
    for w in caught:
        if str(w.message) in seen:
            continue
        seen.add(str(w.message))
        kind = "config_range" if issubclass(w.category, ConfigRangeWarning) else "warning"
        print(json.dumps({"warning": kind, "message": str(w.message)}), file=sys.stderr)
    if code == 0:
        print(json.dumps(result, sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())
