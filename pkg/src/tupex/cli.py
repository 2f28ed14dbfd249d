"""Command line front end.

Every subcommand reads an optional JSON config file; explicit flags override
config values, built-in defaults fill the rest. The effective configuration
is echoed into each artifact (a "meta" block in JSON outputs, a sidecar
manifest next to binary embedding files) so runs can be reproduced.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import allocator, params_io, pipeline, reporting
from .allocator import AllocFlags, MatcherTrainConfig
from .corpus import (
    CorpusError,
    Dataset,
    parse_dataset,
    serialize_dataset,
    stats,
    train_val_split,
)
from .embedding import FormatError, read_embeddings, write_embeddings
from .metrics import prf
from .pointer_net import ExtractorTrainConfig
from .reporting import EvalRow
from .synthgen import SynthConfig, generate

_DEFAULTS: dict[str, dict] = {
    "synth": {
        "seed": 0,
        "count": 100,
        "k_distribution": {1: 0.25, 2: 0.35, 3: 0.25, 4: 0.15},
        "pattern_mix": {"A": 0.4, "B": 0.3, "C": 0.3},
        "condition_omission_rate": 0.35,
        "vocab_seed": 0,
        "id_prefix": "synth",
    },
    "embed-synth": {"seed": 0, "dim": 32},
    "train-extractor": {
        "seed": 0,
        "lr": 0.05,
        "epochs": 100,
        "hidden_width": 0,
        "threshold": 0.5,
    },
    "train-allocator": {
        "seed": 0,
        "lr": 0.05,
        "epochs": 200,
        "lam": allocator.DEFAULT_LAMBDA,
        "inter": True,
        "intra": True,
    },
    "extract": {"seed": 0, "threads": 1, "dataset_k": "all", "allocation": True, "lam": None},
    "evaluate": {"seed": 0, "dataset_k": "all"},
    "stats": {},
}


def _read_json(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CorpusError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise CorpusError(f"config {path} must hold a JSON object")
    return doc


def _effective(args: argparse.Namespace, command: str) -> dict:
    """Defaults, then config file values, then explicit flags."""
    merged = dict(_DEFAULTS[command])
    if getattr(args, "config", None):
        for key, value in _read_json(args.config).items():
            if key not in merged:
                raise CorpusError(f"config key {key!r} is not used by {command}")
            merged[key] = value
    for key in merged:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _echo(command: str, cfg: dict) -> dict:
    out = {"command": command}
    for key, value in sorted(cfg.items()):
        if isinstance(value, dict):
            value = {str(k): v for k, v in value.items()}
        out[key] = value
    return out


def _load_corpus(path: str) -> Dataset:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CorpusError(f"cannot read corpus {path}: {exc}") from exc
    return parse_dataset(raw)


def _load_embeddings(path: str, dataset: Dataset) -> dict:
    try:
        with open(path, "rb") as fh:
            records = read_embeddings(fh)
    except OSError as exc:
        raise FormatError(f"cannot read embeddings {path}: {exc}") from exc
    emb_map = {tok.sentence_id: (tok, rec) for tok, rec in records}
    pipeline.require_embeddings(dataset, emb_map)
    return emb_map


def _ensure_parent(path: str | Path) -> None:
    parent = Path(path).parent
    if parent and not parent.exists():
        parent.mkdir(parents=True, exist_ok=True)


def _write_bytes(path: str, data: bytes) -> None:
    _ensure_parent(path)
    Path(path).write_bytes(data)


def _int_keys(mapping: dict) -> dict[int, float]:
    return {int(k): float(v) for k, v in mapping.items()}


# ---------------------------------------------------------------------------
# Subcommands

def _cmd_synth(args: argparse.Namespace) -> None:
    cfg = _effective(args, "synth")
    synth_cfg = SynthConfig(
        n_sentences=cfg["count"],
        k_distribution=_int_keys(cfg["k_distribution"]),
        pattern_mix={str(k): float(v) for k, v in cfg["pattern_mix"].items()},
        condition_omission_rate=cfg["condition_omission_rate"],
        vocab_seed=cfg["vocab_seed"],
        id_prefix=cfg["id_prefix"],
    )
    dataset = generate(synth_cfg, cfg["seed"])
    _write_bytes(args.out, serialize_dataset(dataset, meta={"config": _echo("synth", cfg)}))
    print(f"wrote {len(dataset.sentences)} sentences to {args.out}")


def _cmd_embed_synth(args: argparse.Namespace) -> None:
    cfg = _effective(args, "embed-synth")
    dataset = _load_corpus(args.corpus)
    emb_map = pipeline.embed_dataset_synthetic(dataset, cfg["dim"], cfg["seed"])
    records = [emb_map[s.id] for s in dataset.sentences]
    _ensure_parent(args.out)
    with open(args.out, "wb") as fh:
        written = write_embeddings(records, fh)
    manifest = {"config": _echo("embed-synth", cfg), "sentences": len(records)}
    _write_bytes(args.out + ".manifest.json", json.dumps(manifest, sort_keys=True, indent=1).encode() + b"\n")
    print(f"wrote {written} bytes for {len(records)} sentences to {args.out}")


def _cmd_train_extractor(args: argparse.Namespace) -> None:
    cfg = _effective(args, "train-extractor")
    dataset = _load_corpus(args.corpus)
    emb_map = _load_embeddings(args.embeddings, dataset)
    train, val = train_val_split(dataset, cfg["seed"])
    config = ExtractorTrainConfig(
        lr=cfg["lr"], epochs=cfg["epochs"], hidden_width=cfg["hidden_width"],
        threshold=cfg["threshold"],
    )
    params, log = pipeline.train_extraction_stage(train, val, emb_map, cfg["seed"], config)
    _ensure_parent(args.out)
    params_io.save_pointer_checkpoint(params, args.out, _echo("train-extractor", cfg))
    best = min(log, key=lambda e: e.val_loss)
    print(f"trained {len(log)} epochs; best val loss {best.val_loss:.6f} at epoch {best.epoch}")


def _cmd_train_allocator(args: argparse.Namespace) -> None:
    cfg = _effective(args, "train-allocator")
    dataset = _load_corpus(args.corpus)
    emb_map = _load_embeddings(args.embeddings, dataset)
    dim = next(iter(emb_map.values()))[1].dim
    train, val = train_val_split(dataset, cfg["seed"])
    flags = AllocFlags(enable_inter=bool(cfg["inter"]), enable_intra=bool(cfg["intra"]))
    config = MatcherTrainConfig(lr=cfg["lr"], epochs=cfg["epochs"])
    params, log = pipeline.train_matching_stage(
        train, val, emb_map, cfg["seed"], config, dim, cfg["lam"], flags
    )
    _ensure_parent(args.out)
    params_io.save_matcher_checkpoint(params, args.out, _echo("train-allocator", cfg))
    best = min(log, key=lambda e: e.val_loss)
    print(f"trained {len(log)} epochs; best val loss {best.val_loss:.6f} at epoch {best.epoch}")


def _cmd_extract(args: argparse.Namespace) -> None:
    cfg = _effective(args, "extract")
    dataset = pipeline.select_dataset(_load_corpus(args.corpus), cfg["dataset_k"], cfg["seed"])
    emb_map = _load_embeddings(args.embeddings, dataset)
    pointer_params, _ = params_io.load_pointer_checkpoint(args.extractor)
    alloc_params = None
    if args.allocator_ckpt:
        alloc_params, _ = params_io.load_matcher_checkpoint(args.allocator_ckpt)
        if cfg["lam"] is not None:
            alloc_params = allocator.AllocParams(
                alloc_params.dim, alloc_params.u, alloc_params.bias,
                lam=cfg["lam"], flags=alloc_params.flags,
            )
        if not cfg["allocation"]:
            alloc_params = allocator.AllocParams(
                alloc_params.dim, alloc_params.u, alloc_params.bias, lam=alloc_params.lam,
                flags=AllocFlags(
                    alloc_params.flags.enable_inter, alloc_params.flags.enable_intra,
                    enable_allocation=False,
                ),
            )
    preds = pipeline.extract_dataset(
        dataset, emb_map, pointer_params, alloc_params, threads=cfg["threads"]
    )
    _write_bytes(args.out, pipeline.serialize_predictions(preds, _echo("extract", cfg)))
    n_tuples = sum(len(s.tuples) for s in preds.sentences)
    print(f"extracted {n_tuples} tuples from {len(preds.sentences)} sentences to {args.out}")


def _parse_pred_arg(value: str) -> tuple[str, str]:
    if "=" in value:
        label, path = value.split("=", 1)
        if label:
            return label, path
    return Path(value).stem, value


def _cmd_evaluate(args: argparse.Namespace) -> None:
    cfg = _effective(args, "evaluate")
    gold = pipeline.select_dataset(_load_corpus(args.gold), cfg["dataset_k"], cfg["seed"])
    rows: list[EvalRow] = []
    for spec_arg in args.pred:
        label, path = _parse_pred_arg(spec_arg)
        try:
            raw = Path(path).read_bytes()
        except OSError as exc:
            raise CorpusError(f"cannot read predictions {path}: {exc}") from exc
        counts = pipeline.evaluate_predictions(pipeline.parse_predictions(raw), gold)
        rows.append(
            EvalRow(
                dataset=cfg["dataset_k"],
                config=label,
                per_type={t: prf(c) for t, c in counts.per_type.items()},
                per_type_counts=counts.per_type,
                tuple_metrics=prf(counts.tuples),
                tuple_counts=counts.tuples,
            )
        )
    written = reporting.write_eval_report(rows, Path(args.out_dir), _echo("evaluate", cfg))
    print(reporting.report_table(rows))
    print("wrote " + ", ".join(str(p) for p in written.values()))


def _cmd_stats(args: argparse.Namespace) -> None:
    cfg = _effective(args, "stats")
    dataset = _load_corpus(args.corpus)
    summary = stats(dataset)
    written = reporting.write_stats_report(summary, Path(args.out_dir), _echo("stats", cfg))
    for s in summary.per_k:
        print(f"k={s.k}: {s.sentences} sentences, {s.tuples} tuples ({100 * s.proportion:.2f}%)")
    print(f"total: {summary.total_sentences} sentences, {summary.total_tuples} tuples")
    print("wrote " + ", ".join(str(p) for p in written.values()))


# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tupex",
        description="Tuple extraction from materials text: synthesis, training, "
        "extraction and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic annotated corpus")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int)
    p.add_argument("--condition-omission-rate", type=float, dest="condition_omission_rate")
    p.add_argument("--vocab-seed", type=int, dest="vocab_seed")
    p.add_argument("--id-prefix", dest="id_prefix")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("embed-synth", help="write hash embeddings for a corpus")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int)
    p.set_defaults(func=_cmd_embed_synth)

    p = sub.add_parser("train-extractor", help="train the span extraction stage")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--hidden-width", type=int, dest="hidden_width")
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=_cmd_train_extractor)

    p = sub.add_parser("train-allocator", help="train the tuple allocation stage")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lam", type=float)
    p.add_argument("--inter", action=argparse.BooleanOptionalAction)
    p.add_argument("--intra", action=argparse.BooleanOptionalAction)
    p.set_defaults(func=_cmd_train_allocator)

    p = sub.add_parser("extract", help="run the two-stage pipeline over a corpus")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--extractor", required=True)
    p.add_argument("--allocator", dest="allocator_ckpt")
    p.add_argument("--out", required=True)
    p.add_argument("--lam", type=float)
    p.add_argument("--allocation", action=argparse.BooleanOptionalAction)
    p.add_argument("--threads", type=int)
    p.add_argument("--dataset-k", dest="dataset_k", choices=pipeline.SELECTORS)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("evaluate", help="score prediction files against gold")
    _add_common(p)
    p.add_argument("--gold", required=True)
    p.add_argument(
        "--pred", action="append", required=True,
        help="prediction file, optionally label=path; repeat to compare runs",
    )
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--dataset-k", dest="dataset_k", choices=pipeline.SELECTORS)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("stats", help="summarize a corpus by tuple count")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(func=_cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (CorpusError, FormatError, params_io.CheckpointError, ValueError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
