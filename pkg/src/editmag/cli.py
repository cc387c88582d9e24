"""``editmag`` command line.

Every command reads JSONL (or JSON) and writes its output atomically, next
to a ``<output>.config.json`` file holding the resolved configuration and
the digests of the inputs it read.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from . import __version__
from .calibration import CalibrationResult, calibrate_binary, calibrate_ternary, classify_ternary
from .config import RunConfig, load_config
from .embedding import hash64
from .errors import EditMagError, InsufficientData, InvalidInput, UsageError
from .evalmetrics import (
    RatingsMatrix,
    bootstrap_se,
    confusion_and_f1,
    histogram,
    krippendorff_alpha,
    metric_as_rater,
    mse,
    paired_mean_diff,
    pearson_r,
    ties_as_missing,
)
from .jsonio import atomic_open, read_jsonl, write_json, write_jsonl
from .labeler import TERNARY, DocumentPair, LabeledExample, dataset_stats, label_pair, split_by_prompt
from .model import featurize_batch, load, predict_probs_matrix, predict_scores_matrix, save, train
from .perturb import PROFILES, apply_edit, apply_edit_sequence
from .simmetrics import edit_magnitude, raw_distance

log = logging.getLogger("editmag")

COMMANDS = ("score", "label", "perturb", "train", "predict", "calibrate", "evaluate", "agreement", "stats",
            "trajectory")


# --------------------------------------------------------------------------
# helpers


def _records(path: str, parse: Callable[[dict], object] = lambda r: r) -> Iterator:
    """Parse each line, prefixing any input error with ``path:line``."""
    for lineno, rec in read_jsonl(path):
        try:
            yield parse(rec)
        except InvalidInput as exc:
            raise type(exc)(f"{path}:{lineno}: {exc}") from None
        except (TypeError, ValueError) as exc:
            raise InvalidInput(f"{path}:{lineno}: {exc}") from None


def _field(name: str):
    def get(rec: dict):
        if name not in rec:
            raise InvalidInput(f"missing field {name!r}")
        return rec[name]
    return get


def _text_of(rec: dict) -> str:
    for key in ("text", "edited_text"):
        if key in rec:
            return rec[key]
    raise InvalidInput("record has neither 'text' nor 'edited_text'")


def _digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _echo(output: str, command: str, cfg: RunConfig, inputs: Sequence[str]) -> None:
    write_json(str(output) + ".config.json", {
        "command": command,
        "config": cfg.to_json(),
        "inputs": {Path(p).name: _digest(p) for p in inputs},
        "version": __version__,
    })


def _select(records: list[dict], split: Optional[str], what: str) -> list[dict]:
    if split is None:
        return records
    out = [r for r in records if r.get("split") == split]
    if not out:
        raise InsufficientData(f"no records in split {split!r} for {what}")
    return out


def _load_model(cfg: RunConfig):
    return load(cfg.require("model_path"))


# --------------------------------------------------------------------------
# commands


def cmd_score(args, cfg: RunConfig) -> None:
    pairs = list(_records(args.input, DocumentPair.from_json))
    out = []
    for p in pairs:
        raw = raw_distance(p.source_text, p.edited_text, cfg.metric, cfg.doc_embedder, cfg.soft_ngrams)
        out.append({"id": p.id, "metric_kind": cfg.metric.value, "raw_score": raw,
                    "edit_magnitude": edit_magnitude(raw, cfg.metric)})
    write_jsonl(args.output, out)


def cmd_label(args, cfg: RunConfig) -> None:
    pairs = list(_records(args.input, DocumentPair.from_json))
    ids = [p.id for p in pairs]
    if len(set(ids)) != len(ids):
        raise InvalidInput("pair ids must be unique")
    if any(p.split is None for p in pairs):
        assignment = split_by_prompt(pairs, cfg.split.fractions, cfg.split.seed)
    else:
        assignment = {p.id: p.split for p in pairs}
    out = []
    for p in pairs:
        ex = label_pair(p, cfg.metric, cfg.scale, cfg.buckets, cfg.doc_embedder, cfg.soft_ngrams)
        rec = ex.to_json()
        rec["split"] = p.split or assignment[p.id]
        out.append(rec)
    write_jsonl(args.output, out)


def cmd_perturb(args, cfg: RunConfig) -> None:
    p = cfg.perturb
    out, traces = [], []
    for rec in _records(args.input):
        rid = str(_field("id")(rec))
        source = rec.get("text", rec.get("source_text"))
        if not isinstance(source, str):
            raise InvalidInput(f"record {rid}: needs a 'text' or 'source_text' string")
        edited, trace = apply_edit(source, p.lam, hash64("perturb", p.seed, rid), p.profile)
        pair = DocumentPair(rid, source, edited, "rule", rec.get("prompt_id"), rec.get("prompt_category"),
                            rec.get("domain", "general"), rec.get("split"))
        out.append(pair.to_json())
        traces.append({"id": rid, "trace": trace.to_json()})
    write_jsonl(args.output, out)
    write_jsonl(str(args.output) + ".traces.jsonl", traces)


def cmd_train(args, cfg: RunConfig) -> None:
    examples = list(_records(args.input, LabeledExample.from_json))
    train_ex = [e for e in examples if e.split in ("train", None)]
    val_ex = [e for e in examples if e.split == "val"]
    if not train_ex:
        raise InsufficientData("no training examples (split 'train' or unset)")
    X_val = featurize_batch([e.text for e in val_ex], cfg.features) if val_ex else None

    def on_epoch(epoch, model):
        # bucket-level macro-F1 on the validation split, classification only
        if X_val is None or model.head_kind != "classification":
            return {}
        pred = predict_probs_matrix(model, X_val).argmax(axis=1)
        classes = range(model.bucket_spec.n)
        return {"val_macro_f1": confusion_and_f1(list(pred), [e.bucket for e in val_ex], classes).macro_f1}

    model = train(train_ex, cfg.head_kind, cfg.buckets, cfg.features, cfg.train, on_epoch=on_epoch)
    save(model, args.output)
    write_jsonl(cfg.train_log or str(args.output) + ".log.jsonl", model.history)


def cmd_predict(args, cfg: RunConfig) -> None:
    model = _load_model(cfg)
    records = list(_records(args.input, lambda r: (r, _text_of(r))))
    texts = [t for _, t in records]
    scores = predict_scores_matrix(model, featurize_batch(texts, model.feature_spec)) if texts else []
    carried = ("split", "ternary", "raw_score", "target", "bucket", "sentinel")
    out = []
    for i, ((rec, _), s) in enumerate(zip(records, scores)):
        row = {"id": rec.get("id", str(i)), "score": float(s)}
        row.update({k: rec[k] for k in carried if k in rec})
        out.append(row)
    write_jsonl(args.output, out)


def _scored(path: str) -> list[dict]:
    def parse(rec):
        s = _field("score")(rec)
        if not isinstance(s, (int, float)) or not np.isfinite(s):
            raise InvalidInput("score must be a finite number")
        return rec
    return list(_records(path, parse))


def cmd_calibrate(args, cfg: RunConfig) -> None:
    rows = _select(_scored(args.input), cfg.split.calibrate, "calibration")
    for r in rows:
        _field("ternary")(r)
    scores = [r["score"] for r in rows]
    labels = [r["ternary"] for r in rows]
    bad = set(labels) - set(TERNARY)
    if bad:
        raise InvalidInput(f"unknown ternary labels {sorted(bad)}")
    task = cfg.calibration_task
    if task == "ternary":
        result = calibrate_ternary(scores, labels)
    elif task == "human_vs_any_ai":
        result = calibrate_binary(scores, [int(l != "human") for l in labels], task)
    else:
        result = calibrate_binary(scores, [int(l == "ai_generated") for l in labels], task)
    write_json(args.output, result.to_json())


def cmd_evaluate(args, cfg: RunConfig) -> None:
    rows = _select(_scored(args.input), cfg.split.evaluate, "evaluation")
    scores = [r["score"] for r in rows]
    report: dict = {"n": len(rows)}
    if cfg.calibration_path is not None:
        with open(cfg.calibration_path, "r", encoding="utf-8") as fh:
            cal = CalibrationResult.from_json(json.load(fh))
        labeled = [r for r in rows if "ternary" in r]
        if cal.task == "ternary":
            t1, t2 = cal.thresholds
            preds = [classify_ternary(r["score"], t1, t2) for r in labeled]
            report["ternary"] = confusion_and_f1(preds, [r["ternary"] for r in labeled], TERNARY).to_json()
        else:
            (t,) = cal.thresholds
            positive = (lambda l: l != "human") if cal.task == "human_vs_any_ai" else (lambda l: l == "ai_generated")
            preds = [int(r["score"] >= t) for r in labeled]
            report[cal.task] = confusion_and_f1(preds, [int(positive(r["ternary"])) for r in labeled],
                                                (0, 1)).to_json()
    measured = [r for r in rows if "raw_score" in r and not r.get("sentinel", False)]
    if len(measured) >= 2:
        try:
            report["pearson_r"] = pearson_r([r["score"] for r in measured], [r["raw_score"] for r in measured])
        except EditMagError as exc:
            report["pearson_r"] = None
            log.warning("pearson_r skipped: %s", exc)
    with_target = [r for r in rows if "target" in r]
    if with_target:
        report["mse"] = mse([r["score"] for r in with_target], [r["target"] for r in with_target])
    if args.emit_hist:
        h = histogram(scores, cfg.histogram.bins, cfg.histogram.range)
        report["histogram"] = {"underflow": h.underflow, "overflow": h.overflow}
        with atomic_open(args.emit_hist) as fh:
            fh.write(h.to_csv())
    write_json(args.output, report)


def cmd_agreement(args, cfg: RunConfig) -> None:
    """Units are lines ``{"ratings": [...], "scores": [s1, s2]?}``; scores add the metric as a rater."""
    lines = list(_records(args.input, lambda r: (_field("ratings")(r), r.get("scores"))))
    units = [u for u, _ in lines]
    scores = [s for _, s in lines]
    if not units:
        raise InsufficientData("no rating units")
    use_metric = all(s is not None for s in scores)
    if use_metric:
        mode = cfg.buckets if cfg.agreement.tie_mode == "bucketed" else "strict"
        picks = metric_as_rater([tuple(s) for s in scores], mode)
        units = [list(u) + [p] for u, p in zip(units, picks)]
    if cfg.agreement.ties == "missing":
        units = [ties_as_missing(u) for u in units]
    ratings = RatingsMatrix(tuple(tuple(u) for u in units))
    alpha = krippendorff_alpha(ratings)
    se = bootstrap_se(krippendorff_alpha, ratings, cfg.agreement.bootstrap_B, cfg.agreement.seed)
    write_json(args.output, {"alpha": alpha, "bootstrap_se": se, "B": cfg.agreement.bootstrap_B,
                             "units": ratings.units, "raters": ratings.raters, "metric_rater": use_metric})


def cmd_stats(args, cfg: RunConfig) -> None:
    write_json(args.output, dataset_stats(_records(args.input, LabeledExample.from_json)))


def cmd_trajectory(args, cfg: RunConfig) -> None:
    model = _load_model(cfg)
    t = cfg.trajectory
    ids, rows = [], []
    for rec in _records(args.input):
        rid = str(_field("id")(rec))
        text = rec.get("text", rec.get("source_text"))
        if not isinstance(text, str):
            raise InvalidInput(f"record {rid}: needs a 'text' or 'source_text' string")
        seeds = [hash64("trajectory", t.seed, rid, k) for k in range(t.steps)]
        seq = apply_edit_sequence(text, t.steps, [t.lam] * t.steps, seeds, [t.profile] * t.steps)
        ids.append(rid)
        rows.append([text] + [s for s, _ in seq])
    if not rows:
        raise InsufficientData("no input texts")
    flat = [s for row in rows for s in row]
    scores = predict_scores_matrix(model, featurize_batch(flat, model.feature_spec)).reshape(len(rows), t.steps + 1)
    diffs = [paired_mean_diff(scores[:, k], scores[:, k + 1]) for k in range(t.steps)]
    write_json(args.output, {
        "mean_scores": [float(m) for m in scores.mean(axis=0)],
        "step_diffs": [{"mean": d[0], "sd": d[1], "frac_decreased": d[2]} for d in diffs],
        "per_text": [{"id": i, "scores": [float(x) for x in row]} for i, row in zip(ids, scores)],
    })


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}
HELP = {
    "score": "raw metric distance for source/edited pairs",
    "label": "turn pairs into labeled examples with splits",
    "perturb": "apply synthetic edits to source texts",
    "train": "fit the baseline model on labeled examples",
    "predict": "score texts with a trained model",
    "calibrate": "fit decision thresholds on scored records",
    "evaluate": "classification and correlation report for scored records",
    "agreement": "Krippendorff alpha with bootstrap SE",
    "stats": "counts and word-count summaries per split and class",
    "trajectory": "score texts across repeated edits",
}


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="editmag", description="Edit-magnitude scoring and detection.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--input", required=True, help="input file")
        p.add_argument("--output", required=True, help="output file")
        p.add_argument("--seed", type=int, help="override every run seed")
        p.add_argument("--metric", choices=("cosine", "soft-ngrams"))
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "evaluate":
            p.add_argument("--emit-hist", metavar="PATH", help="write a score histogram CSV")
        if name == "perturb":
            p.add_argument("--profile", choices=PROFILES)
            p.add_argument("--lambda", dest="lam", type=float)
        if name == "trajectory":
            p.add_argument("--steps", type=int)
            p.add_argument("--profile", choices=PROFILES)
            p.add_argument("--lambda", dest="lam", type=float)
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config, args.metric)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    overrides = {k: getattr(args, k, None) for k in ("profile", "lam", "steps")}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.command == "perturb" and overrides:
        cfg = dataclasses.replace(cfg, perturb=dataclasses.replace(cfg.perturb, **overrides))
    if args.command == "trajectory" and overrides:
        cfg = dataclasses.replace(cfg, trajectory=dataclasses.replace(cfg.trajectory, **overrides))
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if not Path(args.input).is_file():
            raise InvalidInput(f"input file not found: {args.input}")
        HANDLERS[args.command](args, cfg)
        _echo(args.output, args.command, cfg, [args.input])
    except UsageError as exc:
        print(f"editmag: usage error: {exc}", file=sys.stderr)
        return exc.exit_code
    except EditMagError as exc:
        print(f"editmag {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"editmag {args.command}: {exc}", file=sys.stderr)
        return InvalidInput.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
