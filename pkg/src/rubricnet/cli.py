"""Command-line interface.

Commands: synth, train, eval, score, bench, stats. Every successful run
that writes artifacts also writes a ``<out>.manifest.json`` recording the
command, the fully resolved configuration, the seed, the dataset
fingerprint, artifact paths, tool version, and wall-clock duration;
deterministic commands are bit-reproducible from their manifests.

Failures exit nonzero with a single ``error:<category>: message`` line on
stderr. The environment variable RUBRICNET_DATA_DIR provides a default
directory for relative input paths; everything else travels through flags
or config files so runs stay reproducible.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .corpus import DataSplit, SyntheticSpec, dump_dataset, generate_synthetic, load_dataset, split_deep, split_shallow
from .errors import ConfigError, RubricnetError, ValidationError
from .evaluation import (
    FIXTURE_PATH,
    benchmark,
    compare_models,
    dataset_fingerprint,
    load_accuracy_fixture,
    machine_descriptor,
    mean_sd,
    report_for_model,
    reports_from_fixture,
)
from .model_io import load_model, save_model
from .registry import DEEP_KINDS, MODEL_KINDS, fit_model
from .reporting import (
    ASPECT_NAMES,
    render_table,
    save_comparison,
    save_eval_report,
    save_score_bars,
    save_timings,
    save_training_curves,
)

DATA_DIR_ENV = "RUBRICNET_DATA_DIR"


def _resolve_input(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    base = os.environ.get(DATA_DIR_ENV)
    if base and not p.is_absolute():
        candidate = Path(base) / p
        if candidate.exists():
            return candidate
    return p


def _refuse_overwrite(path: Path, force: bool) -> None:
    if path.exists() and not force:
        raise ValidationError(f"{path} exists; pass --force to overwrite")


def _load_config_dict(path: str | None) -> dict:
    if path is None:
        return {}
    p = _resolve_input(path)
    obj = json.loads(p.read_text(encoding="utf-8"))
    if not isinstance(obj, dict):
        raise ConfigError(f"{p}: config must be a JSON object")
    return obj


def _write_manifest(
    out: Path,
    command: str,
    config: dict,
    seed: int | None,
    fingerprint: str | None,
    artifacts: list[Path],
    t0: float,
) -> Path:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "dataset_fingerprint": fingerprint,
        "artifacts": [str(a) for a in artifacts],
        "tool_version": __version__,
        "machine": machine_descriptor(),
        "duration_seconds": time.perf_counter() - t0,
    }
    path = Path(str(out) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return path


def _emit(args, human: str, payload: dict) -> None:
    if args.json:
        print(json.dumps(payload))
    else:
        print(human)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_synth(args) -> int:
    t0 = time.perf_counter()
    if args.spec:
        spec = SyntheticSpec.from_file(_resolve_input(args.spec))
        if args.n is not None:
            spec = dataclasses.replace(spec, n=args.n)
    else:
        if args.n is None:
            raise ConfigError("synth needs --spec or --n")
        spec = SyntheticSpec(n=args.n, seed=args.seed if args.seed is not None else 0)
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    out = Path(args.out)
    _refuse_overwrite(out, args.force)
    items = generate_synthetic(spec)
    dump_dataset(items, out)
    fp = dataset_fingerprint(items)
    manifest = _write_manifest(
        out, "synth", spec.to_json(), spec.seed, fp, [out], t0
    )
    _emit(
        args,
        f"wrote {len(items)} responses to {out} (fingerprint {fp[:12]})",
        {"out": str(out), "n": len(items), "dataset_fingerprint": fp,
         "manifest": str(manifest)},
    )
    return 0


def _choose_split(kind: str, choice: str) -> str:
    if choice != "auto":
        return choice
    return "deep" if kind in DEEP_KINDS else "shallow"


def cmd_train(args) -> int:
    t0 = time.perf_counter()
    items = load_dataset(_resolve_input(args.data))
    config = _load_config_dict(args.config)
    # precedence: --seed flag, then config file, then 0
    config_seed = config.pop("seed", None)
    seed = args.seed if args.seed is not None else (
        int(config_seed) if config_seed is not None else 0
    )
    scheme = _choose_split(args.model, args.split)
    if scheme == "deep":
        split = split_deep(items, seed)
    elif scheme == "shallow":
        split = split_shallow(items, seed)
    else:
        split = DataSplit(train=items, validation=[], test=[])
    out = Path(args.out)
    _refuse_overwrite(out, args.force)

    fitted, record, resolved = fit_model(
        args.model, split.train, seed=seed, config=config,
        validation=split.validation,
    )
    save_model(fitted, out)
    artifacts: list[Path] = [out]
    record_json = {
        "model_kind": args.model,
        "split_scheme": scheme,
        "sizes": {"train": len(split.train), "validation": len(split.validation),
                  "test": len(split.test)},
        "record": record.to_json() if record is not None else None,
    }
    record_path = Path(str(out) + ".record.json")
    record_path.write_text(json.dumps(record_json, indent=2), encoding="utf-8")
    artifacts.append(record_path)
    if record is not None:
        artifacts += save_training_curves(record, out)
    fp = dataset_fingerprint(items)
    manifest = _write_manifest(
        out, "train",
        {"model_kind": args.model, "split_scheme": scheme, "data": str(args.data),
         "resolved": resolved},
        seed, fp, artifacts, t0,
    )
    last = record.epochs[-1].train_loss if record and record.epochs else None
    _emit(
        args,
        f"trained {args.model} on {len(split.train)} items ({scheme} split) -> {out}"
        + (f"; final train loss {last:.4f}" if last is not None else ""),
        {"out": str(out), "model_kind": args.model, "split_scheme": scheme,
         "sizes": record_json["sizes"], "dataset_fingerprint": fp,
         "final_train_loss": last, "manifest": str(manifest)},
    )
    return 0


def cmd_eval(args) -> int:
    t0 = time.perf_counter()
    fitted = load_model(_resolve_input(args.model))
    items = load_dataset(_resolve_input(args.data))
    rep = report_for_model(fitted, items)
    rows = [[name, f"{acc:.4f}"] for name, acc in zip(ASPECT_NAMES, rep.per_aspect)]
    rows.append(["mean", f"{rep.mean:.4f}"])
    rows.append(["sd", f"{rep.sd:.4f}"])
    human = render_table(["aspect", "accuracy"], rows)
    payload = rep.to_json()
    if args.out:
        out = Path(args.out)
        json_path = out.with_suffix(".json")
        _refuse_overwrite(json_path, args.force)
        json_path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
        artifacts = [json_path] + save_eval_report(rep, out)
        manifest = _write_manifest(
            out, "eval", {"model": str(args.model), "data": str(args.data)},
            None, rep.dataset_fingerprint, artifacts, t0,
        )
        payload["manifest"] = str(manifest)
        human += f"\nwrote {', '.join(str(a) for a in artifacts)}"
    _emit(args, human, payload)
    return 0


def cmd_score(args) -> int:
    t0 = time.perf_counter()
    fitted = load_model(_resolve_input(args.model))
    if args.text is not None:
        texts = [args.text]
    elif args.infile is not None:
        raw = _resolve_input(args.infile).read_text(encoding="utf-8")
        texts = raw.splitlines()
    else:
        raise ConfigError("score needs --text or --in")
    probs = fitted.predict_probs(texts)
    decisions = (probs >= 0.5).astype(int)
    results = [
        {"text": t, "probs": [float(v) for v in p], "decisions": d.tolist()}
        for t, p, d in zip(texts, probs, decisions)
    ]
    artifacts: list[Path] = []
    if args.out:
        out = Path(args.out)
        jsonl = out.with_suffix(".jsonl")
        _refuse_overwrite(jsonl, args.force)
        with open(jsonl, "w", encoding="utf-8") as fh:
            for r in results:
                fh.write(json.dumps(r, ensure_ascii=False) + "\n")
        artifacts.append(jsonl)
        if len(results) == 1:
            artifacts += save_score_bars(results[0]["probs"], out)
        manifest = _write_manifest(
            out, "score", {"model": str(args.model), "n_texts": len(texts)},
            None, None, artifacts, t0,
        )
        artifacts.append(manifest)
    if args.json:
        for r in results:
            print(json.dumps(r))
    else:
        for r in results:
            probs_s = " ".join(f"{v:.4f}" for v in r["probs"])
            dec_s = "".join(str(v) for v in r["decisions"])
            print(f"[{dec_s}]  {probs_s}  {r['text'][:60]!r}")
        if artifacts:
            print(f"wrote {', '.join(str(a) for a in artifacts)}")
    return 0


def cmd_bench(args) -> int:
    t0 = time.perf_counter()
    kinds = [k.strip() for k in args.models.split(",") if k.strip()]
    for k in kinds:
        if k not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {k!r}; expected one of {MODEL_KINDS}")
    items = load_dataset(_resolve_input(args.data))
    config = _load_config_dict(args.config)
    unknown = set(config) - set(MODEL_KINDS)
    if unknown:
        raise ConfigError(f"bench config must be keyed by model kind; unknown: {sorted(unknown)}")
    seed = args.seed if args.seed is not None else 0
    rows = [
        benchmark(k, items, config=config.get(k), repetitions=args.repetitions, seed=seed)
        for k in kinds
    ]
    human = render_table(
        ["model", "train s (median)", "inference s/1k (median)"],
        [[r["model_kind"], f"{r['train_seconds']:.4f}",
          f"{r['inference_seconds_per_1k']:.4f}"] for r in rows],
    )
    human += f"\nmachine: {rows[0]['machine']}" if rows else ""
    payload = {"results": rows}
    if args.out:
        out = Path(args.out)
        json_path = out.with_suffix(".json")
        _refuse_overwrite(json_path, args.force)
        json_path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
        artifacts = [json_path] + save_timings(rows, out)
        manifest = _write_manifest(
            out, "bench",
            {"models": kinds, "repetitions": args.repetitions, "config": config,
             "data": str(args.data)},
            seed, rows[0]["dataset_fingerprint"] if rows else None, artifacts, t0,
        )
        payload["manifest"] = str(manifest)
        human += f"\nwrote {', '.join(str(a) for a in artifacts)}"
    _emit(args, human, payload)
    return 0


def cmd_stats(args) -> int:
    t0 = time.perf_counter()
    fixture = Path(args.fixture) if args.fixture else FIXTURE_PATH
    if not fixture.exists():
        raise ValidationError(f"fixture file {fixture} does not exist")
    columns = load_accuracy_fixture(fixture)
    if args.baseline not in columns:
        raise ValidationError(
            f"baseline {args.baseline!r} not in fixture columns {sorted(columns)}"
        )
    reports = reports_from_fixture(fixture)
    table = compare_models(reports, args.baseline)

    names = list(columns)
    acc_rows = []
    for i, _ in enumerate(ASPECT_NAMES):
        acc_rows.append([str(i + 1)] + [f"{columns[n][i]:.2f}" for n in names])
    means_sds = {n: mean_sd(columns[n]) for n in names}
    acc_rows.append(["mean"] + [f"{means_sds[n][0]:.2f}" for n in names])
    acc_rows.append(["sd"] + [f"{means_sds[n][1]:.2f}" for n in names])
    human = render_table(["aspect"] + names, acc_rows)
    human += f"\n\npaired one-tailed t-tests vs {args.baseline} (significant at p < {table.significance_level}):\n"
    test_rows = []
    for r in table.rows:
        flag = "significant" if r.significant else ("" if r.significant is None else "n.s.")
        test_rows.append([
            f"{args.baseline} vs {r.model_name}",
            "-" if r.t is None else f"{r.t:.3f}",
            "-" if r.p is None else f"{r.p:.4f}",
            r.error or flag,
        ])
    human += render_table(["comparison", "t", "p", "verdict"], test_rows)

    payload = {"columns": columns, "comparison": table.to_json()}
    if args.out:
        out = Path(args.out)
        json_path = Path(str(out) + ".stats.json")
        _refuse_overwrite(json_path, args.force)
        json_path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
        artifacts = [json_path] + save_comparison(columns, table, out)
        manifest = _write_manifest(
            out, "stats", {"fixture": str(fixture), "baseline": args.baseline},
            None, None, artifacts, t0,
        )
        payload["manifest"] = str(manifest)
        human += f"\nwrote {', '.join(str(a) for a in artifacts)}"
    _emit(args, human, payload)
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rubricnet",
        description="Multi-aspect scoring of short written responses.",
    )
    parser.add_argument("--version", action="version", version=f"rubricnet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--json", action="store_true", help="machine-readable output")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")

    p = sub.add_parser("synth", help="generate a synthetic rubric-aligned dataset")
    p.add_argument("--spec", default=None, help="synthetic spec JSON file")
    p.add_argument("--n", type=int, default=None, help="number of responses")
    p.add_argument("--out", required=True, help="output JSONL path")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--model", required=True, choices=MODEL_KINDS)
    p.add_argument("--data", required=True, help="JSONL dataset")
    p.add_argument("--out", required=True, help="output model file")
    p.add_argument(
        "--split", default="auto", choices=("auto", "shallow", "deep", "none"),
        help="auto = deep (60/15/15) for hnn/mlp, shallow (80/20) for nb/logreg",
    )
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model file on a labeled dataset")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--data", required=True, help="JSONL dataset")
    p.add_argument("--out", default=None, help="artifact prefix (json/csv/png)")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("score", help="score raw response text(s)")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--text", default=None, help="one response text")
    p.add_argument("--in", dest="infile", default=None, help="file with one response per line")
    p.add_argument("--out", default=None, help="artifact prefix (jsonl / png)")
    common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("bench", help="benchmark training and inference wall-clock")
    p.add_argument("--models", required=True, help="comma-separated model kinds")
    p.add_argument("--data", required=True, help="JSONL dataset")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--out", default=None, help="artifact prefix (json/csv/png)")
    common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("stats", help="model-comparison statistics from an accuracy fixture")
    p.add_argument("--fixture", default=None, help=f"accuracy fixture (default: bundled)")
    p.add_argument("--baseline", default="HNN", help="baseline column name")
    p.add_argument("--out", default=None, help="artifact prefix (json/csv/png)")
    common(p)
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RubricnetError as exc:
        print(f"error:{exc.category}: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error:io: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"error:parse: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error:io: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
