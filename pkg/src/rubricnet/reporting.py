"""Report rendering: aligned plain-text tables for the terminal, CSV files,
and matplotlib figures saved next to them.

matplotlib is imported lazily with the Agg backend so commands that never
render a figure do not pay for it.
"""

from __future__ import annotations

import csv
from pathlib import Path

from .evaluation import ComparisonTable, EvalReport
from .training import TrainRecord

ASPECT_NAMES = ["aspect 1", "aspect 2", "aspect 3", "aspect 4", "aspect 5"]


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def write_csv(path: str | Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def render_table(header: list[str], rows: list[list[str]]) -> str:
    """Fixed-width text table with a rule under the header."""
    widths = [
        max(len(str(header[c])), *(len(str(r[c])) for r in rows)) if rows else len(str(header[c]))
        for c in range(len(header))
    ]
    def fmt(row):
        return "  ".join(str(v).rjust(w) if i else str(v).ljust(w)
                         for i, (v, w) in enumerate(zip(row, widths)))
    lines = [fmt(header), "  ".join("-" * w for w in widths)]
    lines += [fmt(r) for r in rows]
    return "\n".join(lines)


# --------------------------------------------------------------------------
# per-command artifact writers; each returns the list of paths it created
# --------------------------------------------------------------------------


def save_eval_report(report: EvalReport, prefix: str | Path) -> list[Path]:
    prefix = Path(prefix)
    csv_path = prefix.with_suffix(".csv")
    png_path = prefix.with_suffix(".png")
    rows = [[name, f"{acc:.6f}"] for name, acc in zip(ASPECT_NAMES, report.per_aspect)]
    rows.append(["mean", f"{report.mean:.6f}"])
    rows.append(["sd", f"{report.sd:.6f}"])
    write_csv(csv_path, ["aspect", "accuracy"], rows)

    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(range(1, 6), report.per_aspect, color="#4878cf")
    ax.axhline(report.mean, color="#555555", linestyle="--", linewidth=1,
               label=f"mean {report.mean:.3f}")
    ax.set_xticks(range(1, 6))
    ax.set_xlabel("scoring aspect")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.05 if max(report.per_aspect) <= 1.0 else None)
    ax.set_title(f"{report.model_name}: per-aspect accuracy")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return [csv_path, png_path]


def save_training_curves(record: TrainRecord, prefix: str | Path) -> list[Path]:
    prefix = Path(prefix)
    csv_path = Path(str(prefix) + ".record.csv")
    png_path = Path(str(prefix) + ".loss.png")
    rows = []
    for i, e in enumerate(record.epochs, start=1):
        rows.append([
            i, f"{e.train_loss:.9f}",
            "" if e.val_loss is None else f"{e.val_loss:.9f}",
            "" if e.val_accuracy is None else f"{e.val_accuracy:.6f}",
            f"{e.seconds:.6f}",
        ])
    write_csv(csv_path, ["epoch", "train_loss", "val_loss", "val_accuracy", "seconds"], rows)

    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    xs = range(1, len(record.epochs) + 1)
    ax.plot(xs, [e.train_loss for e in record.epochs], label="train loss")
    if any(e.val_loss is not None for e in record.epochs):
        ax.plot(xs, [e.val_loss for e in record.epochs], label="validation loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean BCE")
    ax.legend()
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return [csv_path, png_path]


def save_comparison(
    columns: dict[str, list[float]], table: ComparisonTable, prefix: str | Path
) -> list[Path]:
    prefix = Path(prefix)
    acc_csv = prefix.with_suffix(".csv")
    tests_csv = Path(str(prefix) + ".tests.csv")
    png_path = prefix.with_suffix(".png")

    names = list(columns)
    rows = []
    for i, aspect in enumerate(ASPECT_NAMES):
        rows.append([aspect] + [columns[n][i] for n in names])
    write_csv(acc_csv, ["aspect"] + names, rows)

    test_rows = [
        [
            table.baseline.model_name, r.model_name,
            f"{r.mean:.6f}", f"{r.sd:.6f}",
            "" if r.t is None else f"{r.t:.6f}",
            "" if r.p is None else f"{r.p:.6f}",
            "" if r.significant is None else str(r.significant).lower(),
            r.error or "",
        ]
        for r in table.rows
    ]
    write_csv(tests_csv,
              ["baseline", "model", "mean", "sd", "t", "p", "significant", "error"],
              test_rows)

    plt = _plt()
    fig, ax = plt.subplots(figsize=(7.5, 4))
    width = 0.8 / len(names)
    for j, name in enumerate(names):
        xs = [i + j * width for i in range(5)]
        ax.bar(xs, columns[name], width=width, label=name)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(5)])
    ax.set_xticklabels([str(i + 1) for i in range(5)])
    ax.set_xlabel("scoring aspect")
    ax.set_ylabel("accuracy (%)")
    lo = min(min(v) for v in columns.values())
    ax.set_ylim(max(0.0, lo - 5.0), 100.0)
    ax.legend(ncol=len(names), fontsize=8, loc="lower right")
    ax.set_title("per-aspect accuracy by model")
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return [acc_csv, tests_csv, png_path]


def save_timings(rows: list[dict], prefix: str | Path) -> list[Path]:
    prefix = Path(prefix)
    csv_path = prefix.with_suffix(".csv")
    png_path = prefix.with_suffix(".png")
    write_csv(
        csv_path,
        ["model_kind", "train_seconds", "inference_seconds_per_1k", "repetitions",
         "n_items", "dataset_fingerprint", "machine"],
        [
            [r["model_kind"], f"{r['train_seconds']:.6f}",
             f"{r['inference_seconds_per_1k']:.6f}", r["repetitions"],
             r["n_items"], r["dataset_fingerprint"], r["machine"]]
            for r in rows
        ],
    )
    plt = _plt()
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.5))
    kinds = [r["model_kind"] for r in rows]
    axes[0].bar(kinds, [r["train_seconds"] for r in rows], color="#4878cf")
    axes[0].set_ylabel("train seconds (median)")
    axes[1].bar(kinds, [r["inference_seconds_per_1k"] for r in rows], color="#d65f5f")
    axes[1].set_ylabel("inference s / 1k responses (median)")
    for ax in axes:
        ax.set_xlabel("model")
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return [csv_path, png_path]


def save_score_bars(probs, prefix: str | Path) -> list[Path]:
    """Bar chart of one response's five aspect probabilities."""
    png_path = Path(prefix).with_suffix(".png")
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 3.2))
    colors = ["#2e8b57" if p >= 0.5 else "#b0b0b0" for p in probs]
    ax.bar(range(1, 6), probs, color=colors)
    ax.axhline(0.5, color="#555555", linestyle="--", linewidth=1)
    ax.set_xticks(range(1, 6))
    ax.set_ylim(0, 1)
    ax.set_xlabel("scoring aspect")
    ax.set_ylabel("probability")
    ax.set_title("aspect score probabilities")
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return [png_path]
