"""Scoring metrics, summary statistics, the paired one-tailed t-test used
for model comparison, Cohen's kappa, and the wall-clock benchmark harness.

The t-test p-value kernel evaluates the Student-t upper tail through the
regularized incomplete beta function (continued-fraction form), accurate
to well under 1e-8 for df <= 1000.
"""

from __future__ import annotations

import hashlib
import json
import math
import platform
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import N_ASPECTS
from .corpus import LabeledResponse
from .errors import ContractError, DegenerateTestError, ParseError, ValidationError

SIGNIFICANCE_LEVEL = 0.10

# Per-aspect accuracy (percent) of the five reference model families on the
# original 5-aspect task; shipped as the default input to the `stats`
# command. BERT and ANN are fixture-only columns (those models are not
# implemented here).
FIXTURE_PATH = Path(__file__).parent / "fixtures" / "reported_accuracy.json"


def threshold(scores) -> np.ndarray:
    """Binary decisions from aspect probabilities; 0.5 rounds up to 1."""
    return (np.asarray(scores, dtype=np.float64) >= 0.5).astype(np.int64)


def per_aspect_accuracy(preds, labels) -> np.ndarray:
    """Fraction of exact matches per aspect over a test set.

    ``preds`` and ``labels`` are (n, N_ASPECTS) arrays of binary values.
    """
    p = np.asarray(preds)
    y = np.asarray(labels)
    if p.shape != y.shape or p.ndim != 2 or p.shape[1] != N_ASPECTS:
        raise ContractError(f"prediction/label shape mismatch: {p.shape} vs {y.shape}")
    if p.shape[0] == 0:
        raise ContractError("accuracy over an empty test set is undefined")
    return (p == y).mean(axis=0)


def mean_sd(values) -> tuple[float, float]:
    """Arithmetic mean and sample (n-1) standard deviation."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise ContractError("sample sd undefined for fewer than 2 values")
    return float(v.mean()), float(v.std(ddof=1))


# --------------------------------------------------------------------------
# Student-t tail via the regularized incomplete beta function
# --------------------------------------------------------------------------


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    max_it = 300
    eps = 3e-16
    fpmin = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_it + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ContractError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def reg_inc_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_bt = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log(1.0 - x)
    )
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def student_t_upper_tail(t: float, df: int) -> float:
    """P(T > t) for Student's t with ``df`` degrees of freedom."""
    if df < 1:
        raise ContractError(f"df must be >= 1, got {df}")
    x = df / (df + t * t)
    p = 0.5 * reg_inc_beta(df / 2.0, 0.5, x)
    return p if t >= 0 else 1.0 - p


@dataclass
class TTestResult:
    mean_diff: float
    sd_diff: float
    t: float
    df: int
    p: float  # one-tailed, upper


def paired_t_one_tailed(a, b) -> TTestResult:
    """Paired t-test for the one-tailed alternative mean(a) > mean(b)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ContractError(f"paired test needs equal-length vectors, got {a.shape} and {b.shape}")
    if a.size < 2:
        raise ContractError("paired test needs at least 2 pairs")
    d = a - b
    mean_d, sd_d = float(d.mean()), float(d.std(ddof=1))
    if sd_d == 0.0:
        raise DegenerateTestError("all paired differences are identical")
    n = d.size
    t = mean_d / (sd_d / math.sqrt(n))
    return TTestResult(
        mean_diff=mean_d, sd_diff=sd_d, t=t, df=n - 1,
        p=student_t_upper_tail(t, n - 1),
    )


def cohen_kappa(r1, r2) -> float:
    """Chance-corrected agreement between two raters over integer codes."""
    r1 = list(r1)
    r2 = list(r2)
    if len(r1) != len(r2):
        raise ContractError(f"rating lists differ in length: {len(r1)} vs {len(r2)}")
    if not r1:
        raise ContractError("kappa over zero items is undefined")
    n = len(r1)
    cats = sorted(set(r1) | set(r2))
    p_o = sum(1 for x, y in zip(r1, r2) if x == y) / n
    p_e = sum(
        (r1.count(c) / n) * (r2.count(c) / n) for c in cats
    )
    if p_e == 1.0:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


# --------------------------------------------------------------------------
# evaluation reports and model comparison
# --------------------------------------------------------------------------


def dataset_fingerprint(items: list[LabeledResponse]) -> str:
    """Content hash of a dataset, independent of on-disk formatting."""
    h = hashlib.sha256()
    for it in items:
        h.update(
            json.dumps(
                {"id": it.id, "text": it.text, "labels": list(it.labels)},
                ensure_ascii=False, sort_keys=True,
            ).encode("utf-8")
        )
        h.update(b"\n")
    return h.hexdigest()


@dataclass
class EvalReport:
    model_name: str
    per_aspect: list[float]  # accuracy per aspect, in aspect order
    mean: float
    sd: float
    dataset_fingerprint: str
    timings: dict | None = None  # {"train_seconds", "inference_seconds_per_1k"}

    def __post_init__(self):
        if len(self.per_aspect) != N_ASPECTS:
            raise ValidationError(f"report needs {N_ASPECTS} per-aspect accuracies")
        if abs(self.mean - sum(self.per_aspect) / N_ASPECTS) > 1e-12:
            raise ValidationError("report mean must equal the mean of the aspects")

    def to_json(self) -> dict:
        return {
            "model_name": self.model_name,
            "per_aspect": self.per_aspect,
            "mean": self.mean,
            "sd": self.sd,
            "dataset_fingerprint": self.dataset_fingerprint,
            "timings": self.timings,
        }


def make_report(
    model_name: str,
    per_aspect,
    fingerprint: str,
    timings: dict | None = None,
) -> EvalReport:
    acc = [float(v) for v in per_aspect]
    m, s = mean_sd(acc)
    return EvalReport(
        model_name=model_name, per_aspect=acc, mean=m, sd=s,
        dataset_fingerprint=fingerprint, timings=timings,
    )


def report_for_model(fitted, items: list[LabeledResponse]) -> EvalReport:
    """Evaluate a fitted model's thresholded predictions on a labeled set."""
    if not items:
        raise ContractError("cannot evaluate on an empty set")
    probs = fitted.predict_probs([it.text for it in items])
    preds = (probs >= 0.5).astype(np.int64)
    labels = np.array([it.labels for it in items])
    acc = per_aspect_accuracy(preds, labels)
    return make_report(fitted.kind, acc, dataset_fingerprint(items))


@dataclass
class ComparisonRow:
    model_name: str
    mean: float
    sd: float
    t: float | None
    p: float | None
    significant: bool | None
    error: str | None = None


@dataclass
class ComparisonTable:
    baseline: EvalReport
    rows: list[ComparisonRow]
    significance_level: float = SIGNIFICANCE_LEVEL

    def to_json(self) -> dict:
        return {
            "baseline": self.baseline.to_json(),
            "significance_level": self.significance_level,
            "comparisons": [
                {
                    "model_name": r.model_name,
                    "mean": r.mean,
                    "sd": r.sd,
                    "t": r.t,
                    "p": r.p,
                    "significant": r.significant,
                    "error": r.error,
                }
                for r in self.rows
            ],
        }


def compare_models(reports: list[EvalReport], baseline_name: str) -> ComparisonTable:
    """Paired one-tailed t-tests of the baseline against every other model
    over the per-aspect accuracies; flags p < significance level (strict).

    Degenerate pairs (zero-variance differences) are reported per row
    rather than aborting the whole comparison.
    """
    if len(reports) < 2:
        raise ContractError("comparison needs at least 2 reports")
    fingerprints = {r.dataset_fingerprint for r in reports}
    if len(fingerprints) > 1:
        raise ValidationError("refusing to compare reports with different dataset fingerprints")
    by_name = {r.model_name: r for r in reports}
    if baseline_name not in by_name:
        raise ValidationError(f"baseline {baseline_name!r} not among the reports")
    base = by_name[baseline_name]
    rows: list[ComparisonRow] = []
    for rep in reports:
        if rep.model_name == baseline_name:
            continue
        try:
            res = paired_t_one_tailed(base.per_aspect, rep.per_aspect)
            rows.append(
                ComparisonRow(
                    model_name=rep.model_name, mean=rep.mean, sd=rep.sd,
                    t=res.t, p=res.p, significant=res.p < SIGNIFICANCE_LEVEL,
                )
            )
        except DegenerateTestError as exc:
            rows.append(
                ComparisonRow(
                    model_name=rep.model_name, mean=rep.mean, sd=rep.sd,
                    t=None, p=None, significant=None, error=str(exc),
                )
            )
    return ComparisonTable(baseline=base, rows=rows)


def load_accuracy_fixture(path: str | Path = FIXTURE_PATH) -> dict[str, list[float]]:
    """Per-model aspect accuracies from a fixture file; validates shape."""
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict) or "models" not in obj:
        raise ValidationError(f"{path}: fixture must be an object with a 'models' map")
    models = obj["models"]
    out: dict[str, list[float]] = {}
    for name, col in models.items():
        if not isinstance(col, list) or len(col) != N_ASPECTS:
            raise ValidationError(
                f"{path}: column {name!r} must hold {N_ASPECTS} accuracies"
            )
        out[name] = [float(v) for v in col]
    return out


def reports_from_fixture(path: str | Path = FIXTURE_PATH) -> list[EvalReport]:
    columns = load_accuracy_fixture(path)
    fp = hashlib.sha256(
        json.dumps(columns, sort_keys=True).encode("utf-8")
    ).hexdigest()
    return [make_report(name, col, fp) for name, col in columns.items()]


# --------------------------------------------------------------------------
# wall-clock benchmark harness
# --------------------------------------------------------------------------


def machine_descriptor() -> str:
    return f"{platform.platform()} / python {platform.python_version()}"


def benchmark(
    model_kind: str,
    items: list[LabeledResponse],
    config: dict | None = None,
    repetitions: int = 3,
    seed: int = 0,
) -> dict:
    """Median wall-clock training time on the full set and median inference
    time per 1000 responses, over ``repetitions`` runs.

    Timing medians resist scheduler noise but still assume the process has
    the machine to itself.
    """
    from .registry import fit_model

    if repetitions < 3:
        raise ContractError(f"repetitions must be >= 3, got {repetitions}")
    if not items:
        raise ContractError("benchmark needs a non-empty dataset")
    train_times = []
    infer_times = []
    fitted = None
    texts = [it.text for it in items]
    for _ in range(repetitions):
        t0 = time.perf_counter()
        fitted, _, _ = fit_model(model_kind, items, seed=seed, config=config)
        train_times.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        fitted.predict_probs(texts)
        infer_times.append((time.perf_counter() - t0) / len(items) * 1000.0)
    return {
        "model_kind": model_kind,
        "repetitions": repetitions,
        "n_items": len(items),
        "train_seconds": float(np.median(train_times)),
        "inference_seconds_per_1k": float(np.median(infer_times)),
        "dataset_fingerprint": dataset_fingerprint(items),
        "machine": machine_descriptor(),
    }
