"""Model-as-judge scoring protocols and the statistics used to check them
against human scores.

Two protocols with different scales, enforced separately: the pairwise
comparison scores six metrics (TAA, LPS, CTAE, CPYQ, BIS, AQS) on 0-5, and
the six-way comparison scores five metrics (LPC, EKI, LAY, TYP, TRA) on 1-5.
Payload parsing is tolerant of surrounding prose (first balanced brace block)
and then validates strictly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .domain import EVAL_SUPERVISOR, AgentRole, ImageRef
from .errors import (
    DegenerateInput,
    LengthMismatch,
    NoPayloadFound,
    RangeError,
    SchemaError,
)
from .gateway import ChatTurn, ModelGateway, UsageEvent
from .loop import extract_json_object
from .prompts import render

PAIRWISE_METRICS: tuple[str, ...] = ("TAA", "LPS", "CTAE", "CPYQ", "BIS", "AQS")
SIXWAY_METRICS: tuple[str, ...] = ("LPC", "EKI", "LAY", "TYP", "TRA")

PAIRWISE_RANGE = (0, 5)
SIXWAY_RANGE = (1, 5)
SIXWAY_IMAGE_COUNT = 6


@dataclass(frozen=True)
class PairMetricScore:
    image_1_score: int
    image_1_reason: str
    image_2_score: int
    image_2_reason: str


@dataclass(frozen=True)
class PairReport:
    """Pairwise comparison: all six metrics, each with both images scored 0-5."""

    metrics: Mapping[str, PairMetricScore]

    def to_dict(self) -> dict:
        return {
            name: {
                "image_1_reason": s.image_1_reason,
                "image_1_score": s.image_1_score,
                "image_2_reason": s.image_2_reason,
                "image_2_score": s.image_2_score,
            }
            for name, s in sorted(self.metrics.items())
        }


@dataclass(frozen=True)
class SixWayScore:
    score: int
    reason: str


@dataclass(frozen=True)
class SixWayReport:
    """Six-way comparison: five metrics x six images, each scored 1-5."""

    metrics: Mapping[str, Mapping[int, SixWayScore]]

    def to_dict(self) -> dict:
        return {
            name: {
                str(i): {"reason": s.reason, "score": s.score}
                for i, s in sorted(cells.items())
            }
            for name, cells in sorted(self.metrics.items())
        }


def _check_int_score(value, low: int, high: int, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{where}: score must be an integer, got {value!r}")
    if not low <= value <= high:
        raise RangeError(f"{where}: score {value} outside {low}-{high}")
    return value


def _check_reason(value, where: str) -> str:
    if not isinstance(value, str):
        raise SchemaError(f"{where}: reason must be a string, got {value!r}")
    return value  # empty reasons are accepted


def _validate_pairwise(payload: dict) -> PairReport:
    low, high = PAIRWISE_RANGE
    metrics: dict[str, PairMetricScore] = {}
    for name in PAIRWISE_METRICS:
        if name not in payload:
            raise SchemaError(f"missing metric key {name!r}")
        cell = payload[name]
        if not isinstance(cell, dict):
            raise SchemaError(f"{name}: expected an object, got {cell!r}")
        for field_name in ("image_1_score", "image_2_score", "image_1_reason", "image_2_reason"):
            if field_name not in cell:
                raise SchemaError(f"{name}: missing field {field_name!r}")
        metrics[name] = PairMetricScore(
            image_1_score=_check_int_score(cell["image_1_score"], low, high, name),
            image_1_reason=_check_reason(cell["image_1_reason"], name),
            image_2_score=_check_int_score(cell["image_2_score"], low, high, name),
            image_2_reason=_check_reason(cell["image_2_reason"], name),
        )
    extra = set(payload) - set(PAIRWISE_METRICS)
    if extra:
        raise SchemaError(f"unexpected metric keys {sorted(extra)}")
    return PairReport(metrics=metrics)


def _validate_six_way(payload: dict) -> SixWayReport:
    low, high = SIXWAY_RANGE
    metrics: dict[str, dict[int, SixWayScore]] = {}
    for name in SIXWAY_METRICS:
        if name not in payload:
            raise SchemaError(f"missing metric key {name!r}")
        cell = payload[name]
        if not isinstance(cell, dict):
            raise SchemaError(f"{name}: expected an object, got {cell!r}")
        images: dict[int, SixWayScore] = {}
        for index in range(1, SIXWAY_IMAGE_COUNT + 1):
            key = str(index)
            if key not in cell:
                raise SchemaError(f"{name}: missing image key {key!r}")
            entry = cell[key]
            if not isinstance(entry, dict) or "score" not in entry or "reason" not in entry:
                raise SchemaError(f"{name}[{key}]: expected score and reason")
            images[index] = SixWayScore(
                score=_check_int_score(entry["score"], low, high, f"{name}[{key}]"),
                reason=_check_reason(entry["reason"], f"{name}[{key}]"),
            )
        extra_images = set(cell) - {str(i) for i in range(1, SIXWAY_IMAGE_COUNT + 1)}
        if extra_images:
            raise SchemaError(f"{name}: unexpected image keys {sorted(extra_images)}")
        metrics[name] = images
    extra = set(payload) - set(SIXWAY_METRICS)
    if extra:
        raise SchemaError(f"unexpected metric keys {sorted(extra)}")
    return SixWayReport(metrics=metrics)


def parse_metric_payload(text: str, schema: str):
    """Extract the first balanced brace block and validate it strictly.

    ``schema`` is ``"pairwise"`` or ``"six_way"``.
    """
    payload = extract_json_object(text)
    if payload is None:
        raise NoPayloadFound("no JSON object found in model response")
    if schema == "pairwise":
        return _validate_pairwise(payload)
    if schema == "six_way":
        return _validate_six_way(payload)
    raise ValueError(f"unknown schema {schema!r}")


def evaluate_pair(
    image_a: ImageRef,
    image_b: ImageRef,
    gateway: ModelGateway,
    *,
    actor: AgentRole = EVAL_SUPERVISOR,
) -> tuple[PairReport, UsageEvent]:
    """Run the pairwise protocol over two images of one campaign."""
    text, usage = gateway.complete(
        actor, [ChatTurn.user(render("pairwise_eval", {}), (image_a, image_b))]
    )
    return parse_metric_payload(text, "pairwise"), usage


def evaluate_six_way(
    images: Sequence[ImageRef],
    gateway: ModelGateway,
    *,
    actor: AgentRole = EVAL_SUPERVISOR,
) -> tuple[SixWayReport, UsageEvent]:
    """Run the six-way protocol; requires exactly six images."""
    if len(images) != SIXWAY_IMAGE_COUNT:
        raise ValueError(f"six-way evaluation requires exactly {SIXWAY_IMAGE_COUNT} images")
    text, usage = gateway.complete(
        actor, [ChatTurn.user(render("six_way_eval", {}), tuple(images))]
    )
    return parse_metric_payload(text, "six_way"), usage


# -- rank statistics -------------------------------------------------------


def _average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks; ties get the average (fractional) rank of their block."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j < len(order) and values[order[j]] == values[order[i]]:
            j += 1
        average = (i + j + 1) / 2  # positions i..j-1 hold ranks i+1..j
        for position in range(i, j):
            ranks[order[position]] = average
        i = j
    return ranks


def spearman(a: Sequence[float], b: Sequence[float]) -> float:
    """Rank correlation with average ranks for ties.

    Computed as the product-moment correlation of the two rank vectors,
    which reduces to the classic rank-difference formula when no ties exist.
    """
    if len(a) != len(b):
        raise LengthMismatch(f"length {len(a)} vs {len(b)}")
    if len(a) < 2:
        raise ValueError("need at least 2 observations")
    ranks_a = _average_ranks(a)
    ranks_b = _average_ranks(b)
    n = len(a)
    mean_a = sum(ranks_a) / n
    mean_b = sum(ranks_b) / n
    var_a = sum((r - mean_a) ** 2 for r in ranks_a)
    var_b = sum((r - mean_b) ** 2 for r in ranks_b)
    if var_a == 0 or var_b == 0:
        raise DegenerateInput("constant rank vector has no defined correlation")
    cov = sum((ra - mean_a) * (rb - mean_b) for ra, rb in zip(ranks_a, ranks_b))
    return cov / math.sqrt(var_a * var_b)


@dataclass(frozen=True)
class MetricStats:
    mean: float
    std: float
    n: int

    def display(self) -> str:
        return f"{self.mean:.2f} ({self.std:.2f})"


@dataclass(frozen=True)
class ScoreTable:
    """Per-method, per-metric mean/std/count; population standard deviation."""

    rows: Mapping[str, Mapping[str, MetricStats]]

    def to_dict(self) -> dict:
        return {
            method: {
                metric: {
                    "mean": round(stats.mean, 10),
                    "mean_display": f"{stats.mean:.2f}",
                    "n": stats.n,
                    "std": round(stats.std, 10),
                    "std_display": f"{stats.std:.2f}",
                }
                for metric, stats in sorted(metrics.items())
            }
            for method, metrics in sorted(self.rows.items())
        }


def aggregate(scores: Iterable[tuple[str, str, float]]) -> ScoreTable:
    """Group (method, metric, score) rows into a score table."""
    groups: dict[str, dict[str, list[float]]] = {}
    for method, metric, score in scores:
        groups.setdefault(method, {}).setdefault(metric, []).append(float(score))
    if not groups:
        raise ValueError("aggregate requires at least one score")
    rows: dict[str, dict[str, MetricStats]] = {}
    for method, metrics in groups.items():
        rows[method] = {}
        for metric, values in metrics.items():
            n = len(values)
            mean = sum(values) / n
            std = math.sqrt(sum((v - mean) ** 2 for v in values) / n)
            rows[method][metric] = MetricStats(mean=mean, std=std, n=n)
    return ScoreTable(rows=rows)


# -- human-score ingestion ----------------------------------------------------


def read_scores_csv(path: str | Path) -> list[tuple[str, str, str, float]]:
    """Read (method, metric, rater, score) rows; header row required."""
    rows: list[tuple[str, str, str, float]] = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"method", "metric", "rater", "score"}
        if reader.fieldnames is None or not required.issubset(set(reader.fieldnames)):
            raise SchemaError(
                f"{path}: CSV must have header columns method,metric,rater,score"
            )
        for record in reader:
            rows.append(
                (
                    record["method"].strip(),
                    record["metric"].strip(),
                    record["rater"].strip(),
                    float(record["score"]),
                )
            )
    return rows


def mean_scores_by_key(
    rows: Iterable[tuple[str, str, str, float]],
) -> dict[tuple[str, str], float]:
    """Mean score per (method, metric) over raters."""
    sums: dict[tuple[str, str], list[float]] = {}
    for method, metric, _rater, score in rows:
        sums.setdefault((method, metric), []).append(score)
    return {key: sum(vals) / len(vals) for key, vals in sums.items()}


def spearman_between_csvs(path_a: str | Path, path_b: str | Path) -> tuple[float, list]:
    """Spearman correlation between the per-(method, metric) means of two
    score files, aligned on their common keys in sorted order."""
    means_a = mean_scores_by_key(read_scores_csv(path_a))
    means_b = mean_scores_by_key(read_scores_csv(path_b))
    keys = sorted(set(means_a) & set(means_b))
    if len(keys) < 2:
        raise ValueError("need at least 2 common (method, metric) pairs")
    rho = spearman([means_a[k] for k in keys], [means_b[k] for k in keys])
    pairs = [
        {"method": m, "metric": x, "score_a": means_a[(m, x)], "score_b": means_b[(m, x)]}
        for m, x in keys
    ]
    return rho, pairs
