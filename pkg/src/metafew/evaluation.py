"""Run learners over fixed task sets and report mean accuracy with 95%
confidence intervals; comparison tables and report CSV I/O."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, DataError
from .ioutil import fmt_float, parallel_map, stable_rng
from .tasks import Task

Z95 = 1.96


def mean_accuracy(accuracies) -> float:
    """Correctly rounded mean, so recomputation from stored per-task values
    reproduces it bit for bit."""
    acc = [float(a) for a in accuracies]
    return math.fsum(acc) / len(acc)


def ci95_half_width(accuracies) -> float:
    """1.96 * sample standard deviation / sqrt(task count), with correctly
    rounded sums."""
    acc = [float(a) for a in accuracies]
    if len(acc) < 2:
        return 0.0
    mu = mean_accuracy(acc)
    var = math.fsum((a - mu) ** 2 for a in acc) / (len(acc) - 1)
    return Z95 * math.sqrt(var) / math.sqrt(len(acc))


@dataclass
class EvalReport:
    accuracies: np.ndarray
    learner_id: str = ""
    fingerprint: str = ""
    seed: int | None = None

    def __post_init__(self):
        self.accuracies = np.asarray(self.accuracies, dtype=np.float64)
        if self.accuracies.size and not (
                (self.accuracies >= 0).all() and (self.accuracies <= 1).all()):
            raise DataError("per-task accuracies must lie in [0, 1]")

    @property
    def task_count(self) -> int:
        return int(self.accuracies.size)

    @property
    def mean(self) -> float:
        return mean_accuracy(self.accuracies)

    @property
    def ci95(self) -> float:
        return ci95_half_width(self.accuracies)

    def interval(self) -> tuple[float, float]:
        return self.mean - self.ci95, self.mean + self.ci95

    def summary(self) -> str:
        return (f"{self.learner_id or 'learner'}: mean accuracy "
                f"{self.mean:.4f} +- {self.ci95:.4f} over {self.task_count} tasks")


def task_set_fingerprint(tasks: list[Task]) -> str:
    """Digest of task identities (indices, permutations, sizes); learners
    evaluated on identical task sets share it regardless of input_repr."""
    h = hashlib.sha256()
    for t in tasks:
        h.update(np.asarray([t.n_way, t.k_shot, t.q_queries], dtype="<i8").tobytes())
        h.update(np.ascontiguousarray(t.train_indices, dtype="<i8").tobytes())
        h.update(np.ascontiguousarray(t.query_indices, dtype="<i8").tobytes())
        h.update(np.ascontiguousarray(t.label_perm, dtype="<i8").tobytes())
    return h.hexdigest()[:16]


def evaluate(predict_fn: Callable[[Task, np.random.Generator], np.ndarray],
             tasks: list[Task], learner_id: str = "", fingerprint: str = "",
             seed: int = 0, workers: int = 1) -> EvalReport:
    """Per-task accuracy of predict_fn over a fixed task set.

    The per-task generator is keyed to (seed, task.task_seed), so stochastic
    learners stay deterministic and invariant to task order.
    """
    tasks = list(tasks)
    if not tasks:
        raise ConfigError("no tasks to evaluate")
    if not fingerprint:
        fingerprint = task_set_fingerprint(tasks)

    def run_one(task: Task) -> float:
        rng = stable_rng(seed, task.task_seed if task.task_seed is not None else 0)
        pred = np.asarray(predict_fn(task, rng))
        want = task.query_labels_int()
        if pred.shape != want.shape:
            raise DataError(f"learner returned {pred.shape} predictions for "
                            f"{want.shape} queries")
        return float((pred == want).mean())

    acc = np.array(parallel_map(run_one, tasks, workers))
    return EvalReport(acc, learner_id=learner_id, fingerprint=fingerprint, seed=seed)


# -- comparison -------------------------------------------------------------------

@dataclass
class ComparisonRow:
    learner_id: str
    mean: float
    ci95: float
    task_count: int
    overlaps_with: list[str] = field(default_factory=list)


def compare(reports: list[EvalReport]) -> list[ComparisonRow]:
    """Order reports by mean accuracy and flag pairs whose 95% intervals
    overlap; reports must share the task-generator fingerprint."""
    if not reports:
        raise ConfigError("no reports to compare")
    prints = {r.fingerprint for r in reports}
    if len(prints) > 1:
        raise ConfigError(f"incomparable reports: fingerprints {sorted(prints)}")
    ordered = sorted(reports, key=lambda r: r.mean, reverse=True)
    rows = []
    for r in ordered:
        lo, hi = r.interval()
        overlaps = [o.learner_id for o in ordered
                    if o is not r and o.interval()[0] <= hi and lo <= o.interval()[1]]
        rows.append(ComparisonRow(r.learner_id, r.mean, r.ci95, r.task_count, overlaps))
    return rows


def format_comparison(rows: list[ComparisonRow]) -> str:
    width = max([len(r.learner_id) for r in rows] + [7])
    lines = [f"{'learner':<{width}}  {'mean':>8}  {'ci95':>8}  tasks  overlapping CIs"]
    for r in rows:
        lines.append(f"{r.learner_id:<{width}}  {r.mean:>8.4f}  {r.ci95:>8.4f}  "
                     f"{r.task_count:>5}  {';'.join(r.overlaps_with) or '-'}")
    return "\n".join(lines)


def write_comparison_csv(rows: list[ComparisonRow], path,
                         config_text: str | None = None) -> None:
    with open(path, "w") as fh:
        if config_text:
            for line in config_text.splitlines():
                fh.write(f"# {line}\n")
        fh.write("learner,mean,ci95,tasks,overlaps_with\n")
        for r in rows:
            fh.write(f"{r.learner_id},{fmt_float(r.mean)},{fmt_float(r.ci95)},"
                     f"{r.task_count},{';'.join(r.overlaps_with)}\n")


# -- report CSV --------------------------------------------------------------------

def write_report_csv(report: EvalReport, path, config_text: str | None = None) -> None:
    """One row per task plus a summary block; floats keep full precision so
    the summary can be recomputed exactly from the rows."""
    with open(path, "w") as fh:
        if config_text:
            for line in config_text.splitlines():
                fh.write(f"# {line}\n")
        fh.write(f"# learner={report.learner_id}\n")
        fh.write(f"# fingerprint={report.fingerprint}\n")
        fh.write(f"# seed={'' if report.seed is None else report.seed}\n")
        fh.write("task_index,accuracy\n")
        for i, a in enumerate(report.accuracies):
            fh.write(f"{i},{fmt_float(a)}\n")
        fh.write(f"# summary: tasks={report.task_count} mean={fmt_float(report.mean)} "
                 f"ci95={fmt_float(report.ci95)}\n")


def read_report_csv(path) -> tuple[EvalReport, dict[str, str]]:
    """Rebuild a report from its CSV; returns the report and the parsed
    summary fields for cross-checking."""
    meta: dict[str, str] = {}
    summary: dict[str, str] = {}
    acc = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("summary:"):
                    for item in body[len("summary:"):].split():
                        key, _, value = item.partition("=")
                        summary[key] = value
                else:
                    key, _, value = body.partition("=")
                    meta[key] = value
                continue
            if line.startswith("task_index"):
                continue
            _, _, value = line.partition(",")
            acc.append(float(value))
    report = EvalReport(np.array(acc), learner_id=meta.get("learner", ""),
                        fingerprint=meta.get("fingerprint", ""),
                        seed=int(meta["seed"]) if meta.get("seed") else None)
    return report, summary
