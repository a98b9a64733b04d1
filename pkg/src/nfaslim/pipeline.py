"""Folder-level pruning: one independent task per automaton file plus a
corpus summary.

Per file ``<stem>`` the output directory receives::

    <stem>.transitions.csv / <stem>.nodes.csv                 original, as CSV
    <stem>.pruned.transitions.csv / <stem>.pruned.nodes.csv   pruned, as CSV
    <stem>.pruned.anml                                        pruned, as ANML
    <stem>.model.json                                         the classifier
    <stem>.report.json                                        estimate + prune report

and the corpus gets ``summary.json`` and ``summary.csv``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import ScoredNfa
from .features import TrainingSet, extract_features, label_dataset
from .forest import (ConstantModel, ThresholdModel, accuracy, cross_validate, train_forest,
                     train_test_split)
from .formats import emit_anml, from_csv, parse_anml, to_csv
from .pruning import EstimateReport, PruneConfig, PruneReport, prune, threshold_estimate

log = logging.getLogger(__name__)

CSV_SUFFIX = ".transitions.csv"
NODES_SUFFIX = ".nodes.csv"

SUMMARY_FIELDS = ["file", "size", "transitions_before", "estimated_kept", "actual_kept",
                  "transitions_after", "estimated_ratio", "prune_ratio",
                  "avg_transitions_before", "avg_transitions_after", "nodes_after",
                  "model_accuracy", "wall_time_ms"]


@dataclass
class PipelineResult:
    reports: list[tuple[EstimateReport, PruneReport]] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.reports)

    def __len__(self) -> int:
        return len(self.reports)


def discover_inputs(input_dir) -> list[tuple[str, Path]]:
    """``(stem, path)`` for every ``.anml`` file and every transitions CSV,
    sorted by stem so results do not depend on directory order."""
    found: dict[str, Path] = {}
    dupes = []
    for path in sorted(Path(input_dir).iterdir()):
        if not path.is_file():
            continue
        name = path.name
        if name.endswith(".anml"):
            stem = name[:-len(".anml")]
        elif name.endswith(CSV_SUFFIX):
            stem = name[:-len(CSV_SUFFIX)]
        else:
            continue
        if stem in found:
            dupes.append((stem, path))
        else:
            found[stem] = path
    return sorted(found.items()) + dupes


def load_automaton(path: Path, stem: str) -> ScoredNfa:
    if path.name.endswith(".anml"):
        return parse_anml(path.read_bytes())
    nodes = path.with_name(stem + NODES_SUFFIX)
    if not nodes.exists():
        raise FileNotFoundError(f"{path.name} has no companion {nodes.name}")
    return from_csv(path.read_text(encoding="utf-8"), nodes.read_text(encoding="utf-8"), id=stem)


def _cap(D: TrainingSet, n: int | None, seed: int) -> TrainingSet:
    """Stratified subsample of at most ``n`` rows."""
    if n is None or len(D) <= n:
        return D
    _, keep = train_test_split(D, 1.0 - n / len(D), seed)
    return keep


def _fit(D: TrainingSet, cfg: PruneConfig):
    """Train on a split of ``D``; returns (model, holdout accuracy, cv accuracy, folds)."""
    if cfg.oracle_only:
        return ThresholdModel(cfg.theta, cfg.mask), None, 1.0, []
    if len(D) == 0:
        return ConstantModel(1, cfg.mask), None, None, []
    seed = cfg.rf.seed
    if len(D) >= 2:
        train, holdout = train_test_split(D, cfg.train_fraction, seed)
    else:
        train, holdout = D, D.subset(np.zeros(0, dtype=np.int64))
    model = train_forest(_cap(train, cfg.train_max_samples, seed), cfg.rf)
    hold = accuracy(model, holdout) if len(holdout) else None
    cv_set = _cap(D, cfg.cv_max_samples, seed)
    if len(cv_set) >= cfg.cv_folds:
        cv = cross_validate(cv_set, cfg.cv_folds, cfg.rf)
        return model, hold, cv.mean_accuracy, list(cv.fold_accuracies)
    return model, hold, None, []


def _dump(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="\n")


def process_file(stem: str, path: Path, out_dir: Path, cfg: PruneConfig, shared=None) -> dict:
    """Run the per-file pipeline; returns a summary row or ``{"file", "error"}``."""
    t0 = time.perf_counter()
    try:
        nfa = load_automaton(path, stem)
        t_csv, n_csv = to_csv(nfa)
        _dump(out_dir / (stem + CSV_SUFFIX), t_csv)
        _dump(out_dir / (stem + NODES_SUFFIX), n_csv)

        D = label_dataset(extract_features(nfa, cfg.mask), cfg.theta)
        estimate = threshold_estimate(nfa, cfg.theta)
        if shared is not None:
            model, hold, cv_acc, folds = shared
        else:
            model, hold, cv_acc, folds = _fit(D, cfg)
        pruned, report = prune(nfa, model, cfg, model_accuracy=cv_acc)
        report.holdout_accuracy = hold
        report.file = path.name
        report.extra = {"cv_fold_accuracies": folds, "model": type(model).__name__}

        t_csv, n_csv = to_csv(pruned)
        _dump(out_dir / f"{stem}.pruned{CSV_SUFFIX}", t_csv)
        _dump(out_dir / f"{stem}.pruned{NODES_SUFFIX}", n_csv)
        _dump(out_dir / f"{stem}.pruned.anml", emit_anml(pruned))
        _dump(out_dir / f"{stem}.model.json", model.to_json())

        report.wall_time_ms = (time.perf_counter() - t0) * 1e3 if cfg.record_timing else None
        doc = {"estimate": asdict(estimate), "report": report.to_dict()}
        _dump(out_dir / f"{stem}.report.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
        log.info("%s: %d -> %d transitions", path.name, report.transitions_before,
                 report.transitions_after)
        return {"file": path.name, "estimate": estimate, "report": report}
    except Exception as exc:  # isolate per-file failures
        log.warning("%s: %s", path.name, exc)
        return {"file": path.name, "error": f"{type(exc).__name__}: {exc}"}


def _row(estimate: EstimateReport, r: PruneReport) -> dict:
    return {"file": r.file, "size": r.nodes_before, "transitions_before": r.transitions_before,
            "estimated_kept": estimate.estimated_kept_transitions,
            "actual_kept": r.classifier_kept, "transitions_after": r.transitions_after,
            "estimated_ratio": estimate.estimated_ratio, "prune_ratio": r.prune_ratio,
            "avg_transitions_before": r.avg_transitions_before,
            "avg_transitions_after": r.avg_transitions_after, "nodes_after": r.nodes_after,
            "model_accuracy": r.model_accuracy, "wall_time_ms": r.wall_time_ms}


def _mean(vals):
    vals = [v for v in vals if v is not None]
    return float(np.mean(vals)) if vals else None


def summarize(rows: list[dict], errors: list[dict], cfg: PruneConfig) -> dict:
    per_size = []
    for size in sorted({r["size"] for r in rows}):
        grp = [r for r in rows if r["size"] == size]
        per_size.append({"size": size, "files": len(grp), **{
            k: _mean([r[k] for r in grp]) for k in
            ("transitions_before", "estimated_kept", "actual_kept", "transitions_after",
             "prune_ratio", "avg_transitions_before", "avg_transitions_after", "wall_time_ms")}})
    return {"theta": cfg.theta, "mask": list(cfg.mask), "oracle_only": cfg.oracle_only,
            "shared_model": cfg.shared_model, "files": rows, "errors": errors,
            "per_size": per_size}


def summary_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, SUMMARY_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: "" if r[k] is None else r[k] for k in SUMMARY_FIELDS})
    return buf.getvalue()


def _shared_fit(inputs, cfg: PruneConfig):
    parts = []
    for stem, path in inputs:
        try:
            parts.append(label_dataset(extract_features(load_automaton(path, stem), cfg.mask),
                                       cfg.theta))
        except Exception:  # reported again by the per-file pass
            continue
    if not parts:
        return None
    return _fit(TrainingSet.concat(parts), cfg)


def run_pipeline(input_dir, output_dir, cfg: PruneConfig, jobs: int | None = None
                 ) -> PipelineResult:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    inputs = discover_inputs(input_dir)
    seen: set[str] = set()
    tasks, errors = [], []
    for stem, path in inputs:
        if stem in seen:
            errors.append({"file": path.name, "error": f"another input already uses stem {stem!r}"})
        else:
            seen.add(stem)
            tasks.append((stem, path))

    shared = _shared_fit(tasks, cfg) if cfg.shared_model and tasks else None
    jobs = jobs or os.cpu_count() or 1
    args = [(stem, path, out, cfg, shared) for stem, path in tasks]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(args))) as ex:
            results = list(ex.map(process_file, *zip(*args)))
    else:
        results = [process_file(*a) for a in args]

    result = PipelineResult()
    for res in results:
        if "error" in res:
            errors.append(res)
        else:
            result.reports.append((res["estimate"], res["report"]))
    errors.sort(key=lambda e: e["file"])
    rows = [_row(e, r) for e, r in result.reports]
    result.errors = errors
    result.summary = summarize(rows, errors, cfg)
    _dump(out / "summary.json", json.dumps(result.summary, indent=2, sort_keys=True) + "\n")
    _dump(out / "summary.csv", summary_csv(rows))
    return result
