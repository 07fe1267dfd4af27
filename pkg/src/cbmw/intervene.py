"""Bottleneck interventions.

An intervention assigns target values to one or more "main" concepts in the
bottleneck a trained f consumes. Independent mode substitutes the targets and
touches nothing else. Correlated mode additionally shifts every other concept
by the correlation-weighted sum of the main deltas,

    c_j <- clip01(c_j + sum_q Corr(j, q) * (target_q - c_q_pre)),

using pre-intervention values for all deltas, then writes the main targets
exactly. With an all-zero off-diagonal correlation the two modes coincide.

Targets come from ground truth, train-split statistics (median or mean in
scaled space), or a custom value in [0, 1]. Correlations are the train-split
Pearson matrix over ground-truth concepts; by default propagation reaches
every non-main bottleneck column, including observed text concepts, which can
be restricted to tabular ones with propagate="tabular".
"""

from __future__ import annotations

import numpy as np

from .cbm import CbmModel, predict_split
from .metrics import correction_report, evaluate_predictions, select_top_concepts
from .preprocess import PreprocessStats
from .schema import Cohort

MODES = ("independent", "correlated")


def _clip01(v):
    return np.clip(v, 0.0, 1.0)


def independent_edit(b: np.ndarray, targets: dict[int, np.ndarray | float]) -> np.ndarray:
    out = np.array(b, dtype=np.float64, copy=True)
    for col, t in targets.items():
        out[:, col] = t
    return out


def correlated_edit(b: np.ndarray, targets: dict[int, np.ndarray | float],
                    corr: np.ndarray, propagate_cols=None) -> np.ndarray:
    """Targets are {column: value or per-row vector}; corr must be aligned
    with b's columns. propagate_cols optionally restricts which non-main
    columns receive correlation shifts."""
    b = np.asarray(b, dtype=np.float64)
    out = np.array(b, copy=True)
    mains = list(targets)
    deltas = {q: np.asarray(targets[q], dtype=np.float64) - b[:, q] for q in mains}
    cols = range(b.shape[1]) if propagate_cols is None else propagate_cols
    for j in cols:
        if j in targets:
            continue
        shift = np.zeros(b.shape[0])
        for q in mains:
            shift = shift + corr[j, q] * deltas[q]
        out[:, j] = _clip01(b[:, j] + shift)
    for q in mains:
        out[:, q] = targets[q]
    return out


def resolve_targets(value_spec, concept: str, records, stats: PreprocessStats) -> np.ndarray:
    """Per-record target vector for one concept.

    value_spec: "true" (ground truth per record), "median" / "mean"
    (train statistics), or a number in [0, 1].
    """
    n = len(records)
    if value_spec == "true":
        missing = [r.id for r in records if concept not in r.c_true]
        if missing:
            raise ValueError(
                f"no ground truth for concept {concept} on records {missing[:5]}")
        return np.array([r.c_true[concept] for r in records], dtype=np.float64)
    if value_spec == "median":
        return np.full(n, stats.concept_median[concept])
    if value_spec == "mean":
        return np.full(n, stats.concept_mean[concept])
    v = float(value_spec)
    if not (0.0 <= v <= 1.0):
        raise ValueError(f"custom intervention value must be in [0, 1], got {v}")
    return np.full(n, v)


def edit_bottleneck(model: CbmModel, stats: PreprocessStats, b: np.ndarray,
                    assignments: dict[str, np.ndarray | float], mode: str,
                    propagate: str = "all") -> np.ndarray:
    """Name-level edit of a bottleneck matrix aligned with model.concept_names."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if propagate not in ("all", "tabular"):
        raise ValueError(f"propagate must be 'all' or 'tabular', got {propagate!r}")
    names = model.concept_names
    unknown = [n for n in assignments if n not in names]
    if unknown:
        raise KeyError(f"concepts not in the bottleneck: {unknown}")
    targets = {names.index(n): v for n, v in assignments.items()}
    if mode == "independent":
        return independent_edit(b, targets)
    corr = stats.corr_submatrix(names)
    cols = None if propagate == "all" else range(model.n_tabular)
    return correlated_edit(b, targets, corr, cols)


def run_intervention(model: CbmModel, cohort: Cohort, stats: PreprocessStats,
                     concepts: list[str], mode: str, value_spec="true",
                     split: str = "test", propagate: str = "all") -> dict:
    """Intervene on a whole split and report pre/post metrics and corrections."""
    records = cohort.split_records(split)
    y = cohort.labels(split)
    probs_pre, b_pre = predict_split(model, cohort, split)
    assignments = {c: resolve_targets(value_spec, c, records, stats)
                   for c in concepts}
    b_post = edit_bottleneck(model, stats, b_pre, assignments, mode, propagate)
    probs_post = model.predict_from_bottleneck(b_post)
    report = {
        "split": split, "mode": mode, "concepts": list(concepts),
        "value_spec": value_spec if isinstance(value_spec, str) else float(value_spec),
        "pre": evaluate_predictions(y, probs_pre),
        "post": evaluate_predictions(y, probs_post),
        "corrections": correction_report(y, probs_pre, probs_post),
    }
    return report


def per_concept_correction_scores(model: CbmModel, cohort: Cohort,
                                  stats: PreprocessStats, mode: str = "independent",
                                  value_spec="true", split: str = "validation",
                                  concepts=None) -> dict[str, int]:
    """Corrections (fn + fp fixed) from intervening on each concept alone;
    the ranking input for choosing which concepts are worth asking about."""
    names = list(concepts) if concepts is not None else list(model.tabular_names)
    scores = {}
    for name in names:
        rep = run_intervention(model, cohort, stats, [name], mode, value_spec, split)
        scores[name] = rep["corrections"]["fn_corrected"] + \
            rep["corrections"]["fp_corrected"]
    return scores


def top_concepts_by_correction(model: CbmModel, cohort: Cohort,
                               stats: PreprocessStats, q: int,
                               mode: str = "independent", value_spec="true",
                               split: str = "validation") -> list[str]:
    scores = per_concept_correction_scores(model, cohort, stats, mode,
                                           value_spec, split)
    return select_top_concepts(scores, q, model.tabular_names)
