"""Cohort preprocessing: missingness pruning, median imputation, min-max scaling.

Pipeline order is fixed (drop -> impute -> scale -> stats) and every statistic
is computed on the train split only; validation/test rows are transformed with
train statistics and never contribute to them.

Feature min/max/median in ``PreprocessStats`` live in raw space (so new raw
records can be replayed through the same transform at serving time); concept
mean/median/correlation live in scaled bottleneck space, which is what
interventions operate in.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .schema import BINARY, CONTINUOUS, Cohort, PatientRecord


class DataError(ValueError):
    """Raised when a cohort cannot be preprocessed as requested."""


@dataclass(frozen=True)
class PreprocessStats:
    feature_min: dict[str, float]
    feature_max: dict[str, float]
    feature_median: dict[str, float]
    dropped_features: tuple[str, ...]
    concept_names: tuple[str, ...]  # schema order, tabular then text
    concept_mean: dict[str, float]
    concept_median: dict[str, float]
    concept_min: dict[str, float]
    concept_max: dict[str, float]
    corr: np.ndarray = field(repr=False)  # Pearson over train ground-truth concepts

    def __post_init__(self):
        m = np.asarray(self.corr, dtype=np.float64)
        m.flags.writeable = False
        object.__setattr__(self, "corr", m)

    def corr_submatrix(self, names) -> np.ndarray:
        idx = [self.concept_names.index(n) for n in names]
        return self.corr[np.ix_(idx, idx)]

    def to_dict(self) -> dict:
        return {
            "feature_min": self.feature_min,
            "feature_max": self.feature_max,
            "feature_median": self.feature_median,
            "dropped_features": list(self.dropped_features),
            "concept_names": list(self.concept_names),
            "concept_mean": self.concept_mean,
            "concept_median": self.concept_median,
            "concept_min": self.concept_min,
            "concept_max": self.concept_max,
            "corr": self.corr.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PreprocessStats":
        return cls(
            feature_min=dict(doc["feature_min"]),
            feature_max=dict(doc["feature_max"]),
            feature_median=dict(doc["feature_median"]),
            dropped_features=tuple(doc["dropped_features"]),
            concept_names=tuple(doc["concept_names"]),
            concept_mean=dict(doc["concept_mean"]),
            concept_median=dict(doc["concept_median"]),
            concept_min=dict(doc["concept_min"]),
            concept_max=dict(doc["concept_max"]),
            corr=np.array(doc["corr"], dtype=np.float64),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "PreprocessStats":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def pearson_matrix(m: np.ndarray) -> np.ndarray:
    """Pearson correlation over columns; constant columns get 0 to all
    others by convention, diagonal is always 1."""
    x = m - m.mean(axis=0)
    sd = np.sqrt((x * x).mean(axis=0))
    denom = np.outer(sd, sd)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = (x.T @ x) / m.shape[0] / denom
    corr[denom == 0.0] = 0.0
    np.fill_diagonal(corr, 1.0)
    return np.clip(corr, -1.0, 1.0)


def train_missing_fraction(cohort: Cohort) -> dict[str, float]:
    xt = cohort.feature_matrix("train")
    frac = np.isnan(xt).mean(axis=0)
    return dict(zip(cohort.feature_schema.names, frac.tolist()))


def drop_sparse_features(cohort: Cohort, threshold: float = 0.5):
    """Drop features whose train missing fraction strictly exceeds threshold.

    Returns (cohort', dropped names). Exactly-at-threshold features are kept.
    """
    if not (0.0 < threshold <= 1.0):
        raise DataError(f"threshold must be in (0, 1], got {threshold}")
    frac = train_missing_fraction(cohort)
    dropped = tuple(n for n in cohort.feature_schema.names if frac[n] > threshold)
    if not dropped:
        return cohort, dropped
    keep = [i for i, n in enumerate(cohort.feature_schema.names) if n not in dropped]
    if not keep:
        raise DataError("every feature exceeds the missingness threshold")
    from .schema import FeatureSchema
    fs = FeatureSchema(tuple(cohort.feature_schema.features[i] for i in keep))
    records = [r.with_x(r.x[keep]) for r in cohort.records]
    return Cohort(fs, cohort.concept_schema, tuple(records), cohort.preprocessed), dropped


def impute_median(cohort: Cohort, stats: PreprocessStats) -> Cohort:
    """Fill every missing entry with the feature's train median (raw space).

    Validation/test records also use train medians; binary features round the
    median to the nearest of {0, 1} so the binary invariant survives.
    """
    kinds = {f.name: f.kind for f in cohort.feature_schema.features}
    fill = np.empty(cohort.feature_schema.d)
    for j, name in enumerate(cohort.feature_schema.names):
        med = stats.feature_median.get(name, float("nan"))
        if np.isnan(med):
            raise DataError(f"feature {name} has no observed train values to impute from")
        if kinds[name] == BINARY:
            med = 1.0 if med >= 0.5 else 0.0
        fill[j] = med
    records = []
    for r in cohort.records:
        if np.isnan(r.x).any():
            x = np.where(np.isnan(r.x), fill, r.x)
            records.append(r.with_x(x))
        else:
            records.append(r)
    return cohort.with_records(records)


def minmax_scale(cohort: Cohort, stats: PreprocessStats) -> Cohort:
    """Map continuous features (and continuous concepts) to [0, 1] with train
    min/max; out-of-range validation/test values are clipped. Binary columns
    pass through; a constant continuous concept passes through unchanged."""
    names = cohort.feature_schema.names
    lo = np.array([stats.feature_min[n] for n in names])
    hi = np.array([stats.feature_max[n] for n in names])
    cont = cohort.feature_schema.continuous_mask()
    span = hi - lo
    for n, s, c in zip(names, span, cont):
        if c and s == 0.0:
            raise DataError(f"feature {n} is constant on the train split; cannot min-max scale")

    cont_concepts = [c.name for c in cohort.concept_schema.concepts
                     if c.kind == CONTINUOUS]
    cspan = {n: stats.concept_max[n] - stats.concept_min[n] for n in cont_concepts
             if n in stats.concept_min}

    records = []
    for r in cohort.records:
        x = r.x.copy()
        scaled = np.clip((x - lo) / np.where(span == 0.0, 1.0, span), 0.0, 1.0)
        x[cont] = scaled[cont]
        c_true = dict(r.c_true)
        for n in cont_concepts:
            if n in c_true and cspan.get(n, 0.0) > 0.0:
                c_true[n] = float(np.clip((c_true[n] - stats.concept_min[n]) / cspan[n], 0.0, 1.0))
        records.append(PatientRecord(r.id, x, c_true, r.documents, r.y, r.split, r.c_text))
    return cohort.with_records(records, preprocessed=True)


def compute_stats(cohort: Cohort, dropped: tuple[str, ...] = ()) -> PreprocessStats:
    """Train-split statistics: per-feature min/max/median over observed values,
    per-concept mean/median/min/max, and the Pearson correlation matrix over
    ground-truth concepts (tabular and text)."""
    xt = cohort.feature_matrix("train")
    fmin, fmax, fmed = {}, {}, {}
    for j, name in enumerate(cohort.feature_schema.names):
        col = xt[:, j]
        obs = col[~np.isnan(col)]
        if obs.size == 0:
            fmin[name] = fmax[name] = fmed[name] = float("nan")
        else:
            fmin[name] = float(obs.min())
            fmax[name] = float(obs.max())
            fmed[name] = float(np.median(obs))

    names = tuple(c.name for c in cohort.concept_schema.tabular) + \
            tuple(c.name for c in cohort.concept_schema.text)
    cm = cohort.concept_matrix("train")
    if np.isnan(cm).any():
        missing = [names[j] for j in np.where(np.isnan(cm).any(axis=0))[0]]
        raise DataError(f"train split lacks ground-truth values for concepts: {missing}")
    mean = dict(zip(names, cm.mean(axis=0).tolist()))
    median = dict(zip(names, np.median(cm, axis=0).tolist()))
    cmin = dict(zip(names, cm.min(axis=0).tolist()))
    cmax = dict(zip(names, cm.max(axis=0).tolist()))
    return PreprocessStats(
        feature_min=fmin, feature_max=fmax, feature_median=fmed,
        dropped_features=dropped, concept_names=names,
        concept_mean=mean, concept_median=median,
        concept_min=cmin, concept_max=cmax,
        corr=pearson_matrix(cm),
    )


def preprocess(cohort: Cohort, threshold: float = 0.5):
    """Run the full pipeline on a raw cohort. Returns (cohort', stats) where
    stats carries raw-space feature statistics for serving-time replay and
    scaled-space concept statistics for interventions."""
    cohort, dropped = drop_sparse_features(cohort, threshold)
    raw = compute_stats(cohort, dropped)
    cohort = impute_median(cohort, raw)
    cohort = minmax_scale(cohort, raw)
    scaled = compute_stats(cohort, dropped)
    return cohort, PreprocessStats(
        feature_min=raw.feature_min, feature_max=raw.feature_max,
        feature_median=raw.feature_median, dropped_features=dropped,
        concept_names=scaled.concept_names,
        concept_mean=scaled.concept_mean, concept_median=scaled.concept_median,
        concept_min=raw.concept_min, concept_max=raw.concept_max,
        corr=scaled.corr,
    )
