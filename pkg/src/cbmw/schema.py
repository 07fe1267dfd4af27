"""Feature/concept schemas and cohort containers.

Concept order is schema order everywhere: bottleneck layout, correlation
matrix indices and reports all index concepts the way the schema lists them
(tabular concepts first when families are mixed). Binary values are stored
as floats in {0.0, 1.0} so all vectors share one dtype.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources as importlib_resources
from typing import Iterable, Mapping

import numpy as np

CONTINUOUS = "continuous"
BINARY = "binary"
TABULAR = "tabular"
TEXT = "text"

DOCUMENT_KINDS = ("discharge", "radiology", "echo")
SPLITS = ("train", "validation", "test")


class SchemaError(ValueError):
    """Raised when a schema or cohort file violates its declared invariants."""


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str  # continuous | binary


@dataclass(frozen=True)
class ConceptSpec:
    name: str
    kind: str  # continuous | binary
    source: str  # tabular | text


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[FeatureSpec, ...]

    @property
    def d(self) -> int:
        return len(self.features)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def continuous_mask(self) -> np.ndarray:
        return np.array([f.kind == CONTINUOUS for f in self.features], dtype=bool)

    def validate(self) -> None:
        if not self.features:
            raise SchemaError("feature schema must declare at least one feature")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate feature names: %s" % _dupes(names))
        for f in self.features:
            if f.kind not in (CONTINUOUS, BINARY):
                raise SchemaError(f"feature {f.name}: unknown kind {f.kind!r}")


@dataclass(frozen=True)
class ConceptSchema:
    concepts: tuple[ConceptSpec, ...]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.concepts)

    @property
    def tabular(self) -> tuple[ConceptSpec, ...]:
        return tuple(c for c in self.concepts if c.source == TABULAR)

    @property
    def text(self) -> tuple[ConceptSpec, ...]:
        return tuple(c for c in self.concepts if c.source == TEXT)

    def get(self, name: str) -> ConceptSpec:
        for c in self.concepts:
            if c.name == name:
                return c
        raise KeyError(name)

    def validate(self) -> None:
        names = [c.name for c in self.concepts]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate concept names: %s" % _dupes(names))
        for c in self.concepts:
            if c.kind not in (CONTINUOUS, BINARY):
                raise SchemaError(f"concept {c.name}: unknown kind {c.kind!r}")
            if c.source not in (TABULAR, TEXT):
                raise SchemaError(f"concept {c.name}: unknown source {c.source!r}")
            if c.source == TEXT and c.kind != BINARY:
                raise SchemaError(f"text concept {c.name} must be binary")


def _dupes(names: Iterable[str]) -> str:
    seen, out = set(), []
    for n in names:
        if n in seen and n not in out:
            out.append(n)
        seen.add(n)
    return ", ".join(out)


@dataclass(frozen=True)
class PatientRecord:
    """One patient row. `x` may contain NaN (missing) before preprocessing.

    `c_true` holds ground-truth values for tabular concepts (and, for
    generated cohorts, the planted text concepts). `c_text` holds the
    observed text-concept vector the label predictor consumes.
    """

    id: str
    x: np.ndarray
    c_true: Mapping[str, float]
    documents: Mapping[str, str]
    y: int
    split: str
    c_text: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        arr = np.asarray(self.x, dtype=np.float64)
        arr.flags.writeable = False
        object.__setattr__(self, "x", arr)
        object.__setattr__(self, "c_true", dict(self.c_true))
        object.__setattr__(self, "c_text", dict(self.c_text))
        object.__setattr__(self, "documents", dict(self.documents))

    def with_x(self, x: np.ndarray) -> "PatientRecord":
        return PatientRecord(self.id, x, self.c_true, self.documents,
                             self.y, self.split, self.c_text)

    def with_concepts(self, c_true=None, c_text=None) -> "PatientRecord":
        return PatientRecord(
            self.id, self.x,
            self.c_true if c_true is None else c_true,
            self.documents, self.y, self.split,
            self.c_text if c_text is None else c_text,
        )


@dataclass(frozen=True)
class Cohort:
    feature_schema: FeatureSchema
    concept_schema: ConceptSchema
    records: tuple[PatientRecord, ...]
    preprocessed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))

    def split_records(self, split: str) -> tuple[PatientRecord, ...]:
        return tuple(r for r in self.records if r.split == split)

    def get(self, record_id: str) -> PatientRecord:
        for r in self.records:
            if r.id == record_id:
                return r
        raise KeyError(record_id)

    def with_records(self, records, preprocessed=None) -> "Cohort":
        return Cohort(self.feature_schema, self.concept_schema, tuple(records),
                      self.preprocessed if preprocessed is None else preprocessed)

    def feature_matrix(self, split: str | None = None) -> np.ndarray:
        recs = self.records if split is None else self.split_records(split)
        return np.array([r.x for r in recs], dtype=np.float64)

    def concept_matrix(self, split: str | None = None) -> np.ndarray:
        """Ground-truth concept values, schema order (tabular then text)."""
        recs = self.records if split is None else self.split_records(split)
        names = [c.name for c in self.concept_schema.tabular] + \
                [c.name for c in self.concept_schema.text]
        out = np.full((len(recs), len(names)), np.nan)
        for i, r in enumerate(recs):
            for j, n in enumerate(names):
                if n in r.c_true:
                    out[i, j] = r.c_true[n]
                elif n in r.c_text:
                    out[i, j] = r.c_text[n]
        return out

    def labels(self, split: str | None = None) -> np.ndarray:
        recs = self.records if split is None else self.split_records(split)
        return np.array([r.y for r in recs], dtype=np.float64)


@dataclass(frozen=True)
class Violation:
    record_id: str  # "" for schema/cohort-level violations
    field: str
    message: str


def validate_cohort(cohort: Cohort) -> list[Violation]:
    """Check every declared invariant; violations are data, not failures.

    Returns an empty list iff the cohort is well formed. Pure: the same
    cohort always yields the same list.
    """
    out: list[Violation] = []
    fs, cs = cohort.feature_schema, cohort.concept_schema

    try:
        fs.validate()
    except SchemaError as e:
        out.append(Violation("", "feature_schema", str(e)))
    try:
        cs.validate()
    except SchemaError as e:
        out.append(Violation("", "concept_schema", str(e)))

    seen_ids = set()
    for r in cohort.records:
        if r.id in seen_ids:
            out.append(Violation(r.id, "id", "duplicate record id"))
        seen_ids.add(r.id)
        if r.split not in SPLITS:
            out.append(Violation(r.id, "split", f"unknown split {r.split!r}"))
        if r.y not in (0, 1):
            out.append(Violation(r.id, "y", f"label must be 0 or 1, got {r.y!r}"))
        if r.x.shape != (fs.d,):
            out.append(Violation(r.id, "x", f"expected {fs.d} features, got {r.x.shape}"))
            continue
        for f, v in zip(fs.features, r.x):
            if cohort.preprocessed:
                if np.isnan(v):
                    out.append(Violation(r.id, f.name, "missing value after preprocessing"))
                elif f.kind == CONTINUOUS and not (0.0 <= v <= 1.0):
                    out.append(Violation(r.id, f.name, f"continuous value {v!r} outside [0, 1]"))
            if f.kind == BINARY and not (np.isnan(v) or v in (0.0, 1.0)):
                out.append(Violation(r.id, f.name, f"binary value {v!r} not in {{0, 1}}"))
        for c in cs.tabular:
            if c.name not in r.c_true:
                out.append(Violation(r.id, c.name, "tabular concept missing ground truth"))
            elif c.kind == BINARY and r.c_true[c.name] not in (0.0, 1.0):
                out.append(Violation(r.id, c.name, f"binary concept value {r.c_true[c.name]!r}"))
            elif cohort.preprocessed and not (0.0 <= r.c_true[c.name] <= 1.0):
                out.append(Violation(r.id, c.name, "concept value outside [0, 1]"))
        for c in cs.text:
            for src in (r.c_text, r.c_true):
                if c.name in src and src[c.name] not in (0.0, 1.0):
                    out.append(Violation(r.id, c.name, f"text concept value {src[c.name]!r}"))
                    break

    train = cohort.split_records("train")
    if train:
        ys = {r.y for r in train}
        if ys != {0, 1}:
            out.append(Violation("", "split", "train split must contain both classes"))
    else:
        out.append(Violation("", "split", "empty train split"))
    return out


# ---------------------------------------------------------------------------
# serialization

def schema_to_dict(fs: FeatureSchema, cs: ConceptSchema) -> dict:
    return {
        "features": [{"name": f.name, "kind": f.kind} for f in fs.features],
        "concepts": [{"name": c.name, "kind": c.kind, "source": c.source}
                     for c in cs.concepts],
    }


def schema_from_dict(doc: Mapping) -> tuple[FeatureSchema, ConceptSchema]:
    fs = FeatureSchema(tuple(FeatureSpec(f["name"], f["kind"]) for f in doc["features"]))
    cs = ConceptSchema(tuple(ConceptSpec(c["name"], c["kind"], c["source"])
                             for c in doc["concepts"]))
    fs.validate()
    cs.validate()
    return fs, cs


def schema_hash(fs: FeatureSchema, cs: ConceptSchema) -> str:
    payload = json.dumps(schema_to_dict(fs, cs), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def load_schema_file(path) -> tuple[FeatureSchema, ConceptSchema]:
    with open(path, "r", encoding="utf-8") as fh:
        return schema_from_dict(json.load(fh))


def save_schema_file(path, fs: FeatureSchema, cs: ConceptSchema) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema_to_dict(fs, cs), fh, indent=2, sort_keys=True)
        fh.write("\n")


def default_schema() -> tuple[FeatureSchema, ConceptSchema]:
    """The shipped ARDS schema: 15 continuous + 6 binary features,
    12 continuous SOFA concepts, 2 binary comorbidity concepts,
    8 binary text concepts."""
    ref = importlib_resources.files("cbmw.resources").joinpath("ards_schema.json")
    return schema_from_dict(json.loads(ref.read_text(encoding="utf-8")))
