import numpy as np
import pytest

from cbmw.generate import GeneratorConfig, generate_cohort
from cbmw.schema import (
    SchemaError,
    default_schema,
    schema_from_dict,
    schema_hash,
    schema_to_dict,
    validate_cohort,
)


def test_default_schema_counts():
    fs, cs = default_schema()
    assert fs.d == 21  # 15 continuous severity measurements + 6 comorbidity flags
    assert len(cs.tabular) == 14
    assert len(cs.text) == 8
    assert cs.names == tuple(c.name for c in cs.tabular) + tuple(
        c.name for c in cs.text)


def test_schema_roundtrip_and_hash_stability():
    fs, cs = default_schema()
    doc = schema_to_dict(fs, cs)
    fs2, cs2 = schema_from_dict(doc)
    assert schema_hash(fs, cs) == schema_hash(fs2, cs2)
    assert fs2.names == fs.names


def test_schema_hash_sensitive_to_order():
    fs, cs = default_schema()
    doc = schema_to_dict(fs, cs)
    doc["features"] = doc["features"][::-1]
    fs2, cs2 = schema_from_dict(doc)
    assert schema_hash(fs, cs) != schema_hash(fs2, cs2)


def test_feature_index_lookup():
    fs, _ = default_schema()
    for i, name in enumerate(fs.names):
        assert fs.index(name) == i
    with pytest.raises(ValueError):
        fs.index("not_a_feature")


def test_generated_cohort_validates_clean():
    cohort = generate_cohort(GeneratorConfig(n_patients=60, seed=1))
    assert validate_cohort(cohort) == []


def test_validation_flags_bad_label_and_split():
    from cbmw.schema import PatientRecord

    cohort = generate_cohort(GeneratorConfig(n_patients=20, seed=1))
    r = cohort.records[0]
    bad = PatientRecord(r.id, np.array(r.x), r.c_true, r.documents,
                        y=3, split="holdout", c_text=r.c_text)
    broken = cohort.with_records((bad,) + cohort.records[1:])
    fields = {v.field for v in validate_cohort(broken)}
    assert "y" in fields and "split" in fields


def test_concept_matrix_orders_tabular_then_text():
    cohort = generate_cohort(GeneratorConfig(n_patients=30, seed=2))
    cs = cohort.concept_schema
    m = cohort.concept_matrix()
    r = cohort.records[0]
    for j, spec in enumerate(cs.tabular):
        assert m[0, j] == r.c_true[spec.name]
    for j, spec in enumerate(cs.text):
        assert m[0, len(cs.tabular) + j] == r.c_true[spec.name]


def test_record_features_are_immutable():
    cohort = generate_cohort(GeneratorConfig(n_patients=12, seed=0))
    with pytest.raises(ValueError):
        cohort.records[0].x[0] = 0.0
