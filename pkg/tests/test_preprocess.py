import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from cbmw.generate import GeneratorConfig, generate_cohort
from cbmw.preprocess import (
    DataError,
    PreprocessStats,
    compute_stats,
    drop_sparse_features,
    impute_median,
    minmax_scale,
    pearson_matrix,
    preprocess,
    train_missing_fraction,
)
from cbmw.schema import Cohort, PatientRecord, default_schema, validate_cohort


def handmade_cohort(overrides, n=8, n_train=4):
    """Rows of valid raw features with specific cells overridden.

    overrides: {(row, feature_name): value}; rows 0..n_train-1 are train.
    """
    fs, cs = default_schema()
    rng = np.random.default_rng(0)
    cont = fs.continuous_mask()
    x = np.empty((n, fs.d))
    x[:, cont] = rng.uniform(1.0, 2.0, (n, int(cont.sum())))
    x[:, ~cont] = rng.integers(0, 2, (n, int((~cont).sum())))
    for (i, name), v in overrides.items():
        x[i, fs.index(name)] = v
    records = []
    for i in range(n):
        c_true = {}
        for j, c in enumerate(cs.concepts):
            c_true[c.name] = float((i + j) % 2) if c.kind == "binary" \
                else float(c.name == "sofa_max_cns") * i / n + 0.25
        split = "train" if i < n_train else ("validation" if i == n_train else "test")
        records.append(PatientRecord(f"t{i:03d}", x[i], c_true, {}, i % 2, split))
    return Cohort(fs, cs, tuple(records))


def test_drop_rule_is_strictly_greater_than_half():
    ov = {(i, "gcs_worst"): np.nan for i in range(3)}        # 3/4 train missing
    ov.update({(i, "urine_output_worst"): np.nan for i in range(2)})  # exactly 1/2
    cohort = handmade_cohort(ov)
    frac = train_missing_fraction(cohort)
    assert frac["gcs_worst"] == 0.75
    assert frac["urine_output_worst"] == 0.5
    out, dropped = drop_sparse_features(cohort)
    assert dropped == ("gcs_worst",)
    assert "gcs_worst" not in out.feature_schema.names
    assert "urine_output_worst" in out.feature_schema.names
    assert out.records[0].x.shape == (cohort.feature_schema.d - 1,)


def test_drop_threshold_bounds():
    cohort = handmade_cohort({})
    with pytest.raises(DataError):
        drop_sparse_features(cohort, 0.0)
    with pytest.raises(DataError):
        drop_sparse_features(cohort, 1.5)


def test_imputation_uses_train_median_everywhere():
    # train gcs_avg observed [3, 7, 15]; the test-row NaN must get the
    # train median, not a median of its own split
    ov = {(0, "gcs_avg"): 3.0, (1, "gcs_avg"): 7.0, (2, "gcs_avg"): np.nan,
          (3, "gcs_avg"): 15.0, (6, "gcs_avg"): np.nan}
    cohort = handmade_cohort(ov)
    stats = compute_stats(cohort)
    assert stats.feature_median["gcs_avg"] == 7.0
    filled = impute_median(cohort, stats)
    j = cohort.feature_schema.index("gcs_avg")
    assert filled.records[2].x[j] == 7.0
    assert filled.records[6].x[j] == 7.0
    assert not np.isnan(filled.feature_matrix()).any()


def test_binary_imputation_rounds_to_valid_value():
    ov = {(0, "comorb_influenza_pneumonia"): 1.0,
          (1, "comorb_influenza_pneumonia"): 1.0,
          (2, "comorb_influenza_pneumonia"): 0.0,
          (3, "comorb_influenza_pneumonia"): np.nan}
    cohort = handmade_cohort(ov)
    stats = compute_stats(cohort)
    filled = impute_median(cohort, stats)
    j = cohort.feature_schema.index("comorb_influenza_pneumonia")
    assert filled.records[3].x[j] == 1.0


def test_minmax_maps_train_range_to_unit_interval():
    ov = {(0, "gcs_avg"): 3.0, (1, "gcs_avg"): 7.0, (2, "gcs_avg"): 9.0,
          (3, "gcs_avg"): 15.0, (6, "gcs_avg"): 21.0}
    cohort = handmade_cohort(ov)
    stats = compute_stats(cohort)
    scaled = minmax_scale(cohort, stats)
    j = cohort.feature_schema.index("gcs_avg")
    col = np.array([r.x[j] for r in scaled.records])
    assert col[0] == 0.0 and col[3] == 1.0
    assert col[1] == pytest.approx((7.0 - 3.0) / 12.0)
    assert col[6] == 1.0  # out-of-range test value clips
    assert scaled.preprocessed


def test_constant_continuous_feature_is_rejected():
    ov = {(i, "creatinine_avg"): 1.3 for i in range(4)}
    cohort = handmade_cohort(ov)
    stats = compute_stats(cohort)
    with pytest.raises(DataError):
        minmax_scale(cohort, stats)


def test_full_pipeline_golden():
    ov = {(i, "gcs_worst"): np.nan for i in range(3)}
    ov.update({(0, "gcs_avg"): 3.0, (1, "gcs_avg"): 7.0, (2, "gcs_avg"): np.nan,
               (3, "gcs_avg"): 15.0, (6, "gcs_avg"): np.nan})
    cohort = handmade_cohort(ov)
    out, stats = preprocess(cohort)
    assert stats.dropped_features == ("gcs_worst",)
    j = out.feature_schema.index("gcs_avg")
    # NaN -> train median 7 -> scaled (7-3)/(15-3)
    assert out.records[6].x[j] == pytest.approx(1.0 / 3.0)
    assert validate_cohort(out) == []
    # raw-space feature stats survive for serving-time replay
    assert stats.feature_min["gcs_avg"] == 3.0
    assert stats.feature_max["gcs_avg"] == 15.0


def test_pipeline_on_generated_cohort_bounds_and_stats():
    cohort = generate_cohort(GeneratorConfig(n_patients=200, seed=5,
                                             missingness=0.15))
    out, stats = preprocess(cohort)
    assert validate_cohort(out) == []
    x = out.feature_matrix()
    assert not np.isnan(x).any()
    cont = out.feature_schema.continuous_mask()
    assert x[:, cont].min() >= 0.0 and x[:, cont].max() <= 1.0
    c = out.concept_matrix()
    assert c.min() >= 0.0 and c.max() <= 1.0
    # scaled-space concept medians are what interventions will substitute
    for name, med in stats.concept_median.items():
        assert 0.0 <= med <= 1.0
    assert stats.corr.shape == (len(stats.concept_names),) * 2


def test_stats_roundtrip(tmp_path):
    cohort = generate_cohort(GeneratorConfig(n_patients=60, seed=1))
    _, stats = preprocess(cohort)
    p = tmp_path / "stats.json"
    stats.save(p)
    back = PreprocessStats.load(p)
    assert back.concept_names == stats.concept_names
    assert back.feature_median == stats.feature_median
    np.testing.assert_array_equal(back.corr, stats.corr)


def test_corr_submatrix_alignment():
    cohort = generate_cohort(GeneratorConfig(n_patients=60, seed=1))
    _, stats = preprocess(cohort)
    names = (stats.concept_names[3], stats.concept_names[0])
    sub = stats.corr_submatrix(names)
    assert sub[0, 1] == stats.corr[3, 0]
    assert sub[0, 0] == 1.0


def test_pearson_constant_column_convention():
    m = np.column_stack([np.ones(10), np.arange(10.0), np.arange(10.0) * -1])
    corr = pearson_matrix(m)
    assert corr[0, 1] == 0.0 and corr[1, 0] == 0.0
    assert corr[0, 0] == 1.0
    assert corr[1, 2] == pytest.approx(-1.0)


@given(arrays(np.float64, (12, 4), elements=st.floats(0, 1, width=32)))
def test_pearson_matrix_properties(m):
    corr = pearson_matrix(m)
    assert np.all(np.abs(corr) <= 1.0)
    np.testing.assert_array_equal(corr, corr.T)
    np.testing.assert_array_equal(np.diag(corr), np.ones(4))
    assert not np.isnan(corr).any()
