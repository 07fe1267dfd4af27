import hypothesis
import pytest

from cbmw.cbm import TrainConfig, train
from cbmw.cohort_io import apply_extracted
from cbmw.generate import GeneratorConfig, generate_cohort
from cbmw.preprocess import preprocess
from cbmw.schema import schema_hash
from cbmw.textconcepts import MockExtractor, extract_all

hypothesis.settings.register_profile(
    "suite", deadline=None, max_examples=50,
    suppress_health_check=[hypothesis.HealthCheck.too_slow])
hypothesis.settings.load_profile("suite")


@pytest.fixture(scope="session")
def ready_cohort():
    """Small preprocessed cohort with text concepts attached, shared by the
    model/intervention/service tests."""
    cohort = generate_cohort(GeneratorConfig(n_patients=240, seed=3))
    proc, stats = preprocess(cohort)
    proc = apply_extracted(proc, extract_all(proc, MockExtractor()))
    return proc, stats


@pytest.fixture(scope="session")
def trained(ready_cohort):
    proc, stats = ready_cohort
    sh = schema_hash(proc.feature_schema, proc.concept_schema)
    model = train(proc, TrainConfig(epochs=40, seed=0), sh)
    return model, proc, stats, sh
