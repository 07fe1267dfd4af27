"""Synthetic ICU cohort generator.

Latent structure: one shared severity draw per patient couples four organ
severities (cns, renal, respiration, cardiovascular); `concept_coupling`
controls how tightly organs move together. Continuous features are monotone
affine maps of per-feature severity, so tabular concepts are deterministic
functions of the features (identical feature rows always yield identical
tabular concepts). Text concepts are Bernoulli draws tied to the shared
severity and are planted into documents as trigger phrases.

Labels: margin = w . (c - 0.5) over all ground-truth concepts, centered by the
cohort mean margin so classes stay roughly balanced, then y = 1 iff
margin + noise_sd * logistic_noise >= 0. That equals Bernoulli(sigmoid(
margin / noise_sd)) for noise_sd > 0 and a hard threshold at noise_sd = 0.

`text_signal_share` rescales the default weight families so the given
fraction of total weight mass sits on text concepts; explicit label_weights
bypass that rebalancing and are used as given (normalized to unit mass).

Missing values (continuous features only) are injected after concepts are
computed, so ground truth never degrades with missingness.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .schema import Cohort, PatientRecord, default_schema
from .textconcepts import load_routing

# raw range and severity direction per continuous feature
# ("+" raw value rises with severity, "-" falls)
FEATURE_RANGES = {
    "gcs_worst": (3.0, 15.0, "-"),
    "gcs_avg": (3.0, 15.0, "-"),
    "urine_output_worst": (0.0, 3000.0, "-"),
    "creatinine_avg": (0.3, 6.0, "+"),
    "urine_output_avg": (200.0, 4000.0, "-"),
    "pf_ratio_worst": (40.0, 500.0, "-"),
    "pf_ratio_avg": (60.0, 520.0, "-"),
    "norepi_rate_worst": (0.0, 2.0, "+"),
    "mbp_worst": (35.0, 100.0, "-"),
    "mbp_first24hr_worst": (38.0, 102.0, "-"),
    "norepi_rate_avg": (0.0, 1.5, "+"),
    "mbp_avg": (50.0, 110.0, "-"),
    "norepi_dose_avg": (0.0, 50.0, "+"),
    "norepi_dose_peak": (0.0, 80.0, "+"),
    "vent_duration_minutes": (0.0, 30000.0, "+"),
}

ORGANS = ("cns", "renal", "respiration", "cardiovascular")

ORGAN_FEATURES = {
    "cns": ("gcs_worst", "gcs_avg"),
    "renal": ("urine_output_worst", "creatinine_avg", "urine_output_avg"),
    "respiration": ("pf_ratio_worst", "pf_ratio_avg", "vent_duration_minutes"),
    "cardiovascular": ("norepi_rate_worst", "mbp_worst", "mbp_first24hr_worst",
                       "norepi_rate_avg", "mbp_avg", "norepi_dose_avg",
                       "norepi_dose_peak"),
}

# concept -> (organ, feature weights, slope, intercept); applied to
# severity-aligned feature values, then clipped to [0, 1]
CONCEPT_MAPS = {
    "sofa_max_cns": ("cns", (0.7, 0.3), 1.1, -0.03),
    "first24hr_sofa_max_cns": ("cns", (0.55, 0.45), 0.95, 0.02),
    "sofa_avg_cns": ("cns", (0.25, 0.75), 1.0, 0.0),
    "sofa_max_renal": ("renal", (0.5, 0.35, 0.15), 1.1, -0.02),
    "first24hr_sofa_max_renal": ("renal", (0.45, 0.3, 0.25), 0.9, 0.05),
    "sofa_avg_renal": ("renal", (0.2, 0.3, 0.5), 1.0, 0.0),
    "sofa_max_respiration": ("respiration", (0.6, 0.25, 0.15), 1.15, -0.04),
    "first24hr_sofa_max_respiration": ("respiration", (0.5, 0.35, 0.15), 0.95, 0.02),
    "sofa_avg_respiration": ("respiration", (0.2, 0.55, 0.25), 1.0, 0.0),
    "sofa_max_cardiovascular": (
        "cardiovascular", (0.3, 0.2, 0.05, 0.1, 0.05, 0.1, 0.2), 1.1, -0.02),
    "first24hr_sofa_max_cardiovascular": (
        "cardiovascular", (0.15, 0.1, 0.35, 0.1, 0.05, 0.1, 0.15), 0.95, 0.03),
    "sofa_avg_cardiovascular": (
        "cardiovascular", (0.1, 0.05, 0.05, 0.3, 0.25, 0.2, 0.05), 1.0, 0.0),
}

COMORB_BIASES = (-0.4, -0.8, -1.2, -1.6, -2.0, -2.4)

TEXT_BIASES = {
    "pneumonia": -0.4, "aspiration": -1.0, "pancreatitis": -1.3,
    "cardiac_arrest": -1.2, "trali": -1.6, "ards_mention": -0.6,
    "bilateral_infiltrates": -0.3, "cardiac_failure": -0.9,
}
TEXT_COUPLING = 0.6

DEFAULT_LABEL_WEIGHTS = {
    "sofa_max_cns": 0.25, "first24hr_sofa_max_cns": 0.15, "sofa_avg_cns": 0.2,
    "sofa_max_renal": 0.3, "first24hr_sofa_max_renal": 0.2, "sofa_avg_renal": 0.25,
    "sofa_max_respiration": 1.0, "first24hr_sofa_max_respiration": 0.6,
    "sofa_avg_respiration": 0.9,
    "sofa_max_cardiovascular": 0.3, "first24hr_sofa_max_cardiovascular": 0.2,
    "sofa_avg_cardiovascular": 0.25,
    "mod_resp_comorbidity": 0.35, "svr_resp_comorbidity": 0.75,
    "pneumonia": 1.0, "aspiration": 0.7, "pancreatitis": 0.45,
    "cardiac_arrest": -0.8, "trali": 0.4, "ards_mention": 1.1,
    "bilateral_infiltrates": 0.95, "cardiac_failure": -0.9,
}

DISCHARGE_FILLER = (
    "The patient was admitted to the intensive care unit for close monitoring.",
    "Initial laboratory studies were notable for a mild metabolic acidosis.",
    "Vital signs on arrival showed tachycardia with borderline blood pressures.",
    "The patient was started on intravenous fluids and electrolyte repletion.",
    "Overnight the patient remained afebrile with stable hemodynamics.",
    "Daily chest physiotherapy and early mobilization were encouraged.",
    "Nutrition was provided via enteral feeding once tolerated.",
    "Sedation was weaned as the clinical picture improved.",
    "Renal function was followed closely with serial chemistries.",
    "The family was updated at the bedside regarding goals of care.",
    "Physical therapy evaluated the patient prior to discharge planning.",
    "Blood cultures drawn on admission showed no growth at five days.",
    "The remainder of the hospital course was uncomplicated.",
    "Home medications were resumed at discharge with close follow-up arranged.",
)

DISCHARGE_TRIGGER_SENTENCES = {
    "pneumonia": "Hospital course was complicated by multifocal pneumonia "
                 "requiring broad-spectrum antibiotics.",
    "aspiration": "There was a witnessed aspiration event at the time of intubation.",
    "pancreatitis": "Lipase was markedly elevated and imaging confirmed acute pancreatitis.",
    "cardiac_arrest": "On hospital day two the patient suffered a cardiac arrest "
                      "with return of spontaneous circulation.",
    "trali": "Respiratory status deteriorated shortly after transfusion, "
             "concerning for transfusion-related acute lung injury.",
    "ards_mention": "The overall clinical picture was felt to be consistent with ARDS.",
    "cardiac_failure": "The admission was further complicated by decompensated "
                       "cardiac failure requiring diuresis.",
}

RADIOLOGY_FILLER = (
    "Lines and tubes remain in standard position.",
    "No pneumothorax or large pleural effusion identified.",
    "Cardiomediastinal silhouette is within normal limits.",
    "Lung fields are clear without focal consolidation.",
)
RADIOLOGY_POSITIVE = ("Portable chest radiograph demonstrates bilateral "
                      "infiltrates with low lung volumes.")

ECHO_FILLER = (
    "Left ventricular systolic function is preserved.",
    "Right ventricular size and function are normal.",
    "No pericardial effusion is seen.",
    "No significant valvular abnormality is identified.",
)
ECHO_POSITIVE = ("Left ventricular ejection fraction is severely reduced, "
                 "consistent with decompensated cardiac failure.")


@dataclass(frozen=True)
class GeneratorConfig:
    n_patients: int
    seed: int = 0
    noise_sd: float = 0.05
    text_signal_share: float = 0.35
    missingness: float = 0.05
    concept_coupling: float = 0.55
    label_weights: dict[str, float] | None = field(default=None)
    splits: tuple[float, float, float] = (0.7, 0.15, 0.15)

    def validate(self, concept_names) -> None:
        if self.n_patients < 10:
            raise ValueError(f"n_patients must be >= 10, got {self.n_patients}")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        if not (0.0 <= self.text_signal_share <= 1.0):
            raise ValueError("text_signal_share must be in [0, 1]")
        if not (0.0 <= self.missingness < 1.0):
            raise ValueError("missingness must be in [0, 1)")
        if not (0.0 <= self.concept_coupling <= 1.0):
            raise ValueError("concept_coupling must be in [0, 1]")
        if len(self.splits) != 3 or min(self.splits) <= 0 or \
                abs(sum(self.splits) - 1.0) > 1e-9:
            raise ValueError("splits must be three positive fractions summing to 1")
        if self.label_weights is not None:
            bad = set(self.label_weights) - set(concept_names)
            if bad:
                raise ValueError(f"label_weights name unknown concepts: {sorted(bad)}")
            if all(w == 0.0 for w in self.label_weights.values()):
                raise ValueError("label_weights must not be all zero")

    def to_dict(self) -> dict:
        return {
            "n_patients": self.n_patients, "seed": self.seed,
            "noise_sd": self.noise_sd,
            "text_signal_share": self.text_signal_share,
            "missingness": self.missingness,
            "concept_coupling": self.concept_coupling,
            "label_weights": self.label_weights,
            "splits": list(self.splits),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GeneratorConfig":
        return cls(
            n_patients=int(doc["n_patients"]), seed=int(doc.get("seed", 0)),
            noise_sd=float(doc.get("noise_sd", 0.05)),
            text_signal_share=float(doc.get("text_signal_share", 0.35)),
            missingness=float(doc.get("missingness", 0.05)),
            concept_coupling=float(doc.get("concept_coupling", 0.55)),
            label_weights=doc.get("label_weights"),
            splits=tuple(doc.get("splits", (0.7, 0.15, 0.15))),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _clip01(v):
    return np.clip(v, 0.0, 1.0)


def effective_label_weights(cfg: GeneratorConfig, concept_schema) -> np.ndarray:
    """Weight vector in schema order (tabular then text) with unit L1 mass.

    Default weights are rebalanced so text concepts carry exactly
    `text_signal_share` of the mass; explicit weights skip rebalancing.
    """
    tab = [c.name for c in concept_schema.tabular]
    text = [c.name for c in concept_schema.text]
    names = tab + text
    if cfg.label_weights is not None:
        w = np.array([cfg.label_weights.get(n, 0.0) for n in names])
        return w / np.abs(w).sum()
    w = np.array([DEFAULT_LABEL_WEIGHTS[n] for n in names])
    tab_mass = np.abs(w[:len(tab)]).sum()
    text_mass = np.abs(w[len(tab):]).sum()
    share = cfg.text_signal_share
    w[:len(tab)] *= (1.0 - share) / tab_mass
    w[len(tab):] *= share / text_mass if text_mass > 0 else 0.0
    return w


def generate_cohort(cfg: GeneratorConfig) -> Cohort:
    """Build a raw cohort against the shipped ARDS schema. Fully determined
    by cfg.seed; re-running with the same config reproduces every byte."""
    fs, cs = default_schema()
    cs_names = tuple(c.name for c in cs.tabular) + tuple(c.name for c in cs.text)
    cfg.validate(cs_names)
    routing = load_routing()
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_patients
    cont_names = list(FEATURE_RANGES)
    text_names = [c.name for c in cs.text]

    # fixed draw order keeps cohorts reproducible across config tweaks
    z_shared = rng.standard_normal(n)
    eps_organ = rng.standard_normal((n, len(ORGANS)))
    eps_feat = rng.standard_normal((n, len(cont_names)))
    eps_com = rng.standard_normal(n)
    u_comorb = rng.random((n, len(COMORB_BIASES)))
    eps_text = rng.standard_normal((n, len(text_names)))
    u_text = rng.random((n, len(text_names)))
    label_eps = rng.logistic(0.0, 1.0, n)
    # record-level missingness intensity: most records lose little, a few
    # lose many features at once, so concept errors correlate within a record
    miss_scale = rng.choice((0.5, 1.0, 3.0), size=n, p=(0.5, 0.3, 0.2))
    miss_u = rng.random((n, len(cont_names)))

    rho = cfg.concept_coupling
    z_organ = rho * z_shared[:, None] + np.sqrt(1.0 - rho * rho) * eps_organ
    s_organ = {o: _sigmoid(1.2 * z_organ[:, k]) for k, o in enumerate(ORGANS)}

    feat_organ = {f: o for o, feats in ORGAN_FEATURES.items() for f in feats}
    u = np.empty((n, len(cont_names)))
    for j, name in enumerate(cont_names):
        u[:, j] = _clip01(s_organ[feat_organ[name]] + 0.08 * eps_feat[:, j])

    x_cont = np.empty_like(u)
    for j, name in enumerate(cont_names):
        lo, hi, direction = FEATURE_RANGES[name]
        v = u[:, j] if direction == "+" else 1.0 - u[:, j]
        x_cont[:, j] = lo + v * (hi - lo)

    z_com = 0.5 * z_shared + np.sqrt(0.75) * eps_com
    p_com = _sigmoid(0.9 * z_com[:, None] + np.array(COMORB_BIASES))
    x_comorb = (u_comorb < p_com).astype(np.float64)
    comorb_count = x_comorb.sum(axis=1)

    concepts = {}
    uidx = {name: j for j, name in enumerate(cont_names)}
    for cname, (organ, weights, slope, intercept) in CONCEPT_MAPS.items():
        cols = [uidx[f] for f in ORGAN_FEATURES[organ]]
        concepts[cname] = _clip01(u[:, cols] @ np.array(weights) * slope + intercept)
    concepts["mod_resp_comorbidity"] = ((comorb_count >= 1) & (comorb_count <= 2)).astype(float)
    concepts["svr_resp_comorbidity"] = (comorb_count >= 3).astype(float)

    tc = TEXT_COUPLING
    z_text = tc * z_shared[:, None] + np.sqrt(1.0 - tc * tc) * eps_text
    for j, name in enumerate(text_names):
        p = _sigmoid(z_text[:, j] + TEXT_BIASES[name])
        concepts[name] = (u_text[:, j] < p).astype(np.float64)

    w = effective_label_weights(cfg, cs)
    cmat = np.column_stack([concepts[name] for name in cs_names])
    margin = (cmat - 0.5) @ w
    margin = margin - margin.mean()
    y = (margin + cfg.noise_sd * label_eps >= 0.0).astype(int)

    x_cont_missing = x_cont.copy()
    if cfg.missingness > 0:
        rate = np.minimum(cfg.missingness * miss_scale, 0.9)
        x_cont_missing[miss_u < rate[:, None]] = np.nan

    perm = rng.permutation(n)
    n_tr = max(1, int(round(cfg.splits[0] * n)))
    n_va = max(1, int(round(cfg.splits[1] * n)))
    n_tr = min(n_tr, n - n_va - 1)
    split = np.empty(n, dtype=object)
    split[perm[:n_tr]] = "train"
    split[perm[n_tr:n_tr + n_va]] = "validation"
    split[perm[n_tr + n_va:]] = "test"

    records = []
    for i in range(n):
        docs = _make_documents(rng, {name: concepts[name][i] for name in text_names},
                               routing)
        x = np.concatenate([x_cont_missing[i], x_comorb[i]])
        c_true = {name: float(concepts[name][i]) for name in cs_names}
        records.append(PatientRecord(f"p{i + 1:04d}", x, c_true, docs,
                                     int(y[i]), str(split[i])))
    return Cohort(fs, cs, tuple(records), preprocessed=False)


def _insert(rng, sentences: list[str], extra: str) -> None:
    sentences.insert(int(rng.integers(0, len(sentences) + 1)), extra)


def _make_documents(rng, text_values: dict[str, float], routing: dict) -> dict[str, str]:
    """Plant each positive concept's trigger phrase into its routed document.
    Cardiac failure lands in the echo half the time and in the discharge
    otherwise (with the echo then negative or absent), exercising fallback."""
    n_fill = int(rng.integers(8, 25))
    picks = rng.integers(0, len(DISCHARGE_FILLER), n_fill)
    discharge = [DISCHARGE_FILLER[k] for k in picks]

    cf_in_echo = bool(rng.random() < 0.5) if text_values.get("cardiac_failure") else False
    for name in ("pneumonia", "aspiration", "pancreatitis", "cardiac_arrest",
                 "trali", "ards_mention"):
        if text_values.get(name):
            _insert(rng, discharge, DISCHARGE_TRIGGER_SENTENCES[name])
    if text_values.get("cardiac_failure") and not cf_in_echo:
        _insert(rng, discharge, DISCHARGE_TRIGGER_SENTENCES["cardiac_failure"])

    n_rad = int(rng.integers(2, 5))
    rad_picks = rng.integers(0, len(RADIOLOGY_FILLER), n_rad)
    radiology = [RADIOLOGY_FILLER[k] for k in rad_picks]
    if text_values.get("bilateral_infiltrates"):
        _insert(rng, radiology, RADIOLOGY_POSITIVE)

    docs = {"discharge": " ".join(discharge), "radiology": " ".join(radiology)}
    if cf_in_echo:
        echo = [ECHO_FILLER[k] for k in rng.integers(0, len(ECHO_FILLER), 2)]
        _insert(rng, echo, ECHO_POSITIVE)
        docs["echo"] = " ".join(echo)
    else:
        # half the remaining patients carry a negative echo, half none at all
        if rng.random() < 0.5:
            echo = [ECHO_FILLER[k] for k in rng.integers(0, len(ECHO_FILLER), 3)]
            docs["echo"] = " ".join(echo)
    return docs
