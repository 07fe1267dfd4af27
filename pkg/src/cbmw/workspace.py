"""Filesystem layout for experiment artifacts.

    <root>/
      cohorts/<name>/    cohort.csv, schema.json, meta.json, docs/,
                         stats.json (after preprocessing), extracted.csv
      models/<name>/     params.json, train_config.json, stats.json, schema.json
      reports/           <name>.json plus latest.json (copy of most recent)
      configs/           saved run configs

Artifacts carry no timestamps and are written with sorted keys, so re-running
a command with the same inputs reproduces files byte for byte.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

from .cbm import CbmModel, TrainConfig
from .cohort_io import load_cohort, load_extracted, apply_extracted
from .preprocess import PreprocessStats
from .schema import Cohort, load_schema_file, save_schema_file, schema_hash


@dataclass(frozen=True)
class Workspace:
    root: str

    @classmethod
    def from_env(cls, root: str | None = None) -> "Workspace":
        return cls(root or os.environ.get("CBMW_WORKSPACE", "workspace"))

    def ensure(self) -> "Workspace":
        for d in (self.cohorts_dir, self.models_dir, self.reports_dir,
                  self.configs_dir):
            os.makedirs(d, exist_ok=True)
        return self

    @property
    def cohorts_dir(self) -> str:
        return os.path.join(self.root, "cohorts")

    @property
    def models_dir(self) -> str:
        return os.path.join(self.root, "models")

    @property
    def reports_dir(self) -> str:
        return os.path.join(self.root, "reports")

    @property
    def configs_dir(self) -> str:
        return os.path.join(self.root, "configs")

    def cohort_path(self, name: str) -> str:
        return os.path.join(self.cohorts_dir, name)

    def model_path(self, name: str) -> str:
        return os.path.join(self.models_dir, name)

    def load_cohort(self, name: str, with_extracted: bool = True) -> Cohort:
        """Load a cohort; extracted text concepts are attached when present."""
        path = self.cohort_path(name)
        cohort = load_cohort(path)
        extracted = os.path.join(path, "extracted.csv")
        if with_extracted and os.path.exists(extracted):
            cohort = apply_extracted(cohort, load_extracted(extracted))
        return cohort

    def load_stats(self, cohort_name: str) -> PreprocessStats:
        return PreprocessStats.load(os.path.join(self.cohort_path(cohort_name),
                                                 "stats.json"))

    def save_model(self, name: str, model: CbmModel, stats: PreprocessStats,
                   feature_schema, concept_schema) -> str:
        path = self.model_path(name)
        os.makedirs(path, exist_ok=True)
        model.save(os.path.join(path, "params.json"))
        with open(os.path.join(path, "train_config.json"), "w", encoding="utf-8") as fh:
            json.dump(model.train_config.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        stats.save(os.path.join(path, "stats.json"))
        save_schema_file(os.path.join(path, "schema.json"),
                         feature_schema, concept_schema)
        return path

    def load_model(self, name: str):
        """Returns (model, stats, feature_schema, concept_schema); refuses a
        bundle whose stored schema no longer matches the model's hash."""
        path = self.model_path(name)
        model = CbmModel.load(os.path.join(path, "params.json"))
        stats = PreprocessStats.load(os.path.join(path, "stats.json"))
        fs, cs = load_schema_file(os.path.join(path, "schema.json"))
        if schema_hash(fs, cs) != model.schema_hash:
            raise ValueError(f"model {name}: schema.json does not match the "
                             f"hash the model was trained against")
        return model, stats, fs, cs

    def save_report(self, name: str, doc: dict) -> str:
        os.makedirs(self.reports_dir, exist_ok=True)
        path = os.path.join(self.reports_dir, f"{name}.json")
        payload = json.dumps(doc, indent=2, sort_keys=True) + "\n"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(payload)
        with open(os.path.join(self.reports_dir, "latest.json"), "w",
                  encoding="utf-8") as fh:
            fh.write(payload)
        return path

    def load_report(self, name: str) -> dict:
        with open(os.path.join(self.reports_dir, f"{name}.json"),
                  "r", encoding="utf-8") as fh:
            return json.load(fh)
