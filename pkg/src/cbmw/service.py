"""Stateless HTTP service over one trained model and one cohort.

Each request recomputes predictions from the stored artifacts; nothing is
mutated server-side, so an intervention with dry_run true or false returns the
same payload and the client decides what to keep. Requests may carry the
schema hash they were built against; a mismatch is rejected with 409 before
any computation.
"""

from __future__ import annotations

import os

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .intervene import edit_bottleneck
from .workspace import Workspace


class PredictRequest(BaseModel):
    patient_id: str
    schema_hash: str | None = None


class InterveneRequest(BaseModel):
    patient_id: str
    assignments: dict[str, float | str]
    mode: str = "correlated"
    propagate: str = "all"
    dry_run: bool = False
    schema_hash: str | None = None


def create_app(ws: Workspace, model_name: str, cohort_name: str,
               frontend_dir: str | None = None) -> FastAPI:
    model, stats, fs, cs = ws.load_model(model_name)
    cohort = ws.load_cohort(cohort_name)
    records = {r.id: r for r in cohort.records}
    text_names = list(model.text_names)

    from .cbm import predict_split
    all_probs, _ = predict_split(model, cohort)
    pred_by_id = {r.id: (float(p), int(p >= 0.5))
                  for r, p in zip(cohort.records, all_probs)}

    app = FastAPI(title="cbmw")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"])

    def check_hash(client_hash: str | None) -> None:
        if client_hash is not None and client_hash != model.schema_hash:
            raise HTTPException(
                status_code=409,
                detail=f"schema hash mismatch: model has {model.schema_hash}")

    def get_record(patient_id: str):
        r = records.get(patient_id)
        if r is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown patient {patient_id}")
        return r

    def text_row(r) -> np.ndarray:
        vals = []
        for n in text_names:
            if n in r.c_text:
                vals.append(r.c_text[n])
            elif n in r.c_true:
                vals.append(r.c_true[n])
            else:
                raise HTTPException(status_code=422,
                                    detail=f"patient {r.id} has no value for "
                                           f"text concept {n}")
        return np.array(vals, dtype=np.float64)

    def bottleneck_row(r) -> np.ndarray:
        c_text = text_row(r).reshape(1, -1) if model.context and text_names else None
        return model.bottleneck(r.x.reshape(1, -1), c_text)

    def prediction_block(b: np.ndarray) -> dict:
        prob = float(model.predict_from_bottleneck(b)[0])
        return {"prob": prob, "label": int(prob >= 0.5)}

    def named(b: np.ndarray) -> dict:
        return {n: float(v) for n, v in zip(model.concept_names, b[0])}

    @app.get("/patients")
    def list_patients():
        rows = []
        for r in cohort.records:
            prob, label = pred_by_id[r.id]
            status = ("TP" if label else "FN") if r.y == 1 else \
                ("FP" if label else "TN")
            rows.append({"id": r.id, "split": r.split, "y": r.y,
                         "prob": prob, "predicted": label, "status": status})
        return {"patients": rows, "schema_hash": model.schema_hash}

    @app.get("/patients/{patient_id}")
    def get_patient(patient_id: str):
        r = get_record(patient_id)
        b = bottleneck_row(r)
        return {
            "id": r.id, "split": r.split, "y": r.y,
            "features": {n: float(v) for n, v in zip(fs.names, r.x)},
            "concepts_true": {k: float(v) for k, v in sorted(r.c_true.items())},
            "concepts_text": {k: float(v) for k, v in sorted(r.c_text.items())},
            "documents": dict(r.documents),
            "bottleneck": named(b),
            "prediction": prediction_block(b),
            "schema_hash": model.schema_hash,
        }

    @app.post("/predict")
    def predict(req: PredictRequest):
        check_hash(req.schema_hash)
        r = get_record(req.patient_id)
        b = bottleneck_row(r)
        return {"patient_id": r.id, "prediction": prediction_block(b),
                "bottleneck": named(b), "schema_hash": model.schema_hash}

    @app.post("/intervene")
    def intervene(req: InterveneRequest):
        check_hash(req.schema_hash)
        r = get_record(req.patient_id)
        if not req.assignments:
            raise HTTPException(status_code=422, detail="assignments is empty")
        b_pre = bottleneck_row(r)
        resolved = {}
        for name, v in req.assignments.items():
            if name not in model.concept_names:
                raise HTTPException(status_code=422,
                                    detail=f"unknown concept {name}")
            if isinstance(v, str):
                if v == "true":
                    if name not in r.c_true:
                        raise HTTPException(status_code=422,
                                            detail=f"no ground truth for {name}")
                    resolved[name] = float(r.c_true[name])
                elif v == "median":
                    resolved[name] = float(stats.concept_median[name])
                elif v == "mean":
                    resolved[name] = float(stats.concept_mean[name])
                else:
                    raise HTTPException(status_code=422,
                                        detail=f"bad value spec {v!r} for {name}")
            else:
                v = float(v)
                if not (0.0 <= v <= 1.0):
                    raise HTTPException(status_code=422,
                                        detail=f"value for {name} must be in "
                                               f"[0, 1], got {v}")
                resolved[name] = v
        if req.mode not in ("independent", "correlated"):
            raise HTTPException(status_code=422,
                                detail=f"bad mode {req.mode!r}")
        if req.propagate not in ("all", "tabular"):
            raise HTTPException(status_code=422,
                                detail=f"bad propagate {req.propagate!r}")
        b_post = edit_bottleneck(model, stats, b_pre, resolved, req.mode,
                                 req.propagate)
        pre = named(b_pre)
        post = named(b_post)
        deltas = {n: post[n] - pre[n] for n in model.concept_names
                  if post[n] != pre[n]}
        return {
            "patient_id": r.id, "mode": req.mode, "dry_run": req.dry_run,
            "assignments": resolved,
            "pre": prediction_block(b_pre), "post": prediction_block(b_post),
            "bottleneck_pre": pre, "bottleneck_post": post,
            "deltas": deltas, "schema_hash": model.schema_hash,
        }

    @app.get("/model/meta")
    def model_meta():
        return {
            "model": model_name, "cohort": cohort_name,
            "context": model.context,
            "concept_names": list(model.concept_names),
            "tabular_names": list(model.tabular_names),
            "text_names": text_names,
            "n_tabular": model.n_tabular,
            "binary_mask": [bool(v) for v in model.binary_mask],
            "feature_names": list(fs.names),
            # scaled-space train statistics backing the editor's quick-set
            # value sources
            "concept_mean": {n: float(stats.concept_mean[n])
                             for n in model.concept_names},
            "concept_median": {n: float(stats.concept_median[n])
                               for n in model.concept_names},
            "train_config": model.train_config.to_dict(),
            "schema_hash": model.schema_hash,
        }

    @app.get("/model/correlations")
    def model_correlations():
        corr = stats.corr_submatrix(model.concept_names)
        return {"names": list(model.concept_names),
                "matrix": corr.tolist(),
                "schema_hash": model.schema_hash}

    @app.get("/reports/latest")
    def latest_report():
        path = os.path.join(ws.reports_dir, "latest.json")
        if not os.path.exists(path):
            raise HTTPException(status_code=404, detail="no reports yet")
        import json
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    if frontend_dir and os.path.isdir(frontend_dir):
        from fastapi.staticfiles import StaticFiles
        app.mount("/ui", StaticFiles(directory=frontend_dir, html=True),
                  name="ui")
    return app
