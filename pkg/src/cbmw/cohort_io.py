"""Cohort persistence.

Layout of a cohort directory:

    cohort.csv        id,split,y,f_<feature>...,c_<concept>...
    schema.json       feature + concept schema (hashable)
    meta.json         {"preprocessed": bool}
    docs/<id>/<kind>.txt   one file per non-empty document

Missing values are empty CSV fields. Floats are written with repr so a
save/load round trip is exact and re-saves are byte-identical.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .schema import (
    Cohort,
    DOCUMENT_KINDS,
    PatientRecord,
    SchemaError,
    load_schema_file,
    save_schema_file,
)

COHORT_CSV = "cohort.csv"
SCHEMA_JSON = "schema.json"
META_JSON = "meta.json"
DOCS_DIR = "docs"


def _fmt(v: float) -> str:
    if np.isnan(v):
        return ""
    if v == int(v) and abs(v) < 1e15:
        return repr(int(v)) + ".0"
    return repr(float(v))


def save_cohort(cohort: Cohort, path: str) -> None:
    os.makedirs(path, exist_ok=True)
    fs, cs = cohort.feature_schema, cohort.concept_schema
    save_schema_file(os.path.join(path, SCHEMA_JSON), fs, cs)
    with open(os.path.join(path, META_JSON), "w", encoding="utf-8") as fh:
        json.dump({"preprocessed": cohort.preprocessed}, fh, sort_keys=True)
        fh.write("\n")

    header = ["id", "split", "y"] + [f"f_{n}" for n in fs.names] + \
             [f"c_{n}" for n in cs.names]
    with open(os.path.join(path, COHORT_CSV), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in cohort.records:
            row = [r.id, r.split, str(int(r.y))]
            row += [_fmt(v) for v in r.x]
            row += [_fmt(r.c_true[n]) if n in r.c_true else "" for n in cs.names]
            w.writerow(row)

    for r in cohort.records:
        if not r.documents:
            continue
        ddir = os.path.join(path, DOCS_DIR, r.id)
        os.makedirs(ddir, exist_ok=True)
        for kind, text in sorted(r.documents.items()):
            with open(os.path.join(ddir, f"{kind}.txt"), "w", encoding="utf-8") as fh:
                fh.write(text)


def load_cohort(path: str) -> Cohort:
    fs, cs = load_schema_file(os.path.join(path, SCHEMA_JSON))
    preprocessed = False
    meta_path = os.path.join(path, META_JSON)
    if os.path.exists(meta_path):
        with open(meta_path, "r", encoding="utf-8") as fh:
            preprocessed = bool(json.load(fh).get("preprocessed", False))

    with open(os.path.join(path, COHORT_CSV), "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expect = ["id", "split", "y"] + [f"f_{n}" for n in fs.names] + \
                 [f"c_{n}" for n in cs.names]
        if header != expect:
            raise SchemaError(
                f"cohort.csv header does not match schema.json "
                f"(got {len(header)} columns, expected {len(expect)})")
        nf, nc = fs.d, len(cs.names)
        records = []
        for row in reader:
            if len(row) != len(expect):
                raise SchemaError(f"row for id {row[0] if row else '?'} has {len(row)} fields")
            rid, split, y = row[0], row[1], int(row[2])
            x = np.array([float(v) if v else np.nan for v in row[3:3 + nf]])
            c_true = {}
            for name, v in zip(cs.names, row[3 + nf:3 + nf + nc]):
                if v:
                    c_true[name] = float(v)
            docs = _load_docs(path, rid)
            records.append(PatientRecord(rid, x, c_true, docs, y, split))
    return Cohort(fs, cs, tuple(records), preprocessed)


def _load_docs(path: str, rid: str) -> dict[str, str]:
    ddir = os.path.join(path, DOCS_DIR, rid)
    if not os.path.isdir(ddir):
        return {}
    docs = {}
    for kind in DOCUMENT_KINDS:
        fp = os.path.join(ddir, f"{kind}.txt")
        if os.path.exists(fp):
            with open(fp, "r", encoding="utf-8") as fh:
                docs[kind] = fh.read()
    return docs


def save_extracted(values: dict[str, dict[str, float]], concept_names, path: str) -> None:
    """Write extracted text-concept values as id,<concept>... with 0/1 cells.

    Row order follows the iteration order of ``values`` so generator order is
    preserved and re-runs are byte-identical.
    """
    names = list(concept_names)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id"] + names)
        for rid, vals in values.items():
            w.writerow([rid] + [str(int(vals[n])) for n in names])


def load_extracted(path: str) -> dict[str, dict[str, float]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "id":
            raise SchemaError("extracted concepts file must start with an id column")
        names = header[1:]
        out = {}
        for row in reader:
            out[row[0]] = {n: float(v) for n, v in zip(names, row[1:])}
    return out


def apply_extracted(cohort: Cohort, values: dict[str, dict[str, float]]) -> Cohort:
    """Attach extracted text-concept values to matching records."""
    text_names = {c.name for c in cohort.concept_schema.text}
    records = []
    for r in cohort.records:
        if r.id in values:
            vals = values[r.id]
            bad = set(vals) - text_names
            if bad:
                raise SchemaError(f"extracted values name unknown text concepts: {sorted(bad)}")
            records.append(PatientRecord(r.id, r.x, r.c_true, r.documents, r.y,
                                         r.split, dict(vals)))
        else:
            records.append(r)
    return cohort.with_records(records)
