// Browser entry point: patient browser on the left, concept editor on the
// right. All values shown come from service responses held in ApiClient.log;
// this module only renders them.

import { ApiClient, ApiError } from "./api.js";
import {
  correlatedBystanders,
  fmtDelta,
  fmtProb,
  fmtValue,
  statusClass,
  STATUS_GLOSSARY,
} from "./format.js";
import { EditSession } from "./session.js";
import type {
  CorrelationsResponse,
  InterveneResponse,
  ModelMeta,
  PatientRow,
  ValueSpec,
} from "./types.js";

type StatusFilter = "ALL" | "TP" | "FP" | "TN" | "FN";

const apiBase =
  new URLSearchParams(window.location.search).get("api") ?? "";
const api = new ApiClient(apiBase);

let meta: ModelMeta;
let correlations: CorrelationsResponse;
let patients: PatientRow[] = [];
let statusFilter: StatusFilter = "ALL";
let splitFilter = "test";
let session: EditSession | null = null;
let lastPreview: InterveneResponse | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function button(label: string, cls: string, onClick: () => void): HTMLButtonElement {
  const b = document.createElement("button");
  b.textContent = label;
  b.className = cls;
  b.addEventListener("click", onClick);
  return b;
}

// ---------------------------------------------------------------- browser

function renderFilters(): void {
  const bar = el("filters");
  bar.replaceChildren();
  (["ALL", "TP", "FP", "TN", "FN"] as StatusFilter[]).forEach((s) => {
    const b = button(s, statusFilter === s ? "filter active" : "filter", () => {
      statusFilter = s;
      renderFilters();
      renderPatients();
    });
    if (s !== "ALL") b.title = STATUS_GLOSSARY[s];
    bar.appendChild(b);
  });
  const splits = ["train", "validation", "test", "all"];
  const sel = document.createElement("select");
  splits.forEach((s) => {
    const o = document.createElement("option");
    o.value = s;
    o.textContent = `split: ${s}`;
    if (s === splitFilter) o.selected = true;
    sel.appendChild(o);
  });
  sel.addEventListener("change", () => {
    splitFilter = sel.value;
    renderPatients();
  });
  bar.appendChild(sel);
}

function renderPatients(): void {
  const rows = patients.filter(
    (p) =>
      (statusFilter === "ALL" || p.status === statusFilter) &&
      (splitFilter === "all" || p.split === splitFilter),
  );
  el("patient-count").textContent = `${rows.length} patients`;
  const body = el("patient-rows");
  body.replaceChildren();
  rows.forEach((p) => {
    const tr = document.createElement("tr");
    tr.className = session?.patient.id === p.id ? "selected" : "";
    const status = `<td><span class="badge ${statusClass(p.status)}" title="${
      STATUS_GLOSSARY[p.status]
    }">${p.status}</span></td>`;
    tr.innerHTML =
      `<td>${p.id}</td><td>${p.split}</td><td>${p.y}</td>` +
      `<td>${fmtProb(p.prob)}</td><td>${p.predicted}</td>${status}`;
    tr.addEventListener("click", () => openPatient(p.id));
    body.appendChild(tr);
  });
}

async function openPatient(id: string): Promise<void> {
  try {
    const detail = await api.patient(id);
    session = new EditSession(api, detail);
    lastPreview = null;
    setError("");
    renderPatients();
    renderEditor();
  } catch (err) {
    setError(describe(err));
  }
}

// ----------------------------------------------------------------- editor

function setError(msg: string): void {
  const box = el("error");
  box.textContent = msg;
  box.style.display = msg ? "block" : "none";
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `service rejected the request: ${err.detail}`;
  return err instanceof Error ? err.message : String(err);
}

function specLabel(v: ValueSpec): string {
  return typeof v === "number" ? fmtValue(v) : v;
}

function renderEditor(): void {
  const panel = el("editor");
  if (!session) {
    panel.replaceChildren();
    el("editor-empty").style.display = "block";
    return;
  }
  el("editor-empty").style.display = "none";
  const s = session;
  const wc = s.workingCopy;
  panel.replaceChildren();

  const head = document.createElement("div");
  head.className = "editor-head";
  head.innerHTML =
    `<h2>${s.patient.id} <small>(${s.patient.split}, label ${s.patient.y})</small></h2>` +
    `<div class="pred">prediction <b>${fmtProb(wc.prediction.prob)}</b> ` +
    `→ label <b>${wc.prediction.label}</b> <small>from ${wc.source}</small></div>`;
  panel.appendChild(head);

  panel.appendChild(renderModeBar());
  panel.appendChild(renderConceptTable());
  panel.appendChild(renderActions());
  panel.appendChild(renderPreview());
  panel.appendChild(renderHistory());
}

function renderModeBar(): HTMLElement {
  const s = session!;
  const bar = document.createElement("div");
  bar.className = "mode-bar";
  (["independent", "correlated"] as const).forEach((m) => {
    const lab = document.createElement("label");
    const r = document.createElement("input");
    r.type = "radio";
    r.name = "mode";
    r.checked = s.mode === m;
    r.addEventListener("change", () => {
      s.mode = m;
      renderEditor();
    });
    lab.appendChild(r);
    lab.appendChild(document.createTextNode(` ${m}`));
    bar.appendChild(lab);
  });
  if (s.mode === "correlated") {
    const sel = document.createElement("select");
    (["all", "tabular"] as const).forEach((p) => {
      const o = document.createElement("option");
      o.value = p;
      o.textContent = `propagate: ${p}`;
      if (s.propagate === p) o.selected = true;
      sel.appendChild(o);
    });
    sel.addEventListener("change", () => {
      s.propagate = sel.value as "all" | "tabular";
    });
    bar.appendChild(sel);
  }
  return bar;
}

function renderConceptTable(): HTMLElement {
  const s = session!;
  const wc = s.workingCopy;
  const table = document.createElement("table");
  table.className = "concepts";
  table.innerHTML =
    "<thead><tr><th>concept</th><th>value</th><th>edit</th>" +
    "<th>quick set</th><th>staged</th></tr></thead>";
  const body = document.createElement("tbody");
  meta.concept_names.forEach((name, i) => {
    const isText = i >= meta.n_tabular;
    const isBinary = isText || meta.binary_mask[i];
    const tr = document.createElement("tr");
    if (isText) tr.className = "text-concept";

    const nameCell = document.createElement("td");
    nameCell.textContent = name + (isText ? " (text)" : "");
    tr.appendChild(nameCell);

    const valCell = document.createElement("td");
    valCell.textContent = fmtValue(wc.bottleneck[name]);
    tr.appendChild(valCell);

    const editCell = document.createElement("td");
    if (isBinary) {
      const box = document.createElement("input");
      box.type = "checkbox";
      box.checked = wc.bottleneck[name] >= 0.5;
      box.addEventListener("change", () => {
        s.stage(name, box.checked ? 1 : 0);
        renderEditor();
      });
      editCell.appendChild(box);
    } else {
      const slider = document.createElement("input");
      slider.type = "range";
      slider.min = "0";
      slider.max = "1";
      slider.step = "0.01";
      slider.value = String(wc.bottleneck[name]);
      slider.addEventListener("change", () => {
        s.stage(name, Number(slider.value));
        renderEditor();
      });
      editCell.appendChild(slider);
    }
    tr.appendChild(editCell);

    const quick = document.createElement("td");
    quick.className = "quick";
    const sources: [string, ValueSpec, number | undefined][] = [
      ["true", "true", s.patient.concepts_true[name]],
      ["mean", "mean", meta.concept_mean[name]],
      ["median", "median", meta.concept_median[name]],
    ];
    sources.forEach(([label, spec, shown]) => {
      if (label === "true" && shown === undefined) return;
      const b = button(
        shown === undefined ? label : `${label} ${fmtValue(shown)}`,
        "quick-set",
        () => {
          s.stage(name, spec);
          renderEditor();
        },
      );
      quick.appendChild(b);
    });
    tr.appendChild(quick);

    const staged = document.createElement("td");
    const spec = s.pending[name];
    if (spec !== undefined) {
      staged.innerHTML = `<span class="chip">${specLabel(spec)}</span>`;
      staged.appendChild(button("x", "unstage", () => {
        s.unstage(name);
        renderEditor();
      }));
    } else if (name in s.committedAssignments) {
      staged.innerHTML = `<span class="chip applied">applied ${fmtValue(
        s.committedAssignments[name],
      )}</span>`;
    }
    tr.appendChild(staged);
    body.appendChild(tr);
  });
  table.appendChild(body);
  return table;
}

function renderActions(): HTMLElement {
  const s = session!;
  const bar = document.createElement("div");
  bar.className = "actions";
  const stagedCount = Object.keys(s.pending).length;

  const previewBtn = button(`preview (dry run)`, "primary", async () => {
    setError("");
    try {
      lastPreview = await s.preview();
    } catch (err) {
      setError(describe(err));
    }
    renderEditor();
  });
  previewBtn.disabled = s.busy || !s.hasWork;

  const applyBtn = button("apply", "primary", async () => {
    setError("");
    try {
      await s.apply();
      lastPreview = null;
    } catch (err) {
      setError(describe(err));
    }
    renderEditor();
  });
  applyBtn.disabled = s.busy || !s.hasWork;

  const revertBtn = button("revert all", "", () => {
    s.revert();
    lastPreview = null;
    renderEditor();
  });

  bar.appendChild(previewBtn);
  bar.appendChild(applyBtn);
  bar.appendChild(revertBtn);
  const note = document.createElement("span");
  note.className = "staged-note";
  note.textContent = stagedCount
    ? `${stagedCount} concept(s) staged`
    : "stage an edit to enable preview/apply";
  bar.appendChild(note);
  return bar;
}

function renderPreview(): HTMLElement {
  const s = session!;
  const box = document.createElement("div");
  box.className = "preview";
  if (!lastPreview) {
    if (s.mode === "correlated" && Object.keys(s.pending).length) {
      box.appendChild(renderCorrelationHint(Object.keys(s.pending)));
    }
    return box;
  }
  const r = lastPreview;
  const h = document.createElement("h3");
  h.textContent = `dry-run result (${r.mode})`;
  box.appendChild(h);
  const p = document.createElement("div");
  p.innerHTML =
    `prob ${fmtProb(r.pre.prob)} → <b>${fmtProb(r.post.prob)}</b>, ` +
    `label ${r.pre.label} → <b>${r.post.label}</b>`;
  box.appendChild(p);

  const deltas = Object.entries(r.deltas);
  const list = document.createElement("ul");
  list.className = "deltas";
  if (!deltas.length) {
    const li = document.createElement("li");
    li.textContent = "no concept changes (edits equal current values)";
    list.appendChild(li);
  }
  deltas.forEach(([name, d]) => {
    const li = document.createElement("li");
    const main = name in r.assignments ? " (edited)" : " (propagated)";
    li.innerHTML = `${name}${main}: ${fmtValue(r.bottleneck_pre[name])} → ` +
      `${fmtValue(r.bottleneck_post[name])} <span class="delta">${fmtDelta(d)}</span>`;
    list.appendChild(li);
  });
  box.appendChild(list);
  if (r.mode === "correlated") {
    box.appendChild(renderCorrelationHint(Object.keys(r.assignments)));
  }
  return box;
}

function renderCorrelationHint(mains: string[]): HTMLElement {
  const div = document.createElement("div");
  div.className = "corr-hint";
  const rows = correlatedBystanders(correlations, mains);
  if (!rows.length) return div;
  const h = document.createElement("h4");
  h.textContent = "train-split correlations with the edited concepts";
  div.appendChild(h);
  const ul = document.createElement("ul");
  rows.forEach((row) => {
    const li = document.createElement("li");
    li.textContent = `${row.name} ~ ${row.main}: ${fmtValue(row.corr)}`;
    ul.appendChild(li);
  });
  div.appendChild(ul);
  return div;
}

function renderHistory(): HTMLElement {
  const s = session!;
  const box = document.createElement("div");
  box.className = "history";
  const h = document.createElement("h3");
  h.textContent = `session history (${s.history.length})`;
  box.appendChild(h);
  const ul = document.createElement("ul");
  s.replay()
    .slice(1)
    .forEach((step, i) => {
      const entry = s.history[i];
      const li = document.createElement("li");
      const mains = Object.keys(entry.response.assignments).join(", ");
      li.innerHTML =
        `#${entry.seq} [${entry.mode}] ${mains}: ` +
        `prob ${fmtProb(entry.response.pre.prob)} → ` +
        `<b>${fmtProb(step.prediction.prob)}</b>`;
      ul.appendChild(li);
    });
  box.appendChild(ul);
  return box;
}

// ------------------------------------------------------------------ boot

function renderGlossary(): void {
  const dl = el("glossary-list");
  const terms: [string, string][] = [
    ["bottleneck", "the named concept values the final predictor sees; tabular concepts are predicted from structured features, text concepts are read from the discharge summary"],
    ["independent", "write the edited concepts, leave every other concept untouched"],
    ["correlated", "also shift other concepts by their train-split correlation with the edited ones, clipped to [0, 1]"],
    ["true / mean / median", "value sources resolved by the service: the patient's ground truth, or the train-split statistic"],
    ["dry run", "the service computes the full intervention result without keeping anything; apply sends the same request and the session keeps the response"],
    ...Object.entries(STATUS_GLOSSARY),
  ];
  dl.replaceChildren();
  terms.forEach(([t, d]) => {
    const dt = document.createElement("dt");
    dt.textContent = t;
    const dd = document.createElement("dd");
    dd.textContent = d;
    dl.appendChild(dt);
    dl.appendChild(dd);
  });
}

async function boot(): Promise<void> {
  try {
    meta = await api.meta();
    correlations = await api.correlations();
    patients = (await api.patients()).patients;
    el("model-info").textContent =
      `model ${meta.model} on cohort ${meta.cohort} ` +
      `(${meta.context ? "context-aware" : "tabular only"}, ` +
      `schema ${meta.schema_hash.slice(0, 12)})`;
    renderFilters();
    renderPatients();
    renderGlossary();
  } catch (err) {
    setError(describe(err));
  }
}

boot();
