// In-memory stand-in for the model service, wired into ApiClient as a fetch
// function. It mirrors the server's intervention semantics (stateless, value
// resolution, correlated propagation, 4xx validation) so session tests
// exercise the real request/response cycle.

import type { FetchLike, MinimalResponse } from "../src/api.js";
import type { ValueSpec } from "../src/types.js";

export const SCHEMA_HASH = "fake-hash-1";

export interface FakePatient {
  id: string;
  split: string;
  y: number;
  bottleneck: Record<string, number>;
  c_true: Record<string, number>;
}

export interface FakeState {
  names: string[];
  nTabular: number;
  binaryMask: boolean[];
  weights: number[];
  bias: number;
  corr: number[][];
  mean: Record<string, number>;
  median: Record<string, number>;
  patients: FakePatient[];
}

export function defaultState(): FakeState {
  return {
    names: ["c0", "c1", "c2"],
    nTabular: 2,
    binaryMask: [false, true],
    weights: [0.5, 0.3, 0.2],
    bias: 0.05,
    corr: [
      [1.0, 0.8, 0.3],
      [0.8, 1.0, 0.1],
      [0.3, 0.1, 1.0],
    ],
    mean: { c0: 0.45, c1: 0.6, c2: 0.4 },
    median: { c0: 0.5, c1: 1.0, c2: 0.0 },
    patients: [
      {
        id: "p1",
        split: "test",
        y: 0,
        bottleneck: { c0: 0.4, c1: 1.0, c2: 0.0 },
        c_true: { c0: 0.9, c1: 0.0, c2: 0.0 },
      },
      {
        id: "p2",
        split: "test",
        y: 1,
        bottleneck: { c0: 0.2, c1: 0.0, c2: 1.0 },
        c_true: { c0: 0.8, c1: 1.0, c2: 1.0 },
      },
    ],
  };
}

const clamp01 = (v: number) => Math.min(1, Math.max(0, v));

function predict(state: FakeState, b: Record<string, number>) {
  let z = state.bias;
  state.names.forEach((n, i) => {
    z += state.weights[i] * b[n];
  });
  const prob = clamp01(z);
  return { prob, label: prob >= 0.5 ? 1 : 0 };
}

function respond(status: number, body: unknown): MinimalResponse {
  return {
    ok: status < 400,
    status,
    // deep copy so logged payloads are independent snapshots
    json: async () => JSON.parse(JSON.stringify(body)),
  };
}

interface InterveneBody {
  patient_id: string;
  assignments: Record<string, ValueSpec>;
  mode: string;
  propagate: string;
  dry_run: boolean;
  schema_hash?: string;
}

function intervene(state: FakeState, body: InterveneBody): MinimalResponse {
  if (body.schema_hash !== undefined && body.schema_hash !== SCHEMA_HASH) {
    return respond(409, { detail: "schema hash mismatch" });
  }
  const patient = state.patients.find((p) => p.id === body.patient_id);
  if (!patient) return respond(404, { detail: `unknown patient ${body.patient_id}` });
  const entries = Object.entries(body.assignments ?? {});
  if (!entries.length) return respond(422, { detail: "assignments is empty" });

  const resolved: Record<string, number> = {};
  for (const [name, spec] of entries) {
    if (!state.names.includes(name)) {
      return respond(422, { detail: `unknown concept ${name}` });
    }
    if (typeof spec === "string") {
      if (spec === "true") resolved[name] = patient.c_true[name];
      else if (spec === "mean") resolved[name] = state.mean[name];
      else if (spec === "median") resolved[name] = state.median[name];
      else return respond(422, { detail: `bad value spec '${spec}' for ${name}` });
    } else {
      if (!(spec >= 0 && spec <= 1)) {
        return respond(422, { detail: `value for ${name} must be in [0, 1], got ${spec}` });
      }
      resolved[name] = spec;
    }
  }
  if (body.mode !== "independent" && body.mode !== "correlated") {
    return respond(422, { detail: `bad mode '${body.mode}'` });
  }
  if (body.propagate !== "all" && body.propagate !== "tabular") {
    return respond(422, { detail: `bad propagate '${body.propagate}'` });
  }

  const pre = { ...patient.bottleneck };
  const post = { ...pre };
  if (body.mode === "correlated") {
    const limit = body.propagate === "all" ? state.names.length : state.nTabular;
    state.names.slice(0, limit).forEach((n, j) => {
      if (n in resolved) return;
      let shift = 0;
      for (const [m, target] of Object.entries(resolved)) {
        shift += state.corr[state.names.indexOf(m)][j] * (target - pre[m]);
      }
      post[n] = clamp01(pre[n] + shift);
    });
  }
  for (const [m, target] of Object.entries(resolved)) post[m] = target;

  const deltas: Record<string, number> = {};
  for (const n of state.names) {
    if (post[n] !== pre[n]) deltas[n] = post[n] - pre[n];
  }
  return respond(200, {
    patient_id: patient.id,
    mode: body.mode,
    dry_run: body.dry_run,
    assignments: resolved,
    pre: predict(state, pre),
    post: predict(state, post),
    bottleneck_pre: pre,
    bottleneck_post: post,
    deltas,
    schema_hash: SCHEMA_HASH,
  });
}

export interface FakeOptions {
  /** Awaited before each request resolves; lets tests hold requests open. */
  gate?: () => Promise<void>;
}

export function fakeService(state: FakeState, opts: FakeOptions = {}): FetchLike {
  return async (path, init) => {
    if (opts.gate) await opts.gate();
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(init.body) : undefined;

    if (method === "GET" && path === "/model/meta") {
      return respond(200, {
        model: "fake-model",
        cohort: "fake-cohort",
        context: true,
        concept_names: state.names,
        tabular_names: state.names.slice(0, state.nTabular),
        text_names: state.names.slice(state.nTabular),
        n_tabular: state.nTabular,
        binary_mask: state.binaryMask,
        feature_names: ["f0", "f1"],
        concept_mean: state.mean,
        concept_median: state.median,
        train_config: { mode: "joint" },
        schema_hash: SCHEMA_HASH,
      });
    }
    if (method === "GET" && path === "/model/correlations") {
      return respond(200, {
        names: state.names,
        matrix: state.corr,
        schema_hash: SCHEMA_HASH,
      });
    }
    if (method === "GET" && path === "/patients") {
      return respond(200, {
        patients: state.patients.map((p) => {
          const { prob, label } = predict(state, p.bottleneck);
          const status = p.y === 1 ? (label ? "TP" : "FN") : label ? "FP" : "TN";
          return { id: p.id, split: p.split, y: p.y, prob, predicted: label, status };
        }),
        schema_hash: SCHEMA_HASH,
      });
    }
    if (method === "GET" && path.startsWith("/patients/")) {
      const id = path.slice("/patients/".length);
      const p = state.patients.find((x) => x.id === id);
      if (!p) return respond(404, { detail: `unknown patient ${id}` });
      return respond(200, {
        id: p.id,
        split: p.split,
        y: p.y,
        features: { f0: 0.1, f1: 0.9 },
        concepts_true: p.c_true,
        concepts_text: {},
        documents: { discharge: "stable on room air" },
        bottleneck: p.bottleneck,
        prediction: predict(state, p.bottleneck),
        schema_hash: SCHEMA_HASH,
      });
    }
    if (method === "POST" && path === "/intervene") {
      return intervene(state, body as InterveneBody);
    }
    if (method === "POST" && path === "/predict") {
      const p = state.patients.find((x) => x.id === body.patient_id);
      if (!p) return respond(404, { detail: `unknown patient ${body.patient_id}` });
      return respond(200, {
        patient_id: p.id,
        prediction: predict(state, p.bottleneck),
        bottleneck: p.bottleneck,
        schema_hash: SCHEMA_HASH,
      });
    }
    return respond(404, { detail: `no route ${method} ${path}` });
  };
}
