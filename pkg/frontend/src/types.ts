// Response shapes of the model service. Field names mirror the JSON payloads
// exactly; the UI never derives numbers from these, it only displays them.

export interface PatientRow {
  id: string;
  split: string;
  y: number;
  prob: number;
  predicted: number;
  status: "TP" | "FP" | "TN" | "FN";
}

export interface PatientsResponse {
  patients: PatientRow[];
  schema_hash: string;
}

export interface PredictionBlock {
  prob: number;
  label: number;
}

export interface PatientDetail {
  id: string;
  split: string;
  y: number;
  features: Record<string, number>;
  concepts_true: Record<string, number>;
  concepts_text: Record<string, number>;
  documents: Record<string, string>;
  bottleneck: Record<string, number>;
  prediction: PredictionBlock;
  schema_hash: string;
}

export interface PredictResponse {
  patient_id: string;
  prediction: PredictionBlock;
  bottleneck: Record<string, number>;
  schema_hash: string;
}

/** Value for one staged concept: a number in [0,1] or a server-resolved
 * source keyword. */
export type ValueSpec = number | "true" | "median" | "mean";

export type InterventionMode = "independent" | "correlated";
export type PropagateScope = "all" | "tabular";

export interface InterveneRequestBody {
  patient_id: string;
  assignments: Record<string, ValueSpec>;
  mode: InterventionMode;
  propagate: PropagateScope;
  dry_run: boolean;
  schema_hash?: string;
}

export interface InterveneResponse {
  patient_id: string;
  mode: InterventionMode;
  dry_run: boolean;
  /** Assignments with every value source resolved to a number. */
  assignments: Record<string, number>;
  pre: PredictionBlock;
  post: PredictionBlock;
  bottleneck_pre: Record<string, number>;
  bottleneck_post: Record<string, number>;
  /** Only concepts whose value actually changed. */
  deltas: Record<string, number>;
  schema_hash: string;
}

export interface ModelMeta {
  model: string;
  cohort: string;
  context: boolean;
  concept_names: string[];
  tabular_names: string[];
  text_names: string[];
  n_tabular: number;
  binary_mask: boolean[];
  feature_names: string[];
  concept_mean: Record<string, number>;
  concept_median: Record<string, number>;
  train_config: Record<string, unknown>;
  schema_hash: string;
}

export interface CorrelationsResponse {
  names: string[];
  matrix: number[][];
  schema_hash: string;
}
