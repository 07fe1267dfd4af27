// Edit session for one patient. The service is stateless (an intervention
// never mutates anything server-side), so the session owns the what-if state:
// the working copy is always the last server response, verbatim, and every
// request re-sends the union of previously applied assignments with the
// currently staged ones. No concept value or probability is ever computed
// here.

import { ApiClient } from "./api.js";
import type {
  InterveneResponse,
  InterventionMode,
  PatientDetail,
  PredictionBlock,
  PropagateScope,
  ValueSpec,
} from "./types.js";

export const HISTORY_LIMIT = 50;

export interface HistoryEntry {
  seq: number;
  mode: InterventionMode;
  propagate: PropagateScope;
  /** The staged specs this apply added on top of the committed ones. */
  staged: Record<string, ValueSpec>;
  /** Full server response of the wet run. */
  response: InterveneResponse;
}

/** What the editor renders: concept values and the prediction, both taken
 * verbatim from one server payload. */
export interface WorkingCopy {
  bottleneck: Record<string, number>;
  prediction: PredictionBlock;
  /** Where the numbers came from. */
  source: "patient" | "intervention";
}

export class EditSession {
  mode: InterventionMode = "correlated";
  propagate: PropagateScope = "all";

  private staged = new Map<string, ValueSpec>();
  private committed: Record<string, number> = {};
  private view: WorkingCopy;
  private inflight = false;
  private applySeq = 0;
  readonly history: HistoryEntry[] = [];

  constructor(
    private readonly api: ApiClient,
    readonly patient: PatientDetail,
  ) {
    this.view = {
      bottleneck: patient.bottleneck,
      prediction: patient.prediction,
      source: "patient",
    };
  }

  get workingCopy(): WorkingCopy {
    return this.view;
  }

  get busy(): boolean {
    return this.inflight;
  }

  /** Staged specs, in staging order. */
  get pending(): Record<string, ValueSpec> {
    return Object.fromEntries(this.staged);
  }

  /** Resolved assignments carried over from previous applies. */
  get committedAssignments(): Record<string, number> {
    return { ...this.committed };
  }

  stage(concept: string, value: ValueSpec): void {
    this.staged.set(concept, value);
  }

  unstage(concept: string): void {
    this.staged.delete(concept);
  }

  clearStaged(): void {
    this.staged.clear();
  }

  get hasWork(): boolean {
    return this.staged.size > 0 || Object.keys(this.committed).length > 0;
  }

  private requestAssignments(): Record<string, ValueSpec> {
    return { ...this.committed, ...this.pending };
  }

  private async send(dryRun: boolean): Promise<InterveneResponse> {
    if (this.inflight) {
      throw new Error("a request is already in flight");
    }
    this.inflight = true;
    try {
      return await this.api.intervene({
        patient_id: this.patient.id,
        assignments: this.requestAssignments(),
        mode: this.mode,
        propagate: this.propagate,
        dry_run: dryRun,
        schema_hash: this.patient.schema_hash,
      });
    } finally {
      this.inflight = false;
    }
  }

  /** Dry run with the current staging; leaves the session untouched. */
  preview(): Promise<InterveneResponse> {
    return this.send(true);
  }

  /** Wet run: advances the working copy to the response, folds the resolved
   * assignments into the committed set, clears staging, records history. */
  async apply(): Promise<InterveneResponse> {
    const staged = this.pending;
    const response = await this.send(false);
    this.committed = { ...this.committed, ...response.assignments };
    this.staged.clear();
    this.view = {
      bottleneck: response.bottleneck_post,
      prediction: response.post,
      source: "intervention",
    };
    this.history.push({
      seq: this.applySeq++,
      mode: response.mode,
      propagate: this.propagate,
      staged,
      response,
    });
    if (this.history.length > HISTORY_LIMIT) {
      this.history.splice(0, this.history.length - HISTORY_LIMIT);
    }
    return response;
  }

  /** Drop all edits; the working copy falls back to the patient payload. */
  revert(): void {
    this.staged.clear();
    this.committed = {};
    this.view = {
      bottleneck: this.patient.bottleneck,
      prediction: this.patient.prediction,
      source: "patient",
    };
  }

  /** The sequence of working copies this session went through, rebuilt purely
   * from the stored server responses. */
  replay(): WorkingCopy[] {
    const steps: WorkingCopy[] = [
      {
        bottleneck: this.patient.bottleneck,
        prediction: this.patient.prediction,
        source: "patient",
      },
    ];
    for (const entry of this.history) {
      steps.push({
        bottleneck: entry.response.bottleneck_post,
        prediction: entry.response.post,
        source: "intervention",
      });
    }
    return steps;
  }
}
