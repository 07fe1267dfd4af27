// Presentation helpers. These format server-provided numbers for display and
// pick orderings; they never produce a new quantity.

import type { CorrelationsResponse } from "./types.js";

export function fmtProb(p: number): string {
  return p.toFixed(3);
}

export function fmtValue(v: number): string {
  return v.toFixed(3);
}

export function fmtDelta(d: number): string {
  const s = d.toFixed(3);
  return d > 0 ? `+${s}` : s;
}

export function statusClass(status: string): string {
  return `status-${status.toLowerCase()}`;
}

export const STATUS_GLOSSARY: Record<string, string> = {
  TP: "true positive: labeled ARDS, predicted ARDS",
  FN: "false negative: labeled ARDS, predicted no ARDS",
  FP: "false positive: labeled no ARDS, predicted ARDS",
  TN: "true negative: labeled no ARDS, predicted no ARDS",
};

export interface CorrelationRow {
  name: string;
  corr: number;
  /** The edited concept this correlation is against. */
  main: string;
}

/** For a set of edited concepts, list the other concepts ordered by the
 * strength of their correlation with any edited one. Values are copied
 * verbatim from the service's correlation matrix. */
export function correlatedBystanders(
  correlations: CorrelationsResponse,
  mains: string[],
  limit = 8,
): CorrelationRow[] {
  const { names, matrix } = correlations;
  const mainIdx = mains
    .map((m) => names.indexOf(m))
    .filter((i) => i >= 0);
  const rows: CorrelationRow[] = [];
  names.forEach((name, j) => {
    if (mains.includes(name)) return;
    let best: CorrelationRow | null = null;
    for (const i of mainIdx) {
      const corr = matrix[i][j];
      if (best === null || Math.abs(corr) > Math.abs(best.corr)) {
        best = { name, corr, main: names[i] };
      }
    }
    if (best !== null) rows.push(best);
  });
  rows.sort((a, b) => Math.abs(b.corr) - Math.abs(a.corr));
  return rows.slice(0, limit);
}
