/** Pure shaping of the service report into renderable table rows.
 *
 * The UI never computes statistics itself; every number comes from the
 * service report.
 */

import { StudyReport } from "./api.js";

export const ROW_ORDER = [
  "true_positives",
  "false_positives",
  "true_negatives",
  "false_negatives",
] as const;

export const ROW_TITLES: Record<(typeof ROW_ORDER)[number], string> = {
  true_positives: "True Positives",
  false_positives: "False Positives",
  true_negatives: "True Negatives",
  false_negatives: "False Negatives",
};

export interface ReaderTableView {
  readerId: string;
  partial: boolean;
  groups: string[];
  rows: { title: string; cells: string[] }[];
}

export function readerTableView(report: StudyReport, readerId: string): ReaderTableView {
  const table = report.confusion_tables[readerId];
  if (!table) {
    throw new Error(`no confusion table for reader ${readerId}`);
  }
  const groups = Object.keys(table.groups);
  const ordered = [
    "original",
    ...groups.filter((g) => g !== "original").sort(),
  ].filter((g) => groups.includes(g));
  const rows = ROW_ORDER.map((row) => ({
    title: ROW_TITLES[row],
    cells: ordered.map((g) => `${(table.outcomes[row][g] ?? 0).toFixed(0)}%`),
  }));
  return { readerId, partial: table.partial, groups: ordered, rows };
}

export function kappaLines(report: StudyReport): string[] {
  return Object.entries(report.kappa).map(
    ([pair, value]) => `${pair.replace("|", " vs ")}: κ = ${value.toFixed(3)}`,
  );
}

export function progressSummary(report: StudyReport): string[] {
  return report.readers.map((reader) => {
    const done = report.complete[reader] ? "complete" : "partial";
    return `${reader}: ${report.progress[reader]}/${report.n_items} (${done})`;
  });
}
