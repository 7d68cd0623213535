/**
 * famseq-v1 interchange writer: manifest.json + features.csv + labels.csv,
 * byte-identical to the files the primary package writes for the same data.
 */
import { createHash } from "node:crypto";
import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { pyFloatRepr } from "./pyfloat.js";

export const FORMAT_VERSION = "famseq-v1";

export const CANONICAL_FAMILIES = [
  "first_ap_v",
  "first_ap_dv",
  "isi_shape",
  "inst_freq",
  "spiking_threshold_v",
  "spiking_peak_v",
  "spiking_width",
  "spiking_fast_trough_v",
  "spiking_upstroke_downstroke_ratio",
  "step_subthresh",
  "subthresh_norm",
  "psth",
] as const;

export const LABEL_SPACES: Record<string, readonly string[]> = {
  Mouse5: ["Lamp5", "Pvalb", "Sncg", "Sst", "Vip"],
  Aligned4: ["Lamp5", "Pvalb", "Sst", "Vip"],
};

export interface FamilyWidth {
  name: string;
  width: number;
}

export interface InterchangeCell {
  cellId: string;
  /** Concatenated per-family values in canonical order; null = missing. */
  values: (number | null)[];
  label: string;
}

export class InterchangeError extends Error {}

function columnNames(schema: FamilyWidth[]): string[] {
  const cols: string[] = [];
  for (const { name, width } of schema) {
    for (let i = 0; i < width; i++) cols.push(`${name}.${i}`);
  }
  return cols;
}

/** CSV with CRLF line endings; fields here never need quoting. */
function csvText(rows: string[][]): string {
  return rows.map((r) => r.join(",")).join("\r\n") + "\r\n";
}

function sha256(text: string): string {
  return createHash("sha256").update(text, "utf-8").digest("hex");
}

/** JSON with 2-space indent, keys sorted at every level, trailing newline. */
function manifestJson(value: unknown): string {
  const sortKeys = (_k: string, v: unknown) =>
    v !== null && typeof v === "object" && !Array.isArray(v)
      ? Object.fromEntries(
          Object.keys(v as object)
            .sort()
            .map((k) => [k, (v as Record<string, unknown>)[k]]),
        )
      : v;
  return JSON.stringify(value, sortKeys, 2) + "\n";
}

export function writeDataset(
  outDir: string,
  schema: FamilyWidth[],
  cells: InterchangeCell[],
  species: string,
  labelSpace: string,
): string[] {
  const classes = LABEL_SPACES[labelSpace];
  if (!classes) throw new InterchangeError(`unknown label space ${labelSpace}`);
  const cols = columnNames(schema);
  const totalWidth = cols.length;

  const featureRows: string[][] = [["cell_id", ...cols]];
  const labelRows: string[][] = [["cell_id", "label"]];
  for (const cell of cells) {
    if (cell.values.length !== totalWidth) {
      throw new InterchangeError(
        `cell ${cell.cellId}: ${cell.values.length} values, schema width ${totalWidth}`,
      );
    }
    if (!classes.includes(cell.label)) {
      throw new InterchangeError(
        `cell ${cell.cellId}: label ${cell.label} outside ${labelSpace}`,
      );
    }
    featureRows.push([
      cell.cellId,
      ...cell.values.map((v) => (v === null ? "" : pyFloatRepr(v))),
    ]);
    labelRows.push([cell.cellId, cell.label]);
  }

  const features = csvText(featureRows);
  const labels = csvText(labelRows);
  const manifest = {
    format_version: FORMAT_VERSION,
    species,
    label_space: labelSpace,
    schema: { families: schema.map(({ name, width }) => ({ name, width })) },
    n_cells: cells.length,
    files: { features: "features.csv", labels: "labels.csv" },
    checksums: { features: sha256(features), labels: sha256(labels) },
  };

  mkdirSync(outDir, { recursive: true });
  writeFileSync(join(outDir, "features.csv"), features, "utf-8");
  writeFileSync(join(outDir, "labels.csv"), labels, "utf-8");
  writeFileSync(join(outDir, "manifest.json"), manifestJson(manifest), "utf-8");
  return ["manifest.json", "features.csv", "labels.csv"];
}
