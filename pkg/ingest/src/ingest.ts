/**
 * Converts pre-extracted patch-clamp feature records plus a subclass
 * metadata table into a famseq-v1 dataset.
 *
 * Inclusion rules: a cell is kept only if it has a transcriptomic subclass
 * label and at least one usable current-clamp step sweep. Dropped cells are
 * logged with their reason. Output rows are ordered by cell_id, and the
 * per-family widths are taken from the records themselves.
 */
import { readFileSync } from "node:fs";
import { dirname, resolve } from "node:path";

import {
  CANONICAL_FAMILIES,
  FamilyWidth,
  InterchangeCell,
  writeDataset,
} from "./interchange.js";

export class IngestError extends Error {}

export interface IngestManifest {
  /** Feature extract files (JSON), paths relative to the manifest. */
  files: string[];
  /** cell_id -> subclass metadata table (CSV). */
  metadata: string;
  species: string;
  labelSpace: string;
  out: string;
}

export interface CellRecord {
  cellId: string;
  usableSweeps: number;
  /** Per-family feature arrays in canonical family order; null = missing. */
  features: Record<string, (number | null)[]>;
}

export interface DropRecord {
  cellId: string;
  reason: string;
}

export interface IngestResult {
  outDir: string;
  written: string[];
  kept: string[];
  dropped: DropRecord[];
}

export function loadIngestManifest(path: string): IngestManifest {
  const raw = JSON.parse(readFileSync(path, "utf-8"));
  for (const key of ["files", "metadata", "species", "label_space", "out"]) {
    if (!(key in raw)) throw new IngestError(`manifest missing '${key}'`);
  }
  const base = dirname(resolve(path));
  return {
    files: (raw.files as string[]).map((f) => resolve(base, f)),
    metadata: resolve(base, raw.metadata),
    species: raw.species,
    labelSpace: raw.label_space,
    out: resolve(base, raw.out),
  };
}

export function readMetadata(path: string): Map<string, string> {
  const lines = readFileSync(path, "utf-8").split(/\r?\n/).filter(Boolean);
  const header = lines[0]?.split(",");
  if (!header || header[0] !== "cell_id" || !header.includes("subclass")) {
    throw new IngestError("metadata must have cell_id and subclass columns");
  }
  const subclassCol = header.indexOf("subclass");
  const table = new Map<string, string>();
  for (const line of lines.slice(1)) {
    const fields = line.split(",");
    const cellId = fields[0];
    if (table.has(cellId)) {
      throw new IngestError(`metadata cell_id collision: ${cellId}`);
    }
    table.set(cellId, fields[subclassCol] ?? "");
  }
  return table;
}

export function readCellRecords(files: string[]): CellRecord[] {
  const records: CellRecord[] = [];
  const seen = new Set<string>();
  for (const file of files) {
    let parsed: { cells?: unknown[] };
    try {
      parsed = JSON.parse(readFileSync(file, "utf-8"));
    } catch (e) {
      throw new IngestError(`unreadable file ${file}: ${e}`);
    }
    if (!Array.isArray(parsed.cells)) {
      throw new IngestError(`${file}: expected a top-level 'cells' array`);
    }
    for (const entry of parsed.cells as Record<string, any>[]) {
      const cellId = entry.cell_id;
      if (typeof cellId !== "string") {
        throw new IngestError(`${file}: cell without a cell_id`);
      }
      if (seen.has(cellId)) {
        throw new IngestError(`cell_id collision across files: ${cellId}`);
      }
      seen.add(cellId);
      records.push({
        cellId,
        usableSweeps: Number(entry.sweeps?.current_clamp_steps ?? 0),
        features: entry.features ?? {},
      });
    }
  }
  return records;
}

/** Per-family widths realized in the records (they are not assumed). */
function realizedSchema(records: CellRecord[]): FamilyWidth[] {
  const schema: FamilyWidth[] = [];
  for (const name of CANONICAL_FAMILIES) {
    let width: number | null = null;
    for (const rec of records) {
      const block = rec.features[name];
      if (block === undefined) {
        throw new IngestError(`cell ${rec.cellId}: missing family ${name}`);
      }
      if (width === null) width = block.length;
      else if (block.length !== width) {
        throw new IngestError(
          `cell ${rec.cellId}: family ${name} width ${block.length} != ${width}`,
        );
      }
    }
    if (width === null || width < 1) {
      throw new IngestError(`family ${name} has no features`);
    }
    schema.push({ name, width });
  }
  return schema;
}

export function ingest(
  manifest: IngestManifest,
  log: (msg: string) => void = (msg) => console.error(msg),
): IngestResult {
  const labels = readMetadata(manifest.metadata);
  const records = readCellRecords(manifest.files);

  const kept: CellRecord[] = [];
  const dropped: DropRecord[] = [];
  for (const rec of records) {
    const label = labels.get(rec.cellId);
    if (!label) {
      dropped.push({ cellId: rec.cellId, reason: "no transcriptomic label" });
    } else if (rec.usableSweeps <= 0) {
      dropped.push({ cellId: rec.cellId, reason: "no remaining usable sweeps" });
    } else {
      kept.push(rec);
    }
  }
  for (const d of dropped) {
    log(`dropped ${d.cellId}: ${d.reason}`);
  }
  if (kept.length === 0) throw new IngestError("no cells pass inclusion");

  kept.sort((a, b) => (a.cellId < b.cellId ? -1 : a.cellId > b.cellId ? 1 : 0));
  const schema = realizedSchema(kept);
  const cells: InterchangeCell[] = kept.map((rec) => ({
    cellId: rec.cellId,
    values: schema.flatMap(({ name }) => rec.features[name]),
    label: labels.get(rec.cellId)!,
  }));

  const written = writeDataset(
    manifest.out,
    schema,
    cells,
    manifest.species,
    manifest.labelSpace,
  );
  return { outDir: manifest.out, written, kept: cells.map((c) => c.cellId), dropped };
}
