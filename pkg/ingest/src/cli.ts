#!/usr/bin/env node
/** famseq-ingest <manifest.json> [--out DIR] */
import { resolve } from "node:path";

import { IngestError, ingest, loadIngestManifest } from "./ingest.js";

export function main(argv: string[]): number {
  let out: string | undefined;
  const positional: string[] = [];
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === "--out") out = argv[++i];
    else positional.push(argv[i]);
  }
  if (positional.length !== 1 || (out !== undefined && out === "")) {
    console.error("usage: famseq-ingest <manifest.json> [--out DIR]");
    return 2;
  }
  try {
    const manifest = loadIngestManifest(positional[0]);
    if (out !== undefined) manifest.out = resolve(out);
    const result = ingest(manifest);
    console.log(
      `wrote ${result.written.join(", ")} to ${result.outDir} ` +
        `(${result.kept.length} cells kept, ${result.dropped.length} dropped)`,
    );
    return 0;
  } catch (e) {
    if (e instanceof IngestError) {
      console.error(`error: ${e.message}`);
      return 1;
    }
    throw e;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
