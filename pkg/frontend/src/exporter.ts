/**
 * Batch export: read a tokens file, embed every (script, domain) with the
 * selected backend, and write the topical-emb wire format. Individual
 * script failures are skipped and logged, never silently zeroed; the
 * output always passes the primary loader's validation.
 */

import { BackendOptions, DEFAULT_OPTIONS, EmbeddingBackend, makeBackend } from "./backends.js";
import { entryText, readTokenFile, TokenEntry } from "./tokens.js";
import { WireRecord, writeEmbeddingFile } from "./wire.js";

export interface ExportJob {
  tokensPath: string;
  outPath: string;
  backend: "transformers" | "hash";
  batchSize: number;
  options: BackendOptions;
}

export interface ExportResult {
  written: number;
  skipped: { path: string; domain: string; error: string }[];
}

export function defaultJob(tokensPath: string, outPath: string): ExportJob {
  return {
    tokensPath,
    outPath,
    backend: "transformers",
    batchSize: 16,
    options: { ...DEFAULT_OPTIONS },
  };
}

async function embedBatch(
  backend: EmbeddingBackend,
  batch: TokenEntry[],
  result: ExportResult,
  records: WireRecord[],
): Promise<void> {
  const settled = await Promise.allSettled(
    batch.map((entry) => backend.embed(entry.domain, entryText(entry))),
  );
  settled.forEach((outcome, i) => {
    const entry = batch[i];
    if (outcome.status === "fulfilled") {
      records.push({ path: entry.path, domain: entry.domain, vector: outcome.value });
    } else {
      result.skipped.push({
        path: entry.path,
        domain: entry.domain,
        error: String(outcome.reason),
      });
      console.error(
        `skip (${entry.path}, ${entry.domain}): ${outcome.reason}`,
      );
    }
  });
}

export async function exportEmbeddings(
  job: ExportJob,
  backend?: EmbeddingBackend,
): Promise<ExportResult> {
  const entries = readTokenFile(job.tokensPath);
  backend = backend ?? makeBackend(job.backend, job.options);
  await backend.load();

  const result: ExportResult = { written: 0, skipped: [] };
  const records: WireRecord[] = [];
  for (let start = 0; start < entries.length; start += job.batchSize) {
    await embedBatch(backend, entries.slice(start, start + job.batchSize), result, records);
  }
  result.written = writeEmbeddingFile(job.outPath, job.options.dim, records);
  return result;
}
