/** Reader for the serializer's tokens.jsonl: one (path, domain, tokens) per line. */

import * as fs from "node:fs";
import { DOMAINS, Domain, WireError } from "./wire.js";

export interface TokenEntry {
  path: string;
  domain: Domain;
  tokens: string[];
}

export function readTokenFile(path: string): TokenEntry[] {
  const entries: TokenEntry[] = [];
  const lines = fs.readFileSync(path, "utf-8").split("\n");
  lines.forEach((line, index) => {
    const trimmed = line.trim();
    if (trimmed === "") return;
    let entry: TokenEntry;
    try {
      entry = JSON.parse(trimmed);
    } catch (err) {
      throw new WireError(`${path}:${index + 1}: bad token line: ${err}`);
    }
    if (typeof entry.path !== "string" || !Array.isArray(entry.tokens)) {
      throw new WireError(`${path}:${index + 1}: token line missing fields`);
    }
    if (!DOMAINS.includes(entry.domain)) {
      throw new WireError(`${path}:${index + 1}: unknown domain ${entry.domain}`);
    }
    entries.push(entry);
  });
  return entries;
}

/** The text handed to a tokenizer: the control tokens stay inline so the
 * dep domain keeps its edge markers. */
export function entryText(entry: TokenEntry): string {
  return entry.tokens.filter((t) => t !== "[CLS]").join(" ");
}
