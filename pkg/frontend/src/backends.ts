/**
 * Embedding backends. The transformers backend runs the real pretrained
 * encoders (a graph-aware code model for the code domain, a distilled
 * English model for doc and dep); the hash backend is a deterministic
 * stand-in used by the contract tests and by fully offline environments.
 */

import { createHash } from "node:crypto";
import type { Domain } from "./wire.js";

export type Pooling = "cls" | "mean";

export interface BackendOptions {
  codeModel: string;
  textModel: string;
  pooling: Pooling;
  normalize: boolean;
  dim: number;
  seed: number;
}

export interface EmbeddingBackend {
  /** Resolve models or other resources before the first embed call. */
  load(): Promise<void>;
  embed(domain: Domain, text: string): Promise<number[]>;
}

export const DEFAULT_OPTIONS: BackendOptions = {
  codeModel: "Xenova/graphcodebert-base",
  textModel: "Xenova/distilbert-base-uncased",
  pooling: "cls",
  normalize: false,
  dim: 768,
  seed: 0,
};

/** Signed token hashing, mirroring the primary component's test provider:
 * deterministic across processes, bag-of-tokens, optional L2 norm. */
export class HashBackend implements EmbeddingBackend {
  constructor(private readonly options: BackendOptions) {}

  async load(): Promise<void> {}

  async embed(_domain: Domain, text: string): Promise<number[]> {
    const vec = new Float64Array(this.options.dim);
    for (const token of text.split(/\s+/).filter((t) => t !== "")) {
      const digest = createHash("sha256")
        .update(`${this.options.seed}|${token}`)
        .digest();
      const value = digest.readBigUInt64LE(0);
      const index = Number((value >> 1n) % BigInt(this.options.dim));
      vec[index] += (value & 1n) === 1n ? 1 : -1;
    }
    let out = Array.from(vec);
    const norm = Math.hypot(...out);
    if (this.options.normalize && norm > 0) {
      out = out.map((v) => v / norm);
    }
    return out;
  }
}

export class TransformersBackend implements EmbeddingBackend {
  private codePipe: any;
  private textPipe: any;

  constructor(private readonly options: BackendOptions) {}

  async load(): Promise<void> {
    let pipeline: any;
    try {
      ({ pipeline } = await import("@xenova/transformers"));
    } catch (err) {
      throw new Error(
        "transformers backend unavailable: install @xenova/transformers " +
          "(npm install @xenova/transformers) or rerun with --backend hash. " +
          `Underlying error: ${err}`,
      );
    }
    try {
      this.codePipe = await pipeline("feature-extraction", this.options.codeModel);
      this.textPipe = await pipeline("feature-extraction", this.options.textModel);
    } catch (err) {
      throw new Error(
        `model load failed (${this.options.codeModel}, ${this.options.textModel}): ` +
          "check the model ids and that the model cache or network is reachable. " +
          `Underlying error: ${err}`,
      );
    }
    // The dep domain marks call edges with [C]; register it so the token
    // survives subword splitting where the tokenizer supports added tokens.
    for (const pipe of [this.textPipe]) {
      try {
        pipe.tokenizer?.add_tokens?.(["[C]"]);
      } catch {
        // Tokenizer without added-token support: [C] falls back to subwords.
      }
    }
  }

  async embed(domain: Domain, text: string): Promise<number[]> {
    const pipe = domain === "code" ? this.codePipe : this.textPipe;
    if (!pipe) {
      throw new Error("backend not loaded");
    }
    if (this.options.pooling === "mean") {
      const output = await pipe(text, {
        pooling: "mean",
        normalize: this.options.normalize,
      });
      return Array.from(output.data as Float32Array);
    }
    // CLS pooling: first token of the last hidden state.
    const output = await pipe(text, { pooling: "none" });
    const [, tokens, width] = output.dims as number[];
    void tokens;
    let cls = Array.from((output.data as Float32Array).slice(0, width));
    if (this.options.normalize) {
      const norm = Math.hypot(...cls);
      if (norm > 0) cls = cls.map((v) => v / norm);
    }
    return cls;
  }
}

export function makeBackend(
  kind: "transformers" | "hash",
  options: BackendOptions,
): EmbeddingBackend {
  return kind === "hash" ? new HashBackend(options) : new TransformersBackend(options);
}
