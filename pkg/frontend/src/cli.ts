#!/usr/bin/env node
/** topical-export: embed serialized scripts with pretrained encoders and
 * emit the embedding wire format consumed by the main pipeline. */

import { parseArgs } from "node:util";
import { DEFAULT_OPTIONS, Pooling } from "./backends.js";
import { defaultJob, exportEmbeddings } from "./exporter.js";

const HELP = `topical-export --tokens tokens.jsonl --out emb.jsonl [options]

Options:
  --tokens <file>      serializer output, one (path, domain, tokens) per line
  --out <file>         embedding file to write
  --code-model <id>    code-domain model   (default ${DEFAULT_OPTIONS.codeModel})
  --text-model <id>    doc/dep-domain model (default ${DEFAULT_OPTIONS.textModel})
  --batch <n>          batch size (default 16)
  --backend <name>     transformers | hash (default transformers)
  --pooling <rule>     cls | mean (default cls)
  --normalize          L2-normalize the vectors (default off)
  --dim <n>            output width (default 768)
  --seed <n>           hash-backend seed (default 0)
  --help               show this text
`;

export async function main(argv: string[]): Promise<number> {
  let values;
  try {
    ({ values } = parseArgs({
      args: argv,
      options: {
        tokens: { type: "string" },
        out: { type: "string" },
        "code-model": { type: "string", default: DEFAULT_OPTIONS.codeModel },
        "text-model": { type: "string", default: DEFAULT_OPTIONS.textModel },
        batch: { type: "string", default: "16" },
        backend: { type: "string", default: "transformers" },
        pooling: { type: "string", default: DEFAULT_OPTIONS.pooling },
        normalize: { type: "boolean", default: false },
        dim: { type: "string", default: String(DEFAULT_OPTIONS.dim) },
        seed: { type: "string", default: "0" },
        help: { type: "boolean", default: false },
      },
    }));
  } catch (err) {
    console.error(String(err));
    console.error(HELP);
    return 2;
  }
  if (values.help) {
    console.log(HELP);
    return 0;
  }
  if (!values.tokens || !values.out) {
    console.error("error: --tokens and --out are required");
    console.error(HELP);
    return 2;
  }
  if (values.backend !== "transformers" && values.backend !== "hash") {
    console.error(`error: unknown backend ${values.backend}`);
    return 2;
  }
  if (values.pooling !== "cls" && values.pooling !== "mean") {
    console.error(`error: unknown pooling ${values.pooling}`);
    return 2;
  }

  const job = defaultJob(values.tokens, values.out);
  job.backend = values.backend;
  job.batchSize = Number(values.batch);
  job.options = {
    codeModel: values["code-model"]!,
    textModel: values["text-model"]!,
    pooling: values.pooling as Pooling,
    normalize: values.normalize ?? false,
    dim: Number(values.dim),
    seed: Number(values.seed),
  };

  try {
    const result = await exportEmbeddings(job);
    console.log(
      `wrote ${result.written} embeddings (dim ${job.options.dim}) to ${values.out}` +
        (result.skipped.length ? `; skipped ${result.skipped.length}` : ""),
    );
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
