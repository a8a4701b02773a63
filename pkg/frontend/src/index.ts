export { DEFAULT_OPTIONS, HashBackend, TransformersBackend, makeBackend } from "./backends.js";
export type { BackendOptions, EmbeddingBackend, Pooling } from "./backends.js";
export { defaultJob, exportEmbeddings } from "./exporter.js";
export type { ExportJob, ExportResult } from "./exporter.js";
export { entryText, readTokenFile } from "./tokens.js";
export type { TokenEntry } from "./tokens.js";
export {
  DOMAINS,
  WIRE_FORMAT,
  WIRE_VERSION,
  WireError,
  readEmbeddingFile,
  writeEmbeddingFile,
} from "./wire.js";
export type { Domain, WireHeader, WireRecord } from "./wire.js";
