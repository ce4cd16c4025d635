export {
  MODELS,
  TAG_LEXICON,
  cosine,
  embedClass,
  embedClasses,
  fnv1a64,
  resolveModel,
  unitVector,
  type ModelSpec,
} from "./encoder.js";
export {
  CLIPEMB_MAGIC,
  clipembBytes,
  parseClipemb,
  type ClipembMeta,
  type ClipembTable,
} from "./clipemb.js";
export { main, readClassFile } from "./cli.js";
