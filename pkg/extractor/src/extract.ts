/** Extraction jobs: a list of images or captions in, one EMB1 file out. */

import { readFileSync, readdirSync } from "node:fs";
import { join } from "node:path";

import { Modality, writeEmb1 } from "./emb1.js";
import { Encoder } from "./encoder.js";
import { InputError } from "./errors.js";

export const DEFAULT_PROMPT = "A photo depicts";

export interface ExtractionJob {
  /** Image file paths. Exactly one of images/captions must be set. */
  images?: string[];
  /** Raw caption strings (no prompt applied yet). */
  captions?: string[];
  model: string;
  /** Prepended to every caption with a space; "" disables the prefix. */
  prompt?: string;
  /** How many raw inputs are held in memory at once. */
  batchSize?: number;
  out: string;
}

export interface ExtractionResult {
  out: string;
  n: number;
  dim: number;
  modality: Modality;
  tag: string;
}

/** Regular files and symlinks in dir, sorted by name for a stable order. */
export function listImages(dir: string): string[] {
  let entries;
  try {
    entries = readdirSync(dir, { withFileTypes: true });
  } catch (err) {
    const code = (err as NodeJS.ErrnoException).code ?? err;
    throw new InputError(`cannot list image directory ${dir}: ${code}`);
  }
  const files = entries
    .filter((e) => e.isFile() || e.isSymbolicLink())
    .map((e) => join(dir, e.name))
    .sort();
  if (files.length === 0) {
    throw new InputError(`no image files in ${dir}`);
  }
  return files;
}

/** One caption per line; a trailing newline does not add an empty caption. */
export function readCaptionFile(path: string): string[] {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    const code = (err as NodeJS.ErrnoException).code ?? err;
    throw new InputError(`cannot read caption file ${path}: ${code}`);
  }
  const lines = text.split(/\r?\n/);
  if (lines.length > 0 && lines[lines.length - 1] === "") {
    lines.pop();
  }
  if (lines.length === 0) {
    throw new InputError(`caption file ${path} is empty`);
  }
  return lines;
}

export function extract(job: ExtractionJob): ExtractionResult {
  if ((job.images ? 1 : 0) + (job.captions ? 1 : 0) !== 1) {
    throw new InputError("exactly one of images/captions must be given");
  }
  const batch = job.batchSize ?? 64;
  if (!Number.isInteger(batch) || batch < 1) {
    throw new InputError(`batch size must be a positive integer, got ${batch}`);
  }
  const enc = new Encoder(job.model);

  let rows: Float64Array[];
  let modality: Modality;
  if (job.captions) {
    const prompt = job.prompt ?? DEFAULT_PROMPT;
    rows = job.captions.map((c) =>
      enc.encodeText(prompt === "" ? c : `${prompt} ${c}`),
    );
    modality = "text";
  } else {
    rows = [];
    const paths = job.images as string[];
    const failures: string[] = [];
    for (let lo = 0; lo < paths.length; lo += batch) {
      const raw: (Buffer | null)[] = [];
      for (let i = lo; i < Math.min(lo + batch, paths.length); i++) {
        try {
          raw.push(readFileSync(paths[i]));
        } catch (err) {
          const code = (err as NodeJS.ErrnoException).code ?? err;
          failures.push(`${i} (${paths[i]}): ${code}`);
          raw.push(null);
        }
      }
      for (const bytes of raw) {
        if (bytes !== null) rows.push(enc.encodeImage(bytes));
      }
    }
    if (failures.length > 0) {
      throw new InputError(
        `unreadable input at index ${failures.join("; index ")}`,
      );
    }
    modality = "image";
  }

  writeEmb1(job.out, { modality, tag: enc.tag, dim: enc.dim, rows });
  return { out: job.out, n: rows.length, dim: enc.dim, modality, tag: enc.tag };
}
