/**
 * Deterministic feature encoder.
 *
 * Real checkpoint weights are not available in this environment, so the
 * encoder is a seeded hashing projection behind the same interface a learned
 * model would use: pick a width by model class, map input bytes to that many
 * float64 values, reproducibly on every platform. Two inputs that differ in
 * any byte (a prompt prefix included) get unrelated vectors. A learned
 * encoder can replace this class without touching the job runner or writer.
 */

import { createHash } from "node:crypto";

import { ModelError } from "./errors.js";

/** Embedding width per supported model class. */
export const MODEL_WIDTHS: Record<string, number> = {
  "vit-b-32": 512,
  "vit-l-14": 768,
};

/** "ViT-B/32", "vit_b_32" and "vit-b-32" all name the same model. */
export function normalizeModelName(name: string): string {
  return name.trim().toLowerCase().replace(/[/_\s]+/g, "-");
}

export class Encoder {
  readonly model: string;
  readonly dim: number;

  constructor(name: string) {
    const model = normalizeModelName(name);
    const dim = MODEL_WIDTHS[model];
    if (dim === undefined) {
      const known = Object.keys(MODEL_WIDTHS).join(", ");
      throw new ModelError(`cannot load model '${name}' (known: ${known})`);
    }
    this.model = model;
    this.dim = dim;
  }

  /** Written into the EMB1 tag field so consumers can see what ran. */
  get tag(): string {
    return `hashproj/${this.model}`;
  }

  encodeText(text: string): Float64Array {
    return this.expand("text", Buffer.from(text, "utf8"));
  }

  encodeImage(bytes: Buffer): Float64Array {
    return this.expand("image", bytes);
  }

  // Counter-mode SHA-256 expansion of (tag, modality, payload) into dim
  // doubles, uniform on [-1, 1). Unnormalized on purpose; consumers decide.
  private expand(salt: string, payload: Buffer): Float64Array {
    const root = createHash("sha256")
      .update(this.tag)
      .update("\0")
      .update(salt)
      .update("\0")
      .update(payload)
      .digest();
    const out = new Float64Array(this.dim);
    const counter = Buffer.alloc(4);
    for (let block = 0; block * 4 < this.dim; block++) {
      counter.writeUInt32LE(block, 0);
      const h = createHash("sha256").update(root).update(counter).digest();
      const lim = Math.min(4, this.dim - block * 4);
      for (let k = 0; k < lim; k++) {
        // top 53 bits of the word -> [0, 2) -> [-1, 1), exact in binary
        const bits = h.readBigUInt64LE(k * 8) >> 11n;
        out[block * 4 + k] = Number(bits) / 2 ** 52 - 1.0;
      }
    }
    return out;
  }
}
