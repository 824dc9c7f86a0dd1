/**
 * EMB1 binary embedding files, all little-endian:
 *
 *   magic 'EMB1' | version u16 = 1 | modality u8 (0 image, 1 text) |
 *   reserved u8 | n u64 | dim u64 | tag length u16 | tag UTF-8 |
 *   payload n*dim float64, row-major
 *
 * The payload is raw IEEE doubles, so a write-read roundtrip is bitwise.
 */

import { readFileSync, renameSync, writeFileSync } from "node:fs";

import { InputError } from "./errors.js";

export type Modality = "image" | "text";

export interface Emb1Data {
  modality: Modality;
  tag: string;
  dim: number;
  rows: Float64Array[];
}

const MAGIC = Buffer.from("EMB1", "ascii");
const VERSION = 1;
const FIXED_HEADER = 26; // magic..dim (24) plus the u16 tag length

export function encodeEmb1(set: Emb1Data): Buffer {
  const { dim, rows } = set;
  if (!Number.isInteger(dim) || dim < 1) {
    throw new InputError(`dim must be a positive integer, got ${dim}`);
  }
  for (let i = 0; i < rows.length; i++) {
    if (rows[i].length !== dim) {
      throw new InputError(
        `row ${i} has ${rows[i].length} values, expected ${dim}`,
      );
    }
  }
  const tag = Buffer.from(set.tag, "utf8");
  if (tag.length > 0xffff) {
    throw new InputError(`model tag is ${tag.length} bytes, limit 65535`);
  }

  const header = Buffer.alloc(FIXED_HEADER + tag.length);
  MAGIC.copy(header, 0);
  header.writeUInt16LE(VERSION, 4);
  header.writeUInt8(set.modality === "image" ? 0 : 1, 6);
  // reserved byte at offset 7 stays zero
  header.writeBigUInt64LE(BigInt(rows.length), 8);
  header.writeBigUInt64LE(BigInt(dim), 16);
  header.writeUInt16LE(tag.length, 24);
  tag.copy(header, FIXED_HEADER);

  const payload = Buffer.allocUnsafe(rows.length * dim * 8);
  let off = 0;
  for (const row of rows) {
    for (let j = 0; j < dim; j++) {
      payload.writeDoubleLE(row[j], off);
      off += 8;
    }
  }
  return Buffer.concat([header, payload]);
}

/** Write-temp-then-rename so a crash never leaves a half-written file. */
export function writeEmb1(path: string, set: Emb1Data): void {
  const tmp = `${path}.tmp-${process.pid}`;
  writeFileSync(tmp, encodeEmb1(set));
  renameSync(tmp, path);
}

export function readEmb1(path: string): Emb1Data {
  const buf = readFileSync(path);
  if (buf.length < FIXED_HEADER || !buf.subarray(0, 4).equals(MAGIC)) {
    throw new InputError(`${path} is not an EMB1 file`);
  }
  const version = buf.readUInt16LE(4);
  if (version !== VERSION) {
    throw new InputError(`${path}: unsupported EMB1 version ${version}`);
  }
  const modCode = buf.readUInt8(6);
  if (modCode !== 0 && modCode !== 1) {
    throw new InputError(`${path}: unknown modality code ${modCode}`);
  }
  const n = Number(buf.readBigUInt64LE(8));
  const dim = Number(buf.readBigUInt64LE(16));
  const tagLen = buf.readUInt16LE(24);
  const payloadStart = FIXED_HEADER + tagLen;
  const want = payloadStart + n * dim * 8;
  if (buf.length !== want) {
    throw new InputError(`${path}: expected ${want} bytes, got ${buf.length}`);
  }
  const tag = buf.subarray(FIXED_HEADER, payloadStart).toString("utf8");

  const rows: Float64Array[] = [];
  let off = payloadStart;
  for (let i = 0; i < n; i++) {
    const row = new Float64Array(dim);
    for (let j = 0; j < dim; j++) {
      row[j] = buf.readDoubleLE(off);
      off += 8;
    }
    rows.push(row);
  }
  return { modality: modCode === 0 ? "image" : "text", tag, dim, rows };
}
