#!/usr/bin/env node
// Exit codes: 0 ok, 1 usage, 2 unreadable or invalid input, 3 model load.

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { InputError, ModelError } from "./errors.js";
import {
  DEFAULT_PROMPT,
  extract,
  listImages,
  readCaptionFile,
} from "./extract.js";

function run(a: {
  images?: string;
  captions?: string;
  model: string;
  prompt: string;
  batchSize: number;
  out: string;
}): void {
  try {
    const res = extract({
      images: a.images ? listImages(a.images) : undefined,
      captions: a.captions ? readCaptionFile(a.captions) : undefined,
      model: a.model,
      prompt: a.prompt,
      batchSize: a.batchSize,
      out: a.out,
    });
    console.log(
      `wrote ${res.out}: n=${res.n} dim=${res.dim} ` +
        `modality=${res.modality} tag=${res.tag}`,
    );
  } catch (err) {
    if (err instanceof InputError) {
      console.error(`error: ${err.message}`);
      process.exit(2);
    }
    if (err instanceof ModelError) {
      console.error(`error: ${err.message}`);
      process.exit(3);
    }
    throw err;
  }
}

await yargs(hideBin(process.argv))
  .scriptName("extract")
  .command(
    ["extract", "$0"],
    "export image or caption features to an EMB1 file",
    (y) =>
      y
        .option("images", {
          type: "string",
          describe: "directory of image files",
        })
        .option("captions", {
          type: "string",
          describe: "text file, one caption per line",
        })
        .option("model", {
          type: "string",
          demandOption: true,
          describe: "model class, e.g. vit-b-32 or vit-l-14",
        })
        .option("prompt", {
          type: "string",
          default: DEFAULT_PROMPT,
          describe: "prefix added to every caption; pass '' to disable",
        })
        .option("batch-size", { type: "number", default: 64 })
        .option("out", {
          type: "string",
          demandOption: true,
          describe: "EMB1 file to write",
        })
        .conflicts("images", "captions")
        .check((a) => {
          if (!a.images && !a.captions) {
            throw new Error("one of --images or --captions is required");
          }
          return true;
        }),
    (a) => run(a),
  )
  .strict()
  .fail((msg, err) => {
    console.error(`usage error: ${msg ?? err?.message ?? err}`);
    process.exit(1);
  })
  .parseAsync();
