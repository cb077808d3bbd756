#!/usr/bin/env node
import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { pathToFileURL } from "node:url";

import yargs from "yargs";

import { lambdaOption, renderPNG, renderSVG, seriesOption } from "./charts.js";
import { Annotations, RunArtifact, SchemaError, parseAnnotations,
         runFromSummaryPath } from "./schema.js";

export const EXIT_OK = 0;
export const EXIT_USAGE = 1;
export const EXIT_INPUT = 2;

interface Args {
  summaries: string[];
  outDir: string;
  annotate?: string;
  format: "png" | "svg";
}

function parseArgs(argv: string[]): Args | null {
  let failure: string | null = null;
  const ns = yargs(argv)
    .usage("report-viz <run.summary.json...> --out-dir DIR")
    .command("$0 <summaries..>", "render series and ratio charts for runs")
    .option("out-dir", {
      type: "string",
      demandOption: true,
      describe: "directory the images are written to",
    })
    .option("annotate", {
      type: "string",
      describe: "JSON file mapping instruction indices to labels",
    })
    .option("format", {
      choices: ["png", "svg"] as const,
      default: "svg" as const,
    })
    .exitProcess(false)
    .fail((msg, err) => {
      failure = msg ?? err?.message ?? "bad arguments";
    })
    .parseSync();
  if (failure) {
    process.stderr.write(`usage error: ${failure}\n`);
    return null;
  }
  return {
    summaries: (ns.summaries as string[]).map(String),
    outDir: ns["out-dir"] as string,
    annotate: ns.annotate,
    format: ns.format as "png" | "svg",
  };
}

function writeChart(path: string, option: Parameters<typeof renderSVG>[0], format: "png" | "svg") {
  const svg = renderSVG(option);
  if (format === "svg") {
    writeFileSync(path, svg);
  } else {
    writeFileSync(path, renderPNG(svg));
  }
}

export function main(argv: string[]): number {
  const args = parseArgs(argv);
  if (!args) {
    return EXIT_USAGE;
  }
  try {
    let annotations: Annotations = {};
    if (args.annotate) {
      annotations = parseAnnotations(readFileSync(args.annotate, "utf8"), args.annotate);
    }
    const runs: RunArtifact[] = args.summaries.map(runFromSummaryPath);
    mkdirSync(args.outDir, { recursive: true });
    for (const run of runs) {
      const out = join(args.outDir, `${run.label}.series.${args.format}`);
      writeChart(out, seriesOption(run, annotations), args.format);
      process.stdout.write(`${out}\n`);
    }
    const bars = join(args.outDir, `lambda.${args.format}`);
    writeChart(bars, lambdaOption(runs), args.format);
    process.stdout.write(`${bars}\n`);
    return EXIT_OK;
  } catch (e) {
    if (e instanceof SchemaError || (e as NodeJS.ErrnoException).code) {
      process.stderr.write(`error: ${(e as Error).message}\n`);
      return EXIT_INPUT;
    }
    throw e;
  }
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(main(process.argv.slice(2)));
}
