import { readFileSync } from "node:fs";
import { basename } from "node:path";

export class SchemaError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SchemaError";
  }
}

export interface SeriesPoint {
  i: number;
  absA: number;
  absL: number;
}

export interface RunSummary {
  lambdaNum: bigint;
  lambdaDen: bigint;
  lambda: number;
  instructions: number;
  sumA: number;
  sumL: number;
  leaks: number;
}

export interface RunArtifact {
  label: string;
  csvPath: string;
  summaryPath: string;
  series: SeriesPoint[];
  summary: RunSummary;
}

const CSV_HEADER = "i,abs_A,abs_L";

export function parseSeriesCsv(text: string, origin: string): SeriesPoint[] {
  const lines = text.split(/\r?\n/);
  if (lines[0] !== CSV_HEADER) {
    throw new SchemaError(
      `${origin}: expected header "${CSV_HEADER}", got "${lines[0] ?? ""}"`);
  }
  const points: SeriesPoint[] = [];
  for (let n = 1; n < lines.length; n++) {
    const line = lines[n];
    if (line === "") continue;
    const cells = line.split(",");
    if (cells.length !== 3 || cells.some((c) => !/^\d+$/.test(c))) {
      throw new SchemaError(`${origin}:${n + 1}: bad row "${line}"`);
    }
    points.push({ i: +cells[0], absA: +cells[1], absL: +cells[2] });
  }
  return points;
}

function integerField(doc: Record<string, unknown>, key: string, origin: string): number {
  const v = doc[key];
  // safe-integer, not merely integer: a rounded 2^53+1 must not sneak by
  if (typeof v !== "number" || !Number.isSafeInteger(v)) {
    throw new SchemaError(`${origin}: missing exact integer field "${key}"`);
  }
  return v;
}

export function parseSummary(text: string, origin: string): RunSummary {
  let doc: Record<string, unknown>;
  try {
    doc = JSON.parse(text);
  } catch (e) {
    throw new SchemaError(`${origin}: not valid JSON (${(e as Error).message})`);
  }
  const lambda = doc["lambda"];
  if (typeof lambda !== "number") {
    throw new SchemaError(`${origin}: missing number field "lambda"`);
  }
  return {
    // exact ratio fields; kept as BigInt so huge runs cannot round
    lambdaNum: BigInt(integerField(doc, "lambda_num", origin)),
    lambdaDen: BigInt(integerField(doc, "lambda_den", origin)),
    lambda,
    instructions: integerField(doc, "instructions", origin),
    sumA: integerField(doc, "sum_A", origin),
    sumL: integerField(doc, "sum_L", origin),
    leaks: integerField(doc, "leaks", origin),
  };
}

export function loadRun(csvPath: string, summaryPath: string, label: string): RunArtifact {
  return {
    label,
    csvPath,
    summaryPath,
    series: parseSeriesCsv(readFileSync(csvPath, "utf8"), csvPath),
    summary: parseSummary(readFileSync(summaryPath, "utf8"), summaryPath),
  };
}

export function runFromSummaryPath(summaryPath: string): RunArtifact {
  if (!summaryPath.endsWith(".summary.json")) {
    throw new SchemaError(`${summaryPath}: expected a *.summary.json path`);
  }
  const stem = summaryPath.slice(0, -".summary.json".length);
  return loadRun(`${stem}.csv`, summaryPath, basename(stem));
}

export type Annotations = Record<string, string>;

export function parseAnnotations(text: string, origin: string): Annotations {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (e) {
    throw new SchemaError(`${origin}: not valid JSON (${(e as Error).message})`);
  }
  if (doc === null || typeof doc !== "object" || Array.isArray(doc)) {
    throw new SchemaError(`${origin}: expected an object of index -> label`);
  }
  for (const [key, value] of Object.entries(doc)) {
    if (!/^\d+$/.test(key) || typeof value !== "string") {
      throw new SchemaError(`${origin}: bad annotation entry "${key}"`);
    }
  }
  return doc as Annotations;
}
