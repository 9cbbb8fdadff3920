/**
 * Parsing of meta-test CSVs.
 *
 * Schema: seed, task, episode, return, then per latent dimension k the
 * columns true_k, post_mean_k, post_std_k, prior_mean_k, prior_std_k.
 */

import { readFileSync } from "node:fs";
import Papa from "papaparse";

export interface EpisodeRow {
  seed: number;
  task: number;
  episode: number;
  ret: number;
  true_: number[];
  postMean: number[];
  postStd: number[];
  priorMean: number[];
  priorStd: number[];
}

export interface TestRun {
  path: string;
  seed: number;
  latentDim: number;
  taskCount: number;
  episodesPerTask: number;
  rows: EpisodeRow[];
}

export class CsvError extends Error {}

function latentDimFromHeader(fields: string[]): number {
  let d = 0;
  while (fields.includes(`true_${d}`)) d++;
  if (d === 0) throw new CsvError("no latent columns (true_0, ...) in header");
  for (let k = 0; k < d; k++) {
    for (const prefix of ["post_mean", "post_std", "prior_mean", "prior_std"]) {
      if (!fields.includes(`${prefix}_${k}`)) {
        throw new CsvError(`missing column ${prefix}_${k}`);
      }
    }
  }
  return d;
}

export function parseTestCsv(path: string): TestRun {
  const text = readFileSync(path, "utf8");
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    throw new CsvError(`${path}: ${parsed.errors[0].message}`);
  }
  const fields = parsed.meta.fields ?? [];
  for (const required of ["seed", "task", "episode", "return"]) {
    if (!fields.includes(required)) {
      throw new CsvError(`${path}: missing column ${required}`);
    }
  }
  const d = latentDimFromHeader(fields);
  if (parsed.data.length === 0) {
    throw new CsvError(`${path}: no data rows`);
  }
  const num = (row: Record<string, string>, key: string): number => {
    const v = Number(row[key]);
    if (!Number.isFinite(v)) throw new CsvError(`${path}: bad number in column ${key}`);
    return v;
  };
  const vec = (row: Record<string, string>, prefix: string): number[] =>
    Array.from({ length: d }, (_, k) => num(row, `${prefix}_${k}`));

  const rows: EpisodeRow[] = parsed.data.map((row) => ({
    seed: num(row, "seed"),
    task: num(row, "task"),
    episode: num(row, "episode"),
    ret: num(row, "return"),
    true_: vec(row, "true"),
    postMean: vec(row, "post_mean"),
    postStd: vec(row, "post_std"),
    priorMean: vec(row, "prior_mean"),
    priorStd: vec(row, "prior_std"),
  }));

  const seeds = new Set(rows.map((r) => r.seed));
  if (seeds.size !== 1) {
    throw new CsvError(`${path}: expected a single seed per file, found ${seeds.size}`);
  }
  const tasks = new Set(rows.map((r) => r.task));
  const taskCount = tasks.size;
  for (let t = 0; t < taskCount; t++) {
    if (!tasks.has(t)) throw new CsvError(`${path}: task indices are not contiguous`);
  }
  const episodesPerTask = rows.filter((r) => r.task === 0).length;
  if (rows.length !== taskCount * episodesPerTask) {
    throw new CsvError(`${path}: ragged episode counts across tasks`);
  }
  return {
    path,
    seed: rows[0].seed,
    latentDim: d,
    taskCount,
    episodesPerTask,
    rows,
  };
}
