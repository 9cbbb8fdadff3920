/**
 * Per-task statistics over episode rows: everything the figures draw is a
 * plain aggregation of CSV columns (means, stds, cumulative sums).
 */

import { CsvError, TestRun } from "./csv.js";

export type TaskAgg = "mean" | "sum";

export function taskReturns(run: TestRun, agg: TaskAgg = "mean"): number[] {
  const out: number[] = [];
  for (let t = 0; t < run.taskCount; t++) {
    const eps = run.rows.filter((r) => r.task === t).map((r) => r.ret);
    const total = eps.reduce((a, b) => a + b, 0);
    out.push(agg === "mean" ? total / eps.length : total);
  }
  return out;
}

export function mean(values: number[]): number {
  return values.reduce((a, b) => a + b, 0) / values.length;
}

export function std(values: number[]): number {
  const m = mean(values);
  return Math.sqrt(mean(values.map((v) => (v - m) ** 2)));
}

export interface Band {
  mean: number[];
  std: number[];
}

/** Across-seed mean and std per task; all runs must share the task count. */
export function acrossSeeds(series: number[][]): Band {
  const t = series[0].length;
  for (const s of series) {
    if (s.length !== t) throw new CsvError("task count mismatch across seed files");
  }
  const m: number[] = [];
  const sd: number[] = [];
  for (let i = 0; i < t; i++) {
    const column = series.map((s) => s[i]);
    m.push(mean(column));
    sd.push(std(column));
  }
  return { mean: m, std: sd };
}

export function cumulativeRegret(agentReturns: number[], oracleReturns: number[]): number[] {
  if (agentReturns.length !== oracleReturns.length) {
    throw new CsvError(
      `task count mismatch: agent ${agentReturns.length}, oracle ${oracleReturns.length}`,
    );
  }
  const out: number[] = [];
  let acc = 0;
  for (let t = 0; t < agentReturns.length; t++) {
    acc += oracleReturns[t] - agentReturns[t];
    out.push(acc);
  }
  return out;
}

/** Per-task latent summary for the tracking panel (taken from episode 0 rows,
 * which repeat the task-level values). */
export function taskLatents(run: TestRun) {
  const first = run.rows.filter((r) => r.episode === 0);
  first.sort((a, b) => a.task - b.task);
  return {
    true_: first.map((r) => r.true_),
    postMean: first.map((r) => r.postMean),
    priorMean: first.map((r) => r.priorMean),
    priorStd: first.map((r) => r.priorStd),
  };
}
