/**
 * The three figure builders: reward per task, latent tracking, cumulative
 * regret.  Each returns the SVG text plus the numeric series it drew, so the
 * data behind a figure can be checked against the harness output exactly.
 */

import { CsvError, TestRun, parseTestCsv } from "./csv.js";
import {
  TaskAgg,
  acrossSeeds,
  cumulativeRegret,
  taskLatents,
  taskReturns,
} from "./stats.js";
import { PALETTE, PanelSpec, Series, renderFigure } from "./svg.js";

export interface ModeInput {
  mode: string;
  paths: string[];
}

export interface FigureResult {
  svg: string;
  data: Record<string, unknown>;
}

/** GP-tracked modes; oracle and uninformative runs carry no GP prediction. */
const TRACKED_MODES = new Set(["bayes", "thompson"]);

function loadGroup(input: ModeInput): TestRun[] {
  if (input.paths.length === 0) throw new CsvError(`mode ${input.mode}: no input files`);
  const runs = input.paths.map(parseTestCsv);
  const t = runs[0].taskCount;
  for (const run of runs) {
    if (run.taskCount !== t) {
      throw new CsvError(`mode ${input.mode}: task count differs between seed files`);
    }
  }
  return runs;
}

export function plotRewards(inputs: ModeInput[], sequence: string, agg: TaskAgg = "mean"): FigureResult {
  if (inputs.length === 0) throw new CsvError("no inputs");
  const series: Series[] = [];
  const data: Record<string, unknown> = { sequence, panel: "rewards", agg };
  inputs.forEach((input, i) => {
    const runs = loadGroup(input);
    const band = acrossSeeds(runs.map((r) => taskReturns(r, agg)));
    series.push({
      label: `${input.mode} (${runs.length} seed${runs.length > 1 ? "s" : ""})`,
      color: PALETTE[i % PALETTE.length],
      y: band.mean,
      band: runs.length > 1 ? band.std : undefined,
    });
    data[input.mode] = { mean: band.mean, std: band.std, seeds: runs.map((r) => r.seed) };
  });
  const panel: PanelSpec = {
    title: `Reward per task — ${sequence}`,
    xLabel: "task index",
    yLabel: `${agg} episode return`,
    series,
  };
  return { svg: renderFigure([panel]), data };
}

export function plotTracking(inputs: ModeInput[], sequence: string): FigureResult {
  if (inputs.length === 0) throw new CsvError("no inputs");
  const groups = inputs.map((input) => ({ input, runs: loadGroup(input) }));
  const d = groups[0].runs[0].latentDim;
  const data: Record<string, unknown> = { sequence, panel: "tracking", latentDim: d };
  const panels: PanelSpec[] = [];
  for (let k = 0; k < d; k++) {
    const series: Series[] = [];
    const first = groups[0].runs[0];
    const latents = taskLatents(first);
    series.push({
      label: "true task",
      color: "#444444",
      y: latents.true_.map((v) => v[k]),
      dashed: true,
    });
    groups.forEach(({ input, runs }, i) => {
      const post = acrossSeeds(runs.map((r) => taskLatents(r).postMean.map((v) => v[k])));
      series.push({
        label: `${input.mode} posterior`,
        color: PALETTE[(2 * i) % PALETTE.length],
        y: post.mean,
      });
      const entry: Record<string, unknown> = { posterior: post.mean };
      if (TRACKED_MODES.has(input.mode)) {
        const prior = acrossSeeds(runs.map((r) => taskLatents(r).priorMean.map((v) => v[k])));
        series.push({
          label: `${input.mode} GP prediction`,
          color: PALETTE[(2 * i + 1) % PALETTE.length],
          y: prior.mean,
        });
        entry.prior = prior.mean;
      }
      data[`${input.mode}_dim${k}`] = entry;
    });
    (data[`true_dim${k}`] as unknown) = latents.true_.map((v) => v[k]);
    panels.push({
      title: d > 1 ? `Latent tracking (dim ${k}) — ${sequence}` : `Latent tracking — ${sequence}`,
      xLabel: "task index",
      yLabel: "latent value (normalized)",
      series,
    });
  }
  return { svg: renderFigure(panels), data };
}

export function plotRegret(
  inputs: ModeInput[],
  oraclePaths: string[],
  sequence: string,
  agg: TaskAgg = "mean",
): FigureResult {
  if (inputs.length === 0) throw new CsvError("no inputs");
  if (oraclePaths.length === 0) throw new CsvError("regret needs at least one oracle CSV");
  const oracleBySeed = new Map<number, TestRun>();
  for (const path of oraclePaths) {
    const run = parseTestCsv(path);
    oracleBySeed.set(run.seed, run);
  }
  const series: Series[] = [];
  const data: Record<string, unknown> = { sequence, panel: "regret", agg };
  inputs.forEach((input, i) => {
    const runs = loadGroup(input);
    const curves = runs.map((run) => {
      const oracle = oracleBySeed.get(run.seed);
      if (!oracle) throw new CsvError(`no oracle CSV for seed ${run.seed}`);
      return cumulativeRegret(taskReturns(run, agg), taskReturns(oracle, agg));
    });
    const band = acrossSeeds(curves);
    series.push({
      label: input.mode,
      color: PALETTE[i % PALETTE.length],
      y: band.mean,
      band: runs.length > 1 ? band.std : undefined,
    });
    data[input.mode] = {
      cumulative: band.mean,
      std: band.std,
      perSeed: Object.fromEntries(runs.map((r, j) => [r.seed, curves[j]])),
    };
  });
  const panel: PanelSpec = {
    title: `Cumulative regret vs oracle — ${sequence}`,
    xLabel: "task index",
    yLabel: "cumulative regret",
    series,
  };
  return { svg: renderFigure([panel]), data };
}
