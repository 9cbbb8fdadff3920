import { describe, expect, it } from "vitest";
import { readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { CsvError, parseTestCsv } from "../src/csv.js";
import { tempDir, writeFakeCsv } from "./helpers.js";

describe("parseTestCsv", () => {
  it("reads schema and shape", () => {
    const dir = tempDir();
    const path = writeFakeCsv(dir, "run.csv", { seed: 3, tasks: 5, episodes: 4 });
    const run = parseTestCsv(path);
    expect(run.seed).toBe(3);
    expect(run.taskCount).toBe(5);
    expect(run.episodesPerTask).toBe(4);
    expect(run.latentDim).toBe(1);
    expect(run.rows).toHaveLength(20);
  });

  it("supports two latent dimensions", () => {
    const dir = tempDir();
    const path = writeFakeCsv(dir, "run2.csv", { seed: 0, tasks: 3, episodes: 1, latentDim: 2 });
    const run = parseTestCsv(path);
    expect(run.latentDim).toBe(2);
    expect(run.rows[0].true_).toHaveLength(2);
  });

  it("rejects an empty csv", () => {
    const dir = tempDir();
    const path = join(dir, "empty.csv");
    writeFileSync(path, "seed,task,episode,return,true_0,post_mean_0,post_std_0,prior_mean_0,prior_std_0\r\n");
    expect(() => parseTestCsv(path)).toThrow(CsvError);
  });

  it("rejects missing latent columns", () => {
    const dir = tempDir();
    const path = join(dir, "bad.csv");
    writeFileSync(path, "seed,task,episode,return\r\n0,0,0,-1\r\n");
    expect(() => parseTestCsv(path)).toThrow(/latent/);
  });

  it("rejects mixed seeds in one file", () => {
    const dir = tempDir();
    const a = writeFakeCsv(dir, "a.csv", { seed: 0, tasks: 1, episodes: 1 });
    const b = writeFakeCsv(dir, "b.csv", { seed: 1, tasks: 1, episodes: 1 });
    const merged = join(dir, "merged.csv");
    const textA = readFileSync(a, "utf8");
    const textB = readFileSync(b, "utf8");
    writeFileSync(merged, textA + textB.split("\r\n").slice(1).join("\r\n"));
    expect(() => parseTestCsv(merged)).toThrow(/seed/);
  });
});
