import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export interface FakeRunSpec {
  seed: number;
  tasks: number;
  episodes: number;
  latentDim?: number;
  /** return for (task, episode); defaults to a deterministic ramp */
  ret?: (t: number, e: number) => number;
  prior?: (t: number, k: number) => number;
  post?: (t: number, k: number) => number;
  true_?: (t: number, k: number) => number;
}

export function writeFakeCsv(dir: string, name: string, spec: FakeRunSpec): string {
  const d = spec.latentDim ?? 1;
  const header = ["seed", "task", "episode", "return"];
  for (let k = 0; k < d; k++) {
    header.push(`true_${k}`, `post_mean_${k}`, `post_std_${k}`, `prior_mean_${k}`, `prior_std_${k}`);
  }
  const lines = [header.join(",")];
  for (let t = 0; t < spec.tasks; t++) {
    for (let e = 0; e < spec.episodes; e++) {
      const row = [
        spec.seed,
        t,
        e,
        spec.ret ? spec.ret(t, e) : -(t + e * 0.1),
      ];
      for (let k = 0; k < d; k++) {
        row.push(
          spec.true_ ? spec.true_(t, k) : 0.5 * Math.sin(0.2 * t) + k,
          spec.post ? spec.post(t, k) : 0.5 * Math.sin(0.2 * t) + k + 0.01,
          0.05,
          spec.prior ? spec.prior(t, k) : 0.5 * Math.sin(0.2 * t) + k + 0.02,
          0.1,
        );
      }
      lines.push(row.join(","));
    }
  }
  const path = join(dir, name);
  writeFileSync(path, lines.join("\r\n") + "\r\n");
  return path;
}

export function tempDir(): string {
  return mkdtempSync(join(tmpdir(), "triolab-plots-"));
}
