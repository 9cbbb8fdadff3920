/**
 * Figure CLI over meta-test CSVs.
 *
 *   node dist/cli.js rewards  --sequence minigolf_A --out fig.svg --input bayes=a.csv --input bayes=b.csv
 *   node dist/cli.js tracking --sequence minigolf_A --out fig.svg --input bayes=a.csv
 *   node dist/cli.js regret   --sequence minigolf_A --out fig.svg --oracle o0.csv --input bayes=a.csv
 *
 * Next to every image a `<out>.data.json` records the numeric series drawn.
 */

import { writeFileSync } from "node:fs";
import { CsvError } from "./csv.js";
import { FigureResult, ModeInput, plotRegret, plotRewards, plotTracking } from "./plots.js";
import { TaskAgg } from "./stats.js";

interface Args {
  panel: string;
  sequence: string;
  out: string;
  inputs: ModeInput[];
  oracle: string[];
  agg: TaskAgg;
}

export function parseArgs(argv: string[]): Args {
  const [panel, ...rest] = argv;
  if (!panel || !["rewards", "tracking", "regret"].includes(panel)) {
    throw new CsvError("usage: <rewards|tracking|regret> --sequence NAME --out FILE --input mode=csv [...]");
  }
  let sequence = "";
  let out = "";
  let agg: TaskAgg = "mean";
  const oracle: string[] = [];
  const byMode = new Map<string, string[]>();
  const order: string[] = [];
  for (let i = 0; i < rest.length; i += 2) {
    const flag = rest[i];
    const value = rest[i + 1];
    if (value === undefined) throw new CsvError(`missing value for ${flag}`);
    switch (flag) {
      case "--sequence":
        sequence = value;
        break;
      case "--out":
        out = value;
        break;
      case "--oracle":
        oracle.push(value);
        break;
      case "--task-agg":
        if (value !== "mean" && value !== "sum") throw new CsvError("--task-agg must be mean or sum");
        agg = value;
        break;
      case "--input": {
        const eq = value.indexOf("=");
        if (eq <= 0) throw new CsvError(`--input expects mode=path, got ${value}`);
        const mode = value.slice(0, eq);
        if (!byMode.has(mode)) {
          byMode.set(mode, []);
          order.push(mode);
        }
        byMode.get(mode)!.push(value.slice(eq + 1));
        break;
      }
      default:
        throw new CsvError(`unknown flag ${flag}`);
    }
  }
  if (!sequence) throw new CsvError("--sequence is required");
  if (!out) throw new CsvError("--out is required");
  const inputs = order.map((mode) => ({ mode, paths: byMode.get(mode)! }));
  return { panel, sequence, out, inputs, oracle, agg };
}

export function run(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 2;
  }
  try {
    let result: FigureResult;
    if (args.panel === "rewards") {
      result = plotRewards(args.inputs, args.sequence, args.agg);
    } else if (args.panel === "tracking") {
      result = plotTracking(args.inputs, args.sequence);
    } else {
      result = plotRegret(args.inputs, args.oracle, args.sequence, args.agg);
    }
    writeFileSync(args.out, result.svg);
    writeFileSync(`${args.out}.data.json`, JSON.stringify(result.data, null, 1) + "\n");
    return 0;
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 1;
  }
}

const isMain = process.argv[1] && import.meta.url.endsWith(process.argv[1].split("/").pop()!);
if (isMain) {
  process.exit(run(process.argv.slice(2)));
}
