/** Minimal deterministic SVG line charts: axes, tick labels, bands, legend. */

export interface Series {
  label: string;
  color: string;
  y: number[];
  band?: number[]; // symmetric half-width around y
  dashed?: boolean;
}

export interface PanelSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
}

const WIDTH = 640;
const HEIGHT = 360;
const MARGIN = { left: 62, right: 16, top: 34, bottom: 44 };

export const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

function niceTicks(lo: number, hi: number, count = 5): number[] {
  if (!Number.isFinite(lo) || !Number.isFinite(hi)) return [0];
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  const span = hi - lo;
  const step = 10 ** Math.floor(Math.log10(span / count));
  const err = span / count / step;
  const factor = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = step * factor;
  const start = Math.ceil(lo / s) * s;
  const ticks: number[] = [];
  for (let v = start; v <= hi + 1e-12; v += s) ticks.push(Number(v.toFixed(12)));
  return ticks;
}

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1000 || a < 0.01) return v.toExponential(1);
  return Number(v.toFixed(3)).toString();
}

export function renderPanel(spec: PanelSpec): string {
  const xs = spec.series[0]?.y.length ?? 0;
  let yLo = Infinity;
  let yHi = -Infinity;
  for (const s of spec.series) {
    for (let i = 0; i < s.y.length; i++) {
      const half = s.band ? s.band[i] : 0;
      yLo = Math.min(yLo, s.y[i] - half);
      yHi = Math.max(yHi, s.y[i] + half);
    }
  }
  if (!Number.isFinite(yLo)) {
    yLo = 0;
    yHi = 1;
  }
  const pad = (yHi - yLo) * 0.05 || 1;
  yLo -= pad;
  yHi += pad;

  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const px = (i: number) => MARGIN.left + (xs <= 1 ? 0 : (i / (xs - 1)) * plotW);
  const py = (v: number) => MARGIN.top + (1 - (v - yLo) / (yHi - yLo)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(
    `<text x="${WIDTH / 2}" y="20" text-anchor="middle" font-size="14">${spec.title}</text>`,
  );

  for (const tick of niceTicks(yLo, yHi)) {
    const y = py(tick).toFixed(2);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${y}" x2="${WIDTH - MARGIN.right}" y2="${y}" stroke="#dddddd" stroke-width="1"/>`,
    );
    parts.push(
      `<text x="${MARGIN.left - 6}" y="${y}" text-anchor="end" dominant-baseline="middle" font-size="10">${fmt(tick)}</text>`,
    );
  }
  for (const tick of niceTicks(0, Math.max(xs - 1, 1))) {
    if (tick < 0 || tick > xs - 1) continue;
    const x = px(tick).toFixed(2);
    parts.push(
      `<text x="${x}" y="${HEIGHT - MARGIN.bottom + 14}" text-anchor="middle" font-size="10">${fmt(tick)}</text>`,
    );
  }
  parts.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" y2="${HEIGHT - MARGIN.bottom}" stroke="black"/>`,
  );
  parts.push(
    `<line x1="${MARGIN.left}" y1="${HEIGHT - MARGIN.bottom}" x2="${WIDTH - MARGIN.right}" y2="${HEIGHT - MARGIN.bottom}" stroke="black"/>`,
  );
  parts.push(
    `<text x="${MARGIN.left + plotW / 2}" y="${HEIGHT - 8}" text-anchor="middle" font-size="11">${spec.xLabel}</text>`,
  );
  parts.push(
    `<text x="16" y="${MARGIN.top + plotH / 2}" text-anchor="middle" font-size="11" transform="rotate(-90 16 ${MARGIN.top + plotH / 2})">${spec.yLabel}</text>`,
  );

  for (const s of spec.series) {
    if (s.band) {
      const upper = s.y.map((v, i) => `${px(i).toFixed(2)},${py(v + s.band![i]).toFixed(2)}`);
      const lower = s.y
        .map((v, i) => `${px(i).toFixed(2)},${py(v - s.band![i]).toFixed(2)}`)
        .reverse();
      parts.push(
        `<path d="M${[...upper, ...lower].join(" L")} Z" fill="${s.color}" fill-opacity="0.15" stroke="none" class="band"/>`,
      );
    }
  }
  for (const s of spec.series) {
    const points = s.y.map((v, i) => `${px(i).toFixed(2)},${py(v).toFixed(2)}`).join(" ");
    const dash = s.dashed ? ' stroke-dasharray="5,4"' : "";
    parts.push(
      `<polyline points="${points}" fill="none" stroke="${s.color}" stroke-width="1.6"${dash}/>`,
    );
  }

  spec.series.forEach((s, i) => {
    const y = MARGIN.top + 8 + i * 15;
    const x = WIDTH - MARGIN.right - 150;
    parts.push(
      `<line x1="${x}" y1="${y}" x2="${x + 20}" y2="${y}" stroke="${s.color}" stroke-width="2"${s.dashed ? ' stroke-dasharray="5,4"' : ""}/>`,
    );
    parts.push(
      `<text x="${x + 26}" y="${y + 3}" font-size="10">${s.label}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n");
}

/** Stack panels vertically into one SVG document. */
export function renderFigure(panels: PanelSpec[]): string {
  if (panels.length === 1) return renderPanel(panels[0]);
  const inner = panels
    .map(
      (p, i) =>
        `<g transform="translate(0 ${i * HEIGHT})">${renderPanel(p)
          .replace(/^<svg[^>]*>/, "")
          .replace(/<\/svg>$/, "")}</g>`,
    )
    .join("\n");
  return `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT * panels.length}" viewBox="0 0 ${WIDTH} ${HEIGHT * panels.length}" font-family="Helvetica, Arial, sans-serif">\n${inner}\n</svg>`;
}
