/** Minimal deterministic SVG bar charts; no DOM, no dependencies. */

import { formatNumber } from "./csv.js";

export interface Segment {
  value: number;
  color: string;
}

export interface Bar {
  label: string;
  segments: Segment[];
}

const MARGIN = { top: 28, right: 16, bottom: 72, left: 56 };
const BAR_WIDTH = 34;
const GAP = 14;
const PLOT_HEIGHT = 260;

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function stackedBarChart(
  title: string,
  bars: Bar[],
  legend: { label: string; color: string }[],
  yLabel: string,
  yMax?: number,
): string {
  const width = MARGIN.left + bars.length * (BAR_WIDTH + GAP) + MARGIN.right + 140;
  const height = MARGIN.top + PLOT_HEIGHT + MARGIN.bottom;
  const top = yMax ?? Math.max(1e-9, ...bars.map((b) => b.segments.reduce((a, s) => a + s.value, 0)));
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `font-family="sans-serif" font-size="11">`,
  );
  parts.push(`<text x="${MARGIN.left}" y="16" font-size="13">${esc(title)}</text>`);
  // y axis with four gridlines
  for (let i = 0; i <= 4; i++) {
    const frac = i / 4;
    const y = MARGIN.top + PLOT_HEIGHT * (1 - frac);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${formatNumber(y)}" ` +
        `x2="${width - MARGIN.right - 140}" y2="${formatNumber(y)}" stroke="#ddd"/>`,
    );
    parts.push(
      `<text x="${MARGIN.left - 6}" y="${formatNumber(y + 4)}" text-anchor="end">` +
        `${formatNumber(top * frac)}</text>`,
    );
  }
  parts.push(
    `<text x="14" y="${MARGIN.top + PLOT_HEIGHT / 2}" transform="rotate(-90 14 ${
      MARGIN.top + PLOT_HEIGHT / 2
    })" text-anchor="middle">${esc(yLabel)}</text>`,
  );
  bars.forEach((bar, i) => {
    const x = MARGIN.left + i * (BAR_WIDTH + GAP) + GAP / 2;
    let yCursor = MARGIN.top + PLOT_HEIGHT;
    for (const seg of bar.segments) {
      const h = (seg.value / top) * PLOT_HEIGHT;
      yCursor -= h;
      parts.push(
        `<rect x="${formatNumber(x)}" y="${formatNumber(yCursor)}" width="${BAR_WIDTH}" ` +
          `height="${formatNumber(h)}" fill="${seg.color}"/>`,
      );
    }
    const lx = x + BAR_WIDTH / 2;
    const ly = MARGIN.top + PLOT_HEIGHT + 10;
    parts.push(
      `<text x="${formatNumber(lx)}" y="${formatNumber(ly)}" text-anchor="end" ` +
        `transform="rotate(-45 ${formatNumber(lx)} ${formatNumber(ly)})">${esc(bar.label)}</text>`,
    );
  });
  legend.forEach((entry, i) => {
    const x = width - MARGIN.right - 130;
    const y = MARGIN.top + i * 18;
    parts.push(`<rect x="${x}" y="${y}" width="12" height="12" fill="${entry.color}"/>`);
    parts.push(`<text x="${x + 18}" y="${y + 10}">${esc(entry.label)}</text>`);
  });
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

export function barChart(title: string, bars: { label: string; value: number }[],
                         color: string, yLabel: string): string {
  return stackedBarChart(
    title,
    bars.map((b) => ({ label: b.label, segments: [{ value: b.value, color }] })),
    [],
    yLabel,
  );
}
