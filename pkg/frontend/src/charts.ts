import * as echarts from "echarts";
import { Resvg } from "@resvg/resvg-js";

import { Annotations, RunArtifact } from "./schema.js";
import { Rational } from "./rational.js";

export interface ChartSize {
  width: number;
  height: number;
}

export const DEFAULT_SIZE: ChartSize = { width: 900, height: 540 };

export function exactLambda(run: RunArtifact): Rational {
  return new Rational(run.summary.lambdaNum, run.summary.lambdaDen);
}

interface AppliedAnnotation {
  i: number;
  absL: number;
  text: string;
}

export function applyAnnotations(run: RunArtifact, annotations: Annotations): AppliedAnnotation[] {
  const byIndex = new Map(run.series.map((p) => [p.i, p]));
  const applied: AppliedAnnotation[] = [];
  for (const [key, text] of Object.entries(annotations)) {
    const point = byIndex.get(+key);
    if (point) {
      applied.push({ i: point.i, absL: point.absL, text });
    }
  }
  applied.sort((a, b) => a.i - b.i);
  return applied;
}

// log axes read better across magnitudes but cannot hold zeros
function axisType(values: number[]): "log" | "value" {
  return values.length > 0 && values.every((v) => v > 0) ? "log" : "value";
}

export function seriesOption(run: RunArtifact, annotations: Annotations = {}): echarts.EChartsOption {
  const a = run.series.map((p) => [p.i, p.absA]);
  const l = run.series.map((p) => [p.i, p.absL]);
  const applied = applyAnnotations(run, annotations);
  return {
    animation: false,
    title: { text: run.label, left: "center" },
    legend: { top: 28 },
    grid: { left: 70, right: 40, bottom: 50, top: 70 },
    xAxis: {
      type: "value",
      name: "instruction",
      nameLocation: "middle",
      nameGap: 30,
      minInterval: 1,
    },
    yAxis: {
      type: axisType(run.series.flatMap((p) => [p.absA, p.absL])),
      name: "addresses",
    },
    series: [
      {
        name: "|A|",
        type: "line",
        showSymbol: false,
        data: a,
      },
      {
        name: "|L|",
        type: "line",
        showSymbol: false,
        data: l,
        markPoint: {
          symbol: "pin",
          symbolSize: 46,
          label: { fontSize: 9, color: "#fff" },
          data: applied.map((p) => ({
            name: `leak@${p.i}`,
            coord: [p.i, p.absL],
            value: p.text,
          })),
        },
      },
    ],
  };
}

export function lambdaOption(runs: RunArtifact[]): echarts.EChartsOption {
  return {
    animation: false,
    title: { text: "leakage ratio per run", left: "center" },
    grid: { left: 70, right: 40, bottom: 60, top: 60 },
    xAxis: { type: "category", data: runs.map((r) => r.label) },
    yAxis: { type: "value", name: "Λ" },
    series: [
      {
        type: "bar",
        barMaxWidth: 60,
        data: runs.map((run) => ({
          value: exactLambda(run).toNumber(),
          label: {
            show: true,
            position: "top",
            // a plain string stays literal, so the exact ratio is printed
            formatter: exactLambda(run).toString(),
          },
        })),
      },
    ],
  };
}

export function renderSVG(option: echarts.EChartsOption, size: ChartSize = DEFAULT_SIZE): string {
  const chart = echarts.init(null, null, {
    renderer: "svg",
    ssr: true,
    width: size.width,
    height: size.height,
  });
  try {
    chart.setOption(option);
    return chart.renderToSVGString();
  } finally {
    chart.dispose();
  }
}

export function renderPNG(svg: string): Buffer {
  return new Resvg(svg).render().asPng();
}
