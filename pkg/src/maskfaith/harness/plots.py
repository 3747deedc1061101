"""Deterministic SVG plots of experiment outputs (no timestamps, fixed number formatting).

Each chart's ``<g class="plot">`` element carries its data ranges as
``data-xmin``/``data-xmax``/``data-ymin``/``data-ymax`` attributes.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 520, 340
LEFT, RIGHT, TOP, BOTTOM = 60, 150, 30, 45
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
          "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _fmt(v: float) -> str:
    return f"{v:.4f}".rstrip("0").rstrip(".") if v == v else "nan"


def _range(values, pad=0.05):
    lo, hi = min(values), max(values)
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - pad * span, hi + pad * span


class _Chart:
    def __init__(self, title, xlabel, ylabel, xr, yr):
        self.xr, self.yr = xr, yr
        self.pw = WIDTH - LEFT - RIGHT
        self.ph = HEIGHT - TOP - BOTTOM
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2 - RIGHT / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
            f'<g class="plot" transform="translate({LEFT},{TOP})" data-xmin="{_fmt(xr[0])}" '
            f'data-xmax="{_fmt(xr[1])}" data-ymin="{_fmt(yr[0])}" data-ymax="{_fmt(yr[1])}" '
            f'data-width="{self.pw}" data-height="{self.ph}">',
            f'<rect width="{self.pw}" height="{self.ph}" fill="none" stroke="black"/>',
        ]
        for i in range(5):
            xv = xr[0] + (xr[1] - xr[0]) * i / 4
            yv = yr[0] + (yr[1] - yr[0]) * i / 4
            x, y = self.px(xv), self.py(yv)
            self.parts.append(f'<text x="{x:.2f}" y="{self.ph + 15}" text-anchor="middle">{_fmt(xv)}</text>')
            self.parts.append(f'<text x="-5" y="{y + 4:.2f}" text-anchor="end">{_fmt(yv)}</text>')
        self.parts.append(f'<text x="{self.pw / 2:.1f}" y="{self.ph + 35}" text-anchor="middle">{escape(xlabel)}</text>')
        self.parts.append(f'<text transform="translate(-45,{self.ph / 2:.1f}) rotate(-90)" '
                          f'text-anchor="middle">{escape(ylabel)}</text>')
        self.legend = []

    def px(self, v):
        return (v - self.xr[0]) / (self.xr[1] - self.xr[0]) * self.pw

    def py(self, v):
        return self.ph - (v - self.yr[0]) / (self.yr[1] - self.yr[0]) * self.ph

    def line(self, xs, ys, label):
        color = COLORS[len(self.legend) % len(COLORS)]
        pts = " ".join(f"{self.px(x):.2f},{self.py(y):.2f}" for x, y in zip(xs, ys))
        self.parts.append(f'<polyline class="series" data-label="{escape(label)}" points="{pts}" '
                          f'fill="none" stroke="{color}" stroke-width="1.5"/>')
        self.legend.append((label, color))

    def bar(self, i, n, value, label):
        color = COLORS[i % len(COLORS)]
        slot = self.pw / n
        x0 = slot * i + slot * 0.15
        y0, y1 = self.py(max(value, 0.0)), self.py(min(value, 0.0))
        self.parts.append(f'<rect class="bar" data-label="{escape(label)}" data-value="{_fmt(value)}" '
                          f'x="{x0:.2f}" y="{y0:.2f}" width="{slot * 0.7:.2f}" height="{y1 - y0:.2f}" fill="{color}"/>')
        self.legend.append((label, color))

    def svg(self) -> str:
        self.parts.append("</g>")
        for i, (label, color) in enumerate(self.legend):
            y = TOP + 10 + 16 * i
            x = WIDTH - RIGHT + 10
            self.parts.append(f'<rect x="{x}" y="{y - 8}" width="10" height="10" fill="{color}"/>')
            self.parts.append(f'<text x="{x + 14}" y="{y + 1}">{escape(label)}</text>')
        self.parts.append("</svg>")
        return "\n".join(self.parts) + "\n"


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def drift_svg(rows) -> str:
    xs = [float(r["fraction"]) for r in rows]
    series = {k: [float(r[k]) for r in rows] for k in ("mean_cos", "centroid_cos", "mean_feature_std")}
    ys = [v for s in series.values() for v in s]
    chart = _Chart("Embedding drift under masking", "masked fraction", "value", _range(xs), _range(ys))
    for k, s in series.items():
        chart.line(xs, s, k)
    return chart.svg()


def perturbation_svg(rows) -> str:
    """Mean perturbation curve per decile of samples ranked by curve area."""
    curves: dict[int, list[float]] = {}
    for r in rows:
        curves.setdefault(int(r["sample_id"]), []).append(float(r["drop"]))
    ordered = sorted(curves.items(), key=lambda kv: (sum(kv[1]) / len(kv[1]), kv[0]))
    n_groups = min(10, len(ordered))
    groups = [ordered[len(ordered) * g // n_groups: len(ordered) * (g + 1) // n_groups] for g in range(n_groups)]
    means = []
    for g in groups:
        width = max(len(c) for _, c in g)
        means.append([sum(c[k] for _, c in g if k < len(c)) / sum(1 for _, c in g if k < len(c))
                      for k in range(width)])
    xs_all = [k for m in means for k in range(len(m))]
    ys_all = [v for m in means for v in m]
    chart = _Chart("Perturbation curves by decile", "tokens masked (k)", "f(x) - f(x_1..k)",
                   _range(xs_all), _range(ys_all))
    for g, m in enumerate(means):
        chart.line(list(range(len(m))), m, f"decile {g + 1}")
    return chart.svg()


def fidelity_svg(values: dict[str, float]) -> str:
    chart = _Chart("Fidelity: clean vs attacked", "", "fidelity",
                   (0.0, 1.0), _range([0.0, 1.0] + list(values.values()), pad=0.0))
    for i, (label, v) in enumerate(values.items()):
        chart.bar(i, len(values), v, label)
    return chart.svg()


def render_plots(out_dir, plot_dir=None) -> dict:
    """Render every plot whose input files exist; return (and write) the manifest."""
    out_dir = Path(out_dir)
    plot_dir = Path(plot_dir) if plot_dir else out_dir / "plots"
    plot_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"written": [], "skipped": []}

    def emit(name, make, source):
        path = out_dir / source
        if not path.exists():
            manifest["skipped"].append({"plot": name, "reason": f"missing {source}"})
            return
        try:
            svg = make(path)
        except (KeyError, ValueError, ZeroDivisionError) as exc:
            manifest["skipped"].append({"plot": name, "reason": f"unreadable {source}: {exc}"})
            return
        if svg is None:
            manifest["skipped"].append({"plot": name, "reason": f"empty series in {source}"})
            return
        (plot_dir / name).write_text(svg, encoding="utf-8")
        manifest["written"].append(name)

    def drift(path):
        rows = _read_csv(path)
        return drift_svg(rows) if rows else None

    def perturb(path):
        rows = _read_csv(path)
        return perturbation_svg(rows) if rows else None

    def bars(path):
        summary = json.loads(path.read_text(encoding="utf-8"))
        values = {}
        for key, label in (("fidelity_clean", "clean"), ("fidelity_attacked_clean", "attacked (clean version)"),
                           ("fidelity_attacked", "attacked"), ("fidelity_post_adv_clean", "clean, after adv. training"),
                           ("fidelity_post_adv_attacked", "attacked, after adv. training")):
            if summary.get(key) is not None:
                values[label] = summary[key]
        return fidelity_svg(values) if len(values) >= 2 else None

    emit("drift.svg", drift, "drift.csv")
    emit("perturbation.svg", perturb, "perturbation_curves.csv")
    emit("fidelity.svg", bars, "summary.json")
    (plot_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                            encoding="utf-8")
    return manifest
