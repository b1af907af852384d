"""Static SVG figures and their CSV tables, written without a charting dependency."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from xml.sax.saxutils import escape

from .metrics import MetricsReport

W, H = 480, 320
MARGIN = 50
KINDS = ("oa_snr", "confusion", "ssim")


def _svg(body: list, title: str) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">\n'
        f'<rect width="{W}" height="{H}" fill="white"/>\n'
        f'<text x="{W / 2}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">'
        f"{escape(title)}</text>\n"
    )
    return head + "\n".join(body) + "\n</svg>\n"


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _axes(x_label: str, y_label: str) -> list:
    x0, y0, x1, y1 = MARGIN, H - MARGIN, W - 20, 35
    return [
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) / 2}" y="{H - 12}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="12">{escape(x_label)}</text>',
        f'<text x="14" y="{(y0 + y1) / 2}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 14 {(y0 + y1) / 2})">{escape(y_label)}</text>',
    ]


def _scale(v, lo, hi, a, b):
    return a if hi == lo else a + (v - lo) * (b - a) / (hi - lo)


def oa_snr_figure(report: MetricsReport):
    keys = [k for k in report.snr_keys() if k in report.per_snr_oa]
    rows = [["snr_db", "oa"]] + [[k, repr(report.per_snr_oa[k])] for k in keys]
    numeric = [(float(k) if k not in ("noiseless", "none") else None) for k in keys]
    xs = [v if v is not None else (max([n for n in numeric if n is not None], default=0) + 2) for v in numeric]
    body = _axes("SNR (dB)", "overall accuracy")
    pts = []
    for k, x in zip(keys, xs):
        px = _scale(x, min(xs), max(xs), MARGIN + 10, W - 30)
        py = _scale(report.per_snr_oa[k], 0.0, 1.0, H - MARGIN, 40)
        pts.append((px, py, k))
    if pts:
        body.append('<polyline fill="none" stroke="steelblue" stroke-width="2" points="'
                    + " ".join(f"{px:.1f},{py:.1f}" for px, py, _ in pts) + '"/>')
        for px, py, k in pts:
            body.append(f'<circle cx="{px:.1f}" cy="{py:.1f}" r="3" fill="steelblue"/>')
            body.append(f'<text x="{px:.1f}" y="{H - MARGIN + 14}" text-anchor="middle" '
                        f'font-family="sans-serif" font-size="10">{escape(k)}</text>')
    return _svg(body, "OA versus SNR"), _csv(rows)


def confusion_figure(report: MetricsReport):
    counts = report.confusion or []
    names = report.class_names or [str(k) for k in range(len(counts))]
    rows = [["true\\pred"] + list(names)] + [[names[i]] + [str(v) for v in r] for i, r in enumerate(counts)]
    k = max(len(counts), 1)
    cell = min((W - 2 * MARGIN) / k, (H - 2 * MARGIN) / k)
    body = []
    for i, r in enumerate(counts):
        total = sum(r) or 1
        for j, v in enumerate(r):
            shade = int(255 * (1 - v / total))
            x = MARGIN + j * cell
            y = 35 + i * cell
            body.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{cell:.1f}" height="{cell:.1f}" '
                        f'fill="rgb({shade},{shade},255)" stroke="gray"/>')
            body.append(f'<text x="{x + cell / 2:.1f}" y="{y + cell / 2 + 4:.1f}" text-anchor="middle" '
                        f'font-family="sans-serif" font-size="10">{v}</text>')
    for i, n in enumerate(names):
        body.append(f'<text x="{MARGIN - 4}" y="{35 + (i + 0.5) * cell + 4:.1f}" text-anchor="end" '
                    f'font-family="sans-serif" font-size="10">{escape(str(n))}</text>')
    return _svg(body, "Confusion matrix"), _csv(rows)


def ssim_figure(report: MetricsReport):
    keys = [k for k in report.snr_keys() if k in report.per_snr_ssim]
    series = [("model", report.per_snr_ssim, "steelblue"), ("noisy", report.per_snr_noisy_ssim, "gray"),
              ("sg", report.per_snr_sg_ssim, "orange")]
    series = [s for s in series if s[1]]
    rows = [["snr_db"] + [name for name, _, _ in series]]
    rows += [[k] + [repr(m.get(k, float("nan"))) for _, m, _ in series] for k in keys]
    body = _axes("SNR (dB)", "mean SSIM")
    group = (W - MARGIN - 30) / max(len(keys), 1)
    bar = group / (len(series) + 1)
    for gi, k in enumerate(keys):
        for si, (_, m, color) in enumerate(series):
            v = max(0.0, min(1.0, m.get(k, 0.0)))
            x = MARGIN + 5 + gi * group + si * bar
            top = _scale(v, 0.0, 1.0, H - MARGIN, 40)
            body.append(f'<rect x="{x:.1f}" y="{top:.1f}" width="{bar:.1f}" height="{H - MARGIN - top:.1f}" '
                        f'fill="{color}"/>')
        body.append(f'<text x="{MARGIN + 5 + (gi + 0.5) * group - bar / 2:.1f}" y="{H - MARGIN + 14}" '
                    f'text-anchor="middle" font-family="sans-serif" font-size="10">{escape(k)}</text>')
    return _svg(body, "SSIM by SNR"), _csv(rows)


FIGURES = {"oa_snr": oa_snr_figure, "confusion": confusion_figure, "ssim": ssim_figure}


def available_kinds(report: MetricsReport) -> list:
    kinds = []
    if report.per_snr_oa:
        kinds.append("oa_snr")
    if report.confusion:
        kinds.append("confusion")
    if report.per_snr_ssim:
        kinds.append("ssim")
    return kinds


def write_figures(report: MetricsReport, out_dir, kinds=None, stem: str = "") -> list:
    """Write ``<stem><kind>.svg`` and ``.csv`` for each requested kind; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for kind in kinds or available_kinds(report):
        if kind not in FIGURES:
            raise ValueError(f"unknown figure kind {kind!r}; expected one of {KINDS}")
        svg, table = FIGURES[kind](report)
        for ext, text in (("svg", svg), ("csv", table)):
            p = out / f"{stem}{kind}.{ext}"
            p.write_text(text)
            written.append(p)
    return written
