"""Run records and their CSV/SVG materialization.

Floats are written with repr so a re-parsed report is exactly the in-memory
record, and identical runs produce byte-identical files (wall time is kept in
the record but never serialized).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

CSV_HEADER = ("mode", "pipeline", "x_metric", "x", "psnr_mean", "psnr_std",
              "seed", "checkpoint_hash")


@dataclass
class RunRow:
    x_metric: str  # "r_avg" or "l_avg"
    x: float
    psnr_mean: float
    psnr_std: float
    wall_time: float = 0.0
    checkpoint_path: str = ""
    checkpoint_hash: str = ""


@dataclass
class RunRecord:
    mode: str
    pipeline: str
    seed: int
    rows: list[RunRow] = field(default_factory=list)


def write_report_csv(records: list[RunRecord], path: str | Path) -> None:
    if not records:
        raise ValueError("no records to report")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for rec in records:
            for row in rec.rows:
                writer.writerow([rec.mode, rec.pipeline, row.x_metric, repr(row.x),
                                 repr(row.psnr_mean), repr(row.psnr_std),
                                 rec.seed, row.checkpoint_hash])


def read_report_csv(path: str | Path) -> list[RunRecord]:
    records: dict[tuple, RunRecord] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected report header {header}")
        for line in reader:
            mode, pipeline, x_metric, x, mean, std, seed, ckpt = line
            key = (mode, pipeline, int(seed))
            rec = records.setdefault(key, RunRecord(mode, pipeline, int(seed)))
            rec.rows.append(RunRow(x_metric, float(x), float(mean), float(std),
                                   checkpoint_hash=ckpt))
    return list(records.values())


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_PLOT = dict(width=640, height=420, margin=60)


def _scaler(lo: float, hi: float, out_lo: float, out_hi: float):
    span = (hi - lo) or 1.0

    def scale(v: float) -> float:
        return out_lo + (v - lo) / span * (out_hi - out_lo)

    return scale


def render_curves_svg(records: list[RunRecord], path: str | Path) -> None:
    """One PSNR-vs-cost line per record; plain hand-rolled SVG."""
    if not records:
        raise ValueError("no records to plot")
    w, h, m = _PLOT["width"], _PLOT["height"], _PLOT["margin"]
    xs = [row.x for rec in records for row in rec.rows]
    ys = [row.psnr_mean for rec in records for row in rec.rows]
    sx = _scaler(min(xs), max(xs), m, w - m / 2)
    sy = _scaler(min(ys), max(ys), h - m, m / 2)
    x_label = records[0].rows[0].x_metric if records[0].rows else "x"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
        f'<line x1="{m}" y1="{h - m}" x2="{w - m / 2}" y2="{h - m}" stroke="black"/>',
        f'<line x1="{m}" y1="{h - m}" x2="{m}" y2="{m / 2}" stroke="black"/>',
        f'<text x="{w / 2}" y="{h - m / 3}" text-anchor="middle" '
        f'font-size="14">{x_label}</text>',
        f'<text x="{m / 3}" y="{h / 2}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 {m / 3} {h / 2})">PSNR (dB)</text>',
    ]
    for lo, hi, scale, axis in ((min(xs), max(xs), sx, "x"), (min(ys), max(ys), sy, "y")):
        for i in range(5):
            v = lo + (hi - lo) * i / 4
            if axis == "x":
                parts.append(f'<text x="{scale(v):.1f}" y="{h - m + 18}" '
                             f'text-anchor="middle" font-size="11">{v:.4g}</text>')
            else:
                parts.append(f'<text x="{m - 6}" y="{scale(v):.1f}" '
                             f'text-anchor="end" font-size="11">{v:.4g}</text>')
    for k, rec in enumerate(records):
        color = _PALETTE[k % len(_PALETTE)]
        rows = sorted(rec.rows, key=lambda r: r.x)
        pts = " ".join(f"{sx(r.x):.2f},{sy(r.psnr_mean):.2f}" for r in rows)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="2"/>')
        for r in rows:
            parts.append(f'<circle cx="{sx(r.x):.2f}" cy="{sy(r.psnr_mean):.2f}" '
                         f'r="3" fill="{color}"/>')
        label = f"{rec.pipeline} ({rec.mode})"
        parts.append(f'<text x="{w - m / 2 - 4}" y="{m / 2 + 16 * k}" text-anchor="end" '
                     f'font-size="12" fill="{color}">{label}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))


def emit_report(records: list[RunRecord], out_dir: str | Path) -> dict[str, Path]:
    """report.csv plus curves.svg under ``out_dir``."""
    if not records:
        raise ValueError("no records to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "report.csv"
    svg_path = out / "curves.svg"
    write_report_csv(records, csv_path)
    render_curves_svg(records, svg_path)
    return {"csv": csv_path, "svg": svg_path}


def matched_points(query_rows: list[RunRow], base_rows: list[RunRow],
                   rel_tol: float = 0.10) -> list[tuple[float, float, float]]:
    """(x, query PSNR, baseline PSNR at matched x) for every query row whose
    x lies inside the baseline sweep (interpolated) or within rel_tol of an
    endpoint (clamped)."""
    base = sorted(base_rows, key=lambda r: r.x)
    bx = [r.x for r in base]
    by = [r.psnr_mean for r in base]
    out = []
    for row in sorted(query_rows, key=lambda r: r.x):
        x = row.x
        if bx[0] <= x <= bx[-1]:
            for i in range(len(bx) - 1):
                if bx[i] <= x <= bx[i + 1]:
                    t = 0.0 if bx[i + 1] == bx[i] else (x - bx[i]) / (bx[i + 1] - bx[i])
                    out.append((x, row.psnr_mean, by[i] + t * (by[i + 1] - by[i])))
                    break
        elif x < bx[0] and abs(x - bx[0]) <= rel_tol * bx[0]:
            out.append((x, row.psnr_mean, by[0]))
        elif x > bx[-1] and abs(x - bx[-1]) <= rel_tol * bx[-1]:
            out.append((x, row.psnr_mean, by[-1]))
    return out
