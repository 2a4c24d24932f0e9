"""Serialization of experiment results: CSV series and summary, a minimal
SVG line chart and a plain-text metadata file.

Numbers are written with 12 significant digits. The in-memory series handed to
the writer is first rounded to that precision (:func:`quantize`), so reading
the CSV back recovers it exactly. Nothing time- or host-dependent is written,
which keeps outputs byte-identical for identical configurations and seeds.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from .model import TWO_PI
from .protocols import ExperimentConfig, ExperimentResult

__all__ = ["SERIES_COLUMNS", "format_number", "quantize", "read_series", "render_svg", "write_result"]

SERIES_COLUMNS = ("F_ideal", "F_full", "F_diss")
COLORS = {"F_ideal": "#000000", "F_full": "#cc2222", "F_diss": "#2244cc"}


def format_number(x: float) -> str:
    return f"{float(x):.12g}"


def quantize(a) -> np.ndarray:
    """Round to the 12 significant digits used on disk."""
    return np.array([float(format_number(x)) for x in np.ravel(a)]).reshape(np.shape(a))


def _series_table(result: ExperimentResult) -> tuple[list[str], np.ndarray]:
    cols = [c for c in SERIES_COLUMNS if c in result.series]
    data = np.column_stack([result.times] + [result.series[c] for c in cols])
    return ["t"] + cols, quantize(data)


def _write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    path.write_text(buf.getvalue())


def read_series(path) -> dict[str, np.ndarray]:
    """Read a ``series.csv`` back into ``{column: values}``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in r] for r in body]).reshape(len(body), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def _nice_ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    return np.arange(math.ceil(lo / step) * step, hi + step * 1e-9, step)


def render_svg(times: np.ndarray, series: dict[str, np.ndarray], title: str = "",
               width: int = 640, height: int = 400) -> str:
    """Polyline chart of ``series`` against ``times`` (seconds, shown in ns)."""
    left, right, top, bottom = 70, 20, 30, 50
    pw, ph = width - left - right, height - top - bottom
    t = np.asarray(times) * 1e9
    values = np.concatenate([np.asarray(v) for v in series.values()]) if series else np.array([0.0, 1.0])
    ylo, yhi = float(values.min()), float(values.max())
    if yhi - ylo < 1e-6:
        ylo, yhi = ylo - 0.5e-3, yhi + 0.5e-3
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad
    tlo, thi = float(t[0]), float(t[-1]) if t[-1] > t[0] else float(t[0]) + 1.0

    def sx(x):
        return left + (x - tlo) / (thi - tlo) * pw

    def sy(y):
        return top + (yhi - y) / (yhi - ylo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    for xt in _nice_ticks(tlo, thi):
        x = sx(xt)
        out.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 5}" stroke="#444"/>')
        out.append(f'<text x="{x:.2f}" y="{top + ph + 18}" text-anchor="middle">{xt:.4g}</text>')
    for yt in _nice_ticks(ylo, yhi):
        y = sy(yt)
        out.append(f'<line x1="{left - 5}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="#444"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end">{yt:.4g}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle">t (ns)</text>')
    if title:
        out.append(f'<text x="{left + pw / 2}" y="18" text-anchor="middle">{title}</text>')
    for k, (name, v) in enumerate(series.items()):
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(t, np.asarray(v)))
        color = COLORS.get(name, "#228822")
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{left + pw - 5}" y="{top + 15 + 14 * k}" text-anchor="end" fill="{color}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _params_lines(cfg: ExperimentConfig) -> list[str]:
    p = cfg.params
    lines = [f"n_qubits = {p.n_qubits}"]
    for name in ("omega_r", "epsilon", "g", "Omega_x", "omega_x", "Omega_z", "omega_z", "gamma", "kappa"):
        lines.append(f"{name} = {format_number(getattr(p, name) / TWO_PI / 1e9)} GHz")
    return lines


def _meta_value(v) -> str | None:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_number(v)
    if isinstance(v, str):
        return v
    if isinstance(v, (list, tuple)) and all(isinstance(x, (int, np.integer)) for x in v):
        return ",".join(str(int(x)) for x in v)
    if isinstance(v, np.ndarray) and v.ndim == 1 and v.size and np.isrealobj(v):
        return f"max {format_number(np.max(v))}"
    return None


def write_result(result: ExperimentResult, cfg: ExperimentConfig, out_dir) -> dict[str, Path]:
    """Write ``series.csv``, ``summary.csv``, ``plot.svg`` and ``meta.txt`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header, data = _series_table(result)
    paths = {name: out / name for name in ("series.csv", "summary.csv", "plot.svg", "meta.txt")}
    _write_csv(paths["series.csv"], header, ([format_number(x) for x in row] for row in data))
    _write_csv(paths["summary.csv"], ["quantity", "value"],
               ([k, format_number(v)] for k, v in result.summary.items()))
    plotted = {c: data[:, i + 1] for i, c in enumerate(header[1:])}
    paths["plot.svg"].write_text(render_svg(data[:, 0], plotted, title=result.protocol))
    lines = [f"protocol = {result.protocol}", *_params_lines(cfg),
             f"fock_dim = {cfg.fock}", f"horizon_periods = {format_number(cfg.horizon_periods)}",
             f"samples = {cfg.samples}", f"modes = {','.join(cfg.modes)}", f"engine = {cfg.engine}",
             f"trajectories = {cfg.n_traj}", f"seed = {cfg.seed}",
             f"counter_rotating = {str(cfg.counter_rotating).lower()}",
             f"step_scale = {format_number(cfg.step_scale)}"]
    written = {line.split(" = ", 1)[0] for line in lines}
    for k, v in result.meta.items():
        text = _meta_value(v)
        if text is not None and k not in written:
            lines.append(f"{k} = {text}")
    paths["meta.txt"].write_text("\n".join(lines) + "\n")
    return paths
