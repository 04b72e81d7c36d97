"""SVG figures from experiment CSV files."""
import csv
import os

import numpy as np

from ..errors import SchemaError
from .experiments import REGRET_COLUMNS, STABILIZATION_COLUMNS

__all__ = ["emit_plot", "read_csv", "KINDS"]

KINDS = ("stabilization", "regret", "estimation")


def read_csv(path, columns):
    """Rows of ``path`` as dicts after checking the header against ``columns``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != tuple(columns):
            raise SchemaError(f"{path}: expected header {','.join(columns)}")
        rows = [dict(zip(header, r)) for r in reader if r]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    for r in rows:
        if len(r) != len(columns):
            raise SchemaError(f"{path}: ragged row {r}")
    return rows


def _figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "tsdiffusion"
    return plt


def emit_plot(csv_path, kind, out_path):
    """Render ``csv_path`` as an SVG figure of the given ``kind``.

    ``stabilization`` plots success rate against ``tau``; ``regret`` and
    ``estimation`` plot the mean and worst-case normalized series per policy.
    Nothing is written if the CSV fails validation.
    """
    if kind not in KINDS:
        raise SchemaError(f"unknown plot kind {kind!r}")
    if kind == "stabilization":
        rows = read_csv(csv_path, STABILIZATION_COLUMNS)
        try:
            x = np.array([float(r["tau"]) for r in rows])
            y = np.array([float(r["success_rate"]) for r in rows])
        except ValueError as exc:
            raise SchemaError(f"{csv_path}: non-numeric field") from exc
        series = {"success rate": (x, 100 * y)}
        xlabel, ylabel = "stabilization time tau (s)", "stabilized runs (%)"
    else:
        rows = read_csv(csv_path, REGRET_COLUMNS)
        col = "norm_regret" if kind == "regret" else "norm_est_err"
        series = {}
        for r in rows:
            if r["rep"] not in ("mean", "worst"):
                continue
            key = f"{r['policy']} {'average' if r['rep'] == 'mean' else 'worst case'}"
            try:
                series.setdefault(key, ([], []))
                series[key][0].append(float(r["T"]))
                series[key][1].append(float(r[col]))
            except ValueError as exc:
                raise SchemaError(f"{csv_path}: non-numeric field") from exc
        if not series:
            raise SchemaError(f"{csv_path}: no aggregate rows")
        xlabel = "time T (s)"
        ylabel = ("regret / (p(p+q) sqrt(T) log T)" if kind == "regret"
                  else "squared error / (p(p+q) tau^-1/2 log tau)")
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (x, y) in series.items():
        style = "--" if label.endswith("worst case") else "-"
        ax.plot(x, y, style, marker="o", ms=3, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    tmp = str(out_path) + ".part"
    fig.savefig(tmp, format="svg", metadata={"Date": None})
    plt.close(fig)
    os.replace(tmp, out_path)
    return out_path
