"""Render figures from the reconstruction harness's CSV/JSON artifacts.

Strictly a read-only consumer of the documented schemas:

    profile.csv      x,f_reconstructed,f_ground_truth,f_lowpass
    convergence.csv  P,mean_error,std_error,n_ok_trials
    summary.json     config echo plus results (knots, errors, slope, ...)

No metric is recomputed here.  Renders are deterministic: fixed figure
geometry and fonts, axis limits derived from the data.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIGURE_KINDS = ("profile", "convergence", "comparison")

_RC = {
    "figure.figsize": (8.0, 5.0),
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "font.family": "DejaVu Sans",
    "font.size": 11,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


class SchemaError(ValueError):
    """Raised when an input artifact does not match the documented schema."""


@dataclass(frozen=True)
class FigureJob:
    kind: str
    input_dir: Path
    output_path: Path

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}")
        object.__setattr__(self, "input_dir", Path(self.input_dir))
        object.__setattr__(self, "output_path", Path(self.output_path))


def _read_csv(path: Path, expected_header: list[str]) -> dict[str, np.ndarray]:
    if not path.exists():
        raise SchemaError(f"missing input file {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path} is empty") from None
        if header != expected_header:
            raise SchemaError(
                f"{path} header {header!r} does not match {expected_header!r}"
            )
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path} has no data rows")
    try:
        data = np.array([[float(v) for v in row] for row in rows])
    except ValueError as exc:
        raise SchemaError(f"{path} has a non-numeric field: {exc}") from None
    if data.shape[1] != len(expected_header):
        raise SchemaError(f"{path} has ragged rows")
    return {name: data[:, i] for i, name in enumerate(expected_header)}


def _read_summary(path: Path) -> dict:
    if not path.exists():
        raise SchemaError(f"missing input file {path}")
    try:
        summary = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON: {exc}") from None
    if not isinstance(summary, dict) or "results" not in summary:
        raise SchemaError(f"{path} lacks a results section")
    return summary


def _padded_limits(lo: float, hi: float, pad: float = 0.05) -> tuple[float, float]:
    span = hi - lo
    if span <= 0:
        span = max(abs(hi), 1.0)
    return lo - pad * span, hi + pad * span


def render(job: FigureJob) -> dict:
    """Produce the figure for a job and return its geometry metadata.

    The output file is written atomically; on schema errors nothing is
    written.  The returned dict carries the pixel dimensions and the data
    ranges actually used, which re-renders reproduce exactly.
    """
    with plt.rc_context(_RC):
        if job.kind == "profile":
            meta = _render_profile(job)
        elif job.kind == "convergence":
            meta = _render_convergence(job)
        else:
            meta = _render_comparison(job)
    return meta


def _save(fig, output_path: Path) -> dict:
    output_path.parent.mkdir(parents=True, exist_ok=True)
    tmp = output_path.parent / (output_path.name + f".tmp-{os.getpid()}")
    ax = fig.axes[0]
    meta = {
        "xlim": [float(v) for v in ax.get_xlim()],
        "ylim": [float(v) for v in ax.get_ylim()],
        "legend": list(ax.get_legend_handles_labels()[1]),
    }
    try:
        fig.canvas.draw()
        width, height = fig.canvas.get_width_height()
        meta["width_px"] = int(width)
        meta["height_px"] = int(height)
        fig.savefig(tmp, format="png")
        os.replace(tmp, output_path)
    finally:
        tmp.unlink(missing_ok=True)
        plt.close(fig)
    return meta


def _render_profile(job: FigureJob) -> dict:
    prof = _read_csv(
        job.input_dir / "profile.csv",
        ["x", "f_reconstructed", "f_ground_truth", "f_lowpass"],
    )
    summary = _read_summary(job.input_dir / "summary.json")
    fig, ax = plt.subplots()
    ax.plot(prof["x"], prof["f_ground_truth"], color="0.45", lw=1.6, label="ground truth")
    ax.plot(prof["x"], prof["f_reconstructed"], color="tab:blue", lw=1.2,
            label="reconstruction")
    clusters = summary["results"].get("merged_clusters", [])
    if clusters:
        locs = [c[0] for c in clusters]
        ax.plot(locs, np.interp(locs, prof["x"], prof["f_reconstructed"]), "o",
                color="tab:red", ms=5, label="knots")
    lo = min(prof["f_ground_truth"].min(), prof["f_reconstructed"].min())
    hi = max(prof["f_ground_truth"].max(), prof["f_reconstructed"].max())
    ax.set_xlim(0.0, 2.0 * np.pi)
    ax.set_ylim(*_padded_limits(lo, hi))
    ax.set_xlabel("x (radians)")
    ax.set_ylabel("signal")
    ax.legend(loc="upper right")
    return _save(fig, job.output_path)


def _render_convergence(job: FigureJob) -> dict:
    conv = _read_csv(
        job.input_dir / "convergence.csv", ["P", "mean_error", "std_error", "n_ok_trials"]
    )
    summary = _read_summary(job.input_dir / "summary.json")
    slope = summary["results"].get("slope")
    if slope is None:
        raise SchemaError("summary.json lacks results.slope")
    P = conv["P"]
    err = conv["mean_error"]
    fig, ax = plt.subplots()
    ax.errorbar(P, err, yerr=conv["std_error"], fmt="o-", color="tab:blue",
                capsize=3, label="mean error")
    # Slope reference line anchored at the finest grid.
    ref = err[-1] * (P / P[-1]) ** (-slope)
    ax.plot(P, ref, "--", color="0.4", label=f"slope {slope:.2f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlim(*_padded_limits(P.min(), P.max(), 0.1))
    ax.set_ylim(*_padded_limits(min(err.min(), ref.min()) * 0.8,
                                max(err.max(), ref.max()) * 1.2, 0.0))
    ax.set_xlabel("grid size P")
    ax.set_ylabel("max-norm error")
    ax.annotate(f"slope = {slope:.2f}", xy=(0.05, 0.08), xycoords="axes fraction")
    ax.legend(loc="upper right")
    return _save(fig, job.output_path)


def _render_comparison(job: FigureJob) -> dict:
    prof = _read_csv(
        job.input_dir / "profile.csv",
        ["x", "f_reconstructed", "f_ground_truth", "f_lowpass"],
    )
    fig, ax = plt.subplots()
    ax.plot(prof["x"], prof["f_ground_truth"], color="0.45", lw=1.6, label="ground truth")
    ax.plot(prof["x"], prof["f_lowpass"], color="tab:orange", lw=1.0, label="low-pass")
    ax.plot(prof["x"], prof["f_reconstructed"], color="tab:blue", lw=1.2, label="gTV")
    lo = min(prof[c].min() for c in ("f_reconstructed", "f_ground_truth", "f_lowpass"))
    hi = max(prof[c].max() for c in ("f_reconstructed", "f_ground_truth", "f_lowpass"))
    ax.set_xlim(0.0, 2.0 * np.pi)
    ax.set_ylim(*_padded_limits(lo, hi))
    ax.set_xlabel("x (radians)")
    ax.set_ylabel("signal")
    ax.legend(loc="upper right")
    return _save(fig, job.output_path)
