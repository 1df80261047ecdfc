"""Render experiment CSV curves as figures.

The input schema is the simulation harness CSV:

    experiment,algorithm,x,y,y_stderr,trials,seed

One figure kind per experiment: log-scale BER axes for ber-snr, feedback
and convergence figures, a linear axis for the sum rate.  Every algorithm
becomes one error-barred series; BER cells equal to zero are floored at
1/trials and drawn as open markers.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

EXPECTED_HEADER = ["experiment", "algorithm", "x", "y", "y_stderr", "trials", "seed"]

KIND_TO_EXPERIMENT = {
    "ber-snr": "ber-vs-snr",
    "feedback": "feedback-bits",
    "sumrate": "sum-rate",
    "convergence": "convergence",
}

AXIS_LABELS = {
    "ber-snr": ("received SNR (dB)", "BER"),
    "feedback": ("received SNR (dB)", "BER"),
    "sumrate": ("received SNR (dB)", "sum rate (bits/s/Hz)"),
    "convergence": ("received symbols", "BER"),
}


class SchemaError(ValueError):
    """Input rows do not match the harness CSV schema."""


@dataclass(frozen=True)
class FigureSpec:
    input_csvs: tuple[str, ...]
    figure_kind: str  # ber-snr | feedback | sumrate | convergence
    output_path: str

    def __post_init__(self):
        if self.figure_kind not in KIND_TO_EXPERIMENT:
            raise SchemaError(
                f"unknown figure kind {self.figure_kind!r}; "
                f"expected one of {sorted(KIND_TO_EXPERIMENT)}"
            )
        if not self.input_csvs:
            raise SchemaError("at least one input CSV is required")


@dataclass(frozen=True)
class CurveRow:
    experiment: str
    algorithm: str
    x: float
    y: float
    y_stderr: float
    trials: int


def _parse_row(path, line_no: int, row: list[str]) -> CurveRow:
    if len(row) != len(EXPECTED_HEADER):
        raise SchemaError(f"{path}:{line_no}: expected {len(EXPECTED_HEADER)} columns, "
                          f"got {len(row)}")
    values = dict(zip(EXPECTED_HEADER, row))
    for column in ("x", "y", "y_stderr"):
        try:
            values[column] = float(values[column])
        except ValueError as exc:
            raise SchemaError(
                f"{path}:{line_no}: column {column!r} is not numeric: "
                f"{values[column]!r}") from exc
    for column in ("trials", "seed"):
        try:
            values[column] = int(values[column])
        except ValueError as exc:
            raise SchemaError(
                f"{path}:{line_no}: column {column!r} is not an integer: "
                f"{values[column]!r}") from exc
    if values["y_stderr"] < 0:
        raise SchemaError(f"{path}:{line_no}: column 'y_stderr' must be >= 0")
    return CurveRow(values["experiment"], values["algorithm"], values["x"],
                    values["y"], values["y_stderr"], values["trials"])


def load_curves(paths, expected_experiment: str) -> list[CurveRow]:
    """Read and validate harness CSVs; all rows must share the experiment."""
    rows: list[CurveRow] = []
    for path in paths:
        with open(path, newline="") as handle:
            reader = csv.reader(handle)
            try:
                header = next(reader)
            except StopIteration:
                raise SchemaError(f"{path}: file is empty, expected a header row")
            if header != EXPECTED_HEADER:
                missing = [c for c in EXPECTED_HEADER if c not in header]
                detail = f"missing column {missing[0]!r}" if missing else f"got {header}"
                raise SchemaError(f"{path}: bad header, {detail}")
            for line_no, raw in enumerate(reader, start=2):
                if not raw:
                    continue
                rows.append(_parse_row(path, line_no, raw))
    for row in rows:
        if row.experiment != expected_experiment:
            raise SchemaError(
                f"column 'experiment' holds {row.experiment!r}, but the "
                f"figure kind needs {expected_experiment!r}")
    return rows


def render(spec: FigureSpec) -> Path:
    """Render one figure; returns the written path."""
    experiment = KIND_TO_EXPERIMENT[spec.figure_kind]
    rows = load_curves(spec.input_csvs, experiment)
    log_y = spec.figure_kind != "sumrate"

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    if not rows:
        warnings.warn("no data rows; rendering empty axes")
    series: dict[str, list[CurveRow]] = {}
    for row in rows:
        series.setdefault(row.algorithm, []).append(row)

    for algorithm in sorted(series):
        pts = sorted(series[algorithm], key=lambda r: r.x)
        xs = [p.x for p in pts]
        floor = [1.0 / max(p.trials, 1) for p in pts]
        ys = [p.y if not (log_y and p.y <= 0) else f for p, f in zip(pts, floor)]
        errs = [p.y_stderr for p in pts]
        was_floored = [log_y and p.y <= 0 for p in pts]
        line = ax.errorbar(xs, ys, yerr=errs, marker="o", capsize=3,
                           label=algorithm)[0]
        hollow_x = [x for x, fl in zip(xs, was_floored) if fl]
        hollow_y = [y for y, fl in zip(ys, was_floored) if fl]
        if hollow_x:
            ax.plot(hollow_x, hollow_y, linestyle="none", marker="o",
                    markerfacecolor="white", color=line.get_color())
    if log_y:
        ax.set_yscale("log")
    xlabel, ylabel = AXIS_LABELS[spec.figure_kind]
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    if series:
        ax.legend()

    out = Path(spec.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    # strip volatile metadata so identical inputs give identical bytes
    metadata = {"Software": None}
    if out.suffix.lower() == ".png":
        metadata["Date"] = None
    elif out.suffix.lower() == ".svg":
        metadata = {"Date": None, "Creator": None}
    fig.savefig(out, dpi=120, metadata=metadata)
    plt.close(fig)
    return out
