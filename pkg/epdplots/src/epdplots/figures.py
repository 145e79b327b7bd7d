"""Render static figures from stored CSV/JSON artifacts.

Strictly read-only: every number shown is taken from the input files; in
particular the lifespan figure's fitted line and its slope/R^2 annotation
are lifted verbatim from the fit JSON, never recomputed here. Output bytes
are deterministic: fixed figure size, fixed fonts, no timestamps or writer
metadata.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["FigureSpec", "SchemaError", "render", "FIGURE_KINDS"]

_EXPECTED_HEADERS = {
    "lifespan": ["eps", "x_fit", "T_num", "refine_gap"],
    "asymptotic": ["t", "r", "b_q", "db_q_dt", "pde_residual", "ratio_tq"],
    "functional": ["M", "Y", "Z"],
    "snapshot": ["r", "u"],
}
FIGURE_KINDS = tuple(_EXPECTED_HEADERS)

_RC = {
    "figure.figsize": (6.4, 4.8),
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "font.family": "DejaVu Sans",
    "font.size": 10,
    "svg.hashsalt": "epdplots",
}


class SchemaError(ValueError):
    """Input artifact does not match the expected column schema."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple
    output: str
    xscale: str | None = None
    yscale: str | None = None

    def __post_init__(self):
        if self.kind not in _EXPECTED_HEADERS:
            raise ValueError(
                f"unknown figure kind {self.kind!r}; "
                f"expected one of {sorted(_EXPECTED_HEADERS)}")
        if not self.inputs:
            raise ValueError("at least one input artifact is required")
        for scale in (self.xscale, self.yscale):
            if scale is not None and scale not in ("linear", "log"):
                raise ValueError(f"axis scale must be linear or log, "
                                 f"got {scale!r}")


def _read_csv(path: str, kind: str):
    expected = _EXPECTED_HEADERS[kind]
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline().strip()
        got = header_line.split(",") if header_line else []
        if got != expected:
            missing = [c for c in expected if c not in got]
            unexpected = [c for c in got if c not in expected]
            parts = []
            if missing:
                parts.append(f"missing columns: {', '.join(missing)}")
            if unexpected:
                parts.append(f"unexpected columns: {', '.join(unexpected)}")
            if not parts:
                parts.append(f"column order {got} != {expected}")
            raise SchemaError(f"{path}: {'; '.join(parts)}")
        body = fh.read()
    rows = [line for line in body.splitlines() if line.strip()]
    if not rows:
        raise SchemaError(f"{path}: zero data rows")
    data = np.array([[float(x) for x in row.split(",")] for row in rows])
    if data.shape[1] != len(expected):
        raise SchemaError(f"{path}: row width {data.shape[1]} != "
                          f"{len(expected)} columns")
    return {name: data[:, j] for j, name in enumerate(expected)}


def _raw_json_number(text: str, key: str) -> str | None:
    """The literal token after "key": in the JSON text, exactly as written,
    so annotations match the artifact bit for bit."""
    m = re.search(rf'"{re.escape(key)}"\s*:\s*([^,\s}}]+)', text)
    return m.group(1) if m else None


def _split_inputs(inputs):
    csvs = [p for p in inputs if not p.endswith(".json")]
    jsons = [p for p in inputs if p.endswith(".json")]
    return csvs, jsons


def _plot_lifespan(ax, spec: FigureSpec):
    csvs, jsons = _split_inputs(spec.inputs)
    table = _read_csv(csvs[0], "lifespan")
    x = table["x_fit"]
    y = np.log(table["T_num"])
    ax.plot(x, y, "o", color="#1f618d", label="runs")
    if jsons:
        text = open(jsons[0], encoding="utf-8").read()
        slope_raw = _raw_json_number(text, "slope")
        intercept_raw = _raw_json_number(text, "intercept")
        r2_raw = _raw_json_number(text, "r2")
        if slope_raw is None or intercept_raw is None:
            ax.annotate("warning: fit JSON lacks slope/intercept; "
                        "scatter only", xy=(0.02, 0.95),
                        xycoords="axes fraction", color="#b03a2e")
        else:
            xs = np.linspace(float(np.min(x)), float(np.max(x)), 50)
            ax.plot(xs, float(slope_raw) * xs + float(intercept_raw),
                    "-", color="#b03a2e", label="stored fit")
            note = f"slope = {slope_raw}"
            if r2_raw is not None:
                note += f"\nR$^2$ = {r2_raw}"
            ax.annotate(note, xy=(0.02, 0.95), xycoords="axes fraction",
                        va="top")
        ax.legend(loc="lower right")
    else:
        ax.annotate("warning: no fit JSON supplied; scatter only",
                    xy=(0.02, 0.95), xycoords="axes fraction",
                    color="#b03a2e")
    ax.set_xlabel(r"$\varepsilon^{-p(p-1)}$")
    ax.set_ylabel(r"$\ln T_{num}$")
    ax.set_title("lifespan scaling")


def _plot_asymptotic(ax, spec: FigureSpec):
    csvs, _ = _split_inputs(spec.inputs)
    table = _read_csv(csvs[0], "asymptotic")
    on_axis = table["r"] == 0.0
    t = table["t"][on_axis] if np.any(on_axis) else table["t"]
    ratio = table["ratio_tq"][on_axis] if np.any(on_axis) else table["ratio_tq"]
    order = np.argsort(t)
    t, ratio = t[order], ratio[order]
    ax.plot(t, ratio, "o-", color="#1f618d")
    ref = float(ratio[-1])
    ax.axhspan(0.98 * ref, 1.02 * ref, color="#f1c40f", alpha=0.4,
               label="reference band (2%)")
    ax.set_xscale(spec.xscale or "log")
    ax.set_yscale(spec.yscale or "log")
    ax.set_xlabel("t")
    ax.set_ylabel(r"$t^{q}\, b_q(t, 0)$")
    ax.set_title("test-function axis asymptotics")
    ax.legend(loc="best")


def _plot_functional(ax, spec: FigureSpec):
    csvs, _ = _split_inputs(spec.inputs)
    table = _read_csv(csvs[0], "functional")
    ax.plot(np.log(table["M"]), table["Y"], "o-", color="#1f618d")
    ax.set_xlabel(r"$\ln M$")
    ax.set_ylabel("Y(M)")
    ax.set_title("windowed functional growth")


def _plot_snapshot(ax, spec: FigureSpec):
    csvs, _ = _split_inputs(spec.inputs)
    for path in csvs:
        table = _read_csv(path, "snapshot")
        label = os.path.basename(path)
        if label.startswith("snapshot_t") and label.endswith(".csv"):
            label = "t = " + label[len("snapshot_t"):-len(".csv")]
        ax.plot(table["r"], table["u"], label=label)
    ax.set_xlabel("r")
    ax.set_ylabel("u(t, r)")
    ax.set_title("solution snapshots")
    ax.legend(loc="best")


_PLOTTERS = {
    "lifespan": _plot_lifespan,
    "asymptotic": _plot_asymptotic,
    "functional": _plot_functional,
    "snapshot": _plot_snapshot,
}


def render(spec: FigureSpec) -> str:
    """Render the figure described by spec; returns the output path."""
    for path in spec.inputs:
        if not os.path.exists(path):
            raise FileNotFoundError(path)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        try:
            _PLOTTERS[spec.kind](ax, spec)
            if spec.xscale is not None:
                ax.set_xscale(spec.xscale)
            if spec.yscale is not None:
                ax.set_yscale(spec.yscale)
            fig.tight_layout()
            # strip the writer's Software tag so identical inputs give
            # byte-identical images
            fig.savefig(spec.output, metadata={"Software": None})
        finally:
            plt.close(fig)
    return spec.output
