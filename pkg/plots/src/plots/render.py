"""Figure construction from the CLI's CSV contracts.

Every figure is a pure function of the referenced CSV contents plus the
spec: no clock, no network, and SVG output omits the date metadata so
identical inputs produce identical files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

# stable SVG element ids: identical inputs must yield identical bytes
plt.rcParams["svg.hashsalt"] = "plots"

from .errors import EmptyInput, MissingColumn, PlotError  # noqa: E402

POSITIVE_COLOR = "tab:blue"
NEGATIVE_COLOR = "tab:red"


class FigureKind(Enum):
    LOSS_CURVES = "loss_curves"
    MARGIN_CURVES = "margin_curves"
    IP_HISTOGRAM = "ip_histogram"
    REGION_SCATTER = "region_scatter"
    BOUND_CURVES = "bound_curves"
    XI_EVOLUTION = "xi_evolution"


@dataclass(frozen=True)
class PlotSpec:
    kind: FigureKind
    inputs: tuple
    output: str
    labels: tuple = ()
    title: str = ""
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(str(p) for p in self.inputs))
        object.__setattr__(self, "labels", tuple(self.labels))
        if not self.inputs:
            raise PlotError("spec needs at least one input CSV")
        if self.labels and len(self.labels) != len(self.inputs):
            raise PlotError("labels must match inputs one-to-one")

    @staticmethod
    def from_dict(doc: dict) -> "PlotSpec":
        return PlotSpec(
            kind=FigureKind(doc["kind"]),
            inputs=tuple(doc["inputs"]),
            output=doc["output"],
            labels=tuple(doc.get("labels", ())),
            title=doc.get("title", ""),
            style=dict(doc.get("style", {})),
        )


def _read_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise PlotError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise EmptyInput(path)
    return rows


def _columns(rows, path, names):
    for name in names:
        if name not in rows[0]:
            raise MissingColumn(path, name)
    out = []
    for name in names:
        out.append([float(row[name]) if row[name] not in ("", "None") else None
                    for row in rows])
    return out


def _label(spec, index):
    if spec.labels:
        return spec.labels[index]
    return Path(spec.inputs[index]).stem


def _loss_curves(spec, ax):
    for i, path in enumerate(spec.inputs):
        rows = _read_csv(path)
        steps, losses = _columns(rows, path, ["iteration", "loss"])
        ax.plot(steps, losses, label=_label(spec, i))
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean loss")
    ax.legend()


def _margin_curves(spec, ax):
    for i, path in enumerate(spec.inputs):
        rows = _read_csv(path)
        steps, margins = _columns(rows, path, ["iteration", "margin"])
        ax.plot(steps, margins, label=_label(spec, i))
    ax.axhline(0.0, color="gray", linewidth=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("extremal margin")
    ax.legend()


def _ip_histogram(spec, ax):
    """Positive/negative inner-product overlay from an embedding CSV."""
    path = spec.inputs[0]
    rows = _read_csv(path)
    dims = [name for name in rows[0] if name.startswith("c")]
    for name in ("side", "index"):
        if name not in rows[0]:
            raise MissingColumn(path, name)
    if not dims:
        raise MissingColumn(path, "c0")
    sides = {"U": {}, "V": {}}
    for row in rows:
        sides[row["side"]][int(row["index"])] = [float(row[c]) for c in dims]
    order = sorted(sides["U"])
    positives, negatives = [], []
    for i in order:
        for j in order:
            ip = sum(a * b for a, b in zip(sides["U"][i], sides["V"][j]))
            (positives if i == j else negatives).append(ip)
    bins = int(spec.style.get("bins", 30))
    ax.hist(negatives, bins=bins, color=NEGATIVE_COLOR, alpha=0.6,
            label="negative pairs")
    ax.hist(positives, bins=bins, color=POSITIVE_COLOR, alpha=0.6,
            label="positive pairs")
    ax.set_xlabel("inner product")
    ax.set_ylabel("count")
    ax.legend()


def _region_scatter(spec, ax):
    for i, path in enumerate(spec.inputs):
        rows = _read_csv(path)
        xs, ys = _columns(rows, path, ["final_rel_bias_opt", "final_margin"])
        ax.scatter(xs, ys, label=_label(spec, i))
    ax.set_xlabel("relative bias")
    ax.set_ylabel("margin")
    ax.legend()


def _bound_curves(spec, ax):
    path = spec.inputs[0]
    rows = _read_csv(path)
    ms, lower, upper = _columns(rows, path, ["m", "lower_nats", "upper_nats"])
    keep = [i for i in range(len(ms)) if lower[i] is not None and upper[i] is not None]
    ax.plot([ms[i] for i in keep], [lower[i] for i in keep], label="lower bound")
    ax.plot([ms[i] for i in keep], [upper[i] for i in keep], label="upper bound")
    ax.set_xlabel("margin m")
    ax.set_ylabel("exponent (nats)")
    ax.legend()


def _xi_evolution(spec, ax):
    xs, xis, means, norms = [], [], [], []
    for step, path in enumerate(spec.inputs):
        rows = _read_csv(path)
        xi, mean_norms, norm_mean = _columns(
            rows, path, ["xi", "mean_norms", "norm_mean"])
        xs.append(step)
        xis.append(xi[0])
        means.append(mean_norms[0])
        norms.append(norm_mean[0])
    ax.plot(xs, xis, marker="o", label="xi")
    ax.plot(xs, means, marker="s", label="mean of squared norms")
    ax.plot(xs, norms, marker="^", label="squared norm of mean")
    ax.set_xlabel("checkpoint")
    ax.set_ylabel("value")
    ax.legend()


_RENDERERS = {
    FigureKind.LOSS_CURVES: _loss_curves,
    FigureKind.MARGIN_CURVES: _margin_curves,
    FigureKind.IP_HISTOGRAM: _ip_histogram,
    FigureKind.REGION_SCATTER: _region_scatter,
    FigureKind.BOUND_CURVES: _bound_curves,
    FigureKind.XI_EVOLUTION: _xi_evolution,
}


def build_figure(spec: PlotSpec):
    """The figure object for a spec; rendering without touching the disk."""
    fig, ax = plt.subplots(figsize=spec.style.get("figsize", (6.0, 4.0)))
    try:
        _RENDERERS[spec.kind](spec, ax)
    except Exception:
        plt.close(fig)
        raise
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    return fig


def render(spec: PlotSpec) -> str:
    """Write the figure to spec.output (format from the extension)."""
    fig = build_figure(spec)
    try:
        out = Path(spec.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        metadata = {"Date": None} if out.suffix == ".svg" else None
        fig.savefig(out, metadata=metadata)
    finally:
        plt.close(fig)
    return str(spec.output)
