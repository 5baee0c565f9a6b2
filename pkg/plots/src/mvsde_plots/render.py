"""Two-panel figure rendering from the simulator's CSV outputs.

Input schemas (comma-separated, header row, '#' lines are comments):
    paths csv:   t,rep,particle,value
    meansq csv:  t,mean_sq,std_err,n_reps
Renders 4 sample paths on the left and the mean-square trajectory with a
+-2 standard error band on the right, with an optional exponential
reference line.  Output is fully determined by the inputs: no timestamps
are embedded.
"""

from __future__ import annotations

import sys
import warnings
from dataclasses import dataclass
from typing import Optional

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "mvsde-plots"

import matplotlib.pyplot as plt  # noqa: E402

N_PANEL_PATHS = 4


class CsvFormatError(Exception):
    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{self.path}:{lineno}: {message}")


@dataclass
class FigureSpec:
    paths_csv: str
    meansq_csv: str
    out_image: str
    title: str = ""
    reference_rate: Optional[float] = None


def _rows(path, expected_header, n_fields):
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as err:
        raise CsvFormatError(path, 0, f"cannot open: {err.strerror}") from None
    with fh:
        header = fh.readline().rstrip("\n")
        if header != expected_header:
            raise CsvFormatError(path, 1, f"expected header '{expected_header}'")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split(",")
            if len(fields) != n_fields:
                raise CsvFormatError(path, lineno, f"expected {n_fields} fields")
            yield lineno, fields


def load_meansq(path):
    """Returns (t, mean_sq, std_err) arrays."""
    t, v, se = [], [], []
    for lineno, fields in _rows(path, "t,mean_sq,std_err,n_reps", 4):
        try:
            t.append(float(fields[0]))
            v.append(float(fields[1]))
            se.append(float(fields[2]))
            int(fields[3])
        except ValueError:
            raise CsvFormatError(path, lineno, "non-numeric field") from None
    if not t:
        raise CsvFormatError(path, 2, "no data rows")
    return np.array(t), np.array(v), np.array(se)


def load_paths(path):
    """Returns {(rep, particle): (t array, value array)} in first-seen order."""
    series: dict = {}
    for lineno, fields in _rows(path, "t,rep,particle,value", 4):
        try:
            t = float(fields[0])
            key = (int(fields[1]), int(fields[2]))
            v = float(fields[3])
        except ValueError:
            raise CsvFormatError(path, lineno, "non-numeric field") from None
        series.setdefault(key, ([], []))
        series[key][0].append(t)
        series[key][1].append(v)
    if not series:
        raise CsvFormatError(path, 2, "no data rows")
    return {k: (np.array(ts), np.array(vs)) for k, (ts, vs) in series.items()}


def render_figure(spec: FigureSpec) -> str:
    paths = load_paths(spec.paths_csv)
    t, mean_sq, std_err = load_meansq(spec.meansq_csv)

    keys = list(paths)[:N_PANEL_PATHS]
    if len(keys) < N_PANEL_PATHS:
        warnings.warn(
            f"{spec.paths_csv} holds only {len(keys)} sample paths; plotting all",
            stacklevel=2,
        )

    fig, (ax_paths, ax_msq) = plt.subplots(1, 2, figsize=(10, 4))

    for rep, particle in keys:
        ts, vs = paths[(rep, particle)]
        ax_paths.plot(ts, vs, lw=0.9, label=f"rep {rep}, particle {particle}")
    ax_paths.set_xlabel("t")
    ax_paths.set_ylabel("y(t)")
    ax_paths.set_title("sample paths")
    ax_paths.legend(fontsize="x-small")

    ax_msq.plot(t, mean_sq, color="C0", lw=1.2, label=r"mean of $|y(t)|^2$")
    ax_msq.fill_between(
        t, mean_sq - 2 * std_err, mean_sq + 2 * std_err, color="C0", alpha=0.25, lw=0
    )
    if spec.reference_rate is not None:
        ax_msq.plot(
            t,
            mean_sq[0] * np.exp(-spec.reference_rate * (t - t[0])),
            "k--",
            lw=1.0,
            label=f"$e^{{-{spec.reference_rate:g}\\,t}}$ bound",
        )
    if np.all(mean_sq > 0):
        ax_msq.set_yscale("log")
    ax_msq.set_xlabel("t")
    ax_msq.set_title("mean square")
    ax_msq.legend(fontsize="x-small")

    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    fig.savefig(spec.out_image, metadata=_no_date_metadata(spec.out_image))
    plt.close(fig)
    return spec.out_image


def _no_date_metadata(out_image):
    # strip creation timestamps so identical inputs give identical bytes
    if str(out_image).lower().endswith(".svg"):
        return {"Date": None}
    return None


def main_render(spec: FigureSpec) -> int:
    try:
        render_figure(spec)
    except CsvFormatError as err:
        print(f"csv error: {err}", file=sys.stderr)
        return 1
    return 0
