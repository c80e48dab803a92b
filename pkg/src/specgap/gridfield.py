"""Charts and grid-sampled scalar fields.

A chart is an open box in R^{2k} with a uniform tensor grid and the Darboux
pairing convention: coordinate axis i is symplectically paired with axis
i + k, so the reference symplectic form is sum_i dx_i ^ dx_{i+k}.

Fields are plain float64 arrays of the chart's grid shape.  The on-disk
format is a flat row-major binary blob plus a sidecar text header; small
grids can also be exported as CSV.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class Chart:
    """Open box chart with uniform grid and Darboux pairing x_i <-> x_{i+k}."""

    bounds: tuple
    res: tuple

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        res = tuple(int(n) for n in self.res)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "res", res)
        if len(bounds) != len(res):
            raise ValueError("bounds/res length mismatch")
        if len(bounds) % 2 != 0 or len(bounds) < 2:
            raise ValueError("chart dimension must be even and >= 2")
        for lo, hi in bounds:
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError("chart bounds must be finite with lo < hi")
        for n in res:
            if n < 4:
                raise ValueError("resolution must be >= 4 per axis")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def k(self) -> int:
        return self.dim // 2

    def axis(self, i: int) -> np.ndarray:
        lo, hi = self.bounds[i]
        return np.linspace(lo, hi, self.res[i])

    def spacing(self, i: int) -> float:
        lo, hi = self.bounds[i]
        return (hi - lo) / (self.res[i] - 1)

    @property
    def shape(self) -> tuple:
        return tuple(self.res)

    def grids(self) -> list:
        """Meshgrid arrays (ij indexing), one per axis."""
        return list(np.meshgrid(*[self.axis(i) for i in range(self.dim)],
                                indexing="ij"))

    def sample(self, fn) -> np.ndarray:
        """Sample a callable of the chart coordinates on the grid."""
        return np.asarray(fn(*self.grids()), dtype=float)

    def doubled(self, fiber_halfwidth: float = np.pi, fiber_res: int = 5) -> "Chart":
        """Chart on the doubled space (base coords + conjugate fiber coords)."""
        fb = tuple((-fiber_halfwidth, fiber_halfwidth) for _ in range(self.dim))
        return Chart(self.bounds + fb, self.res + (fiber_res,) * self.dim)

    def interior(self) -> tuple:
        """Slice tuple excluding the outermost cell on every axis."""
        return tuple(slice(1, -1) for _ in range(self.dim))


def save_field(path, fld: np.ndarray, chart: Chart) -> None:
    """Write a field as flat row-major float64 binary plus a text header."""
    arr = np.ascontiguousarray(fld, dtype="<f8")
    if arr.shape != chart.shape:
        raise ValueError("field shape does not match chart resolution")
    arr.tofile(str(path) + ".bin")
    lines = ["dim %d" % chart.dim]
    for i in range((chart.dim)):
        lo, hi = chart.bounds[i]
        lines.append("axis %d %s %s %d" % (i, FLOAT_FMT % lo, FLOAT_FMT % hi,
                                           chart.res[i]))
    lines.append("dtype float64 row-major")
    with open(str(path) + ".hdr", "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_field(path):
    """Read a field written by save_field; returns (field, chart)."""
    with open(str(path) + ".hdr") as fh:
        lines = [ln.split() for ln in fh.read().splitlines() if ln.strip()]
    dim = int(lines[0][1])
    bounds, res = [], []
    for ln in lines[1:1 + dim]:
        bounds.append((float(ln[2]), float(ln[3])))
        res.append(int(ln[4]))
    chart = Chart(tuple(bounds), tuple(res))
    arr = np.fromfile(str(path) + ".bin", dtype="<f8").reshape(chart.shape)
    return arr, chart


def field_to_csv(path, fld: np.ndarray, chart: Chart, max_points: int = 100000):
    """CSV export (coordinates + value per row) for small grids."""
    if fld.size > max_points:
        raise ValueError("grid too large for CSV export")
    grids = chart.grids()
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x%d" % i for i in range(chart.dim)] + ["value"])
        flat = [g.ravel() for g in grids] + [np.asarray(fld).ravel()]
        for row in zip(*flat):
            wr.writerow([FLOAT_FMT % v for v in row])


def write_csv(path, header, rows):
    """Write rows of floats/strings with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([FLOAT_FMT % v if isinstance(v, float) else v
                         for v in row])
