"""Space-time lattice primitives.

Fields live on a cell-centered lattice over the box ``[-L, L]^N`` crossed
with a uniform time lattice ``t_i = t_start + i * dt``.  Values are stored
time-slice-major: ``values[i, j1, ..., jN]`` is the sample at time ``t_i``
and spatial cell ``(j1, ..., jN)`` whose center along each axis is
``-L + (j + 1/2) * cell_width``.

Set measures are cell-counting measures: a spatial cell contributes its full
volume ``cell_width**N`` when its center satisfies the predicate.  Along the
time axis each slice owns the interval ``[t_i - dt/2, t_i + dt/2]`` clipped
to ``[t_start, t_end]``; a slice contributes the overlap of that interval
with the requested time window.  With this weighting the measure of a full
cylinder is exact in time whenever the window endpoints lie on the lattice,
so the only discretization error left is the spatial ball boundary layer.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "GridSpec",
    "Cylinder",
    "ScalarField",
    "EmptyCylinderError",
    "ball_volume",
    "make_field",
    "field_from_values",
    "cylinder_measure",
    "level_set_measure",
    "discrete_gradient_norm_p",
    "oscillation",
    "one_cell_oscillation",
    "save_snapshot",
    "load_snapshot",
]

_REL_TOL = 1e-6


class EmptyCylinderError(ValueError):
    """A cylinder selected no lattice cells at all.

    Distinct from a measure-zero result, which is a valid 0.0 return from a
    nonempty selection.
    """


@dataclass(frozen=True)
class GridSpec:
    """Uniform space-time lattice descriptor.

    Attributes:
        dimension: number of spatial dimensions N >= 1.
        half_width: spatial box half-width L; the box is ``[-L, L]^N``.
        cells_per_axis: spatial cells per axis (>= 4).
        t_start: first slice time.
        t_end: last slice time (> t_start).
        dt: time step; must divide ``t_end - t_start`` to within a 1e-6
            relative tolerance.
    """

    dimension: int
    half_width: float
    cells_per_axis: int
    t_start: float
    t_end: float
    dt: float

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        if self.half_width <= 0.0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")
        if self.cells_per_axis < 4:
            raise ValueError(
                f"cells_per_axis must be >= 4, got {self.cells_per_axis}"
            )
        if not self.t_end > self.t_start:
            raise ValueError(
                f"t_end must exceed t_start, got [{self.t_start}, {self.t_end}]"
            )
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        span = self.t_end - self.t_start
        steps = span / self.dt
        if abs(steps - round(steps)) > _REL_TOL * max(1.0, steps):
            raise ValueError(
                f"dt={self.dt} does not divide the time span {span} "
                f"(fractional step count {steps})"
            )

    @property
    def n_steps(self) -> int:
        return int(round((self.t_end - self.t_start) / self.dt))

    @property
    def n_slices(self) -> int:
        return self.n_steps + 1

    @property
    def cell_width(self) -> float:
        return 2.0 * self.half_width / self.cells_per_axis

    @property
    def cell_volume(self) -> float:
        return self.cell_width**self.dimension

    def times(self) -> NDArray[np.float64]:
        return self.t_start + self.dt * np.arange(self.n_slices)

    def axis_centers(self) -> NDArray[np.float64]:
        h = self.cell_width
        return -self.half_width + h * (np.arange(self.cells_per_axis) + 0.5)

    def centers(self) -> NDArray[np.float64]:
        """Cell-center coordinates, shape ``(*spatial_shape, dimension)``."""
        axes = np.meshgrid(*([self.axis_centers()] * self.dimension), indexing="ij")
        return np.stack(axes, axis=-1)

    @property
    def spatial_shape(self) -> tuple[int, ...]:
        return (self.cells_per_axis,) * self.dimension

    def to_json_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "half_width": self.half_width,
            "cells_per_axis": self.cells_per_axis,
            "t_start": self.t_start,
            "t_end": self.t_end,
            "dt": self.dt,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "GridSpec":
        return cls(
            dimension=int(data["dimension"]),
            half_width=float(data["half_width"]),
            cells_per_axis=int(data["cells_per_axis"]),
            t_start=float(data["t_start"]),
            t_end=float(data["t_end"]),
            dt=float(data["dt"]),
        )


@dataclass(frozen=True)
class Cylinder:
    """Time window crossed with a spatial ball: ``[t_lo, t_hi] x B(center, radius)``."""

    t_lo: float
    t_hi: float
    center: tuple[float, ...]
    radius: float

    def __post_init__(self) -> None:
        if not self.t_hi > self.t_lo:
            raise ValueError(f"need t_hi > t_lo, got [{self.t_lo}, {self.t_hi}]")
        if self.radius <= 0.0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def duration(self) -> float:
        return self.t_hi - self.t_lo


@dataclass(frozen=True)
class ScalarField:
    """Immutable scalar samples on a :class:`GridSpec` lattice."""

    spec: GridSpec
    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        expected = (self.spec.n_slices, *self.spec.spatial_shape)
        if self.values.shape != expected:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid {expected}"
            )
        self.values.setflags(write=False)

    def slice(self, i: int) -> NDArray[np.float64]:
        return self.values[i]

    def with_values(self, values: NDArray[np.float64]) -> "ScalarField":
        return field_from_values(self.spec, values)


def ball_volume(dimension: int, radius: float) -> float:
    """Volume of the N-ball: ``pi^(N/2) r^N / Gamma(N/2 + 1)``."""
    if dimension < 1:
        raise ValueError(f"dimension must be >= 1, got {dimension}")
    if radius < 0.0:
        raise ValueError(f"radius must be nonnegative, got {radius}")
    return math.pi ** (dimension / 2.0) * radius**dimension / math.gamma(dimension / 2.0 + 1.0)


def field_from_values(spec: GridSpec, values: NDArray[np.float64]) -> ScalarField:
    arr = np.array(values, dtype=np.float64, copy=True)
    return ScalarField(spec=spec, values=arr)


def make_field(
    spec: GridSpec,
    initializer: Callable[[float, NDArray[np.float64]], NDArray[np.float64] | float],
) -> ScalarField:
    """Sample ``initializer(t, x)`` at every slice time and cell center.

    The initializer receives the slice time as a float and the cell-center
    coordinates as an array of shape ``(*spatial_shape, dimension)``; it may
    return a broadcastable array or a scalar.

    Raises:
        ValueError: if any produced sample is NaN or infinite; the message
            names the first offending ``(t, x)``.
    """
    centers = spec.centers()
    out = np.empty((spec.n_slices, *spec.spatial_shape), dtype=np.float64)
    for i, t in enumerate(spec.times()):
        sample = np.asarray(initializer(float(t), centers), dtype=np.float64)
        out[i] = np.broadcast_to(sample, spec.spatial_shape)
        if not np.all(np.isfinite(out[i])):
            bad = np.argwhere(~np.isfinite(out[i]))[0]
            x_bad = centers[tuple(bad)]
            raise ValueError(
                f"initializer returned a non-finite value at t={t}, x={tuple(x_bad)}"
            )
    return ScalarField(spec=spec, values=out)


def cylinder_measure(cyl: Cylinder, dimension: int) -> float:
    """Exact product measure ``(t_hi - t_lo) * |B(radius)|`` in N dimensions."""
    return cyl.duration * ball_volume(dimension, cyl.radius)


def _ball_mask(spec: GridSpec, cyl: Cylinder) -> NDArray[np.bool_]:
    if len(cyl.center) != spec.dimension:
        raise ValueError(
            f"cylinder center has {len(cyl.center)} coordinates, grid has "
            f"dimension {spec.dimension}"
        )
    centers = spec.centers()
    delta = centers - np.asarray(cyl.center)
    return np.einsum("...i,...i->...", delta, delta) < cyl.radius**2


def _time_weights(spec: GridSpec, t_lo: float, t_hi: float) -> NDArray[np.float64]:
    """Overlap of each slice's owned interval with ``[t_lo, t_hi]``.

    Slice ``i`` owns ``[t_i - dt/2, t_i + dt/2]`` clipped to the grid hull.
    """
    times = spec.times()
    half = 0.5 * spec.dt
    own_lo = np.maximum(times - half, spec.t_start)
    own_hi = np.minimum(times + half, spec.t_end)
    overlap = np.minimum(own_hi, t_hi) - np.maximum(own_lo, t_lo)
    return np.maximum(overlap, 0.0)


def _select_cells(
    f: ScalarField, cyl: Cylinder
) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    """Time weights and spatial mask for a cylinder; errors when empty."""
    weights = _time_weights(f.spec, cyl.t_lo, cyl.t_hi)
    mask = _ball_mask(f.spec, cyl)
    if not np.any(weights > 0.0) or not np.any(mask):
        raise EmptyCylinderError(
            f"cylinder [{cyl.t_lo}, {cyl.t_hi}] x B({cyl.center}, {cyl.radius}) "
            "selects no lattice cells"
        )
    return weights, mask


def level_set_measure(
    f: ScalarField,
    cyl: Cylinder,
    lo: float = -math.inf,
    hi: float = math.inf,
    closed_upper: bool = False,
) -> float:
    """Cell-counting measure of ``{lo < f < hi}`` (or ``< f <= hi``) in a cylinder.

    Bounds are strict; ``closed_upper=True`` switches the upper predicate to
    ``f <= hi``, so ``{f <= c}`` is expressed as ``(-inf, c]`` and point
    levels ``{f == c}`` as a closed/open difference.

    Returns 0.0 when the selection is nonempty but no cell satisfies the
    predicate; raises :class:`EmptyCylinderError` when the cylinder selects
    no cells at all.
    """
    weights, mask = _select_cells(f, cyl)
    vol = f.spec.cell_volume
    live = np.nonzero(weights > 0.0)[0]
    total = 0.0
    for i in live:
        vals = f.values[i][mask]
        inside = (vals > lo) & ((vals <= hi) if closed_upper else (vals < hi))
        total += weights[i] * vol * int(np.count_nonzero(inside))
    return float(total)


def discrete_gradient_norm_p(
    f: ScalarField,
    slice_index: int,
    p: float,
    ball: Cylinder | None = None,
) -> float:
    """Integral of ``|grad f|^p`` over one time slice.

    Gradients are forward differences per axis, one-sided (backward) at the
    upper box edge.  Integration is over the whole box by default, or over
    the spatial ball of ``ball`` when given (its time window is ignored).
    """
    if p <= 0.0:
        raise ValueError(f"p must be positive, got {p}")
    grad_sq = _gradient_sq(f.values[slice_index], f.spec)
    if ball is not None:
        mask = _ball_mask(f.spec, ball)
        if not np.any(mask):
            raise EmptyCylinderError(
                f"ball B({ball.center}, {ball.radius}) selects no cells"
            )
        grad_sq = grad_sq[mask]
    return float(np.sum(grad_sq ** (p / 2.0)) * f.spec.cell_volume)


def _gradient_sq(
    slice_values: NDArray[np.float64], spec: GridSpec
) -> NDArray[np.float64]:
    h = spec.cell_width
    total = np.zeros_like(slice_values)
    for axis in range(spec.dimension):
        d = np.diff(slice_values, axis=axis) / h
        last = np.take(d, [-1], axis=axis)
        d = np.concatenate([d, last], axis=axis)
        total += d * d
    return total


def oscillation(f: ScalarField, cyl: Cylinder) -> float:
    """``max - min`` of the field over cells whose centers lie in the cylinder.

    A slice belongs to the window when its time lies in ``[t_lo, t_hi]`` up
    to a small lattice-relative tolerance.
    """
    idx, mask = _window_cells(f, cyl)
    lo = math.inf
    hi = -math.inf
    for i in idx:
        vals = f.values[i][mask]
        lo = min(lo, float(vals.min()))
        hi = max(hi, float(vals.max()))
    return hi - lo


def _window_cells(
    f: ScalarField, cyl: Cylinder
) -> tuple[NDArray[np.intp], NDArray[np.bool_]]:
    eps = f.spec.dt * 1e-6
    times = f.spec.times()
    idx = np.nonzero((times >= cyl.t_lo - eps) & (times <= cyl.t_hi + eps))[0]
    mask = _ball_mask(f.spec, cyl)
    if idx.size == 0 or not np.any(mask):
        raise EmptyCylinderError(
            f"cylinder [{cyl.t_lo}, {cyl.t_hi}] x B({cyl.center}, {cyl.radius}) "
            "selects no lattice cells"
        )
    return idx, mask


def one_cell_oscillation(f: ScalarField, cyl: Cylinder | None = None) -> float:
    """Largest single-cell jump of the field (space or time axis).

    This is the natural resolution floor for sup-norm conclusions: a bound
    checked at cell centers can be off by at most one neighbor jump.
    """
    if cyl is None:
        region = f.values
        jumps = [np.abs(np.diff(region, axis=a)).max(initial=0.0)
                 for a in range(region.ndim)]
        return float(max(jumps))
    idx, mask = _window_cells(f, cyl)
    sub = f.values[idx.min(): idx.max() + 1]
    jump = 0.0
    if sub.shape[0] > 1:
        dt_jump = np.abs(np.diff(sub, axis=0))
        jump = max(jump, float(dt_jump[:, mask].max(initial=0.0)))
    for axis in range(1, sub.ndim):
        d = np.abs(np.diff(sub, axis=axis))
        lo_mask = np.take(mask, np.arange(mask.shape[axis - 1] - 1), axis=axis - 1)
        hi_mask = np.take(mask, np.arange(1, mask.shape[axis - 1]), axis=axis - 1)
        pair_mask = lo_mask & hi_mask
        if np.any(pair_mask):
            jump = max(jump, float(d[:, pair_mask].max(initial=0.0)))
    return jump


def save_snapshot(f: ScalarField, base_path: str | Path) -> tuple[Path, Path]:
    """Write ``<base>.csv`` (rows ``t,x1,...,xN,u``) plus ``<base>.json`` descriptor.

    Values are printed with 17 significant digits so float64 samples
    round-trip exactly; the JSON descriptor round-trips the grid bit-exactly.
    """
    base = Path(base_path)
    csv_path = base.with_suffix(".csv")
    json_path = base.with_suffix(".json")
    spec = f.spec
    header = ["t"] + [f"x{i + 1}" for i in range(spec.dimension)] + ["u"]
    centers = spec.centers().reshape(-1, spec.dimension)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, t in enumerate(spec.times()):
            flat = f.values[i].reshape(-1)
            for coords, v in zip(centers, flat):
                writer.writerow(
                    [f"{t:.17g}"] + [f"{c:.17g}" for c in coords] + [f"{v:.17g}"]
                )
    with open(json_path, "w") as fh:
        json.dump(spec.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path


def load_snapshot(base_path: str | Path) -> ScalarField:
    """Inverse of :func:`save_snapshot` (row order is trusted, coords checked)."""
    base = Path(base_path)
    with open(base.with_suffix(".json")) as fh:
        spec = GridSpec.from_json_dict(json.load(fh))
    expected_rows = spec.n_slices * spec.cells_per_axis**spec.dimension
    values = np.empty(expected_rows, dtype=np.float64)
    with open(base.with_suffix(".csv"), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "t" or header[-1] != "u" or len(header) != spec.dimension + 2:
            raise ValueError(f"unexpected snapshot header {header}")
        n = 0
        for row in reader:
            values[n] = float(row[-1])
            n += 1
    if n != expected_rows:
        raise ValueError(f"snapshot has {n} rows, grid expects {expected_rows}")
    return ScalarField(
        spec=spec, values=values.reshape(spec.n_slices, *spec.spatial_shape)
    )
