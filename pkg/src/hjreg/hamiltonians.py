"""Hamiltonian catalog and coercivity envelopes.

Every Hamiltonian here is superlinear in the gradient: it is pinched between
power-law envelopes

    (1/lam) * |P|^p - lam  <=  H(t, x, P)  <=  lam * |P|^p + lam

for some growth constant ``lam >= 1`` and exponent ``p > 1``.  The catalog
covers space-homogeneous power laws, scaled power laws with a constant
offset, rough checkerboard coefficients with contrast ``{1/lam, lam}`` at a
given cell size, and piecewise-constant tabulated coefficients.  Affine
reparametrizations (used by the zoom machinery) wrap any of these.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
from numpy.typing import NDArray

from .grid import ScalarField, field_from_values

__all__ = [
    "CoercivityEnvelope",
    "HamiltonianSpec",
    "TabulatedCoefficient",
    "TransformedHamiltonian",
    "CoercivityReport",
    "coercivity_check",
    "gauge_shift",
]

KINDS = ("power-law", "scaled-power-law", "rough-coefficient", "tabulated")


@dataclass(frozen=True)
class CoercivityEnvelope:
    """Growth constant ``lam >= 1`` and exponent ``p > 1`` of the pinching bounds."""

    lam: float
    p: float

    def __post_init__(self) -> None:
        if self.lam < 1.0:
            raise ValueError(f"envelope constant must be >= 1, got {self.lam}")
        if self.p <= 1.0:
            raise ValueError(f"exponent must exceed 1, got {self.p}")

    def lower(self, pnorm: NDArray[np.float64] | float) -> NDArray[np.float64] | float:
        return np.asarray(pnorm) ** self.p / self.lam - self.lam

    def upper(self, pnorm: NDArray[np.float64] | float) -> NDArray[np.float64] | float:
        return self.lam * np.asarray(pnorm) ** self.p + self.lam


@dataclass(frozen=True)
class TabulatedCoefficient:
    """Piecewise-constant coefficient on a coarse ``(t, x)`` lattice.

    ``t_edges`` has one more entry than there are time bins; spatial cells
    tile ``[-half_width, half_width]^dimension`` uniformly.  Lookups clamp to
    the nearest bin, so evaluation is defined everywhere.
    """

    dimension: int
    t_edges: tuple[float, ...]
    half_width: float
    cells_per_axis: int
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        n_bins = len(self.t_edges) - 1
        if n_bins < 1:
            raise ValueError("need at least two time edges")
        expected = n_bins * self.cells_per_axis**self.dimension
        if len(self.values) != expected:
            raise ValueError(
                f"table has {len(self.values)} values, lattice expects {expected}"
            )
        if min(self.values) <= 0.0:
            raise ValueError("tabulated coefficients must be positive")

    def lookup(self, t: float, x: NDArray[np.float64]) -> NDArray[np.float64]:
        arr = np.asarray(self.values, dtype=np.float64).reshape(
            len(self.t_edges) - 1, *(self.cells_per_axis,) * self.dimension
        )
        ti = int(np.clip(np.searchsorted(self.t_edges, t, side="right") - 1,
                         0, len(self.t_edges) - 2))
        width = 2.0 * self.half_width / self.cells_per_axis
        idx = np.floor((np.asarray(x) + self.half_width) / width).astype(int)
        idx = np.clip(idx, 0, self.cells_per_axis - 1)
        return arr[ti][tuple(np.moveaxis(idx, -1, 0))]


@dataclass(frozen=True)
class HamiltonianSpec:
    """One catalog Hamiltonian ``H(t, x, P) = a(t, x) * |P|^p + offset``.

    Attributes:
        kind: one of ``power-law`` (a = 1), ``scaled-power-law`` (constant
            ``coefficient`` and ``offset``), ``rough-coefficient``
            (checkerboard ``a(x) in {1/lam, lam}`` with cell size ``eta``),
            or ``tabulated`` (piecewise-constant ``table``).
        p: gradient growth exponent, > 1.
    """

    kind: str
    p: float
    coefficient: float = 1.0
    offset: float = 0.0
    lam: float = 1.0
    eta: float = 0.25
    table: TabulatedCoefficient | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown Hamiltonian kind {self.kind!r}; know {KINDS}")
        if self.p <= 1.0:
            raise ValueError(f"exponent must exceed 1, got {self.p}")
        if self.kind == "scaled-power-law" and self.coefficient <= 0.0:
            raise ValueError(f"coefficient must be positive, got {self.coefficient}")
        if self.kind == "rough-coefficient":
            if self.lam < 1.0:
                raise ValueError(f"rough contrast needs lam >= 1, got {self.lam}")
            if self.eta <= 0.0:
                raise ValueError(f"eta must be positive, got {self.eta}")
        if self.kind == "tabulated" and self.table is None:
            raise ValueError("tabulated kind requires a table")

    def _coefficient_at(
        self, t: float, x: NDArray[np.float64]
    ) -> NDArray[np.float64] | float:
        if self.kind == "power-law":
            return 1.0
        if self.kind == "scaled-power-law":
            return self.coefficient
        if self.kind == "rough-coefficient":
            parity = np.sum(
                np.floor(np.asarray(x) / self.eta).astype(np.int64), axis=-1
            ) % 2
            return np.where(parity == 0, self.lam, 1.0 / self.lam)
        assert self.table is not None
        return self.table.lookup(t, x)

    def eval(
        self,
        t: float,
        x: NDArray[np.float64],
        grad: NDArray[np.float64],
    ) -> NDArray[np.float64]:
        """Evaluate on arrays whose last axis indexes the spatial components."""
        pnorm = np.linalg.norm(np.atleast_1d(np.asarray(grad, dtype=np.float64)),
                               axis=-1)
        base = self._coefficient_at(t, np.asarray(x, dtype=np.float64))
        out = base * pnorm**self.p
        if self.kind == "scaled-power-law":
            out = out + self.offset
        return out

    @property
    def sup_coefficient(self) -> float:
        if self.kind == "power-law":
            return 1.0
        if self.kind == "scaled-power-law":
            return self.coefficient
        if self.kind == "rough-coefficient":
            return self.lam
        assert self.table is not None
        return max(self.table.values)

    def dissipation_bound(self, pnorm: float) -> float:
        """Upper bound for ``|dH/dP|`` over ``|P| <= pnorm`` (per axis and total)."""
        return self.sup_coefficient * self.p * max(pnorm, 0.0) ** (self.p - 1.0)

    def declared_envelope(self) -> CoercivityEnvelope:
        """Tightest catalog envelope this kind is guaranteed to satisfy."""
        if self.kind == "power-law":
            lam = 1.0
        elif self.kind == "scaled-power-law":
            lam = max(1.0, self.coefficient, 1.0 / self.coefficient,
                      abs(self.offset))
        elif self.kind == "rough-coefficient":
            lam = self.lam
        else:
            assert self.table is not None
            lam = max(1.0, max(self.table.values),
                      1.0 / min(self.table.values))
        return CoercivityEnvelope(lam=lam, p=self.p)

    def to_config(self) -> dict:
        out: dict = {"kind": self.kind, "p": self.p}
        if self.kind == "scaled-power-law":
            out["coefficient"] = self.coefficient
            out["offset"] = self.offset
        if self.kind == "rough-coefficient":
            out["lambda"] = self.lam
            out["eta"] = self.eta
        if self.kind == "tabulated":
            assert self.table is not None
            out["table"] = {
                "dimension": self.table.dimension,
                "t_edges": list(self.table.t_edges),
                "half_width": self.table.half_width,
                "cells_per_axis": self.table.cells_per_axis,
                "values": list(self.table.values),
            }
        return out

    @classmethod
    def from_config(cls, data: dict) -> "HamiltonianSpec":
        kind = data["kind"]
        kwargs: dict = {"kind": kind, "p": float(data["p"])}
        if kind == "scaled-power-law":
            kwargs["coefficient"] = float(data.get("coefficient", 1.0))
            kwargs["offset"] = float(data.get("offset", 0.0))
        if kind == "rough-coefficient":
            kwargs["lam"] = float(data["lambda"])
            kwargs["eta"] = float(data["eta"])
        if kind == "tabulated":
            tab = data["table"]
            kwargs["table"] = TabulatedCoefficient(
                dimension=int(tab["dimension"]),
                t_edges=tuple(float(v) for v in tab["t_edges"]),
                half_width=float(tab["half_width"]),
                cells_per_axis=int(tab["cells_per_axis"]),
                values=tuple(float(v) for v in tab["values"]),
            )
        return cls(**kwargs)


class HamiltonianLike(Protocol):
    p: float

    def eval(self, t, x, grad): ...

    def dissipation_bound(self, pnorm: float) -> float: ...


@dataclass(frozen=True)
class TransformedHamiltonian:
    """Affine reparametrization of another Hamiltonian.

    Evaluates ``out_scale * (base(t_shift + t_scale*t, x_shift + x_scale*x,
    grad_scale*P) + const)``.  This is exactly the family produced when a
    solution is rescaled ``u(t, x) -> s * (u(a t, b x) - d)``: the rescaled
    function solves the equation with ``out_scale = s*a``, ``grad_scale =
    1/(s*b)`` applied to the original Hamiltonian.
    """

    base: HamiltonianSpec | "TransformedHamiltonian"
    out_scale: float = 1.0
    t_scale: float = 1.0
    x_scale: float = 1.0
    grad_scale: float = 1.0
    t_shift: float = 0.0
    x_shift: tuple[float, ...] = ()
    const: float = 0.0

    @property
    def p(self) -> float:
        return self.base.p

    def eval(self, t, x, grad):
        x = np.asarray(x, dtype=np.float64)
        shift = np.asarray(self.x_shift) if self.x_shift else 0.0
        inner = self.base.eval(
            self.t_shift + self.t_scale * t,
            shift + self.x_scale * x,
            self.grad_scale * np.asarray(grad, dtype=np.float64),
        )
        return self.out_scale * (inner + self.const)

    def dissipation_bound(self, pnorm: float) -> float:
        inner = self.base.dissipation_bound(abs(self.grad_scale) * pnorm)
        return abs(self.out_scale * self.grad_scale) * inner


@dataclass(frozen=True)
class CoercivityReport:
    """Worst slacks of the two envelope inequalities over a sample cloud."""

    min_lower_slack: float
    min_upper_slack: float
    n_samples: int
    violations: tuple[dict, ...]

    @property
    def margin(self) -> float:
        return min(self.min_lower_slack, self.min_upper_slack)

    @property
    def ok(self) -> bool:
        return not self.violations


def coercivity_check(
    h: HamiltonianSpec | TransformedHamiltonian,
    env: CoercivityEnvelope,
    times: Sequence[float],
    points: NDArray[np.float64],
    grads: NDArray[np.float64],
    max_reported: int = 8,
) -> CoercivityReport:
    """Check the pinching bounds on the product cloud ``times x points x grads``.

    ``points`` has shape ``(M, N)`` and ``grads`` shape ``(K, N)``; every
    combination is evaluated.  A violation is any strictly negative slack.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    grads = np.atleast_2d(np.asarray(grads, dtype=np.float64))
    pnorm = np.linalg.norm(grads, axis=-1)
    low = np.asarray(env.lower(pnorm))
    up = np.asarray(env.upper(pnorm))
    min_lo = math.inf
    min_up = math.inf
    violations: list[dict] = []
    n = 0
    for t in times:
        vals = h.eval(float(t), points[:, None, :], grads[None, :, :])
        slack_lo = vals - low[None, :]
        slack_up = up[None, :] - vals
        n += vals.size
        min_lo = min(min_lo, float(slack_lo.min()))
        min_up = min(min_up, float(slack_up.min()))
        bad = np.argwhere((slack_lo < 0.0) | (slack_up < 0.0))
        for i, k in bad[: max(0, max_reported - len(violations))]:
            violations.append(
                {
                    "t": float(t),
                    "x": tuple(points[i]),
                    "grad": tuple(grads[k]),
                    "lower_slack": float(slack_lo[i, k]),
                    "upper_slack": float(slack_up[i, k]),
                }
            )
    return CoercivityReport(
        min_lower_slack=min_lo,
        min_upper_slack=min_up,
        n_samples=n,
        violations=tuple(violations),
    )


def gauge_shift(f: ScalarField, env: CoercivityEnvelope, sign: float = 1.0) -> ScalarField:
    """Add ``sign * lam * t`` to every slice.

    With ``sign=+1`` this turns any solution of the pinched equation into a
    field that both stays a subsolution of the flattened upper problem and
    gains the one-sided lower bound; ``sign=-1`` undoes it up to roundoff.
    """
    times = f.spec.times()
    shifted = f.values + sign * env.lam * times[(...,) + (None,) * f.spec.dimension]
    return field_from_values(f.spec, shifted)
