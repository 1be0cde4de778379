"""Truncation energies and smallness-implies-boundedness checks.

The machinery measures how the positive excursion of a bounded subsolution
dies out level by level.  For level ``k >= 1`` the truncation threshold is
``1 - 2^-k`` and the truncated field is ``v_k = (u - (1 - 2^-k))_+``.  Its
energy on the shrinking cylinders ``[1 - 2^-k, 2] x B(1)`` is

    U_k = sup_t int_B v_k  +  int int_B |grad v_k|^p,

and the whole argument rests on the nonlinear recurrence
``U_k <= D * U_{k-1}^(1 + p/N)``: any sequence obeying it collapses to zero
in finitely many effective steps once ``U_1`` falls below the
fast-convergence threshold ``eps0 = (1/2) * D^(-1/beta)`` with
``beta = p/N``.  The entry smallness constant handed to the integral
hypothesis is ``delta = eps0 / (2 lam (1 + lam))``.

Everything here evaluates on cell-counting measures from :mod:`hjreg.grid`;
suprema over time are maxima over grid slices, with no interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .grid import (
    Cylinder,
    EmptyCylinderError,
    GridSpec,
    ScalarField,
    ball_volume,
    discrete_gradient_norm_p,
    field_from_values,
    level_set_measure,
    one_cell_oscillation,
)
from .hamiltonians import CoercivityEnvelope
from .solver import residual_subsolution

__all__ = [
    "LadderEntry",
    "EnergyLadder",
    "RecurrenceFit",
    "LemmaVerdict",
    "ABoundsReport",
    "SliceDichotomy",
    "cutoff_time",
    "truncate",
    "truncated_energy",
    "energy_ladder",
    "recurrence_fit",
    "recurrence_orbit",
    "fast_convergence_threshold",
    "delta_constant",
    "lemma_one_check",
    "a_priori_bounds_check",
    "lemma_two_check",
    "isoperimetric_scan",
]

_EPS = 1e-9


def cutoff_time(level: int) -> float:
    """Truncation threshold and time-window start ``1 - 2^-level``."""
    if level < 0:
        raise ValueError(f"level must be nonnegative, got {level}")
    return 1.0 - 2.0 ** (-level)


def truncate(f: ScalarField, level: int) -> ScalarField:
    """Positive part above the level-``k`` threshold: ``(f - (1 - 2^-k))_+``."""
    return field_from_values(
        f.spec, np.maximum(f.values - cutoff_time(level), 0.0)
    )


def _require_cover(spec: GridSpec, t_lo: float, t_hi: float, radius: float) -> None:
    if spec.t_start > t_lo + _EPS or spec.t_end < t_hi - _EPS:
        raise ValueError(
            f"grid time range [{spec.t_start}, {spec.t_end}] does not cover "
            f"[{t_lo}, {t_hi}]"
        )
    pad = 2.0 * spec.cell_width
    if spec.half_width < radius + pad:
        raise ValueError(
            f"box half-width {spec.half_width} leaves less than two cells of "
            f"padding around the radius-{radius} ball"
        )


def _unit_ball(radius: float = 1.0, t_lo: float = -2.0, t_hi: float = 2.0,
               dimension: int = 2) -> Cylinder:
    return Cylinder(t_lo=t_lo, t_hi=t_hi, center=(0.0,) * dimension, radius=radius)


def _time_weights_in(spec: GridSpec, t_lo: float, t_hi: float) -> NDArray[np.float64]:
    # Same ownership convention as grid.level_set_measure.
    times = spec.times()
    half = 0.5 * spec.dt
    own_lo = np.maximum(times - half, spec.t_start)
    own_hi = np.minimum(times + half, spec.t_end)
    return np.maximum(np.minimum(own_hi, t_hi) - np.maximum(own_lo, t_lo), 0.0)


def _ball_mask(spec: GridSpec, radius: float) -> NDArray[np.bool_]:
    centers = spec.centers()
    return np.einsum("...i,...i->...", centers, centers) < radius**2


def truncated_energy(
    f: ScalarField, level: int, env: CoercivityEnvelope
) -> float:
    """Energy of the level-``k`` truncation on ``[1 - 2^-k, 2] x B(1)``."""
    if level < 1:
        raise ValueError(f"level must be >= 1, got {level}")
    spec = f.spec
    t_lo = cutoff_time(level)
    _require_cover(spec, t_lo, 2.0, 1.0)
    trunc = truncate(f, level)
    mask = _ball_mask(spec, 1.0)
    vol = spec.cell_volume
    ball = _unit_ball(dimension=spec.dimension)

    times = spec.times()
    in_window = np.nonzero((times >= t_lo - _EPS) & (times <= 2.0 + _EPS))[0]
    sup_term = max(
        float(trunc.values[i][mask].sum()) * vol for i in in_window
    )
    weights = _time_weights_in(spec, t_lo, 2.0)
    grad_term = 0.0
    for i in np.nonzero(weights > 0.0)[0]:
        grad_term += weights[i] * discrete_gradient_norm_p(
            trunc, int(i), env.p, ball=ball
        )
    return sup_term + grad_term


@dataclass(frozen=True)
class LadderEntry:
    level: int
    cutoff: float
    energy: float


@dataclass(frozen=True)
class EnergyLadder:
    """Truncated energies for levels ``1..k_max`` under one envelope."""

    env: CoercivityEnvelope
    entries: tuple[LadderEntry, ...]

    def energies(self) -> NDArray[np.float64]:
        return np.array([e.energy for e in self.entries])

    def to_json_dict(self) -> dict:
        return {
            "lambda": self.env.lam,
            "p": self.env.p,
            "entries": [
                {"level": e.level, "cutoff": e.cutoff, "energy": e.energy}
                for e in self.entries
            ],
        }


def energy_ladder(
    f: ScalarField, k_max: int, env: CoercivityEnvelope
) -> EnergyLadder:
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    entries = tuple(
        LadderEntry(level=k, cutoff=cutoff_time(k),
                    energy=truncated_energy(f, k, env))
        for k in range(1, k_max + 1)
    )
    return EnergyLadder(env=env, entries=entries)


@dataclass(frozen=True)
class RecurrenceFit:
    """Smallest constant making ``U_k <= D * U_{k-1}^(1 + p/N)`` hold on a ladder."""

    d_fit: float | None
    ratios: tuple[float, ...]
    all_zero: bool


def recurrence_fit(ladder: EnergyLadder, dimension: int) -> RecurrenceFit:
    beta = ladder.env.p / dimension
    energies = ladder.energies()
    ratios: list[float] = []
    for prev, curr in zip(energies[:-1], energies[1:]):
        if prev > 0.0:
            ratios.append(float(curr / prev ** (1.0 + beta)))
    all_zero = bool(np.all(energies == 0.0))
    if ratios:
        d_fit: float | None = max(ratios)
    else:
        d_fit = 0.0 if all_zero else None
    return RecurrenceFit(d_fit=d_fit, ratios=tuple(ratios), all_zero=all_zero)


def recurrence_orbit(
    d: float, beta: float, a0: float, steps: int
) -> NDArray[np.float64]:
    """Iterate ``a_{k+1} = d * a_k^(1 + beta)`` from ``a0``."""
    if d <= 0.0 or beta <= 0.0:
        raise ValueError("need d > 0 and beta > 0")
    out = np.empty(steps + 1)
    out[0] = a0
    for i in range(steps):
        out[i + 1] = d * out[i] ** (1.0 + beta)
    return out


def fast_convergence_threshold(d: float, beta: float) -> float:
    """Largest safe entry value ``(1/2) * d^(-1/beta)`` for the recurrence."""
    if d <= 0.0 or beta <= 0.0:
        raise ValueError("need d > 0 and beta > 0")
    return 0.5 * d ** (-1.0 / beta)


def delta_constant(eps0: float, lam: float) -> float:
    """Entry smallness constant ``eps0 / (2 lam (1 + lam))``."""
    if eps0 <= 0.0:
        raise ValueError(f"eps0 must be positive, got {eps0}")
    if lam < 1.0:
        raise ValueError(f"lam must be >= 1, got {lam}")
    return eps0 / (2.0 * lam * (1.0 + lam))


@dataclass(frozen=True)
class LemmaVerdict:
    """Outcome of one hypothesis-implies-conclusion check.

    ``refuted`` is only claimed when the preconditions held, the hypotheses
    held, and the conclusion failed; a failed precondition is reported as its
    own status because the implication says nothing there.
    """

    name: str
    preconditions: dict[str, bool]
    hypothesis_values: dict[str, float]
    hypothesis_thresholds: dict[str, float]
    hypothesis_satisfied: bool
    conclusion_values: dict[str, float]
    conclusion_thresholds: dict[str, float]
    conclusion_satisfied: bool
    tolerances: dict[str, float]
    cell_width: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def preconditions_ok(self) -> bool:
        return all(self.preconditions.values())

    @property
    def refuted(self) -> bool:
        return (
            self.preconditions_ok
            and self.hypothesis_satisfied
            and not self.conclusion_satisfied
        )

    @property
    def vacuous(self) -> bool:
        return self.preconditions_ok and not self.hypothesis_satisfied

    @property
    def status(self) -> str:
        if not self.preconditions_ok:
            return "precondition-violated"
        if self.refuted:
            return "refuted"
        if self.vacuous:
            return "vacuous"
        return "pass"

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "preconditions": dict(self.preconditions),
            "hypothesis_values": dict(self.hypothesis_values),
            "hypothesis_thresholds": dict(self.hypothesis_thresholds),
            "hypothesis_satisfied": self.hypothesis_satisfied,
            "conclusion_values": dict(self.conclusion_values),
            "conclusion_thresholds": dict(self.conclusion_thresholds),
            "conclusion_satisfied": self.conclusion_satisfied,
            "tolerances": dict(self.tolerances),
            "cell_width": self.cell_width,
            "diagnostics": dict(self.diagnostics),
        }


def lemma_one_check(
    f: ScalarField,
    env: CoercivityEnvelope,
    delta: float,
    conclusion_tol: float | None = None,
) -> LemmaVerdict:
    """Small positive mass on ``[0,2] x B(1)`` forces ``f <= 1`` on ``[1,2] x B(1)``.

    Hypothesis: the integral of ``f_+`` over ``[0, 2] x B(1)`` is at most
    ``delta``.  Conclusion checked at cell centers with a tolerance that
    defaults to the largest one-cell jump of ``f`` in the conclusion window.
    """
    spec = f.spec
    _require_cover(spec, 0.0, 2.0, 1.0)
    mask = _ball_mask(spec, 1.0)
    weights = _time_weights_in(spec, 0.0, 2.0)
    plus = np.maximum(f.values, 0.0)
    plus_mass = float(
        sum(
            weights[i] * plus[i][mask].sum() * spec.cell_volume
            for i in np.nonzero(weights > 0.0)[0]
        )
    )
    concl_cyl = _unit_ball(t_lo=1.0, t_hi=2.0, dimension=spec.dimension)
    times = spec.times()
    concl_idx = np.nonzero((times >= 1.0 - _EPS) & (times <= 2.0 + _EPS))[0]
    sup_late = max(float(f.values[i][mask].max()) for i in concl_idx)
    tol = (
        one_cell_oscillation(f, concl_cyl)
        if conclusion_tol is None
        else conclusion_tol
    )
    return LemmaVerdict(
        name="small-mass-implies-bounded",
        preconditions={},
        hypothesis_values={"plus_mass": plus_mass},
        hypothesis_thresholds={"plus_mass": delta},
        hypothesis_satisfied=plus_mass <= delta,
        conclusion_values={"late_sup": sup_late},
        conclusion_thresholds={"late_sup": 1.0},
        conclusion_satisfied=sup_late <= 1.0 + tol,
        tolerances={"late_sup": tol},
        cell_width=spec.cell_width,
    )


@dataclass(frozen=True)
class ABoundsReport:
    """A-priori gradient and time-variation control for bounded subsolutions."""

    gradient_value: float
    gradient_bound: float
    tv_value: float
    tv_bound: float
    cell_width: float

    @property
    def gradient_ok(self) -> bool:
        return self.gradient_value <= self.gradient_bound

    @property
    def tv_ok(self) -> bool:
        return self.tv_value <= self.tv_bound

    def to_json_dict(self) -> dict:
        return {
            "gradient_value": self.gradient_value,
            "gradient_bound": self.gradient_bound,
            "gradient_ok": self.gradient_ok,
            "tv_value": self.tv_value,
            "tv_bound": self.tv_bound,
            "tv_ok": self.tv_ok,
            "cell_width": self.cell_width,
        }


def a_priori_bounds_check(
    f: ScalarField, env: CoercivityEnvelope, slack: float = 0.0
) -> ABoundsReport:
    """Check the energy and time-variation bounds on ``[-2, 2] x B(1)``.

    The gradient estimate integrates ``|grad f_+|^p`` and compares against
    ``lam * (int f_+(-2) + 4 lam |B(1)|)``; the time-variation proxy sums
    ``int_B |f_+(t_{i+1}) - f_+(t_i)|`` and compares against
    ``4 |B(1)| (1 + lam) + slack``.
    """
    spec = f.spec
    _require_cover(spec, -2.0, 2.0, 1.0)
    mask = _ball_mask(spec, 1.0)
    vol = spec.cell_volume
    plus = np.maximum(f.values, 0.0)
    plus_field = field_from_values(spec, plus)
    ball = _unit_ball(dimension=spec.dimension)
    weights = _time_weights_in(spec, -2.0, 2.0)
    grad_value = float(
        sum(
            weights[i] * discrete_gradient_norm_p(plus_field, int(i), env.p, ball=ball)
            for i in np.nonzero(weights > 0.0)[0]
        )
    )
    vol_ball = ball_volume(spec.dimension, 1.0)
    initial_mass = float(plus[0][mask].sum() * vol)
    grad_bound = env.lam * (initial_mass + 4.0 * env.lam * vol_ball) + slack

    times = spec.times()
    idx = np.nonzero((times >= -2.0 - _EPS) & (times <= 2.0 + _EPS))[0]
    tv_value = 0.0
    for a, b in zip(idx[:-1], idx[1:]):
        tv_value += float(np.abs(plus[b][mask] - plus[a][mask]).sum() * vol)
    tv_bound = 4.0 * vol_ball * (1.0 + env.lam) + slack
    return ABoundsReport(
        gradient_value=grad_value,
        gradient_bound=grad_bound,
        tv_value=tv_value,
        tv_bound=tv_bound,
        cell_width=spec.cell_width,
    )


def lemma_two_check(
    f: ScalarField,
    env: CoercivityEnvelope,
    alpha: float,
    delta: float,
    check_subsolution: bool = True,
    residual_tol: float | None = None,
) -> LemmaVerdict:
    """Mostly-nonpositive fields with a thin middle layer have tiny mass above 1.

    On ``[-2, 2] x B(1)``: if ``|{f <= 0}|`` is at least half the cylinder
    and ``|{0 < f < 1}|`` is at most ``alpha``, then the integral of
    ``(f - 1)_+`` over ``[0, 2] x B(1)`` stays below ``delta / 2``.

    Preconditions: ``f <= 2`` on the cylinder, and (unless disabled) the
    one-sided subsolution residual stays below ``residual_tol`` inside the
    ball.  The conclusion is only meaningful for genuine subsolutions, so a
    failed precondition is reported as its own status rather than a
    refutation.
    """
    spec = f.spec
    _require_cover(spec, -2.0, 2.0, 1.0)
    if env.p >= spec.dimension:
        raise ValueError(
            f"the machinery needs p < N, got p={env.p}, N={spec.dimension}"
        )
    cyl = _unit_ball(dimension=spec.dimension)
    mask = _ball_mask(spec, 1.0)
    times = spec.times()
    idx = np.nonzero((times >= -2.0 - _EPS) & (times <= 2.0 + _EPS))[0]
    sup_all = max(float(f.values[i][mask].max()) for i in idx)
    bound_tol = one_cell_oscillation(f, cyl)
    preconditions = {"bounded_by_two": sup_all <= 2.0 + bound_tol}
    diagnostics: dict = {"sup": sup_all}
    if check_subsolution:
        tol = (
            10.0 * (spec.cell_width + spec.dt)
            if residual_tol is None
            else residual_tol
        )
        rep = residual_subsolution(f, env)
        interior = rep.values[:, mask]
        worst = float(interior.max())
        preconditions["subsolution"] = worst <= tol
        diagnostics["subsolution_residual"] = worst
        diagnostics["subsolution_tol"] = tol

    total = level_set_measure(f, cyl)
    zero_mass = level_set_measure(f, cyl, hi=0.0, closed_upper=True)
    middle_mass = level_set_measure(f, cyl, lo=0.0, hi=1.0)

    weights = _time_weights_in(spec, 0.0, 2.0)
    above = np.maximum(f.values - 1.0, 0.0)
    above_mass = float(
        sum(
            weights[i] * above[i][mask].sum() * spec.cell_volume
            for i in np.nonzero(weights > 0.0)[0]
        )
    )
    return LemmaVerdict(
        name="measure-to-mass-improvement",
        preconditions=preconditions,
        hypothesis_values={"zero_set": zero_mass, "middle_set": middle_mass},
        hypothesis_thresholds={"zero_set": 0.5 * total, "middle_set": alpha},
        hypothesis_satisfied=(zero_mass >= 0.5 * total) and (middle_mass <= alpha),
        conclusion_values={"above_mass": above_mass},
        conclusion_thresholds={"above_mass": 0.5 * delta},
        conclusion_satisfied=above_mass < 0.5 * delta,
        tolerances={"bounded_by_two": bound_tol},
        cell_width=spec.cell_width,
        diagnostics=diagnostics,
    )


@dataclass(frozen=True)
class SliceDichotomy:
    t: float
    middle_measure: float
    klass: str


def isoperimetric_scan(
    f: ScalarField,
    t_lo: float,
    t_hi: float,
    lo: float = 0.0,
    hi: float = 1.0,
) -> list[SliceDichotomy]:
    """Classify each slice in the window as below/above/mixed inside ``B(1)``.

    A slice is *mixed* when the spatial measure of ``{lo < f < hi}`` in the
    unit ball reaches one cell volume; otherwise it is pure and labeled by
    whichever side (``{f <= lo}`` or ``{f >= hi}``) holds more cells.
    """
    spec = f.spec
    mask = _ball_mask(spec, 1.0)
    if not np.any(mask):
        raise EmptyCylinderError("unit ball selects no cells on this grid")
    times = spec.times()
    idx = np.nonzero((times >= t_lo - _EPS) & (times <= t_hi + _EPS))[0]
    vol = spec.cell_volume
    out: list[SliceDichotomy] = []
    for i in idx:
        vals = f.values[i][mask]
        middle = float(np.count_nonzero((vals > lo) & (vals < hi)) * vol)
        if middle >= vol:
            klass = "mixed"
        else:
            n_below = int(np.count_nonzero(vals <= lo))
            n_above = int(np.count_nonzero(vals >= hi))
            klass = "below" if n_below >= n_above else "above"
        out.append(SliceDichotomy(t=float(times[i]), middle_measure=middle, klass=klass))
    return out
