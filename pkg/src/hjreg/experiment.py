"""Scenario assembly: validated configs, check orchestration, reports.

A run solves one initial-data draw under one Hamiltonian and feeds the
trajectory to the enabled checks; an ensemble repeats that over seeded
draws and merges the member reports in index order.  Reports are plain
JSON with a separable ``timings`` block, so two runs of the same config
and seed produce byte-identical ``stable_bytes()``.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .degiorgi import (
    delta_constant,
    energy_ladder,
    fast_convergence_threshold,
    lemma_one_check,
    lemma_two_check,
    recurrence_fit,
)
from .grid import GridSpec, field_from_values, save_snapshot
from .hamiltonians import (
    CoercivityEnvelope,
    HamiltonianSpec,
    TransformedHamiltonian,
    coercivity_check,
)
from .initial_data import make_initial_function, validate_descriptor
from .oscillation import (
    ChainConstructionError,
    ConstantChain,
    build_constant_chain,
    oscillation_above_check,
    oscillation_below_check,
)
from .rescale import (
    CascadeError,
    base_point_window,
    gauge_to_window,
    holder_estimate,
    records_to_csv,
    theorem_check,
    zoom_cascade,
)
from .solver import SolveConfig, SolverError, hopf_lax, snap_dt, solve

__all__ = [
    "CHECK_NAMES",
    "ConfigError",
    "EnsembleReport",
    "ExperimentConfig",
    "RunReport",
    "SCHEMA_VERSION",
    "bundled_scenarios",
    "ensemble",
    "parse_config",
    "run",
    "scenario_path",
]

SCHEMA_VERSION = "1"
CHECK_NAMES = ("lemma1", "lemma2", "osc_above", "osc_below", "cascade", "theorem")

# Reference recurrence prefactor behind the default mass threshold; the
# fitted prefactor of the actual run is reported next to the default so a
# bad reference is visible rather than silent.
_D_REFERENCE = 10.0

_SWEEPABLE = {"eta": "eta", "coefficient": "coefficient", "lambda": "lam"}

# Checks whose lattice windows are fixed by the statements they test.
_WINDOWS = {
    "lemma1": (0.0, 2.0, 1.0),
    "lemma2": (-2.0, 2.0, 1.0),
    "osc_above": (-2.0, 2.0, 1.0),
    "osc_below": (-2.0, 2.0, 1.0),
}


class ConfigError(ValueError):
    """Configuration rejected; the message names the offending key."""


def _reject_unknown(section: dict, allowed: set[str], where: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}")


def _require(section: dict, key: str, where: str):
    try:
        return section[key]
    except KeyError:
        raise ConfigError(f"{where} needs {key!r}") from None


@dataclass(frozen=True)
class InitialDataSpec:
    name: str = "zero"
    parameters: dict = field(default_factory=dict)
    seed: int = 0

    def to_json_dict(self) -> dict:
        return {"name": self.name, "parameters": dict(self.parameters),
                "seed": self.seed}


@dataclass(frozen=True)
class ChainSettings:
    """Either a fixed measure threshold or a descending candidate search."""

    alpha: float | None = 1.0
    mode: str = "fixed"
    candidates: tuple[float, ...] = (4.0, 2.0, 1.0, 0.5, 0.25)

    def __post_init__(self) -> None:
        if self.mode not in ("fixed", "empirical"):
            raise ConfigError(f"unknown chain mode {self.mode!r}")
        if self.mode == "fixed":
            if self.alpha is None or self.alpha <= 0.0:
                raise ConfigError(
                    f"fixed chain mode needs alpha > 0, got {self.alpha}"
                )
        elif not self.candidates or any(a <= 0.0 for a in self.candidates):
            raise ConfigError("empirical chain mode needs positive candidates")

    def to_json_dict(self) -> dict:
        out: dict = {"mode": self.mode}
        if self.mode == "fixed":
            out["alpha"] = self.alpha
        else:
            out["candidates"] = list(self.candidates)
        return out


@dataclass(frozen=True)
class CascadeSettings:
    levels: int = 4
    mode: str = "interpolate"
    base_time: float | None = None
    base_point: tuple[float, ...] | None = None
    working_cells: int = 40
    working_slices: int = 64

    def to_json_dict(self) -> dict:
        return {
            "levels": self.levels,
            "mode": self.mode,
            "base_time": self.base_time,
            "base_point": None if self.base_point is None else list(self.base_point),
            "working_cells": self.working_cells,
            "working_slices": self.working_slices,
        }


@dataclass(frozen=True)
class TheoremSettings:
    delta_time: float | None = None
    points_per_axis: int = 3
    levels: int = 4
    mode: str = "interpolate"
    working_cells: int = 40
    working_slices: int = 64

    def to_json_dict(self) -> dict:
        return {
            "delta_time": self.delta_time,
            "points_per_axis": self.points_per_axis,
            "levels": self.levels,
            "mode": self.mode,
            "working_cells": self.working_cells,
            "working_slices": self.working_slices,
        }


@dataclass(frozen=True)
class OracleSettings:
    refinements: int = 1
    max_error: float = 0.02
    min_order: float = 0.4
    window: float = 0.5
    time: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "refinements": self.refinements,
            "max_error": self.max_error,
            "min_order": self.min_order,
            "window": self.window,
            "time": self.time,
        }


@dataclass(frozen=True)
class SweepSettings:
    parameter: str
    values: tuple[float, ...]

    def to_json_dict(self) -> dict:
        return {"parameter": self.parameter, "values": list(self.values)}


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    grid: GridSpec
    hamiltonian: HamiltonianSpec
    envelope: CoercivityEnvelope
    initial_data: InitialDataSpec = InitialDataSpec()
    chain: ChainSettings = ChainSettings()
    checks: tuple[str, ...] = ()
    output_dir: str | None = None
    tolerances: dict = field(default_factory=dict)
    solve: SolveConfig = SolveConfig()
    cascade: CascadeSettings = CascadeSettings()
    theorem: TheoremSettings = TheoremSettings()
    oracle: OracleSettings | None = None
    sweep: SweepSettings | None = None
    description: str = ""

    def to_json_dict(self) -> dict:
        out = {
            "scenario": self.scenario,
            "description": self.description,
            "grid": self.grid.to_json_dict(),
            "hamiltonian": self.hamiltonian.to_config(),
            "envelope": {"lambda": self.envelope.lam, "p": self.envelope.p},
            "initial_data": self.initial_data.to_json_dict(),
            "chain": self.chain.to_json_dict(),
            "checks": list(self.checks),
            "output_dir": self.output_dir,
            "tolerances": dict(self.tolerances),
            "solve": {
                "cfl_safety": self.solve.cfl_safety,
                "sigma_mode": self.solve.sigma_mode,
                "sigma_bound": self.solve.sigma_bound,
                "max_steps": self.solve.max_steps,
            },
            "cascade": self.cascade.to_json_dict(),
            "theorem": self.theorem.to_json_dict(),
        }
        if self.oracle is not None:
            out["oracle"] = self.oracle.to_json_dict()
        if self.sweep is not None:
            out["sweep"] = self.sweep.to_json_dict()
        return out

    @staticmethod
    def from_json_dict(data: dict) -> "ExperimentConfig":
        _reject_unknown(
            data,
            {
                "scenario", "description", "grid", "hamiltonian", "envelope",
                "initial_data", "chain", "checks", "output_dir", "tolerances",
                "solve", "cascade", "theorem", "oracle", "sweep",
            },
            "config",
        )
        scenario = str(_require(data, "scenario", "config"))

        grid_cfg = _require(data, "grid", "config")
        _reject_unknown(
            grid_cfg,
            {"dimension", "half_width", "cells_per_axis", "t_start", "t_end", "dt"},
            "grid",
        )
        for key in ("dimension", "half_width", "cells_per_axis",
                    "t_start", "t_end", "dt"):
            _require(grid_cfg, key, "grid")
        try:
            grid = GridSpec.from_json_dict(grid_cfg)
        except ValueError as err:
            raise ConfigError(f"grid: {err}") from None

        ham_cfg = _require(data, "hamiltonian", "config")
        _reject_unknown(
            ham_cfg,
            {"kind", "p", "coefficient", "offset", "lambda", "eta", "table"},
            "hamiltonian",
        )
        _require(ham_cfg, "kind", "hamiltonian")
        _require(ham_cfg, "p", "hamiltonian")
        try:
            hamiltonian = HamiltonianSpec.from_config(ham_cfg)
        except (KeyError, ValueError) as err:
            raise ConfigError(f"hamiltonian: {err}") from None

        env_cfg = data.get("envelope")
        if env_cfg is None:
            envelope = hamiltonian.declared_envelope()
        else:
            _reject_unknown(env_cfg, {"lambda", "p"}, "envelope")
            try:
                envelope = CoercivityEnvelope(
                    lam=float(_require(env_cfg, "lambda", "envelope")),
                    p=float(env_cfg.get("p", hamiltonian.p)),
                )
            except ValueError as err:
                raise ConfigError(f"envelope: {err}") from None
        if envelope.p != hamiltonian.p:
            raise ConfigError(
                f"envelope exponent {envelope.p} does not match the "
                f"hamiltonian's {hamiltonian.p}"
            )

        init_cfg = data.get("initial_data", {})
        _reject_unknown(init_cfg, {"name", "parameters", "seed"}, "initial_data")
        initial = InitialDataSpec(
            name=str(init_cfg.get("name", "zero")),
            parameters=dict(init_cfg.get("parameters", {})),
            seed=int(init_cfg.get("seed", 0)),
        )
        try:
            validate_descriptor(initial.name, initial.parameters)
        except ValueError as err:
            raise ConfigError(f"initial_data: {err}") from None

        chain_cfg = data.get("chain", {})
        _reject_unknown(chain_cfg, {"alpha", "mode", "candidates"}, "chain")
        chain_mode = str(chain_cfg.get("mode", "fixed"))
        if chain_cfg.get("alpha") is not None:
            chain_alpha = float(chain_cfg["alpha"])
        else:
            chain_alpha = 1.0 if chain_mode == "fixed" else None
        chain = ChainSettings(
            alpha=chain_alpha,
            mode=chain_mode,
            candidates=tuple(
                sorted((float(a) for a in chain_cfg.get(
                    "candidates", ChainSettings().candidates)), reverse=True)
            ),
        )

        checks_raw = data.get("checks", [])
        for name in checks_raw:
            if name not in CHECK_NAMES:
                raise ConfigError(
                    f"unknown check {name!r}; valid: {', '.join(CHECK_NAMES)}"
                )
        checks = tuple(checks_raw)

        tol_cfg = data.get("tolerances", {})
        _reject_unknown(tol_cfg, {"delta", "conclusion", "residual"}, "tolerances")
        tolerances = {k: float(v) for k, v in tol_cfg.items()}

        solve_cfg_raw = data.get("solve", {})
        _reject_unknown(
            solve_cfg_raw,
            {"cfl_safety", "sigma_mode", "sigma_bound", "max_steps"},
            "solve",
        )
        try:
            solve_cfg = SolveConfig(
                cfl_safety=float(solve_cfg_raw.get("cfl_safety", 0.5)),
                sigma_mode=str(solve_cfg_raw.get("sigma_mode", "adaptive")),
                sigma_bound=(None if solve_cfg_raw.get("sigma_bound") is None
                             else float(solve_cfg_raw["sigma_bound"])),
                max_steps=(None if solve_cfg_raw.get("max_steps") is None
                           else int(solve_cfg_raw["max_steps"])),
            )
        except ValueError as err:
            raise ConfigError(f"solve: {err}") from None

        casc_cfg = data.get("cascade", {})
        _reject_unknown(
            casc_cfg,
            {"levels", "mode", "base_time", "base_point",
             "working_cells", "working_slices"},
            "cascade",
        )
        cascade = CascadeSettings(
            levels=int(casc_cfg.get("levels", 4)),
            mode=str(casc_cfg.get("mode", "interpolate")),
            base_time=(None if casc_cfg.get("base_time") is None
                       else float(casc_cfg["base_time"])),
            base_point=(None if casc_cfg.get("base_point") is None
                        else tuple(float(c) for c in casc_cfg["base_point"])),
            working_cells=int(casc_cfg.get("working_cells", 40)),
            working_slices=int(casc_cfg.get("working_slices", 64)),
        )
        if cascade.mode not in ("interpolate", "resolve"):
            raise ConfigError(f"unknown cascade mode {cascade.mode!r}")

        thm_cfg = data.get("theorem", {})
        _reject_unknown(
            thm_cfg,
            {"delta_time", "points_per_axis", "levels", "mode",
             "working_cells", "working_slices"},
            "theorem",
        )
        theorem = TheoremSettings(
            delta_time=(None if thm_cfg.get("delta_time") is None
                        else float(thm_cfg["delta_time"])),
            points_per_axis=int(thm_cfg.get("points_per_axis", 3)),
            levels=int(thm_cfg.get("levels", 4)),
            mode=str(thm_cfg.get("mode", "interpolate")),
            working_cells=int(thm_cfg.get("working_cells", 40)),
            working_slices=int(thm_cfg.get("working_slices", 64)),
        )
        if theorem.mode not in ("interpolate", "resolve"):
            raise ConfigError(f"unknown theorem mode {theorem.mode!r}")

        oracle = None
        if "oracle" in data:
            o_cfg = data["oracle"]
            _reject_unknown(
                o_cfg,
                {"refinements", "max_error", "min_order", "window", "time"},
                "oracle",
            )
            oracle = OracleSettings(
                refinements=int(o_cfg.get("refinements", 1)),
                max_error=float(o_cfg.get("max_error", 0.02)),
                min_order=float(o_cfg.get("min_order", 0.4)),
                window=float(o_cfg.get("window", 0.5)),
                time=(None if o_cfg.get("time") is None
                      else float(o_cfg["time"])),
            )
            if oracle.refinements < 1:
                raise ConfigError("oracle needs refinements >= 1")
            if not 0.0 < oracle.window <= 1.0:
                raise ConfigError("oracle window must lie in (0, 1]")
            if hamiltonian.kind != "power-law":
                raise ConfigError(
                    "the inf-convolution oracle is exact only for the plain "
                    f"power law, not {hamiltonian.kind!r}"
                )

        sweep = None
        if "sweep" in data:
            s_cfg = data["sweep"]
            _reject_unknown(s_cfg, {"parameter", "values"}, "sweep")
            sweep = SweepSettings(
                parameter=str(_require(s_cfg, "parameter", "sweep")),
                values=tuple(float(v) for v in _require(s_cfg, "values", "sweep")),
            )
            if sweep.parameter not in _SWEEPABLE:
                raise ConfigError(
                    f"cannot sweep {sweep.parameter!r}; "
                    f"sweepable: {', '.join(sorted(_SWEEPABLE))}"
                )
            if not sweep.values:
                raise ConfigError("sweep needs at least one value")

        cfg = ExperimentConfig(
            scenario=scenario,
            grid=grid,
            hamiltonian=hamiltonian,
            envelope=envelope,
            initial_data=initial,
            chain=chain,
            checks=checks,
            output_dir=(None if data.get("output_dir") is None
                        else str(data["output_dir"])),
            tolerances=tolerances,
            solve=solve_cfg,
            cascade=cascade,
            theorem=theorem,
            oracle=oracle,
            sweep=sweep,
            description=str(data.get("description", "")),
        )
        _check_gates(cfg)
        return cfg


def _check_gates(cfg: ExperimentConfig) -> None:
    """Cross-section rules that make a config runnable, not just well-formed."""
    grid = cfg.grid
    if cfg.checks and cfg.envelope.p >= grid.dimension:
        raise ConfigError(
            f"the truncation machinery needs p < N; got p={cfg.envelope.p}, "
            f"N={grid.dimension} with checks enabled"
        )
    for name in cfg.checks:
        window = _WINDOWS.get(name)
        if window is None:
            continue
        t_lo, t_hi, radius = window
        if grid.t_start > t_lo + 1e-9 or grid.t_end < t_hi - 1e-9:
            raise ConfigError(
                f"check {name!r} needs the time range [{t_lo}, {t_hi}]; "
                f"grid has [{grid.t_start}, {grid.t_end}]"
            )
        if grid.half_width < radius + 2.0 * grid.cell_width:
            raise ConfigError(
                f"check {name!r} needs two cells of padding around the "
                f"radius-{radius} ball; box half-width is {grid.half_width}"
            )
    if "theorem" in cfg.checks and cfg.theorem.delta_time is not None:
        if not grid.t_start < cfg.theorem.delta_time <= grid.t_end:
            raise ConfigError(
                f"theorem delta_time {cfg.theorem.delta_time} outside "
                f"({grid.t_start}, {grid.t_end}]"
            )
    if "cascade" in cfg.checks:
        t0 = cfg.cascade.base_time
        if t0 is not None and not grid.t_start < t0 <= grid.t_end:
            raise ConfigError(
                f"cascade base_time {t0} outside ({grid.t_start}, {grid.t_end}]"
            )
        x0 = cfg.cascade.base_point
        if x0 is not None:
            if len(x0) != grid.dimension:
                raise ConfigError(
                    f"cascade base_point needs {grid.dimension} coordinates"
                )
            if max(abs(c) for c in x0) >= grid.half_width - 2.0 * grid.cell_width:
                raise ConfigError(
                    "cascade base_point sits within two cells of the boundary"
                )
    if cfg.sweep is not None and cfg.sweep.parameter == "eta":
        if cfg.hamiltonian.kind != "rough-coefficient":
            raise ConfigError(
                "sweeping 'eta' needs a rough-coefficient hamiltonian"
            )


def parse_config(path: str | Path) -> ExperimentConfig:
    """Load and validate a config file; unknown keys are rejected by name."""
    p = Path(path)
    if not p.exists():
        bundled = _bundled_path(str(path))
        if bundled is None:
            raise ConfigError(
                f"config not found: {path} is neither a file nor a "
                "bundled scenario"
            )
        p = bundled
    try:
        with open(p) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{p}: invalid JSON at line {err.lineno}: {err.msg}") \
            from None
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be an object")
    return ExperimentConfig.from_json_dict(data)


def _bundled_path(name: str) -> Path | None:
    stem = name[:-5] if name.endswith(".json") else name
    base = resources.files("hjreg") / "scenarios" / f"{stem}.json"
    try:
        if base.is_file():
            return Path(str(base))
    except (OSError, TypeError):
        return None
    return None


def bundled_scenarios() -> tuple[str, ...]:
    """Names of the scenario configs shipped with the package."""
    base = resources.files("hjreg") / "scenarios"
    names = [entry.name[:-5] for entry in base.iterdir()
             if entry.name.endswith(".json")]
    return tuple(sorted(names))


def scenario_path(name: str) -> Path:
    p = _bundled_path(name)
    if p is None:
        raise ConfigError(
            f"no bundled scenario {name!r}; have {', '.join(bundled_scenarios())}"
        )
    return p


def _json_safe(obj):
    """Recursively coerce to JSON-serializable values; non-finite floats -> None."""
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


@dataclass(frozen=True)
class RunReport:
    """Everything one run produced, minus the field data itself."""

    version: str
    scenario: str
    status: str
    config: dict
    chain: dict | None
    chain_search: tuple[dict, ...] | None
    checks: tuple[dict, ...]
    artifacts: tuple[str, ...]
    error: dict | None
    timings: dict

    def to_json_dict(self, include_timings: bool = True) -> dict:
        out = {
            "version": self.version,
            "scenario": self.scenario,
            "status": self.status,
            "config": self.config,
            "chain": self.chain,
            "chain_search": (None if self.chain_search is None
                             else list(self.chain_search)),
            "checks": list(self.checks),
            "artifacts": list(self.artifacts),
            "error": self.error,
        }
        if include_timings:
            out["timings"] = dict(self.timings)
        return _json_safe(out)

    def stable_bytes(self) -> bytes:
        """Report bytes with the timings block dropped; identical across reruns."""
        return json.dumps(
            self.to_json_dict(include_timings=False),
            sort_keys=True,
            separators=(",", ":"),
        ).encode()


@dataclass(frozen=True)
class EnsembleReport:
    """Member reports merged in index order plus refutation bookkeeping."""

    version: str
    scenario: str
    status: str
    config: dict
    count: int
    seed: int
    member_seeds: tuple[int, ...]
    counts: dict
    chain_search: tuple[dict, ...] | None
    members: tuple[dict, ...]
    artifacts: tuple[str, ...]
    timings: dict

    def to_json_dict(self, include_timings: bool = True) -> dict:
        out = {
            "version": self.version,
            "scenario": self.scenario,
            "status": self.status,
            "config": self.config,
            "count": self.count,
            "seed": self.seed,
            "member_seeds": list(self.member_seeds),
            "counts": dict(self.counts),
            "chain_search": (None if self.chain_search is None
                             else list(self.chain_search)),
            "members": list(self.members),
            "artifacts": list(self.artifacts),
        }
        if include_timings:
            out["timings"] = dict(self.timings)
        return _json_safe(out)

    def stable_bytes(self) -> bytes:
        return json.dumps(
            self.to_json_dict(include_timings=False),
            sort_keys=True,
            separators=(",", ":"),
        ).encode()


def _default_delta(cfg: ExperimentConfig) -> float:
    if "delta" in cfg.tolerances:
        return cfg.tolerances["delta"]
    eps0 = fast_convergence_threshold(
        _D_REFERENCE, cfg.envelope.p / cfg.grid.dimension
    )
    return delta_constant(eps0, cfg.envelope.lam)


def _needs_chain(cfg: ExperimentConfig) -> bool:
    return any(
        c in cfg.checks
        for c in ("lemma2", "osc_above", "osc_below", "cascade", "theorem")
    )


def _check_lemma1(cfg: ExperimentConfig, traj, chain) -> tuple[str, dict]:
    delta = _default_delta(cfg)
    verdict = lemma_one_check(
        traj.field, cfg.envelope, delta,
        conclusion_tol=cfg.tolerances.get("conclusion"),
    )
    payload = verdict.to_json_dict()
    payload["delta"] = delta
    try:
        ladder = energy_ladder(traj.field, 8, cfg.envelope)
        fit = recurrence_fit(ladder, cfg.grid.dimension)
        payload["recurrence"] = {
            "d_fit": fit.d_fit,
            "d_reference": _D_REFERENCE,
            "all_zero": fit.all_zero,
        }
    except ValueError:
        # ladder windows may not fit inside the configured grid; the check
        # itself already passed coverage gates, so just skip the extras
        pass
    return verdict.status, payload


def _check_lemma2(cfg: ExperimentConfig, traj, chain) -> tuple[str, dict]:
    delta = _default_delta(cfg)
    verdict = lemma_two_check(
        traj.field, cfg.envelope, chain.middle_threshold, delta,
        residual_tol=cfg.tolerances.get("residual"),
    )
    payload = verdict.to_json_dict()
    payload["delta"] = delta
    return verdict.status, payload


def _check_osc_above(cfg: ExperimentConfig, traj, chain) -> tuple[str, dict]:
    verdict = oscillation_above_check(
        traj.field, chain,
        residual_tol=cfg.tolerances.get("residual"),
        conclusion_tol=cfg.tolerances.get("conclusion"),
    )
    return verdict.status, verdict.to_json_dict()


def _check_osc_below(cfg: ExperimentConfig, traj, chain) -> tuple[str, dict]:
    verdict = oscillation_below_check(
        traj.field, chain,
        residual_tol=cfg.tolerances.get("residual"),
        conclusion_tol=cfg.tolerances.get("conclusion"),
    )
    return verdict.status, verdict.to_json_dict()


def _check_cascade(
    cfg: ExperimentConfig,
    traj,
    chain: ConstantChain,
    hamiltonian: HamiltonianSpec,
    run_dir: Path | None,
    artifacts: list[str],
    label: str,
) -> tuple[str, dict]:
    opts = cfg.cascade
    spec = traj.spec
    u, gauged, gamma = gauge_to_window(traj.field, cfg.envelope)
    h_eff = None
    if opts.mode == "resolve":
        h_eff = (
            TransformedHamiltonian(base=hamiltonian, const=-cfg.envelope.lam)
            if gauged
            else hamiltonian
        )
    working = GridSpec(
        dimension=spec.dimension,
        half_width=1.25,
        cells_per_axis=opts.working_cells,
        t_start=-4.0,
        t_end=0.0,
        dt=4.0 / opts.working_slices,
    )
    t0 = spec.t_end if opts.base_time is None else opts.base_time
    x0 = opts.base_point or (0.0,) * spec.dimension
    w, h_w, tau, rho = base_point_window(u, chain, t0, x0, gamma, working, h_eff)
    aborted = None
    try:
        records = zoom_cascade(
            w, chain, opts.levels, mode=opts.mode,
            hamiltonian=h_w, solve_config=cfg.solve,
        )
    except CascadeError as err:
        records = err.records
        aborted = str(err)
    estimate = holder_estimate(records, chain)
    payload = {
        "base_time": t0,
        "base_point": list(x0),
        "gauged": gauged,
        "gamma": gamma,
        "tau": tau,
        "rho": rho,
        "mode": opts.mode,
        "records": [r.to_json_dict() for r in records],
        "estimate": estimate.to_json_dict(),
        "aborted": aborted,
    }
    if run_dir is not None:
        out = run_dir / "cascades" / f"base{label}.csv"
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(records_to_csv(records))
        artifacts.append(str(out.relative_to(run_dir)))
    if aborted is not None:
        return "error", payload
    if any(not r.satisfied for r in records):
        return "refuted", payload
    return "pass", payload


def _check_theorem(
    cfg: ExperimentConfig,
    traj,
    chain: ConstantChain,
    hamiltonian: HamiltonianSpec,
) -> tuple[str, dict]:
    opts = cfg.theorem
    spec = traj.spec
    delta_time = opts.delta_time
    if delta_time is None:
        delta_time = spec.t_start + 0.5 * (spec.t_end - spec.t_start)
    report = theorem_check(
        traj,
        delta_time,
        chain,
        cfg.envelope,
        points_per_axis=opts.points_per_axis,
        levels=opts.levels,
        mode=opts.mode,
        hamiltonian=hamiltonian if opts.mode == "resolve" else None,
        working_cells=opts.working_cells,
        working_slices=opts.working_slices,
        solve_config=cfg.solve,
    )
    refuted = report.n_unsatisfied > 0 or (
        math.isfinite(report.alpha_min) and report.alpha_min < report.alpha_theory
    )
    return ("refuted" if refuted else "pass"), report.to_json_dict()


def _oracle_outcome(cfg: ExperimentConfig) -> tuple[str, dict]:
    opts = cfg.oracle
    assert opts is not None
    spec = cfg.grid
    init = cfg.initial_data
    fn = make_initial_function(spec, init.name, init.parameters, init.seed)
    t_cmp = spec.t_end if opts.time is None else opts.time
    resolutions: list[int] = []
    widths: list[float] = []
    errors: list[float] = []
    for level in range(opts.refinements + 1):
        factor = 2**level
        grid_l = replace(
            spec,
            cells_per_axis=spec.cells_per_axis * factor,
            dt=snap_dt(spec.t_start, spec.t_end, spec.dt / factor),
        )
        traj = solve(grid_l, cfg.hamiltonian, fn, cfg.solve)
        times = grid_l.times()
        ti = int(np.argmin(np.abs(times - t_cmp)))
        elapsed = float(times[ti] - grid_l.t_start)
        centers = grid_l.centers().reshape(-1, grid_l.dimension)
        inner = np.max(np.abs(centers), axis=1) <= opts.window * grid_l.half_width
        pts = centers[inner]
        got = traj.field.values[ti].reshape(-1)[inner]
        want = np.array(
            [hopf_lax(fn, elapsed, pt, cfg.hamiltonian.p) for pt in pts]
        )
        resolutions.append(grid_l.cells_per_axis)
        widths.append(grid_l.cell_width)
        errors.append(float(np.abs(got - want).max()))
    orders = [
        math.log2(errors[i] / errors[i + 1]) if errors[i + 1] > 0.0 else math.inf
        for i in range(len(errors) - 1)
    ]
    monotone = all(b < a for a, b in zip(errors, errors[1:]))
    ok = (
        monotone
        and errors[-1] <= opts.max_error
        and all(o >= opts.min_order for o in orders)
    )
    payload = {
        "time": t_cmp,
        "window": opts.window,
        "resolutions": resolutions,
        "cell_widths": widths,
        "sup_errors": errors,
        "orders": orders,
        "monotone": monotone,
        "max_error": opts.max_error,
        "min_order": opts.min_order,
    }
    return ("pass" if ok else "refuted"), payload


def _coercivity_outcome(
    cfg: ExperimentConfig, hamiltonian: HamiltonianSpec
) -> tuple[str, dict]:
    """Sample the declared envelope of a (possibly swept) Hamiltonian."""
    spec = cfg.grid
    env = hamiltonian.declared_envelope()
    times = np.linspace(spec.t_start, spec.t_end, 5)
    centers = spec.centers().reshape(-1, spec.dimension)
    stride = max(1, len(centers) // 64)
    points = centers[::stride]
    mags = [0.0, 0.25, 1.0, 4.0]
    axes = np.eye(spec.dimension)
    diag = np.full(spec.dimension, 1.0 / math.sqrt(spec.dimension))
    dirs = np.vstack([axes, diag])
    grads = np.concatenate([m * dirs for m in mags])
    report = coercivity_check(hamiltonian, env, [float(t) for t in times],
                              points, grads)
    payload = {
        "declared_lambda": env.lam,
        "n_samples": report.n_samples,
        "min_lower_slack": report.min_lower_slack,
        "min_upper_slack": report.min_upper_slack,
        "violations": list(report.violations),
    }
    return ("precondition-violated" if report.violations else "pass"), payload


_CHECK_TABLE = {
    "lemma1": _check_lemma1,
    "lemma2": _check_lemma2,
    "osc_above": _check_osc_above,
    "osc_below": _check_osc_below,
}


def _aggregate(statuses: list[str]) -> str:
    if any(s == "refuted" for s in statuses):
        return "refuted"
    if any(s == "error" for s in statuses):
        return "error"
    quiet = {"vacuous", "precondition-violated"}
    if statuses and all(s in quiet for s in statuses):
        return "vacuous"
    return "pass"


def _write_snapshots(traj, run_dir: Path, artifacts: list[str]) -> None:
    spec = traj.spec
    snap_dir = run_dir / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)
    first = field_from_values(
        replace(spec, t_end=spec.t_start + spec.dt), traj.field.values[:2]
    )
    last = field_from_values(
        replace(spec, t_start=spec.t_end - spec.dt), traj.field.values[-2:]
    )
    for name, snap in (("first_steps", first), ("last_steps", last)):
        csv_path, json_path = save_snapshot(snap, snap_dir / name)
        artifacts.append(str(csv_path.relative_to(run_dir)))
        artifacts.append(str(json_path.relative_to(run_dir)))


def _execute(
    cfg: ExperimentConfig,
    run_dir: Path | None,
    chain_search: tuple[dict, ...] | None = None,
) -> RunReport:
    """Solve, check, and report one config; ``run_dir=None`` skips artifacts."""
    timings: dict[str, float] = {}
    checks_out: list[dict] = []
    artifacts: list[str] = []
    statuses: list[str] = []
    error_info = None
    chain = None
    chain_dict = None

    def finish(status: str) -> RunReport:
        report = RunReport(
            version=SCHEMA_VERSION,
            scenario=cfg.scenario,
            status=status,
            config=cfg.to_json_dict(),
            chain=chain_dict,
            chain_search=chain_search,
            checks=tuple(checks_out),
            artifacts=tuple(artifacts),
            error=error_info,
            timings=timings,
        )
        if run_dir is not None:
            run_dir.mkdir(parents=True, exist_ok=True)
            with open(run_dir / "report.json", "w") as fh:
                json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
                fh.write("\n")
        return report

    begin = time.perf_counter()
    if _needs_chain(cfg):
        try:
            chain = build_constant_chain(
                cfg.grid.dimension,
                cfg.envelope.p,
                2.0 * cfg.envelope.lam,
                float(cfg.chain.alpha),  # type: ignore[arg-type]
            )
        except (ValueError, ChainConstructionError) as err:
            error_info = {"stage": "chain", "message": str(err)}
            return finish("error")
        chain_dict = chain.to_json_dict()
        if run_dir is not None:
            run_dir.mkdir(parents=True, exist_ok=True)
            with open(run_dir / "chain.json", "w") as fh:
                json.dump(_json_safe(chain_dict), fh, indent=2, sort_keys=True)
                fh.write("\n")
            artifacts.append("chain.json")
    timings["chain"] = time.perf_counter() - begin

    init = cfg.initial_data
    try:
        fn = make_initial_function(cfg.grid, init.name, init.parameters, init.seed)
    except (ValueError, ChainConstructionError) as err:
        error_info = {"stage": "initial_data", "message": str(err)}
        return finish("error")

    if cfg.sweep is not None:
        attr = _SWEEPABLE[cfg.sweep.parameter]
        variants = [
            (f"[{cfg.sweep.parameter}={v:g}]",
             replace(cfg.hamiltonian, **{attr: v}))
            for v in cfg.sweep.values
        ]
    else:
        variants = [("", cfg.hamiltonian)]

    for label, hamiltonian in variants:
        if cfg.sweep is not None:
            t0 = time.perf_counter()
            status, payload = _coercivity_outcome(cfg, hamiltonian)
            checks_out.append(
                {"check": f"coercivity{label}", "status": status, **payload}
            )
            statuses.append(status)
            timings[f"coercivity{label}"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        try:
            traj = solve(cfg.grid, hamiltonian, fn, cfg.solve)
        except SolverError as err:
            error_info = {
                "stage": f"solve{label}",
                "message": str(err),
                "step_index": err.step_index,
            }
            timings[f"solve{label}"] = time.perf_counter() - t0
            return finish("error")
        timings[f"solve{label}"] = time.perf_counter() - t0

        for name in cfg.checks:
            t0 = time.perf_counter()
            try:
                if name == "cascade":
                    status, payload = _check_cascade(
                        cfg, traj, chain, hamiltonian, run_dir, artifacts, label
                    )
                elif name == "theorem":
                    status, payload = _check_theorem(cfg, traj, chain, hamiltonian)
                else:
                    status, payload = _CHECK_TABLE[name](cfg, traj, chain)
            except (ValueError, RuntimeError) as err:
                status, payload = "error", {"message": str(err)}
            checks_out.append({"check": f"{name}{label}", "status": status,
                               **payload})
            statuses.append(status)
            timings[f"{name}{label}"] = time.perf_counter() - t0

        if cfg.sweep is None and run_dir is not None:
            _write_snapshots(traj, run_dir, artifacts)

    if cfg.oracle is not None:
        t0 = time.perf_counter()
        try:
            status, payload = _oracle_outcome(cfg)
        except SolverError as err:
            error_info = {
                "stage": "oracle",
                "message": str(err),
                "step_index": err.step_index,
            }
            timings["oracle"] = time.perf_counter() - t0
            return finish("error")
        checks_out.append({"check": "oracle", "status": status, **payload})
        statuses.append(status)
        timings["oracle"] = time.perf_counter() - t0

    timings["total"] = time.perf_counter() - begin
    return finish(_aggregate(statuses))


def _base_dir(cfg: ExperimentConfig, out_dir: str | Path | None) -> Path:
    if out_dir is not None:
        return Path(out_dir)
    env_dir = os.environ.get("HJREG_OUT_DIR")
    if env_dir:
        return Path(env_dir)
    return Path(cfg.output_dir or "runs")


def _with_overrides(
    cfg: ExperimentConfig, seed: int | None, resolution: int | None
) -> ExperimentConfig:
    if seed is not None:
        cfg = replace(cfg, initial_data=replace(cfg.initial_data, seed=int(seed)))
    if resolution is not None:
        cells = int(resolution)
        scale = cfg.grid.cells_per_axis / cells
        dt = snap_dt(cfg.grid.t_start, cfg.grid.t_end, cfg.grid.dt * scale)
        cfg = replace(cfg, grid=replace(cfg.grid, cells_per_axis=cells, dt=dt))
    return cfg


def _search_alpha(
    cfg: ExperimentConfig, runner
) -> tuple[float, tuple[dict, ...]]:
    """Largest candidate threshold that survives without a refutation."""
    trials: list[dict] = []
    chosen = cfg.chain.candidates[-1]
    for alpha in cfg.chain.candidates:
        trial_cfg = replace(
            cfg, chain=ChainSettings(alpha=alpha, mode="fixed")
        )
        status = runner(trial_cfg)
        trials.append({"alpha": alpha, "status": status})
        if status != "refuted":
            chosen = alpha
            break
    return chosen, tuple(trials)


def run(
    config: ExperimentConfig,
    out_dir: str | Path | None = None,
    seed: int | None = None,
    resolution: int | None = None,
) -> RunReport:
    """Execute one scenario run under a deterministic run-stamped directory."""
    cfg = _with_overrides(config, seed, resolution)
    run_dir = _base_dir(cfg, out_dir) / f"{cfg.scenario}-seed{cfg.initial_data.seed}"
    search = None
    if cfg.chain.mode == "empirical":
        alpha, search = _search_alpha(
            cfg, lambda trial: _execute(trial, None).status
        )
        cfg = replace(cfg, chain=ChainSettings(alpha=alpha, mode="fixed"))
    return _execute(cfg, run_dir, chain_search=search)


def _member_task(payload: tuple[ExperimentConfig, str | None]) -> RunReport:
    cfg, member_dir = payload
    return _execute(cfg, None if member_dir is None else Path(member_dir))


def _run_members(
    cfg: ExperimentConfig,
    member_seeds: list[int],
    member_dirs: list[str | None],
    workers: int,
) -> list[RunReport]:
    jobs = [
        (replace(cfg, initial_data=replace(cfg.initial_data, seed=s)), d)
        for s, d in zip(member_seeds, member_dirs)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_member_task, jobs))
    return [_member_task(job) for job in jobs]


def ensemble(
    config: ExperimentConfig,
    count: int,
    seed: int,
    out_dir: str | Path | None = None,
    workers: int | None = None,
) -> EnsembleReport:
    """Run ``count`` seeded draws of the scenario and merge their reports.

    Member seeds are spawned from the master seed, members run in a worker
    pool (``HJREG_WORKERS`` or the ``workers`` argument; serial by
    default), and reports are merged in member-index order so the output
    does not depend on scheduling.
    """
    if count < 1:
        raise ConfigError(f"ensemble needs count >= 1, got {count}")
    if workers is None:
        workers = int(os.environ.get("HJREG_WORKERS", "1"))
    begin = time.perf_counter()
    children = np.random.SeedSequence(seed).spawn(count)
    member_seeds = [int(c.generate_state(1, np.uint64)[0]) for c in children]

    run_dir = _base_dir(config, out_dir) / (
        f"{config.scenario}-ensemble-seed{seed}-n{count}"
    )
    cfg = config
    search = None
    if cfg.chain.mode == "empirical":

        def trial_status(trial_cfg: ExperimentConfig) -> str:
            reports = _run_members(
                trial_cfg, member_seeds, [None] * count, workers
            )
            return _aggregate([r.status for r in reports])

        alpha, search = _search_alpha(cfg, trial_status)
        cfg = replace(cfg, chain=ChainSettings(alpha=alpha, mode="fixed"))

    member_dirs = [str(run_dir / "members" / f"m{i:03d}") for i in range(count)]
    reports = _run_members(cfg, member_seeds, member_dirs, workers)

    counts = {"pass": 0, "vacuous": 0, "refuted": 0, "error": 0}
    for rep in reports:
        counts[rep.status] += 1
    status = _aggregate([r.status for r in reports])
    artifacts = tuple(
        str(Path(d).relative_to(run_dir) / "report.json") for d in member_dirs
    )
    report = EnsembleReport(
        version=SCHEMA_VERSION,
        scenario=cfg.scenario,
        status=status,
        config=cfg.to_json_dict(),
        count=count,
        seed=seed,
        member_seeds=tuple(member_seeds),
        counts=counts,
        chain_search=search,
        members=tuple(r.to_json_dict(include_timings=False) for r in reports),
        artifacts=artifacts,
        timings={"total": time.perf_counter() - begin},
    )
    run_dir.mkdir(parents=True, exist_ok=True)
    with open(run_dir / "report.json", "w") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report
