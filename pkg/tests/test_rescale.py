"""Zoom cascade: first-stage blow-up, recentering, zooms, and the regularity scan."""

import math

import numpy as np
import pytest

from hjreg.grid import Cylinder, GridSpec, make_field, one_cell_oscillation
from hjreg.hamiltonians import HamiltonianSpec
from hjreg.rescale import (
    CascadeError,
    EnvelopeViolation,
    OscillationRecord,
    base_point_window,
    gauge_to_window,
    holder_estimate,
    initial_rescale,
    records_to_csv,
    resample,
    select_recenter,
    theorem_check,
    zoom_cascade,
    zoom_step,
)
from hjreg.solver import SolveConfig, solve

from conftest import const_field, coordinate_field, noise_field

POWER_LAW = HamiltonianSpec(kind="power-law", p=1.5)


@pytest.fixture(scope="module")
def window():
    """Cascade-shaped grid: [-4, 0] x box(1.25)."""
    return GridSpec(dimension=2, half_width=1.25, cells_per_axis=24,
                    t_start=-4.0, t_end=0.0, dt=0.125)


class TestResample:
    def test_identity(self, window, rng):
        f = noise_field(window, rng)
        out = resample(f, window)
        np.testing.assert_allclose(out.values, f.values, rtol=0, atol=1e-12)

    def test_linear_map_is_exact(self, window):
        f = coordinate_field(window)
        out = resample(f, window, space_scale=0.5)
        expected = 0.5 * window.centers()[..., 0]
        np.testing.assert_allclose(out.values[0], expected, rtol=1e-12, atol=1e-15)

    def test_reads_outside_the_hull_clamp_to_the_edge(self, window):
        f = coordinate_field(window)
        out = resample(f, window, space_scale=2.0)
        edge = window.half_width - window.cell_width / 2.0
        expected = np.clip(2.0 * window.centers()[..., 0], -edge, edge)
        np.testing.assert_allclose(out.values[0], expected, rtol=1e-12, atol=1e-15)


class TestInitialRescale:
    def test_constant_survives(self, window, chain_unit):
        out = initial_rescale(const_field(window, 0.7), chain_unit)
        np.testing.assert_allclose(out.values, 0.7, rtol=0, atol=1e-12)

    def test_default_target_is_the_exact_blow_up(self, window, chain_unit):
        out = initial_rescale(coordinate_field(window), chain_unit)
        eps = chain_unit.prezoom_scale
        assert out.spec.half_width == window.half_width / eps
        assert out.spec.t_start == pytest.approx(-4.0 / eps, rel=1e-12)
        assert out.spec.t_end == 0.0
        # Every output node pulls back onto a source node, so the linear
        # profile resamples without interpolation error.
        expected = eps * out.spec.centers()[..., 0]
        np.testing.assert_allclose(out.values[0], expected, rtol=1e-12)

    def test_time_axis_stretches(self, window, chain_unit):
        f = make_field(window, lambda t, x: t + 0.0 * x[..., 0])
        out = initial_rescale(f, chain_unit)
        # Values at output time T come from source time T * 2^-14.
        scale = chain_unit.prezoom_scale ** chain_unit.prezoom_time_exponent
        times = out.spec.times()
        np.testing.assert_allclose(out.values[:, 0, 0], scale * times,
                                   rtol=1e-9, atol=1e-12)

    def test_working_grid_target(self, window, chain_unit):
        out = initial_rescale(coordinate_field(window), chain_unit,
                              out_spec=window)
        eps = chain_unit.prezoom_scale
        # Queries land between source nodes here, so allow interpolation
        # round-off.
        np.testing.assert_allclose(out.values[0],
                                   eps * window.centers()[..., 0],
                                   rtol=1e-9, atol=1e-16)

    def test_requires_canonical_time_window(self, chain_unit):
        off = GridSpec(dimension=2, half_width=1.25, cells_per_axis=24,
                       t_start=0.0, t_end=4.0, dt=0.125)
        with pytest.raises(ValueError, match="time window"):
            initial_rescale(const_field(off, 0.0), chain_unit)

    def test_requires_room_around_unit_ball(self, chain_unit):
        thin = GridSpec(dimension=2, half_width=1.0, cells_per_axis=24,
                        t_start=-4.0, t_end=0.0, dt=0.125)
        with pytest.raises(ValueError, match="half width"):
            initial_rescale(const_field(thin, 0.0), chain_unit)

    def test_dimension_mismatch(self, window, chain_unit):
        line = GridSpec(dimension=1, half_width=1.25, cells_per_axis=24,
                        t_start=-4.0, t_end=0.0, dt=0.125)
        with pytest.raises(ValueError, match="dimension"):
            initial_rescale(const_field(line, 0.0), chain_unit)


class TestSelectRecenter:
    def test_zero_field(self, window, chain_unit):
        d, achieved = select_recenter(const_field(window, 0.0), chain_unit)
        assert d == 0.0
        assert achieved == 0.0

    def test_clamps_to_half_shrink(self, window, chain_unit):
        lam_tilde = chain_unit.shrink_below
        d_low, _ = select_recenter(const_field(window, -lam_tilde), chain_unit)
        d_high, _ = select_recenter(const_field(window, lam_tilde), chain_unit)
        assert d_low == -lam_tilde / 2.0
        assert d_high == lam_tilde / 2.0

    def test_achieved_sup_reports_residual_range(self, window, chain_unit):
        f = const_field(window, 0.25)
        d, achieved = select_recenter(f, chain_unit)
        assert achieved == pytest.approx(0.25 - d, rel=1e-12)


class TestZoomStep:
    def test_recentering_constant_zeroes_out(self, window, chain_unit):
        d = chain_unit.shrink_below / 4.0
        out = zoom_step(const_field(window, d), d, chain_unit)
        np.testing.assert_allclose(out.values, 0.0, rtol=0, atol=1e-18)

    def test_ceiling_is_a_fixed_point_after_recentering(self, window, chain_unit):
        f = const_field(window, 2.0)
        d, _ = select_recenter(f, chain_unit)
        out = zoom_step(f, d, chain_unit)
        np.testing.assert_allclose(out.values, 2.0, rtol=8e-16)

    def test_linear_profile_maps_linearly(self, window, chain_unit):
        beta = 0.5
        f = make_field(window, lambda t, x: beta * x[..., 0])
        out = zoom_step(f, 0.0, chain_unit)
        scale = 4.0 / (4.0 - chain_unit.shrink_below)
        expected = scale * beta * chain_unit.zoom_ratio * window.centers()[..., 0]
        np.testing.assert_allclose(out.values[0], expected, rtol=1e-12)

    def test_growth_envelope_is_enforced(self, window, chain_unit):
        with pytest.raises(EnvelopeViolation) as exc:
            zoom_step(const_field(window, 3.0), 0.0, chain_unit)
        assert "value" in exc.value.witness

    def test_bounded_input_stays_bounded(self, window, chain_unit, rng):
        f = noise_field(window, rng)
        capped = f.with_values(np.clip(f.values, -1.9, 1.9))
        out = zoom_step(capped, 0.0, chain_unit)
        mask = np.sum(window.centers() ** 2, axis=-1) < 0.25
        assert np.abs(out.values[-9:, mask]).max() <= 2.0 + one_cell_oscillation(capped)


class TestZoomCascade:
    def test_zero_field_satisfies_every_level(self, window, chain_unit):
        records = zoom_cascade(const_field(window, 0.0), chain_unit, 3,
                               mode="interpolate")
        assert len(records) == 4
        theta = chain_unit.decay_ratio
        for m, r in enumerate(records):
            assert r.level == m
            assert r.osc_measured == 0.0
            assert r.osc_bound == pytest.approx(4.0 * theta ** (m + 1), rel=1e-12)
            assert r.satisfied
            assert r.recenter == 0.0

    def test_bound_ratio_is_the_decay_constant(self, window, chain_unit):
        records = zoom_cascade(const_field(window, 0.0), chain_unit, 2,
                               mode="interpolate")
        for a, b in zip(records, records[1:]):
            assert b.osc_bound / a.osc_bound == pytest.approx(
                chain_unit.decay_ratio, rel=1e-12
            )

    def test_single_record_run(self, window, chain_unit):
        records = zoom_cascade(const_field(window, 0.0), chain_unit, 0,
                               mode="interpolate")
        assert len(records) == 1
        assert records[0].osc_bound == pytest.approx(
            4.0 * chain_unit.decay_ratio, rel=1e-12
        )

    def test_window_geometry_shrinks(self, window, chain_unit):
        records = zoom_cascade(const_field(window, 0.0), chain_unit, 2,
                               mode="interpolate")
        a = chain_unit.zoom_ratio ** chain_unit.zoom_time_exponent
        for m, r in enumerate(records):
            assert r.window.radius == pytest.approx(
                0.5 * chain_unit.zoom_ratio**m, rel=1e-12
            )
            assert -r.window.t_lo == pytest.approx(a**m, rel=1e-12)

    def test_smooth_field_stays_satisfied(self, window, chain_unit):
        f = make_field(
            window,
            lambda t, x: 0.5 * np.cos(np.pi * x[..., 0] / 2.5)
            * np.cos(np.pi * x[..., 1] / 2.5),
        )
        records = zoom_cascade(f, chain_unit, 2, mode="interpolate")
        assert all(r.satisfied for r in records)
        oscs = [r.osc_measured for r in records if r.osc_measured > 0]
        assert oscs == sorted(oscs, reverse=True)

    def test_scale_consistency_across_resolutions(self, chain_unit):
        def profile(t, x):
            return 0.5 * np.cos(np.pi * x[..., 0] / 2.5) * np.cos(
                np.pi * x[..., 1] / 2.5)

        coarse_spec = GridSpec(dimension=2, half_width=1.25, cells_per_axis=24,
                               t_start=-4.0, t_end=0.0, dt=0.125)
        fine_spec = GridSpec(dimension=2, half_width=1.25, cells_per_axis=48,
                             t_start=-4.0, t_end=0.0, dt=0.0625)
        coarse = make_field(coarse_spec, profile)
        fine = make_field(fine_spec, profile)
        rec_c = zoom_cascade(coarse, chain_unit, 1, mode="interpolate")
        rec_f = zoom_cascade(fine, chain_unit, 1, mode="interpolate")
        slack = 3.0 * one_cell_oscillation(coarse)
        for a, b in zip(rec_c, rec_f):
            assert abs(a.osc_measured - b.osc_measured) <= slack

    def test_unbounded_input_rejected(self, window, chain_unit):
        with pytest.raises(ValueError, match="bounded by 2"):
            zoom_cascade(const_field(window, 2.5), chain_unit, 1,
                         mode="interpolate")

    def test_resolve_mode_needs_hamiltonian(self, window, chain_unit):
        with pytest.raises(ValueError, match="Hamiltonian"):
            zoom_cascade(const_field(window, 0.0), chain_unit, 1)

    def test_step_failure_carries_completed_records(self, window, chain_unit):
        f = make_field(window, lambda t, x: 0.3 * np.sin(2.0 * x[..., 0]))
        bad_cfg = SolveConfig(sigma_mode="fixed", sigma_bound=1e-9)
        with pytest.raises(CascadeError) as exc:
            zoom_cascade(f, chain_unit, 2, mode="resolve",
                         hamiltonian=POWER_LAW, solve_config=bad_cfg)
        assert len(exc.value.records) >= 1
        assert exc.value.records[0].level == 0

    def test_records_csv_shape(self, window, chain_unit):
        records = zoom_cascade(const_field(window, 0.0), chain_unit, 1,
                               mode="interpolate")
        text = records_to_csv(records)
        lines = text.strip().split("\n")
        assert lines[0] == "m,radius,t_depth,osc_measured,osc_bound,d_m,satisfied"
        assert len(lines) == 3
        first = lines[1].split(",")
        assert first[0] == "0"
        assert float(first[1]) == 0.5
        assert first[-1] == "true"


def synthetic_records(exponent, chain, n=6, prefactor=1.0):
    records = []
    for m in range(n):
        r = 0.5 * chain.zoom_ratio**m
        records.append(
            OscillationRecord(
                level=m,
                window=Cylinder(-(0.5**m), 0.0, (0.0, 0.0), r),
                osc_measured=prefactor * r**exponent,
                osc_bound=4.0,
                recenter=0.0,
                satisfied=True,
                tolerance=0.0,
            )
        )
    return records


class TestHolderEstimate:
    def test_recovers_linear_modulus(self, chain_unit):
        est = holder_estimate(synthetic_records(1.0, chain_unit), chain_unit)
        assert not est.degenerate
        assert est.alpha_est == pytest.approx(1.0, abs=1e-6)
        assert est.c_est == pytest.approx(1.0, rel=1e-6)
        assert est.fit_residual < 1e-9

    def test_recovers_square_root_modulus(self, chain_unit):
        est = holder_estimate(synthetic_records(0.5, chain_unit), chain_unit)
        assert est.alpha_est == pytest.approx(0.5, abs=1e-6)

    def test_theory_exponent_is_tiny_but_positive(self, chain_unit):
        est = holder_estimate(synthetic_records(1.0, chain_unit), chain_unit)
        assert est.alpha_theory == chain_unit.holder_exponent
        assert 0.0 < est.alpha_theory < 1e-5

    def test_flat_records_are_degenerate(self, window, chain_unit):
        records = zoom_cascade(const_field(window, 0.0), chain_unit, 3,
                               mode="interpolate")
        est = holder_estimate(records, chain_unit)
        assert est.degenerate
        assert est.points_used == 0
        assert est.alpha_est == math.inf

    def test_noise_floor_filters_records(self, chain_unit):
        records = synthetic_records(1.0, chain_unit, n=4)
        noisy = records + [
            OscillationRecord(
                level=4,
                window=Cylinder(-0.0625, 0.0, (0.0, 0.0), 0.01),
                osc_measured=1e-9,
                osc_bound=4.0,
                recenter=0.0,
                satisfied=True,
                tolerance=1e-6,
            )
        ]
        est = holder_estimate(noisy, chain_unit)
        assert est.points_used == 4


class TestGaugeToWindow:
    def test_clean_solution_passes_through(self, box2):
        traj = solve(box2, POWER_LAW, lambda x: np.zeros(x.shape[:-1]))
        out, gauged, gamma = gauge_to_window(traj.field, POWER_LAW.declared_envelope())
        assert not gauged
        assert gamma == 1.0
        np.testing.assert_array_equal(out.values, traj.field.values)

    def test_fast_decay_gets_gauged_and_capped(self, box2, env_unit):
        f = make_field(box2, lambda t, x: -3.0 * t)
        out, gauged, gamma = gauge_to_window(f, env_unit)
        assert gauged
        assert gamma == pytest.approx(0.5, rel=1e-9)
        assert np.abs(gamma * out.values).max() <= 2.0 * (1.0 + 1e-12)


@pytest.fixture(scope="module")
def working():
    return GridSpec(dimension=2, half_width=1.25, cells_per_axis=16,
                    t_start=-4.0, t_end=0.0, dt=0.25)


class TestBasePointWindow:
    def test_constant_field_maps_to_scaled_constant(self, box2, chain_double,
                                                    working):
        f = const_field(box2, 1.5)
        w, h_w, tau, rho = base_point_window(f, chain_double, 0.0, (0.0, 0.0),
                                             1.0, working)
        assert h_w is None
        np.testing.assert_allclose(w.values, 1.5, rtol=0, atol=1e-12)
        assert tau > 0 and rho > 0

    def test_scaling_relation(self, box2, chain_double, working):
        gamma = 0.5
        f = const_field(box2, 1.0)
        _, _, tau, rho = base_point_window(f, chain_double, 0.5, (0.25, -0.25),
                                           gamma, working)
        assert (gamma * rho) ** chain_double.p == pytest.approx(
            gamma * tau, rel=1e-12
        )
        assert gamma * tau <= 1.0 + 1e-12

    def test_transformed_hamiltonian_comes_back(self, box2, chain_double,
                                                working):
        f = const_field(box2, 0.0)
        _, h_w, _, _ = base_point_window(f, chain_double, 0.0, (0.0, 0.0), 1.0,
                                         working, hamiltonian=POWER_LAW)
        assert h_w is not None
        assert h_w.p == POWER_LAW.p
        assert float(h_w.eval(0.0, np.zeros(2), np.zeros(2))) == 0.0

    def test_no_time_room_is_an_error(self, box2, chain_double, working):
        f = const_field(box2, 0.0)
        with pytest.raises(ValueError, match="time room"):
            base_point_window(f, chain_double, box2.t_start, (0.0, 0.0), 1.0,
                              working)

    def test_boundary_point_is_an_error(self, box2, chain_double, working):
        f = const_field(box2, 0.0)
        with pytest.raises(ValueError, match="boundary"):
            base_point_window(f, chain_double, 0.0, (1.2, 0.0), 1.0, working)


class TestTheoremCheck:
    def test_zero_solution_is_everywhere_degenerate(self, box2, chain_double,
                                                    env_unit):
        traj = solve(box2, POWER_LAW, lambda x: np.zeros(x.shape[:-1]))
        report = theorem_check(traj, 1.0, chain_double, env_unit,
                               points_per_axis=2, levels=2,
                               working_cells=16, working_slices=16)
        assert report.n_unsatisfied == 0
        assert report.max_quotient == 0.0
        assert report.n_degenerate == len(report.entries)
        assert len(report.entries) == 2 * 2**2

    def test_delta_time_bounds(self, box2, chain_double, env_unit):
        traj = solve(box2, POWER_LAW, lambda x: np.zeros(x.shape[:-1]))
        with pytest.raises(ValueError, match="delta_time"):
            theorem_check(traj, -3.0, chain_double, env_unit)

    def test_chain_envelope_coupling(self, box2, chain_unit, env_unit):
        traj = solve(box2, POWER_LAW, lambda x: np.zeros(x.shape[:-1]))
        with pytest.raises(ValueError, match="twice"):
            theorem_check(traj, 1.0, chain_unit, env_unit)

    def test_resolve_mode_needs_hamiltonian(self, box2, chain_double, env_unit):
        traj = solve(box2, POWER_LAW, lambda x: np.zeros(x.shape[:-1]))
        with pytest.raises(ValueError, match="Hamiltonian"):
            theorem_check(traj, 1.0, chain_double, env_unit, mode="resolve")
