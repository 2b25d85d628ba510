"""Tests for the adjoint wave operator and its inner products."""
import numpy as np
import pytest

from adjoint import (
    adjoint,
    adjoint_test,
    data_inner,
    data_norm,
    domain_inner,
    domain_norm,
    random_admissible_field,
    random_smooth_series,
    solve_adjoint,
    solve_backward_wave,
    solve_eta,
    trapezoid_weights,
)
from assembly import DimensionError, Material, assemble
from mesh import generate_disk_mesh
from wavesim import MeasurementSeries, NodalField, cfl_time_step


class TestInnerProducts:
    def test_trapezoid_weights(self):
        w = trapezoid_weights(5, 0.5)
        assert w.tolist() == [0.25, 0.5, 0.5, 0.5, 0.25]
        assert w.sum() == pytest.approx(2.0)

    def test_domain_norm_of_constant_is_mass(self, coarse_system):
        ones = np.ones(coarse_system.n_nodes)
        assert domain_norm(coarse_system, ones) ** 2 == pytest.approx(coarse_system.M_lumped.sum())

    def test_domain_inner_symmetric(self, coarse_system):
        rng = np.random.default_rng(0)
        u, v = rng.standard_normal((2, coarse_system.n_nodes))
        assert domain_inner(coarse_system, u, v) == pytest.approx(domain_inner(coarse_system, v, u))

    def test_data_norm_of_constant(self, coarse_system):
        series = MeasurementSeries(0.1, np.ones((21, coarse_system.n_boundary)))
        expected = 2.0 * coarse_system.mesh.perimeter
        assert data_norm(coarse_system, series) ** 2 == pytest.approx(expected)

    def test_data_inner_shape_mismatch(self, coarse_system):
        a = MeasurementSeries(0.1, np.ones((5, coarse_system.n_boundary)))
        b = MeasurementSeries(0.1, np.ones((6, coarse_system.n_boundary)))
        with pytest.raises(ValueError):
            data_inner(coarse_system, a, b)

    def test_data_inner_boundary_mismatch(self, coarse_system):
        a = MeasurementSeries(0.1, np.ones((5, 3)))
        with pytest.raises(DimensionError):
            data_inner(coarse_system, a, a)


class TestSolveEta:
    def test_zero_source(self, coarse_system):
        psi = MeasurementSeries(0.1, np.zeros((11, coarse_system.n_boundary)))
        eta = solve_eta(coarse_system, psi, 0.9, 1.0)
        assert eta.kind == "adjoint-source"
        assert np.all(eta.values == 0.0)

    def test_kappa_zero_without_correction_is_identity(self, coarse_system):
        rng = np.random.default_rng(1)
        psi = MeasurementSeries(0.1, rng.standard_normal((11, coarse_system.n_boundary)))
        eta = solve_eta(coarse_system, psi, 0.0, 1.0, terminal_correction=False)
        assert np.array_equal(eta.values, psi.values)

    def test_terminal_correction_vanishes_at_final_time(self, coarse_system):
        t = 0.05 * np.arange(41)
        theta = coarse_system.mesh.boundary_angles()
        psi = MeasurementSeries(0.05, np.outer(np.sin(2 * t), np.cos(theta)))
        eta = solve_eta(coarse_system, psi, 0.0, 1.0)
        assert np.max(np.abs(eta.values[-1])) <= 1e-12

    def test_affine_series_corrected_to_zero(self, coarse_system):
        t = 0.1 * np.arange(21)
        psi = MeasurementSeries(0.1, np.outer(3.0 - 2.0 * t, np.ones(coarse_system.n_boundary)))
        eta = solve_eta(coarse_system, psi, 0.0, 1.0)
        assert np.max(np.abs(eta.values)) <= 1e-10

    def test_kappa_term_vanishes_at_final_time(self, coarse_system):
        t = 0.05 * np.arange(41)
        theta = coarse_system.mesh.boundary_angles()
        psi = MeasurementSeries(0.05, np.outer(np.cos(t), np.cos(3 * theta)))
        plain = solve_eta(coarse_system, psi, 0.0, 1.0, terminal_correction=False)
        film = solve_eta(coarse_system, psi, 0.9, 1.0, terminal_correction=False)
        assert np.allclose(film.values[-1], plain.values[-1], atol=1e-12)
        assert not np.allclose(film.values[0], plain.values[0])

    def test_fourier_mode_closed_form(self):
        system = assemble(generate_disk_mesh(1.0, 0.05), Material())
        L = system.mesh.perimeter
        arc = np.concatenate([[0.0], np.cumsum(system.mesh.boundary_edge_lengths)[:-1]])
        mode = np.sin(2 * np.pi * 2 * arc / L)
        dt, T = 0.01, 1.0
        t = dt * np.arange(101)
        psi = MeasurementSeries(dt, np.outer((T - t) ** 2, mode))
        kappa, c_p = 0.9, 1.0
        eta = solve_eta(system, psi, kappa, c_p, terminal_correction=False)
        k2 = (2 * np.pi * 2 / L) ** 2
        expected = np.outer((T - t) ** 2 + kappa * c_p ** 2 * k2 * (T - t) ** 4 / 12, mode)
        assert np.max(np.abs(eta.values - expected)) / np.max(np.abs(expected)) < 1e-2


class TestAdjoint:
    def test_zero_data_gives_zero_field(self, coarse_system, coarse_dt):
        psi = MeasurementSeries(coarse_dt, np.zeros((41, coarse_system.n_boundary)))
        assert np.all(adjoint(coarse_system, psi).values == 0.0)

    def test_linearity(self, coarse_system, coarse_dt):
        psi = random_smooth_series(coarse_system, 2.0, coarse_dt, seed=3)
        once = adjoint(coarse_system, psi).values
        twice = adjoint(coarse_system, psi.with_values(2.0 * psi.values)).values
        assert np.linalg.norm(twice - 2.0 * once) <= 1e-12 * np.linalg.norm(twice)

    def test_grid_checks(self, coarse_system, coarse_dt):
        psi = random_smooth_series(coarse_system, 2.0, coarse_dt, seed=4)
        with pytest.raises(ValueError):
            adjoint(coarse_system, psi, dt=2 * coarse_dt)
        with pytest.raises(ValueError):
            adjoint(coarse_system, psi, T=3.0)

    def test_series_defines_time_grid(self, coarse_system, coarse_dt):
        psi = random_smooth_series(coarse_system, 2.0, coarse_dt, seed=4)
        checked = adjoint(coarse_system, psi, T=psi.duration, dt=psi.dt).values
        assert np.array_equal(checked, adjoint(coarse_system, psi).values)

    def test_backward_wave_requires_adjoint_source(self, coarse_system):
        psi = MeasurementSeries(0.1, np.zeros((5, coarse_system.n_boundary)))
        with pytest.raises(ValueError):
            solve_backward_wave(coarse_system, psi)

    def test_solve_adjoint_returns_eta(self, coarse_system, coarse_dt):
        psi = random_smooth_series(coarse_system, 1.0, coarse_dt, seed=5)
        result = solve_adjoint(coarse_system, psi)
        assert isinstance(result.field, NodalField)
        assert result.eta.nt == psi.nt
        assert result.eta.kind == "adjoint-source"


class TestAdjointConsistency:
    @pytest.mark.parametrize("kappa", [0.9, 0.0])
    def test_coarse_mesh(self, coarse_system, coarse_dt, kappa):
        f = random_admissible_field(coarse_system, seed=0)
        psi = random_smooth_series(coarse_system, 2.0, coarse_dt, seed=1)
        assert adjoint_test(coarse_system, f, psi, kappa=kappa) <= 5e-3

    def test_finer_mesh(self):
        system = assemble(generate_disk_mesh(1.0, 0.05), Material())
        dt = cfl_time_step(system.mesh, system.material)
        f = random_admissible_field(system, seed=2)
        psi = random_smooth_series(system, 2.0, dt, seed=3)
        assert adjoint_test(system, f, psi) <= 5e-3

    def test_mismatch_shrinks_with_refinement(self):
        gaps = []
        for h in (0.1, 0.05):
            system = assemble(generate_disk_mesh(1.0, h), Material())
            dt = cfl_time_step(system.mesh, system.material)
            f = random_admissible_field(system, seed=2)
            psi = random_smooth_series(system, 2.0, dt, seed=3)
            gaps.append(adjoint_test(system, f, psi))
        assert gaps[1] < gaps[0]

    def test_zero_inputs(self, coarse_system, coarse_dt):
        f = NodalField.zeros(coarse_system.n_nodes)
        psi = MeasurementSeries(coarse_dt, np.zeros((41, coarse_system.n_boundary)))
        assert adjoint_test(coarse_system, f, psi) == 0.0


class TestRandomInputs:
    def test_field_is_admissible_and_seeded(self, coarse_system):
        a = random_admissible_field(coarse_system, seed=7)
        b = random_admissible_field(coarse_system, seed=7)
        assert np.array_equal(a.values, b.values)
        assert np.all(a.values[coarse_system.boundary_nodes] == 0.0)
        assert np.any(a.values != 0.0)

    def test_series_grid(self, coarse_system):
        psi = random_smooth_series(coarse_system, 2.0, 0.05, seed=0)
        assert psi.nt == 41
        assert psi.nb == coarse_system.n_boundary
