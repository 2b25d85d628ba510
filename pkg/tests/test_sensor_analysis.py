"""Tests for the film coefficient, directivity and the layered reflection check."""
import math

import numpy as np
import pytest

from sensor_analysis import (
    FilmProperties,
    KappaSingularityError,
    alpha_ratio,
    critical_angle,
    decibels,
    directivity,
    directivity_sweep,
    effective_reflection,
    kappa,
    kappa_parameter_box,
    layered_reflection_exact,
    reflection_coefficient,
    thickness_convergence,
)

WATER = dict(rho=1000.0, c=1500.0)
BACKING = dict(rho_b=2000.0, c_b=1000.0)


class TestKappa:
    def test_reference_value(self):
        assert kappa(0.4, -0.5) == pytest.approx(1.5)

    def test_isotropic_limit(self):
        assert kappa(0.0, 0.0) == pytest.approx(1.0)

    def test_singular(self):
        with pytest.raises(KappaSingularityError):
            kappa(0.25, -1.5)

    def test_singular_is_arithmetic_error(self):
        with pytest.raises(ArithmeticError):
            kappa(0.25, -1.5)

    def test_parameter_box_range(self):
        box = kappa_parameter_box()
        assert len(box) == 21 ** 3
        assert box["kappa"].max() == pytest.approx(1.5)
        assert box["kappa"].min() == pytest.approx(0.4086, abs=1e-4)
        assert box["kappa"].min() > 0.4

    def test_parameter_box_columns(self):
        box = kappa_parameter_box(points=3)
        assert list(box.columns) == ["nu", "d", "d_perp", "d_ratio", "kappa"]
        assert np.allclose(box["d_ratio"], box["d_perp"] / box["d"])


class TestFilmProperties:
    def test_derived_values(self):
        film = FilmProperties(nu=0.4, d_ratio=-0.5, c_p=2000.0, rho_p=1800.0, epsilon=1e-5)
        assert film.kappa == pytest.approx(1.5)
        assert film.impedance == pytest.approx(3.6e6)

    @pytest.mark.parametrize("kwargs", [{"nu": 0.5}, {"nu": -0.1}, {"epsilon": 0.0}, {"c_p": 0.0}])
    def test_invalid(self, kwargs):
        base = dict(nu=0.3, d_ratio=-0.2, c_p=2000.0, rho_p=1800.0, epsilon=1e-5)
        with pytest.raises(ValueError):
            FilmProperties(**{**base, **kwargs})


class TestPlaneWaveResponse:
    def test_alpha_ratio(self):
        assert alpha_ratio(**WATER, **BACKING) == pytest.approx(0.75)

    def test_normal_incidence(self):
        assert reflection_coefficient(0.0, 0.75) == pytest.approx(1.0 / 7.0)
        assert directivity(0.0, 1500.0, 2000.0, 0.9, 0.75) == pytest.approx(8.0 / 7.0)

    def test_scalar_in_scalar_out(self):
        assert isinstance(reflection_coefficient(0.3, 0.75), float)
        assert isinstance(directivity(0.3, 1500.0, 2000.0, 0.9, 0.75), float)

    def test_grazing_incidence(self):
        assert reflection_coefficient(math.pi / 2, 0.75) == pytest.approx(-1.0)
        assert directivity(math.pi / 2, 1500.0, 2000.0, 0.9, 0.75) == pytest.approx(0.0, abs=1e-12)

    def test_kappa_zero_matches_pressure_response(self):
        theta = np.linspace(0.0, 1.2, 7)
        assert np.allclose(directivity(theta, 1500.0, 2000.0, 0.0, 0.75),
                           1.0 + reflection_coefficient(theta, 0.75))

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            reflection_coefficient(0.1, 0.0)
        with pytest.raises(ValueError):
            reflection_coefficient(-0.1, 0.75)
        with pytest.raises(ValueError):
            reflection_coefficient(2.0, 0.75)

    def test_decibels(self):
        assert decibels(10.0) == pytest.approx(20.0)
        assert decibels(0.0) == -60.0
        assert decibels(1e-5, floor_db=-80.0) == pytest.approx(-80.0)


class TestCriticalAngle:
    def test_value(self):
        cr = critical_angle(1500.0, 2000.0, 0.9)
        assert cr == pytest.approx(math.asin(0.75 / math.sqrt(0.9)))
        assert directivity(cr, 1500.0, 2000.0, 0.9, 0.75) == pytest.approx(0.0, abs=1e-12)

    def test_absent_for_small_kappa(self):
        assert critical_angle(1500.0, 2000.0, 0.5) is None
        assert critical_angle(1500.0, 2000.0, 0.0) is None

    def test_boundary_case(self):
        assert critical_angle(1500.0, 2000.0, 0.5625) == pytest.approx(math.pi / 2)


class TestDirectivitySweep:
    def test_shape_and_columns(self):
        df = directivity_sweep(1500.0, 2000.0, 0.75, [0.3, 0.9, 1.5], n_angles=91)
        assert list(df.columns) == ["theta_deg", "kappa", "linear", "dB"]
        assert len(df) == 3 * 91
        assert df["theta_deg"].min() == 0.0
        assert df["theta_deg"].max() == 90.0

    def test_floor_applied(self):
        df = directivity_sweep(1500.0, 2000.0, 0.75, [0.9])
        assert df["dB"].min() >= -60.0
        assert df.loc[df["theta_deg"] == 0.0, "linear"].iloc[0] == pytest.approx(8.0 / 7.0)


class TestLayeredReflection:
    Z, Z_p, Z_b, c_p = 1.5e6, 3.6e6, 2.0e6, 2000.0

    def test_zero_thickness_is_fresnel(self):
        exact = layered_reflection_exact(1e6, 0.0, self.Z, self.Z_p, self.Z_b, self.c_p)
        assert exact == pytest.approx(effective_reflection(self.Z, self.Z_b))

    def test_matched_film_is_transparent(self):
        exact = layered_reflection_exact(1e6, 1e-3, self.Z, self.Z_b, self.Z_b, self.c_p)
        assert exact == pytest.approx(effective_reflection(self.Z, self.Z_b))

    def test_first_order_convergence(self):
        omega = 2 * np.pi * 1e6
        eps = self.c_p / omega * np.logspace(-1, -3, 8)
        table = thickness_convergence(omega, self.Z, self.Z_p, self.Z_b, self.c_p, eps)
        assert list(table.columns) == ["epsilon", "omega_eps_over_cp", "gap", "order"]
        assert np.all(np.diff(table["gap"]) < 0)
        assert np.all(np.abs(table["order"].iloc[1:] - 1.0) < 0.15)

    def test_invalid(self):
        with pytest.raises(ValueError):
            layered_reflection_exact(1.0, -1.0, self.Z, self.Z_p, self.Z_b, self.c_p)
        with pytest.raises(ValueError):
            layered_reflection_exact(1.0, 1.0, 0.0, self.Z_p, self.Z_b, self.c_p)
