#!/usr/bin/env python3
"""
Piezoelectric Sensor Analysis
Closed-form film coefficient, plane-wave reflection and directivity of a
film-on-backing detector, plus an exact three-layer transfer-matrix
reflection used to check the thin-film boundary condition.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

log = logging.getLogger(__name__)

SINGULAR_DENOMINATOR = 1e-12
DB_FLOOR = -60.0


class KappaSingularityError(ArithmeticError):
    """Denominator of the film coefficient vanishes."""


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


# ---------------------------------------------------------------------------
# Film coefficient
# ---------------------------------------------------------------------------

def kappa(nu: float, d_ratio: float) -> float:
    """
    kappa = (1 - 2 nu)(1 - r) / (1 - nu (1 - 2 r)) with r = d_perp / d

    Raises:
        KappaSingularityError: |denominator| < 1e-12
    """
    denominator = 1.0 - nu * (1.0 - 2.0 * d_ratio)
    if abs(denominator) < SINGULAR_DENOMINATOR:
        raise KappaSingularityError(
            f"kappa is singular at nu={nu}, d_ratio={d_ratio} (denominator {denominator:.3e})"
        )
    return (1.0 - 2.0 * nu) * (1.0 - d_ratio) / denominator


@dataclass(frozen=True)
class FilmProperties:
    """Sensing film. ``d_ratio`` is d_perp / d; ``epsilon`` is the thickness."""
    nu: float
    d_ratio: float
    c_p: float
    rho_p: float
    epsilon: float

    def __post_init__(self):
        if not 0 <= self.nu < 0.5:
            raise ValueError(f"Poisson's ratio must lie in [0, 0.5), got {self.nu}")
        if not self.epsilon > 0:
            raise ValueError(f"film thickness must be positive, got {self.epsilon}")
        if not (self.c_p > 0 and self.rho_p > 0):
            raise ValueError("film speed and density must be positive")

    @property
    def kappa(self) -> float:
        return kappa(self.nu, self.d_ratio)

    @property
    def impedance(self) -> float:
        return self.rho_p * self.c_p


def kappa_parameter_box(
    nu_range=(0.2, 0.4),
    d_range=(-35.0, -30.0),
    d_perp_range=(3.0, 15.0),
    points: int = 21,
) -> pd.DataFrame:
    """
    Grid sweep of kappa over ranges of nu, d and d_perp (pC/N for PVDF)

    Returns:
        DataFrame with columns nu, d, d_perp, d_ratio, kappa
    """
    nu, d, d_perp = np.meshgrid(
        np.linspace(*nu_range, points),
        np.linspace(*d_range, points),
        np.linspace(*d_perp_range, points),
        indexing="ij",
    )
    d_ratio = d_perp / d
    values = (1.0 - 2.0 * nu) * (1.0 - d_ratio) / (1.0 - nu * (1.0 - 2.0 * d_ratio))
    df = pd.DataFrame({
        "nu": nu.ravel(),
        "d": d.ravel(),
        "d_perp": d_perp.ravel(),
        "d_ratio": d_ratio.ravel(),
        "kappa": values.ravel(),
    })
    log.info("kappa over parameter box: %.4f .. %.4f", df["kappa"].min(), df["kappa"].max())
    return df


# ---------------------------------------------------------------------------
# Plane-wave response
# ---------------------------------------------------------------------------

def alpha_ratio(rho: float, c: float, rho_b: float, c_b: float) -> float:
    """Impedance ratio rho c / (rho_b c_b) of fluid to backing."""
    return (rho * c) / (rho_b * c_b)


def reflection_coefficient(theta, alpha: float):
    """
    R = (cos theta - alpha) / (cos theta + alpha)

    Args:
        theta: Incidence angle(s) in radians, within [0, pi/2]
        alpha: Impedance ratio, positive
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    theta = np.asarray(theta, dtype=np.float64)
    if np.any(theta < 0) or np.any(theta > np.pi / 2 + 1e-12):
        raise ValueError("incidence angle must lie in [0, pi/2]")
    cos = np.cos(theta)
    return _scalar_or_array((cos - alpha) / (cos + alpha))


def directivity(theta, c: float, c_p: float, kappa: float, alpha: float):
    """V / p_inc = (1 + R)(1 - kappa (c_p / c)^2 sin^2 theta)."""
    theta = np.asarray(theta, dtype=np.float64)
    film = 1.0 - kappa * (c_p / c) ** 2 * np.sin(theta) ** 2
    return _scalar_or_array((1.0 + np.asarray(reflection_coefficient(theta, alpha))) * film)


def decibels(x, floor_db: float = DB_FLOOR):
    """20 log10 |x| clipped from below at ``floor_db``."""
    magnitude = np.abs(np.asarray(x, dtype=np.float64))
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(magnitude)
    return _scalar_or_array(np.maximum(db, floor_db))


def critical_angle(c: float, c_p: float, kappa: float) -> Optional[float]:
    """
    Incidence angle of vanishing response, arcsin(c / (c_p sqrt(kappa)))

    Returns:
        Angle in radians, or None when kappa < c^2 / c_p^2
    """
    if kappa <= 0:
        return None
    ratio = c / (c_p * np.sqrt(kappa))
    if ratio > 1.0:
        return None
    return float(np.arcsin(ratio))


def directivity_sweep(
    c: float,
    c_p: float,
    alpha: float,
    kappas: Sequence[float],
    n_angles: int = 181,
    floor_db: float = DB_FLOOR,
) -> pd.DataFrame:
    """
    Directivity over 0..90 degrees for each kappa

    Returns:
        Long DataFrame with columns theta_deg, kappa, linear, dB
    """
    theta_deg = np.linspace(0.0, 90.0, n_angles)
    theta = np.radians(theta_deg)
    frames = []
    for k in kappas:
        linear = np.asarray(directivity(theta, c, c_p, k, alpha))
        frames.append(pd.DataFrame({
            "theta_deg": theta_deg,
            "kappa": k,
            "linear": linear,
            "dB": decibels(linear, floor_db),
        }))
        cr = critical_angle(c, c_p, k)
        log.debug("kappa=%.2f: critical angle %s", k, "none" if cr is None else f"{np.degrees(cr):.2f} deg")
    return pd.concat(frames, ignore_index=True)


# ---------------------------------------------------------------------------
# Three-layer oracle
# ---------------------------------------------------------------------------

def layered_reflection_exact(omega: float, epsilon: float, Z: float, Z_p: float,
                             Z_b: float, c_p: float) -> complex:
    """
    Normal-incidence reflection from fluid onto a film of thickness ``epsilon``
    backed by a half-space

    The film's transfer matrix

        [[cos kd, -i Z_p sin kd], [-i sin kd / Z_p, cos kd]],  k = omega / c_p

    maps the backing impedance to the input impedance seen from the fluid.

    Args:
        omega: Angular frequency
        epsilon: Film thickness (0 gives the two-media Fresnel value)
        Z: Fluid impedance
        Z_p: Film impedance
        Z_b: Backing impedance
        c_p: Film wave speed

    Returns:
        Complex reflection coefficient (Z_in - Z) / (Z_in + Z)
    """
    if min(Z, Z_p, Z_b) <= 0:
        raise ValueError("impedances must be positive")
    if epsilon < 0:
        raise ValueError(f"film thickness must be non-negative, got {epsilon}")
    kd = omega / c_p * epsilon
    cos, sin = np.cos(kd), np.sin(kd)
    transfer = np.array([[cos, -1j * Z_p * sin], [-1j * sin / Z_p, cos]])
    pressure, velocity = transfer @ np.array([Z_b, 1.0])
    Z_in = pressure / velocity
    return complex((Z_in - Z) / (Z_in + Z))


def effective_reflection(Z: float, Z_b: float) -> float:
    """Leading-order normal-incidence prediction (Z_b - Z) / (Z_b + Z)."""
    return (Z_b - Z) / (Z_b + Z)


def thickness_convergence(omega: float, Z: float, Z_p: float, Z_b: float, c_p: float,
                          thicknesses: Sequence[float]) -> pd.DataFrame:
    """Gap between exact and effective reflection, with observed order per halving."""
    R_eff = effective_reflection(Z, Z_b)
    eps = np.asarray(thicknesses, dtype=np.float64)
    gap = np.array([abs(layered_reflection_exact(omega, e, Z, Z_p, Z_b, c_p) - R_eff) for e in eps])
    order = np.full(len(eps), np.nan)
    order[1:] = np.log(gap[:-1] / gap[1:]) / np.log(eps[:-1] / eps[1:])
    return pd.DataFrame({"epsilon": eps, "omega_eps_over_cp": omega * eps / c_p, "gap": gap, "order": order})
