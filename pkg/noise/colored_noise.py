#!/usr/bin/env python3
"""
Colored Measurement Noise
White, pink and red noise shaped in the frequency domain, relative-level
noise injection and segment-averaged power spectral density estimates.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy import signal

from wavesim import MeasurementSeries

log = logging.getLogger(__name__)

# Exponent beta of the power law PSD ~ f^-beta
SPECTRAL_EXPONENTS = {"white": 0.0, "pink": 1.0, "red": 2.0}
DEFAULT_TAPER = 0.1


@dataclass(frozen=True)
class NoiseSpec:
    color: str = "white"  # "white", "pink" or "red"
    level: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.color not in SPECTRAL_EXPONENTS:
            raise ValueError(f"unknown noise color '{self.color}', choose from {sorted(SPECTRAL_EXPONENTS)}")
        if not self.level >= 0:
            raise ValueError(f"noise level must be non-negative, got {self.level}")


def colored_noise(nt: int, nb: int, dt: float, spec: NoiseSpec) -> MeasurementSeries:
    """
    Independent zero-mean colored noise per boundary node, RMS 1 overall

    White Gaussian samples are transformed with an FFT, multiplied by
    f^(-beta/2) with the zero-frequency bin removed, and transformed back.
    Node k draws from its own PCG64 stream spawned from ``spec.seed``.

    Args:
        nt: Time levels (at least 8)
        nb: Boundary nodes
        dt: Time step
        spec: Color and seed; ``spec.level`` is ignored here

    Returns:
        MeasurementSeries of kind voltage
    """
    if nt < 8:
        raise ValueError(f"colored noise needs at least 8 time levels, got {nt}")
    freqs = np.fft.rfftfreq(nt, d=dt)
    shaping = np.zeros_like(freqs)
    shaping[1:] = freqs[1:] ** (-SPECTRAL_EXPONENTS[spec.color] / 2.0)

    children = np.random.SeedSequence(spec.seed).spawn(nb)
    values = np.empty((nt, nb))
    for k, child in enumerate(children):
        white = np.random.Generator(np.random.PCG64(child)).standard_normal(nt)
        values[:, k] = np.fft.irfft(np.fft.rfft(white) * shaping, n=nt)

    rms = np.sqrt(np.mean(values ** 2))
    return MeasurementSeries(dt, values / rms, "voltage")


def add_noise(V: MeasurementSeries, spec: NoiseSpec) -> MeasurementSeries:
    """
    V + level |V| n / |n| with discrete L2 norms over all samples

    Raises:
        ValueError: V is identically zero and level > 0
    """
    if spec.level == 0:
        return V.with_values(V.values.copy())
    v_norm = np.linalg.norm(V.values)
    if v_norm == 0:
        raise ValueError("cannot add relative noise to all-zero data")
    n = colored_noise(V.nt, V.nb, V.dt, spec).values
    noisy = V.values + spec.level * v_norm * n / np.linalg.norm(n)
    log.info("Added %s noise at %.1f%% (seed %d)", spec.color, 100 * spec.level, spec.seed)
    return V.with_values(noisy)


@dataclass(frozen=True)
class PowerSpectrum:
    freqs: np.ndarray
    power: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"frequency": self.freqs, "power": self.power})

    def loglog_slope(self, band: Optional[Tuple[float, float]] = None) -> float:
        """Least-squares slope of log10 power against log10 frequency inside ``band``."""
        low, high = band if band is not None else central_decade(self.freqs)
        mask = (self.freqs >= low) & (self.freqs <= high) & (self.power > 0)
        if mask.sum() < 2:
            raise ValueError(f"fewer than two bins in band [{low}, {high}]")
        slope, _ = np.polyfit(np.log10(self.freqs[mask]), np.log10(self.power[mask]), 1)
        return float(slope)

    def band_ratio(self, fraction: float = 0.1) -> float:
        """Mean power of the lowest ``fraction`` of nonzero bins over the highest."""
        power = self.power[self.freqs > 0]
        count = max(1, int(len(power) * fraction))
        return float(power[:count].mean() / power[-count:].mean())


def central_decade(freqs: np.ndarray) -> Tuple[float, float]:
    """One decade centred geometrically between the first nonzero bin and Nyquist."""
    positive = freqs[freqs > 0]
    centre = np.sqrt(positive[0] * positive[-1])
    return centre / np.sqrt(10.0), centre * np.sqrt(10.0)


def segment_length(nt: int, n_segments: int) -> int:
    """Segment length giving ``n_segments`` half-overlapping segments in ``nt`` samples."""
    return max(2, (2 * nt) // (n_segments + 1))


def psd_estimate(series: MeasurementSeries, nperseg: Optional[int] = None,
                 taper: float = DEFAULT_TAPER) -> PowerSpectrum:
    """
    One-sided PSD averaged over boundary nodes and half-overlapping segments

    Args:
        series: Time x node samples
        nperseg: Segment length; defaults to a quarter of the series
        taper: Fraction of each segment under the cosine taper (Tukey window)

    Returns:
        PowerSpectrum on 0 .. 1/(2 dt)
    """
    nt = series.nt
    if nperseg is None:
        nperseg = max(4, nt // 4)
    if nt < nperseg + nperseg // 2:
        raise ValueError(f"{nt} samples are fewer than two half-overlapping segments of {nperseg}")
    freqs, power = signal.welch(
        series.values,
        fs=1.0 / series.dt,
        window=("tukey", taper),
        nperseg=nperseg,
        noverlap=nperseg // 2,
        detrend="constant",
        scaling="density",
        axis=0,
    )
    return PowerSpectrum(freqs, power.mean(axis=1))
