#!/usr/bin/env python3
"""
Accelerated Landweber Reconstruction
Momentum-accelerated Landweber iteration for the initial pressure, error
tracking, and the white-noise spectral response of the normal operator.

Data weighting. With ``data_weighting="film"`` (the default) F* is the adjoint
of F in the data norm |y|_W = |M^-1 y|, where M maps a pressure trace to its
voltage. Then F*F is the normal operator of the pressure-trace map and the
film term no longer spreads the spectrum by powers of the boundary wave
number. Iterating this way is the same as iterating with the trace map on the
recovered trace M^-1 V, which is how it is computed. ``"plain"`` keeps the
boundary-mass and trapezoid weighted data norm of ``data_inner``.

Step control. The step gamma / |u0| (or gamma) is capped at
step_safety * 2(1 + mu)/(1 + 2 mu) / |F*F|, the contraction limit of the
momentum recursion, with |F*F| from a cached power iteration.

Adjoint outputs are projected onto fields that vanish on the boundary, the
space the forward map acts on.
"""

import logging
import weakref
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from adjoint import adjoint, data_norm, domain_norm
from assembly import SemidiscreteSystem
from colored_noise import NoiseSpec, PowerSpectrum, add_noise, colored_noise, psd_estimate
from wavesim import MeasurementSeries, NodalField, field_values, forward, recover_pressure_trace

log = logging.getLogger(__name__)

CONVERGED_ERROR = 0.01
MOMENTUM_WARNING = 0.7
DATA_WEIGHTINGS = ("film", "plain")
NOISE_COLORS = ("white", "pink", "red")


def contraction_limit(mu: float) -> float:
    """Largest step * |F*F| for which the momentum recursion still contracts."""
    return 2.0 * (1.0 + mu) / (1.0 + 2.0 * mu)


@dataclass(frozen=True)
class LandweberConfig:
    """Iteration parameters. Defaults follow the reconstruction experiments."""
    gamma: float = 5e-2
    mu: float = 0.0
    iterations: int = 50              # K
    f_true: Optional[NodalField] = None
    normalize: bool = True            # divide the step by |u0| as in the accelerated scheme
    divergence_factor: float = 100.0
    data_weighting: str = "film"
    enforce_bound: bool = True        # cap the step below the contraction limit
    step_safety: float = 0.9

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not 0 <= self.mu < 1:
            raise ValueError(f"mu must lie in [0, 1), got {self.mu}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be at least 1, got {self.iterations}")
        if not self.divergence_factor > 1:
            raise ValueError(f"divergence_factor must exceed 1, got {self.divergence_factor}")
        if self.data_weighting not in DATA_WEIGHTINGS:
            raise ValueError(f"data_weighting must be one of {DATA_WEIGHTINGS}, got '{self.data_weighting}'")
        if not 0 < self.step_safety <= 1:
            raise ValueError(f"step_safety must lie in (0, 1], got {self.step_safety}")

    def echo(self) -> dict:
        return {
            "gamma": self.gamma,
            "mu": self.mu,
            "iterations": self.iterations,
            "normalize": self.normalize,
            "divergence_factor": self.divergence_factor,
            "data_weighting": self.data_weighting,
            "enforce_bound": self.enforce_bound,
            "step_safety": self.step_safety,
            "f_true": self.f_true is not None,
        }


@dataclass
class LandweberReport:
    reconstruction: NodalField
    residual_history: List[float] = field(default_factory=list)
    rel_error_history: List[float] = field(default_factory=list)
    config: Optional[LandweberConfig] = None
    stopped_early: bool = False
    note: str = ""
    step: float = float("nan")
    normal_norm: Optional[float] = None
    step_capped: bool = False

    @property
    def iterations_run(self) -> int:
        return len(self.residual_history)

    def iterations_to_reach(self, threshold: float = CONVERGED_ERROR) -> Optional[int]:
        """First iteration (1-based) whose relative error is at or below ``threshold``."""
        for k, err in enumerate(self.rel_error_history, start=1):
            if err <= threshold:
                return k
        return None

    def step_echo(self) -> Dict[str, str]:
        """Step actually used, for report headers."""
        return {
            "step": repr(self.step),
            "normal_norm": "none" if self.normal_norm is None else repr(self.normal_norm),
            "step_capped": "true" if self.step_capped else "false",
        }

    def to_frame(self) -> pd.DataFrame:
        n = self.iterations_run
        rel = self.rel_error_history if self.rel_error_history else [np.nan] * n
        return pd.DataFrame({
            "iteration": np.arange(1, n + 1),
            "residual": self.residual_history,
            "rel_error": rel,
        })


def _add_note(report: LandweberReport, note: str):
    report.note = f"{report.note}; {note}" if report.note else note


# ---------------------------------------------------------------------------
# Iteration core
# ---------------------------------------------------------------------------

def run_landweber(
    apply_forward: Callable[[np.ndarray], np.ndarray],
    apply_adjoint: Callable[[np.ndarray], np.ndarray],
    data: np.ndarray,
    config: LandweberConfig,
    image_norm: Callable[[np.ndarray], float],
    residual_norm: Callable[[np.ndarray], float],
    normal_norm: Optional[float] = None,
) -> LandweberReport:
    """
    Operator-agnostic accelerated Landweber iteration

        u0 = F* V,  v0 = u0
        v_k = u_{k-1} - gamma (F* F u_{k-1} - u0) / |u0|
        u_k = v_k + mu (v_k - v_{k-1})

    Args:
        apply_forward: u -> F u on plain arrays
        apply_adjoint: y -> F* y on plain arrays
        data: Measured data V
        config: Step size, momentum and stopping parameters
        image_norm: Norm on the image space (also used for |u0|)
        residual_norm: Norm on the data space
        normal_norm: Estimate of |F*F|; with ``config.enforce_bound`` the step
            is capped at step_safety * contraction_limit(mu) / normal_norm

    Returns:
        LandweberReport with one history entry per completed iteration
    """
    if config.mu > MOMENTUM_WARNING:
        log.warning("mu=%.2f above %.1f; momentum iterations may become unstable", config.mu, MOMENTUM_WARNING)

    u0 = apply_adjoint(data)
    u0_norm = image_norm(u0)
    if u0_norm == 0.0:
        log.warning("F*V vanishes; returning the zero reconstruction")
        return LandweberReport(NodalField(np.zeros_like(u0)), config=config,
                               note="zero data: F*V = 0, no iterations run", step=0.0)

    step = config.gamma / u0_norm if config.normalize else config.gamma
    truth = config.f_true.values if config.f_true is not None else None
    truth_norm = image_norm(truth) if truth is not None else None
    if truth_norm == 0.0:
        raise ValueError("f_true has zero norm; relative error is undefined")

    report = LandweberReport(NodalField(u0), config=config, normal_norm=normal_norm)
    if config.enforce_bound and normal_norm is not None and normal_norm > 0.0:
        limit = config.step_safety * contraction_limit(config.mu) / normal_norm
        if step > limit:
            _add_note(report, f"step capped from {step:.4e} to {limit:.4e} (|F*F| ~ {normal_norm:.4e})")
            log.warning("Step %.4e exceeds the contraction limit; using %.4e", step, limit)
            step = limit
            report.step_capped = True
    report.step = step
    log.info("Landweber step %.4e (step * |F*F| = %s)", step,
             "n/a" if normal_norm is None else f"{step * normal_norm:.3f}")

    u = u0.copy()
    v_prev = u0.copy()
    Fu = apply_forward(u)
    best = np.inf
    for k in range(1, config.iterations + 1):
        v = u - step * (apply_adjoint(Fu) - u0)
        u = v + config.mu * (v - v_prev)
        v_prev = v
        Fu = apply_forward(u)

        residual = residual_norm(Fu - data)
        report.residual_history.append(residual)
        if truth is not None:
            report.rel_error_history.append(image_norm(u - truth) / truth_norm)
        log.debug("iteration %d: residual %.6e", k, residual)
        if k % 10 == 0 or k == config.iterations:
            err = f", rel. error {report.rel_error_history[-1]:.4%}" if truth is not None else ""
            log.info("Landweber %d/%d: residual %.4e%s", k, config.iterations, residual, err)

        if not np.isfinite(residual):
            report.stopped_early = True
            _add_note(report, f"non-finite residual at iteration {k}")
            break
        best = min(best, residual)
        if residual > config.divergence_factor * best:
            report.stopped_early = True
            note = (f"residual grew {residual / best:.0f}x above its minimum at iteration {k}; "
                    "reduce gamma or mu")
            _add_note(report, note)
            log.warning("Stopping early: %s", note)
            break

    report.reconstruction = NodalField(u)
    return report


# ---------------------------------------------------------------------------
# Wave-operator front end
# ---------------------------------------------------------------------------

def _weighting_for(system: SemidiscreteSystem, kappa: Optional[float], data_weighting: str) -> Tuple[float, str]:
    kappa = system.material.kappa if kappa is None else kappa
    if data_weighting not in DATA_WEIGHTINGS:
        raise ValueError(f"data_weighting must be one of {DATA_WEIGHTINGS}, got '{data_weighting}'")
    # Without the film term both weightings coincide
    return kappa, ("plain" if kappa == 0.0 else data_weighting)


def _operators(system: SemidiscreteSystem, T: float, dt: float, kappa: float, weighting: str):
    """(apply_forward, apply_adjoint) on plain arrays; adjoint outputs vanish on the boundary."""
    model_kappa = 0.0 if weighting == "film" else kappa
    boundary = system.boundary_nodes

    def apply_forward(u: np.ndarray) -> np.ndarray:
        return forward(system, u, T, dt, kappa=model_kappa).values

    def apply_adjoint(y: np.ndarray) -> np.ndarray:
        values = adjoint(system, MeasurementSeries(dt, y), kappa=model_kappa).values.copy()
        values[boundary] = 0.0
        return values

    return apply_forward, apply_adjoint


def landweber(system: SemidiscreteSystem, V: MeasurementSeries, config: LandweberConfig,
              kappa: Optional[float] = None, normal_norm: Optional[float] = None) -> LandweberReport:
    """
    Reconstruct the initial pressure from voltage data

    Args:
        system: Assembled system of the reconstruction mesh
        V: Voltage data on this mesh's boundary
        config: Iteration parameters
        kappa: Measurement-model coefficient; defaults to the material value,
            0 gives the naive Dirichlet interpretation
        normal_norm: Known |F*F| for this system, time grid and weighting;
            estimated (and cached) when omitted and the bound is enforced

    Returns:
        LandweberReport; residuals are measured in the data norm of the
        chosen weighting
    """
    T, dt = V.duration, V.dt
    kappa, weighting = _weighting_for(system, kappa, config.data_weighting)
    apply_forward, apply_adjoint = _operators(system, T, dt, kappa, weighting)
    data = V.values
    if weighting == "film":
        data = recover_pressure_trace(system, V, kappa, system.material.c_p).values
    if config.enforce_bound and normal_norm is None:
        normal_norm = cached_normal_norm(system, T, dt, kappa=kappa, data_weighting=weighting)

    log.info("Landweber: gamma=%g mu=%g K=%d kappa=%s weighting=%s on %d nodes",
             config.gamma, config.mu, config.iterations, kappa, weighting, system.n_nodes)
    return run_landweber(
        apply_forward,
        apply_adjoint,
        data,
        config,
        image_norm=lambda u: domain_norm(system, u),
        residual_norm=lambda y: data_norm(system, V.with_values(y)),
        normal_norm=normal_norm,
    )


def mu_sweep(system: SemidiscreteSystem, V: MeasurementSeries, config: LandweberConfig,
             mus: Sequence[float], kappa: Optional[float] = None) -> pd.DataFrame:
    """Iterations to reach 1% error and final error for each momentum value."""
    rows = []
    for mu in mus:
        report = landweber(system, V, replace(config, mu=mu), kappa=kappa)
        rows.append({
            "mu": mu,
            "iterations_to_1pct": report.iterations_to_reach(CONVERGED_ERROR),
            "final_rel_error": report.rel_error_history[-1] if report.rel_error_history else np.nan,
            "final_residual": report.residual_history[-1] if report.residual_history else np.nan,
        })
    return pd.DataFrame(rows)


def noise_study(system: SemidiscreteSystem, V: MeasurementSeries, config: LandweberConfig,
                seeds: Iterable[int], level: float = 0.1, colors: Sequence[str] = NOISE_COLORS,
                kappa: Optional[float] = None) -> pd.DataFrame:
    """
    Final reconstruction error from noisy copies of clean data

    Args:
        system: Assembled system
        V: Clean voltage data
        config: Iteration parameters; ``f_true`` is required
        seeds: Noise seeds, one reconstruction per color and seed
        level: Relative noise level
        colors: Noise colors to compare
        kappa: Measurement-model coefficient override

    Returns:
        DataFrame with columns color, seed, final_rel_error
    """
    if config.f_true is None:
        raise ValueError("noise_study needs f_true to measure the reconstruction error")
    seeds = list(seeds)
    rows = []
    for color in colors:
        for seed in seeds:
            noisy = add_noise(V, NoiseSpec(color, level, int(seed)))
            report = landweber(system, noisy, config, kappa=kappa)
            rows.append({"color": color, "seed": int(seed),
                         "final_rel_error": report.rel_error_history[-1]})
    return pd.DataFrame(rows)


def summarize_noise_study(table: pd.DataFrame) -> pd.DataFrame:
    """Mean final error and its standard error per color, in first-seen color order."""
    grouped = table.groupby("color", sort=False)["final_rel_error"]
    summary = grouped.agg(["mean", "sem", "count"]).reset_index()
    return summary.rename(columns={"mean": "mean_rel_error", "sem": "std_error", "count": "n_seeds"})


def relative_error(u, f_true, system: SemidiscreteSystem) -> float:
    """|u - f_true|_M / |f_true|_M in the c^-2 weighted norm."""
    u = field_values(u, system.n_nodes)
    truth = field_values(f_true, system.n_nodes)
    denom = domain_norm(system, truth)
    if denom == 0.0:
        raise ValueError("f_true has zero norm; relative error is undefined")
    return domain_norm(system, u - truth) / denom


def estimate_normal_norm(system: SemidiscreteSystem, T: float, dt: float, iterations: int = 20,
                         seed: int = 0, kappa: Optional[float] = None,
                         data_weighting: str = "film") -> float:
    """Power-iteration estimate of |F*F| in the c^-2 weighted norm, boundary values held at zero."""
    kappa, weighting = _weighting_for(system, kappa, data_weighting)
    apply_forward, apply_adjoint = _operators(system, T, dt, kappa, weighting)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(system.n_nodes)
    u[system.boundary_nodes] = 0.0
    u /= domain_norm(system, u)
    estimate = 0.0
    for _ in range(iterations):
        w = apply_adjoint(apply_forward(u))
        estimate = domain_norm(system, w)
        if estimate == 0.0:
            break
        u = w / estimate
    return estimate


_NORM_CACHE: Dict[tuple, Tuple[weakref.ref, float]] = {}


def cached_normal_norm(system: SemidiscreteSystem, T: float, dt: float,
                       kappa: Optional[float] = None, data_weighting: str = "film") -> float:
    """``estimate_normal_norm`` computed once per system, time grid, kappa and weighting."""
    kappa, weighting = _weighting_for(system, kappa, data_weighting)
    key = (id(system), round(T, 12), round(dt, 15), kappa, weighting)
    hit = _NORM_CACHE.get(key)
    if hit is not None and hit[0]() is system:
        return hit[1]
    norm = estimate_normal_norm(system, T, dt, kappa=kappa, data_weighting=weighting)
    _NORM_CACHE[key] = (weakref.ref(system), norm)
    log.info("|F*F| ~ %.4e (%s weighting, kappa=%g)", norm, weighting, kappa)
    return norm


# ---------------------------------------------------------------------------
# Normal-operator spectrum
# ---------------------------------------------------------------------------

def apply_normal_operator(system: SemidiscreteSystem, psi: MeasurementSeries,
                          kappa: Optional[float] = None) -> MeasurementSeries:
    """F F* psi on the time grid of ``psi``."""
    image = adjoint(system, psi, kappa=kappa).values.copy()
    image[system.boundary_nodes] = 0.0
    return forward(system, image, psi.duration, psi.dt, kappa=kappa)


@dataclass(frozen=True)
class SpectralResponse(PowerSpectrum):
    n_probes: int = 1


def normal_operator_spectrum(system: SemidiscreteSystem, n_probes: int, seed: int, T: float, dt: float,
                             kappa: Optional[float] = None, nperseg: Optional[int] = None,
                             max_workers: int = 1) -> SpectralResponse:
    """
    Average PSD of F F* applied to white-noise probes

    Args:
        system: Assembled system
        n_probes: Number of independent probes
        seed: Root seed; probe seeds are drawn from its SeedSequence
        T: Final time
        dt: Time step
        kappa: Measurement-model coefficient override
        nperseg: PSD segment length; defaults to half the series
        max_workers: Threads for concurrent probes (default 1)

    Returns:
        SpectralResponse averaged over probes and boundary nodes
    """
    if n_probes < 1:
        raise ValueError(f"n_probes must be at least 1, got {n_probes}")
    steps = int(round(T / dt))
    nt = steps + 1
    if nperseg is None:
        nperseg = max(4, nt // 2)
    probe_seeds = np.random.SeedSequence(seed).generate_state(n_probes)

    def probe_power(probe_seed: int) -> PowerSpectrum:
        noise = colored_noise(nt, system.n_boundary, dt, NoiseSpec("white", 1.0, int(probe_seed)))
        return psd_estimate(apply_normal_operator(system, noise, kappa), nperseg=nperseg)

    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        spectra = list(pool.map(probe_power, probe_seeds))
    power = np.mean([s.power for s in spectra], axis=0)
    log.info("Normal-operator spectrum from %d probes, %d bins", n_probes, len(power))
    return SpectralResponse(spectra[0].freqs, power, n_probes)
