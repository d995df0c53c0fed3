"""Fringe scans, contrast extraction and the closed-form phase law.

A fringe scan runs the full pulse program once per free-evolution time T
(each T is an independent trajectory; the whole T grid is propagated as one
batch) and records the chosen observable, by default the excited-state
population summed over the starting wells.  Contrast is (max-min)/(max+min)
over the scanned window, and a least-squares fit against
A + B cos(omega T + phi) extracts the fringe frequency and phase offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .constants import HBAR
from .dynamics import DEFAULT_ATOL, DEFAULT_RTOL, Pulse, _evolve_arrays
from .errors import ConfigurationError, UsageError
from .potentials import LatticeConfig, surface_potential
from .sequence import (
    CalibrationStore,
    FreeEvolution,
    InitialCondition,
    PulseProgram,
    _build_program,
    calibrate_scheme,
)
from .solver import WSBasis

MIN_POINTS_PER_PERIOD = 8


@dataclass(frozen=True)
class FringeScan:
    """Sampled fringe signal over a free-evolution-time grid."""

    T_values: np.ndarray
    signal: np.ndarray
    contrast: float
    fitted_angular_frequency: float
    fitted_phase_offset: float
    fit_offset: float
    fit_amplitude: float
    fit_variance_fraction: float
    max_norm_error: float
    observable: str


def fit_fringe(T, y, omega_guess: float | None = None):
    """Least squares of A + B cos(omega T + phi); returns (A, B, omega, phi, r2).

    Nonlinear only in omega: for each trial frequency the amplitudes come
    from a linear solve, and omega is refined around the supplied guess (or
    an FFT estimate) by bounded scalar minimization.  B >= 0, omega >= 0 and
    phi in [0, 2pi) by construction.
    """
    T = np.asarray(T, dtype=float)
    y = np.asarray(y, dtype=float)
    spread = float(y.max() - y.min())
    mean = float(y.mean())
    if spread < 1e-12:
        return mean, 0.0, 0.0, 0.0, 1.0

    if omega_guess is None or omega_guess <= 0:
        yf = np.abs(np.fft.rfft(y - mean))
        freqs = np.fft.rfftfreq(len(T), d=float(T[1] - T[0]))
        omega_guess = 2 * math.pi * freqs[1 + int(np.argmax(yf[1:]))]

    def linear_fit(omega):
        design = np.column_stack(
            [np.ones_like(T), np.cos(omega * T), np.sin(omega * T)]
        )
        coeffs, *_ = np.linalg.lstsq(design, y, rcond=None)
        resid = y - design @ coeffs
        return float(resid @ resid), coeffs

    res = minimize_scalar(
        lambda w: linear_fit(w)[0],
        bounds=(0.5 * omega_guess, 1.5 * omega_guess),
        method="bounded",
        options={"xatol": omega_guess * 1e-12},
    )
    omega = float(res.x)
    ss_res, (a, c, s) = linear_fit(omega)
    b = math.hypot(c, s)
    phi = math.atan2(-s, c) % (2 * math.pi)
    ss_tot = float(np.sum((y - mean) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(a), float(b), omega, float(phi), float(r2)


def fringe_frequency_estimate(m: int, basis: WSBasis) -> float:
    """Expected fringe angular frequency 2 |E_{m-1} - E_{m+1}| / hbar."""
    eps = basis.energies_rad_s
    return 2.0 * abs(
        float(eps[basis.index_of(m - 1)] - eps[basis.index_of(m + 1)])
    )


def scan_fringes(
    scheme: str,
    start,
    T_grid,
    cfg: LatticeConfig,
    basis: WSBasis,
    store: CalibrationStore | None = None,
    *,
    tone_mode: str = "dual",
    pulse_phases=None,
    durations: dict | None = None,
    observable: str = "excited-start-wells",
    rtol=DEFAULT_RTOL,
    atol=DEFAULT_ATOL,
) -> FringeScan:
    """Run the program once per T (batched) and extract contrast and fit.

    start is an InitialCondition or a single well number.  The pulse
    sequence is anchored at the first starting well; in the translational
    regime the same tones serve every starting well.
    """
    if isinstance(start, int):
        start = InitialCondition(kind="single", wells=(start,))
    anchor = start.wells[0]
    T_grid = np.asarray(T_grid, dtype=float)
    if T_grid.ndim != 1 or len(T_grid) < 2:
        raise ConfigurationError("T grid needs at least two points")

    omega_est = fringe_frequency_estimate(anchor, basis)
    max_dt = float(np.max(np.diff(T_grid)))
    if omega_est > 0 and max_dt > (2 * math.pi / omega_est) / MIN_POINTS_PER_PERIOD:
        needed = int(
            math.ceil(
                (T_grid[-1] - T_grid[0])
                / ((2 * math.pi / omega_est) / MIN_POINTS_PER_PERIOD)
            )
        )
        raise ConfigurationError(
            f"T grid under-resolves the expected fringe (omega ~ {omega_est:.3e} "
            f"rad/s): need >= {needed + 1} points over this span"
        )

    program = _build_program(
        scheme,
        anchor,
        None,
        cfg,
        basis,
        store,
        tone_mode=tone_mode,
        pulse_phases=pulse_phases,
        durations=durations,
    )
    program = PulseProgram(
        steps=program.steps,
        start=start,
        scheme=scheme,
        well=anchor,
        basis_hash=program.basis_hash,
    )

    n_t = len(T_grid)
    start_idx = [basis.index_of(w) for w in start.wells]
    signal = np.zeros(n_t)
    max_norm_err = 0.0
    for weight, state0 in start.branches(basis):
        a_g = np.tile(state0.a_g, (n_t, 1))
        a_e = np.tile(state0.a_e, (n_t, 1))
        clocks = np.full(n_t, state0.clock)
        for step in program.steps:
            if isinstance(step, FreeEvolution):
                clocks = clocks + (T_grid if step.T is None else step.T)
                continue
            a_g, a_e = _evolve_arrays(
                a_g, a_e, clocks, step, basis, None, rtol=rtol, atol=atol
            )
            clocks = clocks + step.duration
        norms = np.sum(np.abs(a_g) ** 2 + np.abs(a_e) ** 2, axis=1)
        max_norm_err = max(max_norm_err, float(np.max(np.abs(1.0 - norms))))
        signal += weight * np.sum(np.abs(a_e[:, start_idx]) ** 2, axis=1)

    hi, lo = float(signal.max()), float(signal.min())
    contrast = (hi - lo) / (hi + lo) if hi + lo > 0 else 0.0
    a, b, omega, phi, r2 = fit_fringe(T_grid, signal, omega_est)
    return FringeScan(
        T_values=T_grid,
        signal=signal,
        contrast=contrast,
        fitted_angular_frequency=omega,
        fitted_phase_offset=phi,
        fit_offset=a,
        fit_amplitude=b,
        fit_variance_fraction=r2,
        max_norm_error=max_norm_err,
        observable=observable,
    )


def analytic_phase(
    m: int,
    T: float,
    cfg: LatticeConfig,
    pulse_phases=(0.0, 0.0, 0.0, 0.0, 0.0),
    *,
    u_source: str = "potential",
    basis: WSBasis | None = None,
) -> float:
    """Closed-form butterfly phase difference (radians).

    -4 m pi k_s/k_l + (2/hbar)(m_a g lambda_l + U_{m+1} - U_{m-1}) T
    - phi_1 + 2(phi_2 - phi_3 + phi_4) - phi_5,
    with U_w the surface (near-field + Yukawa) potential in well w,
    evaluated either at the well centers (u_source='potential') or from the
    solver energies with the gravity ladder removed (u_source='energies').
    """
    if len(pulse_phases) != 5:
        raise ConfigurationError("butterfly phase law takes 5 pulse phases")
    du = surface_difference(m, cfg, u_source=u_source, basis=basis)
    p1, p2, p3, p4, p5 = pulse_phases
    return (
        -4.0 * m * math.pi * cfg.k_probe_ratio
        + (2.0 / HBAR)
        * (cfg.atom_mass * cfg.gravity_g * cfg.lambda_lattice + du)
        * T
        - p1
        + 2.0 * (p2 - p3 + p4)
        - p5
    )


def surface_difference(
    m: int,
    cfg: LatticeConfig,
    *,
    u_source: str = "potential",
    basis: WSBasis | None = None,
) -> float:
    """U_{m+1} - U_{m-1} in joules, from the configured surface model or
    from solver energies (ladder part removed)."""
    if u_source == "potential":
        if cfg.surface_model.is_off:
            return 0.0
        u_hi = surface_potential(cfg.well_center(m + 1), cfg.surface_model)
        u_lo = surface_potential(cfg.well_center(m - 1), cfg.surface_model)
        return float(u_hi - u_lo)
    if u_source == "energies":
        if basis is None:
            raise UsageError("u_source='energies' requires a basis")
        e = basis.energies
        de = e[basis.index_of(m + 1)] - e[basis.index_of(m - 1)]
        return float(
            cfg.to_si(de) + cfg.atom_mass * cfg.gravity_g * cfg.lambda_lattice
        )
    raise ConfigurationError(f"unknown u_source {u_source!r}")


def analytic_fringe_frequency(
    m: int,
    cfg: LatticeConfig,
    *,
    u_source: str = "potential",
    basis: WSBasis | None = None,
) -> float:
    """Slope of the phase law: (2/hbar)(m_a g lambda_l + U_{m+1} - U_{m-1})."""
    du = surface_difference(m, cfg, u_source=u_source, basis=basis)
    return (
        2.0
        / HBAR
        * (cfg.atom_mass * cfg.gravity_g * cfg.lambda_lattice + du)
    )


def contrast_vs_well(
    scheme: str,
    wells,
    T_grid,
    cfg: LatticeConfig,
    basis: WSBasis,
    store: CalibrationStore,
    *,
    tone_mode: str = "dual",
    auto_calibrate: bool = False,
    rtol=DEFAULT_RTOL,
    atol=DEFAULT_ATOL,
):
    """Fringe contrast per starting well; near-surface wells use their own
    per-well Raman frequencies through the per-well calibration."""
    rows = []
    for m in wells:
        if auto_calibrate:
            label = f"{scheme}:{tone_mode}"
            if CalibrationStore.key(label, m, 0, 0) not in store.durations:
                calibrate_scheme(
                    scheme, m, cfg, basis, store, tone_mode=tone_mode,
                    rtol=rtol, atol=atol,
                )
        scan = scan_fringes(
            scheme,
            m,
            T_grid,
            cfg,
            basis,
            store,
            tone_mode=tone_mode,
            rtol=rtol,
            atol=atol,
        )
        rows.append(
            {
                "well": m,
                "contrast": scan.contrast,
                "fitted_angular_frequency": scan.fitted_angular_frequency,
                "fitted_phase_offset": scan.fitted_phase_offset,
                "fit_variance_fraction": scan.fit_variance_fraction,
                "max_norm_error": scan.max_norm_error,
            }
        )
    return rows
