"""Interaction-picture amplitude dynamics under probe pulses.

For amplitudes a_m^g, a_m^e over the retained wells, each tone j (Rabi rate
Omega_j, frequency offset theta_j = omega_j - omega_eg, phase phi_j,
wavevector ratio k_j) contributes, after the rotating-wave approximation,

    i da_m^g/dt = sum_j sum_m' (Omega_j/2) C^j_{m,m'} a_m'^e
                  * exp(+i Delta^j_{m',m} t) exp(-i phi_j)
    i da_m^e/dt = sum_j sum_m' (Omega_j/2) conj(C^j_{m,m'}) a_m'^g
                  * exp(-i Delta^j_{m,m'} t) exp(+i phi_j)

with C^j_{m,m'} = <phi_m|e^{-i k_j z}|phi_m'> and
Delta^j_{m,m'} = theta_j - (E_m - E_m')/hbar.  All retained wells stay
coupled; nothing is truncated to the resonant pair.

The time t in the phase factors is the GLOBAL clock measured from the start
of the pulse sequence.  Pulses must never reset it: the interferometric
phase lives entirely in these factors, and free evolution acts only by
advancing the clock.

Square pulses only; a composite Raman pulse may carry two tones that switch
off independently at their own calibrated times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .couplings import CouplingTable, coupling_table
from .errors import ConfigurationError, IntegrationError, UsageError
from .integrate import integrate_adaptive
from .solver import WSBasis

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
# Cap on the phase advance |Delta| * dt of any coupled pair per step
DEFAULT_CAP_PHASE = 0.1
# Couplings below this fraction of Omega/2 do not constrain the step cap
CAP_COUPLING_FLOOR = 1e-6


@dataclass(frozen=True)
class Tone:
    """One probe tone of a pulse.

    The frequency is fixed either by target=(m_from, m_to), making the tone
    resonant with the g(m_from) <-> e(m_to) transition (offset
    theta = (E_to - E_from)/hbar), or by an explicit frequency_offset
    theta = omega_s - omega_eg in rad/s.
    """

    rabi_rate: float
    k_probe_ratio: float = 0.0
    target: tuple | None = None
    frequency_offset: float | None = None
    phase: float = 0.0
    duration: float | None = None

    def __post_init__(self):
        if self.rabi_rate < 0:
            raise ConfigurationError("rabi_rate must be nonnegative")
        if (self.target is None) == (self.frequency_offset is None):
            raise ConfigurationError(
                "exactly one of target or frequency_offset must be set"
            )
        object.__setattr__(self, "phase", float(self.phase) % (2 * math.pi))

    def offset(self, basis: WSBasis) -> float:
        """Tone frequency offset omega_s - omega_eg (rad/s)."""
        if self.frequency_offset is not None:
            return self.frequency_offset
        m_from, m_to = self.target
        eps = basis.energies_rad_s
        return float(eps[basis.index_of(m_to)] - eps[basis.index_of(m_from)])


@dataclass(frozen=True)
class Pulse:
    """A square pulse: one microwave tone, or one or two Raman tones."""

    kind: str
    tones: tuple
    duration: float

    def __post_init__(self):
        if self.kind not in ("microwave", "raman"):
            raise ConfigurationError(f"unknown pulse kind {self.kind!r}")
        if self.duration <= 0:
            raise ConfigurationError("pulse duration must be positive")
        if self.kind == "microwave":
            if len(self.tones) != 1 or self.tones[0].k_probe_ratio != 0.0:
                raise ConfigurationError(
                    "microwave pulses carry exactly one tone with k_probe_ratio=0"
                )
        elif not 1 <= len(self.tones) <= 2:
            raise ConfigurationError("raman pulses carry one or two tones")
        for tone in self.tones:
            if tone.duration is not None and not 0 < tone.duration <= self.duration:
                raise ConfigurationError(
                    "tone duration must lie within the pulse duration"
                )


@dataclass(frozen=True)
class AmplitudeSet:
    """Interaction-picture amplitudes over the retained wells, plus the
    global clock (seconds since sequence start)."""

    a_g: np.ndarray
    a_e: np.ndarray
    clock: float
    wells: tuple
    basis_hash: str

    def __post_init__(self):
        if self.a_g.shape != self.a_e.shape or self.a_g.shape != (len(self.wells),):
            raise ConfigurationError("amplitude vectors must match the well window")

    def norm(self) -> float:
        return float(np.sum(np.abs(self.a_g) ** 2 + np.abs(self.a_e) ** 2))

    @classmethod
    def ground_state(cls, basis: WSBasis, well: int, clock: float = 0.0):
        """All population in |g> of one well (the standard initial condition)."""
        n = len(basis.wells)
        a_g = np.zeros(n, dtype=complex)
        a_g[basis.index_of(well)] = 1.0
        return cls(
            a_g=a_g,
            a_e=np.zeros(n, dtype=complex),
            clock=clock,
            wells=basis.wells,
            basis_hash=basis.config_hash,
        )

    @classmethod
    def superposition(cls, basis: WSBasis, weights: dict, clock: float = 0.0):
        """Coherent ground-state superposition; weights maps well -> amplitude."""
        n = len(basis.wells)
        a_g = np.zeros(n, dtype=complex)
        for well, amp in weights.items():
            a_g[basis.index_of(well)] = amp
        nrm = math.sqrt(float(np.sum(np.abs(a_g) ** 2)))
        if nrm == 0:
            raise ConfigurationError("superposition weights are all zero")
        return cls(
            a_g=a_g / nrm,
            a_e=np.zeros(n, dtype=complex),
            clock=clock,
            wells=basis.wells,
            basis_hash=basis.config_hash,
        )


def populations(state: AmplitudeSet):
    """Rows (well, level, probability) for every nonzero entry."""
    rows = []
    for level, amps in (("g", state.a_g), ("e", state.a_e)):
        for well, amp in zip(state.wells, amps):
            p = float(abs(amp) ** 2)
            if p > 0.0:
                rows.append((well, level, p))
    return rows


def population_of(state: AmplitudeSet, well: int, level: str) -> float:
    amps = state.a_g if level == "g" else state.a_e
    return float(abs(amps[state.wells.index(well)]) ** 2)


def evolve_free(state: AmplitudeSet, T: float) -> AmplitudeSet:
    """Free evolution: amplitudes unchanged, clock advanced by T.

    The physical phases E_m T / hbar re-enter through the exp(i Delta t)
    factors of subsequent pulses; this is the fringe mechanism.
    """
    if T < 0:
        raise ConfigurationError("free evolution time must be nonnegative")
    return replace(state, clock=state.clock + T)


def _tone_kernels(pulse: Pulse, basis: WSBasis, tables):
    """Per-tone (rabi matrix, conj matrix, theta, phase, t_off) tuples."""
    if tables is None:
        tables = [
            coupling_table(basis, tone.k_probe_ratio, tone.rabi_rate)
            for tone in pulse.tones
        ]
    if len(tables) != len(pulse.tones):
        raise UsageError("need one coupling table per tone")
    kernels = []
    for tone, table in zip(pulse.tones, tables):
        if table.wells != basis.wells:
            raise UsageError("coupling table wells do not match the basis window")
        if table.k_probe_ratio != tone.k_probe_ratio:
            raise UsageError("coupling table k_s does not match the tone")
        if table.rabi_omega != tone.rabi_rate:
            raise UsageError("coupling table Rabi rate does not match the tone")
        m = np.ascontiguousarray(table.elements)
        t_off = tone.duration if tone.duration is not None else pulse.duration
        kernels.append((m, np.conj(m), tone.offset(basis), tone.phase, t_off))
    return kernels


def _step_cap(kernels, eps):
    """Largest detuning |Delta| among pairs with non-negligible coupling;
    the step is capped so this phase advances < cap_phase rad per step."""
    gaps = eps[:, None] - eps[None, :]
    delta_max = 0.0
    for m, _, theta, _, _ in kernels:
        omega_half = float(np.max(np.abs(m)))
        if omega_half == 0.0:
            continue
        mask = np.abs(m) > CAP_COUPLING_FLOOR * omega_half
        if mask.any():
            delta_max = max(delta_max, float(np.max(np.abs(theta - gaps)[mask])))
    return delta_max


def _evolve_arrays(
    a_g,
    a_e,
    clocks,
    pulse: Pulse,
    basis: WSBasis,
    tables=None,
    *,
    rtol=DEFAULT_RTOL,
    atol=DEFAULT_ATOL,
    cap_phase=DEFAULT_CAP_PHASE,
    record=False,
):
    """Batched pulse propagation.

    a_g, a_e: (B, N) complex arrays; clocks: (B,) global clock per
    trajectory.  Returns (a_g, a_e) after the pulse, plus a trajectory
    (absolute times, amplitude samples of shape (n_t, 2, N)) when record is
    set (batch size 1 only).
    """
    kernels = _tone_kernels(pulse, basis, tables)
    eps = basis.energies_rad_s
    clocks = np.asarray(clocks, dtype=float)

    y = np.stack([a_g, a_e], axis=1).astype(complex)  # (B, 2, N)
    boundaries = sorted({k[4] for k in kernels} | {pulse.duration})
    traj_t, traj_y = [], []
    seg_start = 0.0
    for seg_end in boundaries:
        if seg_end <= seg_start:
            continue
        active = [k for k in kernels if k[4] > seg_start]
        if not active:
            break  # all tones off; remaining time is free evolution
        delta_max = _step_cap(active, eps)
        max_step = cap_phase / delta_max if delta_max > 0.0 else np.inf

        def rhs(s, y, active=active):
            t_abs = clocks + s
            w = np.exp(eps * (-1j * t_abs[:, None]))
            cw = np.conj(w)
            ag = y[:, 0, :]
            ae = y[:, 1, :]
            dg = np.zeros_like(ag)
            de = np.zeros_like(ae)
            for m, mc, theta, phi, _ in active:
                s_j = np.exp(1j * (theta * t_abs - phi))
                dg += s_j[:, None] * ((w * ae) @ m)
                de += np.conj(s_j)[:, None] * ((w * ag) @ mc)
            return np.stack([-1j * cw * dg, -1j * cw * de], axis=1)

        try:
            if record:
                y, ts, ys = integrate_adaptive(
                    rhs,
                    seg_start,
                    seg_end,
                    y,
                    rtol=rtol,
                    atol=atol,
                    max_step=max_step,
                    record=True,
                )
                traj_t.append(np.asarray(ts) + clocks[0])
                traj_y.append(ys[:, 0])
            else:
                y = integrate_adaptive(
                    rhs, seg_start, seg_end, y, rtol=rtol, atol=atol, max_step=max_step
                )
        except IntegrationError as exc:
            phase_per_step = delta_max * exc.dt if exc.dt else 0.0
            raise IntegrationError(
                f"stiff detuning during {pulse.kind} pulse: largest |Delta|*dt "
                f"= {phase_per_step:.3e} at t={exc.t}",
                t=exc.t,
                dt=exc.dt,
            ) from exc
        seg_start = seg_end

    out_g, out_e = y[:, 0, :], y[:, 1, :]
    if record:
        times = np.concatenate(traj_t) if traj_t else np.array([clocks[0]])
        amps = np.concatenate(traj_y) if traj_y else y[:1].copy()
        return out_g, out_e, (times, amps)
    return out_g, out_e


def evolve_pulse(
    state: AmplitudeSet,
    pulse: Pulse,
    basis: WSBasis,
    tables=None,
    *,
    rtol=DEFAULT_RTOL,
    atol=DEFAULT_ATOL,
    cap_phase=DEFAULT_CAP_PHASE,
    record=False,
):
    """Propagate one state through a pulse; the clock advances by the pulse
    duration and is never reset."""
    if state.basis_hash != basis.config_hash or state.wells != basis.wells:
        raise UsageError("state and basis belong to different configurations")
    result = _evolve_arrays(
        state.a_g[None],
        state.a_e[None],
        np.array([state.clock]),
        pulse,
        basis,
        tables,
        rtol=rtol,
        atol=atol,
        cap_phase=cap_phase,
        record=record,
    )
    if record:
        out_g, out_e, traj = result
    else:
        out_g, out_e = result
    new = replace(
        state, a_g=out_g[0], a_e=out_e[0], clock=state.clock + pulse.duration
    )
    return (new, traj) if record else new
