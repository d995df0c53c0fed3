"""Interferometer pulse programs and pulse-duration calibration.

Two preset schemes are provided, both splitting the atom from well m into
wells m-1 and m+1 and recombining it in m:

butterfly (5 pulses): uw pi/2 -> Raman pi (split) -> free T -> uw pi ->
    free T -> Raman pi (return) -> uw pi/2.  The return Raman tones are the
    frequency-mirrored pair, so each arm accumulates a well-index-dependent
    probe phase.

symmetric (6 pulses): uw pi/2 -> Raman pi -> free T -> uw pi -> uw pi ->
    free T -> Raman pi (same tones as the split) -> uw pi/2.  The second
    microwave pi restores the internal states so both Raman pulses drive
    identical transitions on each arm and the well-index phase cancels.

Durations come from a calibration store filled by walking the sequence
pulse by pulse: each duration is located by bisection on the population
crossing (pi/2) or on the sign change of the target-population derivative
(pi), taking as initial condition the end of the previous pulse.  Within a
dual-tone Raman pulse the two tones are calibrated independently and each
switches off at its own time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .couplings import coupling_table, microwave_table
from .dynamics import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    AmplitudeSet,
    Pulse,
    Tone,
    _evolve_arrays,
    evolve_free,
    evolve_pulse,
    population_of,
)
from .errors import CalibrationError, ConfigurationError, UsageError
from .solver import WSBasis

CAL_RESOLUTION = 1e-6  # seconds


@dataclass(frozen=True)
class FreeEvolution:
    """Free flight for time T; T=None marks the scan variable of a fringe scan."""

    T: float | None


@dataclass(frozen=True)
class InitialCondition:
    """Starting population: one well, a coherent superposition, or an
    incoherent mixture (probability-weighted independent runs)."""

    kind: str
    wells: tuple
    weights: tuple = ()

    def __post_init__(self):
        if self.kind not in ("single", "coherent", "incoherent"):
            raise ConfigurationError(f"unknown initial condition kind {self.kind!r}")
        if self.kind == "single" and len(self.wells) != 1:
            raise ConfigurationError("single initial condition takes one well")
        if self.kind != "single" and len(self.weights) != len(self.wells):
            raise ConfigurationError("need one weight per well")

    def branches(self, basis: WSBasis):
        """List of (probability, AmplitudeSet) to run independently."""
        if self.kind == "single":
            return [(1.0, AmplitudeSet.ground_state(basis, self.wells[0]))]
        if self.kind == "coherent":
            weights = dict(zip(self.wells, self.weights))
            return [(1.0, AmplitudeSet.superposition(basis, weights))]
        probs = np.array([abs(w) for w in self.weights], dtype=float)
        probs = probs / probs.sum()
        return [
            (float(p), AmplitudeSet.ground_state(basis, w))
            for p, w in zip(probs, self.wells)
        ]


@dataclass(frozen=True)
class PulseProgram:
    """Ordered pulses and free evolutions with a starting condition."""

    steps: tuple
    start: InitialCondition
    scheme: str
    well: int
    basis_hash: str

    def pulses(self):
        return [s for s in self.steps if isinstance(s, Pulse)]

    def total_pulse_duration(self) -> float:
        return sum(p.duration for p in self.pulses())

    def describe(self) -> str:
        """Human-readable step list (kind, targets, tone specs, durations)."""
        lines = [
            f"# program scheme={self.scheme} well={self.well} "
            f"basis={self.basis_hash}",
            f"# start {self.start.kind} wells={list(self.start.wells)} "
            f"weights={list(self.start.weights)}",
        ]
        for i, step in enumerate(self.steps):
            if isinstance(step, FreeEvolution):
                t = "T" if step.T is None else f"{step.T:.6g} s"
                lines.append(f"{i:2d}  free        {t}")
                continue
            tones = "; ".join(
                f"target={t.target or ''} offset={t.frequency_offset or ''} "
                f"Omega={t.rabi_rate:g} ks/kl={t.k_probe_ratio:g} "
                f"phase={t.phase:g} dur={t.duration if t.duration is not None else 'pulse'}"
                for t in step.tones
            )
            lines.append(f"{i:2d}  {step.kind:10s} dur={step.duration:.6f} s  [{tones}]")
        return "\n".join(lines)


class CalibrationStore:
    """Keyed pulse durations: config hash -> {key: seconds}; JSON persistable."""

    def __init__(self, config_hash: str, durations: dict | None = None):
        self.config_hash = config_hash
        self.durations = dict(durations or {})

    @staticmethod
    def key(scheme: str, well: int, pulse_idx: int, tone_idx: int = 0) -> str:
        return f"{scheme}:{well}:{pulse_idx}:{tone_idx}"

    def get(self, scheme: str, well: int, pulse_idx: int, tone_idx: int = 0) -> float:
        k = self.key(scheme, well, pulse_idx, tone_idx)
        try:
            return self.durations[k]
        except KeyError:
            raise CalibrationError(
                f"missing calibration {k!r} for config {self.config_hash}; "
                f"run the calibrate step first"
            )

    def put(self, scheme, well, pulse_idx, tone_idx, duration: float) -> None:
        self.durations[self.key(scheme, well, pulse_idx, tone_idx)] = float(duration)

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(
                {"config_hash": self.config_hash, "durations": self.durations},
                f,
                indent=2,
                sort_keys=True,
            )

    @classmethod
    def load(cls, path) -> "CalibrationStore":
        with open(path) as f:
            data = json.load(f)
        return cls(data["config_hash"], data["durations"])


# -- calibration ---------------------------------------------------------


def calibrate_duration(
    pulse_template: Pulse,
    objective: str,
    state: AmplitudeSet,
    basis: WSBasis,
    *,
    source,
    target,
    tables=None,
    bracket: float | None = None,
    resolution: float = CAL_RESOLUTION,
    rtol=DEFAULT_RTOL,
    atol=DEFAULT_ATOL,
) -> float:
    """Locate a pulse duration by bisection on a population event.

    objective 'half_transfer': first time the source and target populations
    cross.  objective 'full_transfer': first maximum of the target
    population, located by bisection on the sign change of its derivative.
    source and target are (well, level) pairs observed while the template's
    tones all stay on.  The search bracket defaults to 1.25 pi / Omega_eff
    estimated from the relevant coupling element.
    """
    if objective not in ("half_transfer", "full_transfer"):
        raise ConfigurationError(f"unknown calibration objective {objective!r}")
    tones = tuple(replace(t, duration=None) for t in pulse_template.tones)
    if bracket is None:
        if tables is None:
            tables = [
                coupling_table(basis, t.k_probe_ratio, t.rabi_rate) for t in tones
            ]
        omega_eff = max(
            2.0 * abs(tb.element(source[0], target[0])) for tb in tables
        )
        if omega_eff == 0.0:
            raise CalibrationError(
                f"no coupling between wells {source[0]} and {target[0]}"
            )
        bracket = 1.25 * math.pi / omega_eff
    probe = Pulse(kind=pulse_template.kind, tones=tones, duration=bracket)

    out_g, out_e, (times, amps) = _evolve_arrays(
        state.a_g[None],
        state.a_e[None],
        np.array([state.clock]),
        probe,
        basis,
        tables,
        rtol=rtol,
        atol=atol,
        record=True,
    )
    times = times - state.clock  # pulse-local
    i_src = (0 if source[1] == "g" else 1, basis.index_of(source[0]))
    i_tgt = (0 if target[1] == "g" else 1, basis.index_of(target[0]))
    p_src = np.abs(amps[:, i_src[0], i_src[1]]) ** 2
    p_tgt = np.abs(amps[:, i_tgt[0], i_tgt[1]]) ** 2

    def resume(i: int, dt: float) -> np.ndarray:
        """Amplitudes at pulse-local time times[i] + dt."""
        if dt <= 0.0:
            return amps[i]
        seg = Pulse(kind=probe.kind, tones=tones, duration=dt)
        g, e = _evolve_arrays(
            amps[i, 0][None],
            amps[i, 1][None],
            np.array([state.clock + times[i]]),
            seg,
            basis,
            tables,
            rtol=rtol,
            atol=atol,
        )
        return np.stack([g[0], e[0]])

    def populations_at(i: int, dt: float):
        a = resume(i, dt)
        return (
            float(abs(a[i_src[0], i_src[1]]) ** 2),
            float(abs(a[i_tgt[0], i_tgt[1]]) ** 2),
        )

    if objective == "half_transfer":
        diff = p_src - p_tgt
        sign0 = math.copysign(1.0, diff[0])
        idx = np.nonzero(np.sign(diff) != sign0)[0]
        if len(idx) == 0:
            raise CalibrationError(
                "populations never cross inside the bracket",
                trace=(times, p_src, p_tgt),
            )
        i = int(idx[0]) - 1
        lo, hi = 0.0, times[i + 1] - times[i]
        while hi - lo > resolution:
            mid = 0.5 * (lo + hi)
            s, t = populations_at(i, mid)
            if math.copysign(1.0, s - t) == sign0:
                lo = mid
            else:
                hi = mid
        return float(times[i] + 0.5 * (lo + hi))

    # full_transfer: bisection on the derivative sign change around the
    # first sampled maximum (robust near the flat top)
    i_max = int(np.argmax(p_tgt))
    if i_max == 0 or i_max == len(times) - 1:
        raise CalibrationError(
            "target population has no interior maximum inside the bracket",
            trace=(times, p_src, p_tgt),
        )
    i = i_max - 1
    lo, hi = 0.0, times[i_max + 1] - times[i]
    delta = max(resolution / 4.0, 1e-9)

    def rising(dt: float) -> bool:
        _, t_plus = populations_at(i, dt + delta)
        _, t_minus = populations_at(i, max(dt - delta, 0.0))
        return t_plus >= t_minus

    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if rising(mid):
            lo = mid
        else:
            hi = mid
    return float(times[i] + 0.5 * (lo + hi))


# -- scheme presets ------------------------------------------------------


def _microwave_tone(cfg, m: int) -> Tone:
    return Tone(rabi_rate=cfg.rabi_omega, k_probe_ratio=0.0, target=(m, m))


def _raman_tones(cfg, m: int, direction: str, tone_mode: str, basis: WSBasis):
    """Tone specs for a Raman pulse at well m.

    direction 'split' drives g_m -> e_{m+1} and e_m -> g_{m-1}; 'mirror'
    drives the frequency-mirrored return pair (g_{m+1} -> e_m and
    e_{m-1} -> g_m).  tone_mode 'single' replaces the pair with one tone at
    the mean frequency.
    """
    k = cfg.k_probe_ratio
    omega = cfg.rabi_omega
    if direction == "split":
        pair = [(m - 1, m), (m, m + 1)]
    elif direction == "mirror":
        pair = [(m, m - 1), (m + 1, m)]
    else:
        raise ConfigurationError(f"unknown raman direction {direction!r}")
    if tone_mode == "dual":
        return tuple(
            Tone(rabi_rate=omega, k_probe_ratio=k, target=t) for t in pair
        )
    if tone_mode == "single":
        mean = 0.5 * sum(
            Tone(rabi_rate=omega, k_probe_ratio=k, target=t).offset(basis)
            for t in pair
        )
        return (Tone(rabi_rate=omega, k_probe_ratio=k, frequency_offset=mean),)
    raise ConfigurationError(f"unknown tone_mode {tone_mode!r}")


# (pulse kind, raman direction or None, calibration plan) per scheme; the
# calibration plan lists (objective, source, target) per tone as offsets
# from the starting well m.
_SCHEMES = {
    "butterfly": (
        ("microwave", None, [("half_transfer", (0, "g"), (0, "e"))]),
        (
            "raman",
            "split",
            [
                ("full_transfer", (0, "e"), (-1, "g")),
                ("full_transfer", (0, "g"), (+1, "e")),
            ],
        ),
        ("free", None, None),
        ("microwave", None, [("full_transfer", (+1, "e"), (+1, "g"))]),
        ("free", None, None),
        (
            "raman",
            "mirror",
            [
                ("full_transfer", (-1, "e"), (0, "g")),
                ("full_transfer", (+1, "g"), (0, "e")),
            ],
        ),
        ("microwave", None, [("full_transfer", (0, "g"), (0, "e"))]),
    ),
    "symmetric": (
        ("microwave", None, [("half_transfer", (0, "g"), (0, "e"))]),
        (
            "raman",
            "split",
            [
                ("full_transfer", (0, "e"), (-1, "g")),
                ("full_transfer", (0, "g"), (+1, "e")),
            ],
        ),
        ("free", None, None),
        ("microwave", None, [("full_transfer", (+1, "e"), (+1, "g"))]),
        ("microwave", None, [("full_transfer", (+1, "g"), (+1, "e"))]),
        ("free", None, None),
        (
            "raman",
            "split",
            [
                ("full_transfer", (-1, "g"), (0, "e")),
                ("full_transfer", (+1, "e"), (0, "g")),
            ],
        ),
        ("microwave", None, [("full_transfer", (0, "g"), (0, "e"))]),
    ),
}


def _single_tone_plan(plan):
    """For tone_mode 'single' keep one calibration target: the upward leg."""
    return [plan[-1]]


def _build_program(
    scheme: str,
    m: int,
    T: float | None,
    cfg,
    basis: WSBasis,
    store: CalibrationStore | None,
    *,
    tone_mode: str = "dual",
    pulse_phases=None,
    durations: dict | None = None,
) -> PulseProgram:
    if scheme not in _SCHEMES:
        raise ConfigurationError(f"unknown scheme {scheme!r}")
    if m < 2:
        raise ConfigurationError("starting well must be >= 2 (needs both neighbors)")
    for w in (m - 1, m, m + 1):
        if w not in basis.wells:
            raise UsageError(f"well {w} not in basis window {basis.wells}")
    steps = []
    pulse_idx = 0
    n_pulses = sum(1 for k, *_ in _SCHEMES[scheme] if k != "free")
    phases = tuple(pulse_phases) if pulse_phases is not None else (0.0,) * n_pulses
    if len(phases) != n_pulses:
        raise ConfigurationError(f"{scheme} takes {n_pulses} pulse phases")

    def stored(p_idx, t_idx):
        if durations is not None:
            return durations[(p_idx, t_idx)]
        if store is None:
            raise CalibrationError(f"no calibration store for scheme {scheme!r}")
        return store.get(f"{scheme}:{tone_mode}", m, p_idx, t_idx)

    for kind, direction, _plan in _SCHEMES[scheme]:
        if kind == "free":
            steps.append(FreeEvolution(T))
            continue
        if kind == "microwave":
            tones = (_microwave_tone(cfg, m),)
        else:
            tones = _raman_tones(cfg, m, direction, tone_mode, basis)
        tone_durs = [stored(pulse_idx, j) for j in range(len(tones))]
        dur = max(tone_durs)
        tones = tuple(
            replace(t, phase=phases[pulse_idx], duration=d)
            for t, d in zip(tones, tone_durs)
        )
        steps.append(Pulse(kind=kind, tones=tones, duration=dur))
        pulse_idx += 1
    return PulseProgram(
        steps=tuple(steps),
        start=InitialCondition(kind="single", wells=(m,)),
        scheme=scheme,
        well=m,
        basis_hash=basis.config_hash,
    )


def butterfly_program(m, T, cfg, basis, store=None, **kw) -> PulseProgram:
    """Five-pulse split/swap/return program from well m (Raman arms mirrored)."""
    return _build_program("butterfly", m, T, cfg, basis, store, **kw)


def symmetric_program(m, T, cfg, basis, store=None, **kw) -> PulseProgram:
    """Six-pulse program whose Raman pulses drive the same transitions on
    both arms, cancelling the well-index probe phase."""
    return _build_program("symmetric", m, T, cfg, basis, store, **kw)


def calibrate_scheme(
    scheme: str,
    m: int,
    cfg,
    basis: WSBasis,
    store: CalibrationStore,
    *,
    tone_mode: str = "dual",
    rtol=DEFAULT_RTOL,
    atol=DEFAULT_ATOL,
):
    """Walk a scheme pulse by pulse from well m, calibrating every tone.

    Each pulse is calibrated on the state left by the previous one (free
    evolutions contribute nothing at T=0).  Dual Raman tones are calibrated
    one at a time with the other tone off, then the composite pulse runs
    with both.  Returns report rows (pulse index, durations, populations in
    the wells of interest).
    """
    if scheme not in _SCHEMES:
        raise ConfigurationError(f"unknown scheme {scheme!r}")
    if m < 2:
        raise ConfigurationError("starting well must be >= 2")
    uw_table = microwave_table(basis, cfg.rabi_omega)
    raman_table = coupling_table(basis, cfg.k_probe_ratio, cfg.rabi_omega)
    state = AmplitudeSet.ground_state(basis, m)
    rows = []
    pulse_idx = 0
    label = f"{scheme}:{tone_mode}"
    for kind, direction, plan in _SCHEMES[scheme]:
        if kind == "free":
            state = evolve_free(state, 0.0)
            continue
        if kind == "microwave":
            tones = (_microwave_tone(cfg, m),)
            tables = [uw_table]
        else:
            tones = _raman_tones(cfg, m, direction, tone_mode, basis)
            tables = [raman_table] * len(tones)
            if tone_mode == "single":
                plan = _single_tone_plan(plan)
        durations = []
        for j, tone in enumerate(tones):
            objective, src_off, tgt_off = (
                plan[j][0],
                (m + plan[j][1][0], plan[j][1][1]),
                (m + plan[j][2][0], plan[j][2][1]),
            )
            template = Pulse(kind=kind, tones=(tone,), duration=1.0)
            d = calibrate_duration(
                template,
                objective,
                state,
                basis,
                source=src_off,
                target=tgt_off,
                tables=[tables[j]],
                rtol=rtol,
                atol=atol,
            )
            durations.append(d)
            store.put(label, m, pulse_idx, j, d)
        pulse = Pulse(
            kind=kind,
            tones=tuple(replace(t, duration=d) for t, d in zip(tones, durations)),
            duration=max(durations),
        )
        state = evolve_pulse(state, pulse, basis, tables, rtol=rtol, atol=atol)
        rows.append(
            {
                "pulse": pulse_idx + 1,
                "kind": kind,
                "durations": tuple(durations),
                "populations": {
                    (w, lvl): population_of(state, w, lvl)
                    for w in (m - 1, m, m + 1)
                    for lvl in ("g", "e")
                },
            }
        )
        pulse_idx += 1
    return rows


def run_program(
    program: PulseProgram,
    basis: WSBasis,
    *,
    rtol=DEFAULT_RTOL,
    atol=DEFAULT_ATOL,
    record=False,
):
    """Execute a program; returns a list of (weight, final AmplitudeSet).

    With record set (single-branch programs only) returns
    (branches, (times, amplitude samples)) for trajectory dumps.
    """
    if program.basis_hash != basis.config_hash:
        raise UsageError("program was built for a different basis")
    table_cache: dict = {}

    def tables_for(pulse: Pulse):
        out = []
        for tone in pulse.tones:
            key = (tone.k_probe_ratio, tone.rabi_rate)
            if key not in table_cache:
                table_cache[key] = coupling_table(basis, *key)
            out.append(table_cache[key])
        return out

    branches = program.start.branches(basis)
    finals = []
    traj = None
    for weight, state in branches:
        traj_t, traj_a = [], []
        for step in program.steps:
            if isinstance(step, FreeEvolution):
                if step.T is None:
                    raise UsageError("program has an unresolved scan variable T")
                state = evolve_free(state, step.T)
                continue
            if record:
                state, (ts, amps) = evolve_pulse(
                    state,
                    step,
                    basis,
                    tables_for(step),
                    rtol=rtol,
                    atol=atol,
                    record=True,
                )
                traj_t.append(ts)
                traj_a.append(amps)
            else:
                state = evolve_pulse(
                    state, step, basis, tables_for(step), rtol=rtol, atol=atol
                )
        finals.append((weight, state))
        if record and traj is None:
            traj = (np.concatenate(traj_t), np.concatenate(traj_a))
    return (finals, traj) if record else finals
