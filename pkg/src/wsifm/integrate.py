"""Embedded adaptive Runge-Kutta integrator (Dormand-Prince 5(4)).

Propagates the 5th-order solution with the 4th-order difference as local
error estimate.  Works on complex arrays of any shape, so a whole batch of
independent trajectories can be advanced in one call.  A hard step cap
(max_step) lets callers bound the phase advance of oscillatory terms per
step regardless of the error estimate.
"""

from __future__ import annotations

import numpy as np

from .errors import IntegrationError

# Dormand-Prince tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
_E = tuple(b5 - b4 for b5, b4 in zip(_B5, _B4))

MIN_STEP_FACTOR = 1e-14  # fraction of the span below which we declare stiffness


def _error_norm(err, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))


def _initial_step(f0, y0, span, max_step, rtol, atol):
    scale = atol + rtol * np.abs(y0)
    d0 = float(np.sqrt(np.mean(np.abs(y0 / scale) ** 2)))
    d1 = float(np.sqrt(np.mean(np.abs(f0 / scale) ** 2)))
    h = 0.01 * d0 / d1 if d1 > 0 and d0 > 0 else span * 1e-6
    return min(h, span, max_step)


def integrate_adaptive(
    f,
    t0: float,
    t1: float,
    y0: np.ndarray,
    *,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    max_step: float = np.inf,
    first_step: float | None = None,
    record: bool = False,
):
    """Advance y' = f(t, y) from t0 to t1 (t1 >= t0).

    Returns the final y, or (y, times, samples) when record is set; the
    samples are taken at every accepted step.  Raises IntegrationError if
    the controller drives the step below MIN_STEP_FACTOR of the span.
    """
    span = t1 - t0
    y = np.array(y0, dtype=complex)
    if span == 0.0:
        return (y, np.array([t0]), y[None].copy()) if record else y
    if span < 0.0:
        raise ValueError("integrate_adaptive requires t1 >= t0")

    t = t0
    k = [None] * 7
    k[0] = np.asarray(f(t, y), dtype=complex)
    h = first_step or _initial_step(k[0], y, span, max_step, rtol, atol)
    h = min(h, max_step, span)

    times = [t0]
    samples = [y.copy()]
    while t < t1:
        h = min(h, t1 - t)
        if h < MIN_STEP_FACTOR * span:
            raise IntegrationError(
                f"step size underflow at t={t:.6e} (dt={h:.3e})", t=t, dt=h
            )
        for i in range(1, 7):
            yi = y + h * sum(a * k[j] for j, a in enumerate(_A[i]) if a != 0.0)
            k[i] = np.asarray(f(t + _C[i] * h, yi), dtype=complex)
        y_new = yi  # stage 7 input is the 5th-order solution (FSAL)
        err = h * sum(e * k[j] for j, e in enumerate(_E) if e != 0.0)
        norm = _error_norm(err, y, y_new, rtol, atol)
        if norm <= 1.0:
            t += h
            y = y_new
            k[0] = k[6]  # FSAL
            if record:
                times.append(t)
                samples.append(y.copy())
            factor = 5.0 if norm == 0.0 else min(5.0, max(0.2, 0.9 * norm**-0.2))
        else:
            factor = max(0.1, 0.9 * norm**-0.2)
        h = min(h * factor, max_step)

    if record:
        return y, np.array(times), np.stack(samples)
    return y
