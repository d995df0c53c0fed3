"""Probe-induced coupling matrix elements between lattice-ladder states.

The inter-well Rabi rate for a probe of effective wavevector k_s is
(Omega/2) <phi_m| e^{-i k_s z} |phi_m'>; the integral is evaluated by the
trapezoid rule on the solver grid, which is spectrally accurate here since
the wavefunctions vanish at both ends.

The probe and lattice share one axial coordinate (called z throughout).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import UsageError
from .potentials import GridSpec, LatticeConfig
from .solver import WSBasis, WSState, solve_states

logger = logging.getLogger(__name__)


def coupling_element(a: WSState, b: WSState, k_ratio: float) -> complex:
    """<phi_a| e^{-i k_s z} |phi_b> with k_s = k_ratio * k_l.

    Both states must live on the same grid.  |result| <= 1.
    """
    if not a.grid.same_as(b.grid):
        raise UsageError("coupling_element: states sampled on different grids")
    kernel = np.exp(-1j * k_ratio * a.grid.zeta)
    return complex(np.sum(a.wavefunction * b.wavefunction * kernel) * a.grid.h)


@dataclass(frozen=True)
class CouplingTable:
    """Rabi-rate matrix (Omega/2) <phi_m|e^{-i k_s z}|phi_m'> over a well window.

    elements[i, j] couples wells[i] and wells[j]; the matrix is complex
    symmetric (real wavefunctions), so |elements| is Hermitian and every
    magnitude is bounded by Omega/2.
    """

    elements: np.ndarray
    wells: tuple
    k_probe_ratio: float
    rabi_omega: float
    basis_hash: str

    def element(self, well_a: int, well_b: int) -> complex:
        return complex(
            self.elements[self.wells.index(well_a), self.wells.index(well_b)]
        )


def coupling_table(basis: WSBasis, k_ratio: float, rabi_omega: float) -> CouplingTable:
    """All pairwise Rabi elements of a basis for one probe tone."""
    phi = basis.wavefunctions
    kernel = np.exp(-1j * k_ratio * basis.grid.zeta)
    c = (phi * kernel) @ phi.T * basis.grid.h
    c = 0.5 * (c + c.T)  # integrand is (m, m')-symmetric; enforce exactly
    return CouplingTable(
        elements=0.5 * rabi_omega * c,
        wells=basis.wells,
        k_probe_ratio=k_ratio,
        rabi_omega=rabi_omega,
        basis_hash=basis.config_hash,
    )


def microwave_table(basis: WSBasis, rabi_omega: float) -> CouplingTable:
    """Coupling table in the k_s -> 0 limit (microwave pulse)."""
    return coupling_table(basis, 0.0, rabi_omega)


def rabi_vs_depth_scan(
    cfg: LatticeConfig,
    depths,
    k_ratio: float | None = None,
    offsets=(0, 1, 2, 3),
    *,
    reference_well: int = 12,
    buffer_wells: int = 8,
    points_per_period: int = 256,
):
    """Normalized |<phi_m|e^{-i k_s z}|phi_{m+dm}>| versus lattice depth.

    Solves a fresh surface-free basis per depth in a translationally
    invariant window and evaluates the couplings from reference_well.
    Depths whose states fail to localize are skipped and logged.

    Returns a list of dict rows: {"depth": U, "C0": ..., "C1": ...}.
    """
    if k_ratio is None:
        k_ratio = cfg.k_probe_ratio
    hi = reference_well + max(offsets) + buffer_wells
    grid = GridSpec.for_wells(
        cfg.lambda_lattice, hi, buffer_periods=7, points_per_period=points_per_period
    )
    rows = []
    for depth in depths:
        if depth <= 0:
            logger.warning("skipping nonpositive depth %s", depth)
            continue
        scan_cfg = replace(
            cfg,
            depth_U=float(depth),
            surface_model=type(cfg.surface_model)(),
            grid=grid,
        )
        try:
            basis = solve_states(
                scan_cfg,
                wells=(reference_well - max(offsets) - 2, hi),
            )
        except Exception as exc:  # noqa: BLE001 - scan skips failing depths
            logger.warning("depth %.3f E_r skipped: %s", depth, exc)
            continue
        ref = basis.state(reference_well)
        row = {"depth": float(depth)}
        for dm in offsets:
            row[f"C{dm}"] = abs(
                coupling_element(ref, basis.state(reference_well + dm), k_ratio)
            )
        rows.append(row)
    return rows
