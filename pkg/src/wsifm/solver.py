"""Surface-modified Wannier-Stark states on a finite grid.

The single-particle Hamiltonian (kinetic + lattice + gravity + surface
terms) is discretized with second-order finite differences on [z_min,
z_max], with Dirichlet conditions one grid spacing outside both ends; the
lower end represents the hard wall of the reflecting surface.

In a tilted finite box every lattice-ladder state is strictly a resonance,
but for the depths and trapping times of interest the decay is irrelevant,
so states are treated as stationary.  The solver retains one lowest-band
eigenvector per requested well, identified by its mean position: at shallow
depths (a few E_r) the ladder states extend over several wells, so the mean
position, not the probability maximum, is the robust well label.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import ConfigurationError, LocalizationError, UsageError
from .potentials import LatticeConfig, total_potential

logger = logging.getLogger(__name__)

# Grid-resolution bound for the second-order kinetic stencil
MAX_H_ZETA = 0.2

# Near-wall clip (E_r) applied to the potential before diagonalization: the
# 1/z^3 term diverges at the wall and would otherwise flood the low spectrum
# with unresolvable wall-bound states.  Clipped samples only affect states
# that the localization filter rejects anyway.
DEFAULT_POTENTIAL_FLOOR = -100.0


@dataclass(frozen=True)
class GridRef:
    """Shared grid arrays for one basis (SI positions and k_l-scaled)."""

    z: np.ndarray
    zeta: np.ndarray
    h: float
    h_zeta: float

    @property
    def n_periods(self) -> int:
        return int(self.zeta[-1] / math.pi)

    def same_as(self, other: "GridRef") -> bool:
        return self is other or (
            self.z.shape == other.z.shape
            and self.h == other.h
            and self.z[0] == other.z[0]
        )


@dataclass(frozen=True)
class Tridiagonal:
    """Symmetric tridiagonal Hamiltonian in recoil units."""

    diagonal: np.ndarray
    off_diagonal: np.ndarray
    grid: GridRef


@dataclass(frozen=True)
class WSState:
    """One localized lattice-ladder eigenstate.

    well_index : 1-based index of the lattice period the state belongs to
        (period m is centered on the potential minimum at z = m lambda_l/2)
    energy : eigenvalue in E_r
    wavefunction : real samples on the grid, normalized to unit L2 norm in z
    norm : quadrature of |phi|^2 dz (1 up to grid accuracy)
    """

    well_index: int
    energy: float
    wavefunction: np.ndarray
    norm: float
    grid: GridRef


@dataclass(frozen=True)
class WSBasis:
    """Ordered set of Wannier-Stark states over a consecutive well window."""

    states: tuple
    grid: GridRef
    config_hash: str
    cfg: LatticeConfig

    @property
    def wells(self) -> tuple:
        return tuple(s.well_index for s in self.states)

    @property
    def energies(self) -> np.ndarray:
        """Eigenvalues in E_r, ordered by well index."""
        return np.array([s.energy for s in self.states])

    @property
    def energies_rad_s(self) -> np.ndarray:
        """Eigenvalues as angular frequencies E_m / hbar (rad/s)."""
        return self.energies * self.cfg.recoil_angular_frequency

    @property
    def wavefunctions(self) -> np.ndarray:
        """Array of shape (n_states, n_grid)."""
        return np.stack([s.wavefunction for s in self.states])

    def state(self, well: int) -> WSState:
        try:
            return self.states[self.wells.index(well)]
        except ValueError:
            raise UsageError(f"well {well} not in basis window {self.wells}")

    def index_of(self, well: int) -> int:
        try:
            return self.wells.index(well)
        except ValueError:
            raise UsageError(f"well {well} not in basis window {self.wells}")

    def window(self, lo: int, hi: int) -> "WSBasis":
        """Sub-basis restricted to wells lo..hi (inclusive)."""
        kept = tuple(s for s in self.states if lo <= s.well_index <= hi)
        if len(kept) != hi - lo + 1:
            raise UsageError(f"window {lo}..{hi} not fully contained in {self.wells}")
        return replace(self, states=kept)

    def with_gap_overrides(self, gaps: dict) -> "WSBasis":
        """Replace selected adjacent-well energy differences.

        gaps maps (m, m+1) -> E_m - E_{m+1} in recoil units.  The energy of
        the lowest-index well is kept fixed and the ladder is rebuilt from
        it, so unspecified gaps are preserved.  This is the injection point
        for externally computed near-surface level differences.
        """
        wells = self.wells
        current = {
            (wells[i], wells[i + 1]): self.states[i].energy
            - self.states[i + 1].energy
            for i in range(len(wells) - 1)
        }
        for key in gaps:
            if key not in current:
                raise UsageError(f"gap override {key}: not an adjacent pair in basis")
        current.update(gaps)
        energies = [self.states[0].energy]
        for i in range(len(wells) - 1):
            energies.append(energies[-1] - current[(wells[i], wells[i + 1])])
        states = tuple(
            replace(s, energy=e) for s, e in zip(self.states, energies)
        )
        return replace(self, states=states)


def build_hamiltonian(
    cfg: LatticeConfig, potential_floor: float = DEFAULT_POTENTIAL_FLOOR
) -> Tridiagonal:
    """Second-order finite-difference Hamiltonian, in recoil units.

    diagonal = 2t + V(z_i), off-diagonal = -t, t = hbar^2/(2 m_a h^2) = E_r/h_zeta^2,
    with Dirichlet conditions one spacing outside both grid ends.
    """
    z = cfg.grid.z()
    zeta = cfg.k_lattice * z
    h_zeta = float(zeta[1] - zeta[0])
    if h_zeta >= MAX_H_ZETA:
        needed = int(math.ceil((zeta[-1] - zeta[0]) / MAX_H_ZETA)) + 1
        raise ConfigurationError(
            f"grid too coarse: h*k_l = {h_zeta:.3f} >= {MAX_H_ZETA}; "
            f"need at least {needed} points"
        )
    v = np.asarray(total_potential(z, cfg), dtype=float)
    if potential_floor is not None:
        np.maximum(v, potential_floor, out=v)
    t = 1.0 / h_zeta**2
    grid = GridRef(z=z, zeta=zeta, h=float(z[1] - z[0]), h_zeta=h_zeta)
    return Tridiagonal(
        diagonal=2.0 * t + v,
        off_diagonal=np.full(len(z) - 1, -t),
        grid=grid,
    )


def _period_weights(zeta: np.ndarray, prob_h: np.ndarray, n_periods: int) -> np.ndarray:
    """Integrated probability per lattice period (period m spans
    [(m-1/2) pi, (m+1/2) pi); index 0 is the half-well at the wall)."""
    idx = np.clip(np.rint(zeta / math.pi).astype(int), 0, n_periods)
    w = np.zeros(n_periods + 1)
    np.add.at(w, idx, prob_h)
    return w


def well_index_of(wavefunction: np.ndarray, cfg: LatticeConfig) -> int:
    """Index of the lattice period holding the largest integrated probability.

    Ties break toward the lower index.  Input must be sampled on cfg.grid.
    """
    z = cfg.grid.z()
    if wavefunction.shape != z.shape:
        raise UsageError(
            f"wavefunction has {wavefunction.shape[0]} samples, grid has {len(z)}"
        )
    zeta = cfg.k_lattice * z
    h = float(z[1] - z[0])
    n_periods = int(zeta[-1] / math.pi)
    w = _period_weights(zeta, np.abs(wavefunction) ** 2 * h, n_periods)
    return int(np.argmax(w))


def solve_states(
    cfg: LatticeConfig,
    n_wells: int | None = None,
    *,
    wells: tuple | None = None,
    min_compactness: float = 0.9,
    compact_halfwidth: int = 5,
    potential_floor: float = DEFAULT_POTENTIAL_FLOOR,
) -> WSBasis:
    """Diagonalize and extract lowest-band states for a window of wells.

    Either n_wells (wells 1..n_wells) or an explicit inclusive window
    wells=(lo, hi) must be given.  The grid must span at least 6 periods
    beyond the last requested well (buffer against box-edge contamination).

    A retained state must concentrate at least min_compactness of its
    probability within compact_halfwidth wells of its mean position; this
    admits the multi-well extension of shallow-lattice ladder states while
    rejecting box-edge, wall-bound and higher-band vectors.  The lowest
    eigenvalue among the candidates claiming a well wins.
    """
    if wells is None:
        if n_wells is None or n_wells < 1:
            raise ConfigurationError("need n_wells >= 1 or an explicit well window")
        wells = (1, n_wells)
    lo, hi = wells
    if lo < 1 or hi < lo:
        raise ConfigurationError(f"invalid well window {wells}")

    ham = build_hamiltonian(cfg, potential_floor)
    grid = ham.grid
    if grid.n_periods < hi + 6:
        raise ConfigurationError(
            f"grid spans {grid.n_periods} periods; need >= {hi + 6} "
            f"(requested well {hi} plus 6 buffer periods)"
        )

    n = len(grid.z)
    k = min(n, 2 * grid.n_periods + 60)
    found: dict = {}
    while True:
        vals, vecs = eigh_tridiagonal(
            ham.diagonal, ham.off_diagonal, select="i", select_range=(0, k - 1)
        )
        phi = vecs / math.sqrt(grid.h)
        prob_h = phi**2 * grid.h
        zbar = prob_h.T @ grid.zeta
        m_hat = np.rint(zbar / math.pi).astype(int)

        found.clear()
        rejected = 0
        for j in range(len(vals)):
            m = int(m_hat[j])
            if not lo <= m <= hi:
                continue
            w = _period_weights(grid.zeta, prob_h[:, j], grid.n_periods)
            a = max(m - compact_halfwidth, 0)
            b = min(m + compact_halfwidth, grid.n_periods)
            compact = float(w[a : b + 1].sum())
            if compact < min_compactness:
                rejected += 1
                logger.debug(
                    "rejected eigenvector %d (E=%.4f E_r): compactness %.3f "
                    "at well %d",
                    j,
                    vals[j],
                    compact,
                    m,
                )
                continue
            if m not in found or vals[j] < found[m][0]:
                found[m] = (float(vals[j]), j)

        missing = [m for m in range(lo, hi + 1) if m not in found]
        if not missing:
            break
        if k >= n:
            raise LocalizationError(
                missing[0],
                f"no localized lowest-band state for well {missing[0]} "
                f"(depth_U={cfg.depth_U}, {rejected} vectors rejected)",
            )
        k = min(n, 2 * k)
        logger.debug("wells %s missing; retrying with %d eigenpairs", missing, k)

    states = []
    for m in range(lo, hi + 1):
        e, j = found[m]
        vec = phi[:, j].copy()
        peak = np.argmax(np.abs(vec))
        if vec[peak] < 0:
            vec = -vec
        states.append(
            WSState(
                well_index=m,
                energy=e,
                wavefunction=vec,
                norm=float(vec @ vec * grid.h),
                grid=grid,
            )
        )
    return WSBasis(
        states=tuple(states),
        grid=grid,
        config_hash=cfg.config_hash(),
        cfg=cfg,
    )


# -- serialization -------------------------------------------------------


def save_basis(basis: WSBasis, path) -> None:
    """Columnar text dump: JSON header, then rows of z and phi_1..phi_n."""
    header = {
        "format": "wsifm-basis v1",
        "config_hash": basis.config_hash,
        "wells": list(basis.wells),
        "energies_Er": [s.energy for s in basis.states],
        "n_points": len(basis.grid.z),
    }
    cols = np.column_stack([basis.grid.z] + [s.wavefunction for s in basis.states])
    names = "z_m " + " ".join(f"phi_{m}" for m in basis.wells)
    with open(path, "w") as f:
        f.write("# " + json.dumps(header) + "\n")
        f.write("# " + names + "\n")
        np.savetxt(f, cols, fmt="%.12e")


def load_basis(path, cfg: LatticeConfig) -> WSBasis:
    """Rebuild a basis from save_basis output; cfg must match the stored hash."""
    with open(path) as f:
        header = json.loads(f.readline().lstrip("# "))
    if header.get("format") != "wsifm-basis v1":
        raise UsageError(f"{path}: not a wsifm basis file")
    if header["config_hash"] != cfg.config_hash():
        raise UsageError(
            f"{path}: config hash {header['config_hash']} does not match "
            f"current configuration {cfg.config_hash()}"
        )
    data = np.loadtxt(path)
    z = data[:, 0]
    zeta = cfg.k_lattice * z
    grid = GridRef(z=z, zeta=zeta, h=float(z[1] - z[0]), h_zeta=float(zeta[1] - zeta[0]))
    states = tuple(
        WSState(
            well_index=m,
            energy=e,
            wavefunction=data[:, 1 + i],
            norm=float(data[:, 1 + i] @ data[:, 1 + i] * grid.h),
            grid=grid,
        )
        for i, (m, e) in enumerate(zip(header["wells"], header["energies_Er"]))
    )
    return WSBasis(states=states, grid=grid, config_hash=header["config_hash"], cfg=cfg)
