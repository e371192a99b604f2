"""Transverse quantum modes: 2D Schrodinger eigenproblem on potential slices.

Five-point finite differences with Dirichlet walls and a shift-invert sparse
symmetric eigensolver.  Mirror symmetry of mode densities is checked per mode,
with (near-)degenerate clusters compared at the projector level: individual
degenerate eigenvectors are basis-arbitrary, their span is not.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .constants import HBAR, KB
from .field import min_wire_distance
from .geometry import Circuit
from .potential import AtomSpecies, ParameterError, potential as trap_potential

#: Potential values are capped here to tame the near-wire divergence.
DEFAULT_CEILING = 100.0 * KB * 250.0e-6  # J

ORTHONORMALITY_TOL = 1.0e-8
RESIDUAL_TOL = 1.0e-6


class SolverError(Exception):
    """Eigensolver failed to converge or returned an inconsistent mode set."""


@dataclass(frozen=True)
class SliceGrid:
    """Uniform (y, z) grid of potential values in the plane x = const.

    For mode solving the box must confine every state sought: the operative
    check is that eigenfunction mass on the boundary is negligible (harmonic
    traps reach a wall-to-excitation depth ratio of ~10, conical guides are
    shallower but semiclassical decay lengths are far below the margin).
    """

    x: float
    y: np.ndarray  # (ny,)
    z: np.ndarray  # (nz,)
    values: np.ndarray  # (ny, nz) J, capped at `ceiling`
    ceiling: float

    @property
    def dy(self) -> float:
        return float(self.y[1] - self.y[0])

    @property
    def dz(self) -> float:
        return float(self.z[1] - self.z[0])

    def depth_ratio(self, energy: float) -> float:
        """(lowest wall value - floor) / (energy - floor): confinement margin."""
        floor = float(self.values.min())
        wall = float(
            min(
                self.values[0, :].min(),
                self.values[-1, :].min(),
                self.values[:, 0].min(),
                self.values[:, -1].min(),
            )
        )
        denom = energy - floor
        return math.inf if denom <= 0.0 else (wall - floor) / denom


def build_slice(
    circuit: Circuit,
    species: AtomSpecies,
    x: float,
    *,
    y_range: tuple[float, float],
    z_range: tuple[float, float],
    shape: tuple[int, int] = (256, 256),
    ceiling: float | None = None,
) -> SliceGrid:
    """Sample V = mu|B| on a uniform slice grid, capped at ``ceiling``."""
    ny, nz = shape
    if ny < 8 or nz < 8:
        raise ParameterError("slice grid must be at least 8x8")
    if ceiling is None:
        ceiling = DEFAULT_CEILING
    y = np.linspace(y_range[0], y_range[1], ny)
    z = np.linspace(z_range[0], z_range[1], nz)
    yy, zz = np.meshgrid(y, z, indexing="ij")
    points = np.column_stack([np.full(yy.size, x), yy.ravel(), zz.ravel()])
    if float(np.min(min_wire_distance(circuit, points))) < 1.0e-8:
        raise ParameterError("slice grid touches a wire filament")
    values = trap_potential(circuit, species, points).reshape(ny, nz)
    values = np.minimum(values, ceiling)
    return SliceGrid(x=float(x), y=y, z=z, values=values, ceiling=float(ceiling))


@dataclass(frozen=True)
class ModeSet:
    """Lowest eigenpairs of -hbar^2/2m laplacian + V on a slice grid.

    Eigenfunctions are L2-normalized on the grid measure dy*dz.
    ``resolution_ok`` records the post-hoc check that the ground state spans
    at least 8 grid spacings; an under-resolved solve still produces exact
    discrete modes (mirror symmetry in particular survives) but its
    eigenvalues are not converged physics.
    """

    energies: np.ndarray  # (n,) J ascending
    psi: np.ndarray  # (n, ny, nz)
    grid: SliceGrid
    residuals: np.ndarray  # (n,) relative ||H psi - E psi|| / ||H psi||
    resolution_ok: bool
    ground_width_cells: float


def _hamiltonian(grid: SliceGrid, mass: float) -> sp.csr_matrix:
    ny, nz = grid.values.shape
    ky = HBAR * HBAR / (2.0 * mass * grid.dy * grid.dy)
    kz = HBAR * HBAR / (2.0 * mass * grid.dz * grid.dz)
    iy = sp.identity(ny, format="csr")
    iz = sp.identity(nz, format="csr")
    d2y = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(ny, ny), format="csr")
    d2z = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(nz, nz), format="csr")
    lap = ky * sp.kron(d2y, iz) + kz * sp.kron(iy, d2z)
    return (lap + sp.diags(grid.values.ravel())).tocsr()


def solve_modes(grid: SliceGrid, mass: float, n: int, *, seed: int = 0) -> ModeSet:
    """Lowest ``n`` eigenpairs by shift-invert Lanczos with a seeded start vector."""
    if n < 1:
        raise ParameterError("n must be at least 1")
    ny, nz = grid.values.shape
    h = _hamiltonian(grid, mass)
    v0 = np.random.default_rng(seed).standard_normal(ny * nz)
    sigma = float(grid.values.min()) - 1.0e-3 * float(grid.values.max() - grid.values.min())
    try:
        energies, vecs = spla.eigsh(h, k=n, sigma=sigma, which="LM", v0=v0)
    except spla.ArpackNoConvergence as exc:
        raise SolverError(f"eigensolver did not converge: {exc}") from exc
    order = np.argsort(energies)
    energies = energies[order]
    vecs = vecs[:, order]

    hv = h @ vecs
    residuals = np.linalg.norm(hv - vecs * energies[None, :], axis=0) / np.linalg.norm(
        hv, axis=0
    )
    if float(residuals.max()) > RESIDUAL_TOL:
        raise SolverError(f"eigenpair residuals too large: max = {residuals.max():.3e}")
    gram = vecs.T @ vecs - np.eye(n)
    if float(np.abs(gram).max()) > ORTHONORMALITY_TOL:
        raise SolverError(f"modes not orthonormal: max deviation {np.abs(gram).max():.3e}")

    measure = grid.dy * grid.dz
    psi = (vecs / math.sqrt(measure)).T.reshape(n, ny, nz)

    dens = psi[0] ** 2 * measure
    yy, zz = np.meshgrid(grid.y, grid.z, indexing="ij")
    y_mean = float(np.sum(dens * yy))
    z_mean = float(np.sum(dens * zz))
    sig_y = math.sqrt(max(float(np.sum(dens * (yy - y_mean) ** 2)), 0.0))
    sig_z = math.sqrt(max(float(np.sum(dens * (zz - z_mean) ** 2)), 0.0))
    # "width" = 4 sigma of the density, resolved when it spans >= 8 cells
    width_cells = 4.0 * min(sig_y / grid.dy, sig_z / grid.dz)
    resolution_ok = width_cells >= 8.0
    if not resolution_ok:
        warnings.warn(
            f"ground-state width {width_cells:.1f} cells < 8: eigenvalues are "
            "not converged at this resolution",
            stacklevel=2,
        )
    return ModeSet(
        energies=energies,
        psi=psi,
        grid=grid,
        residuals=residuals,
        resolution_ok=resolution_ok,
        ground_width_cells=width_cells,
    )


@dataclass(frozen=True)
class SymmetryReport:
    """Per-mode mirror residuals of |psi|^2 under y -> -y.

    Modes in a (near-)degenerate cluster share the cluster's projector
    residual.  ``potential_residual`` quantifies how mirror-symmetric the
    sampled potential itself is.
    """

    residuals: np.ndarray  # (n,)
    clusters: list[list[int]]
    potential_residual: float


def symmetry_check(
    modes: ModeSet, *, cluster_gap_factor: float = 1.0e-3, n_report: int | None = None
) -> SymmetryReport:
    """Mirror residuals of the lowest modes; requires a y-mirror-compatible grid.

    The grid must satisfy y[i] = -y[n-1-i]; otherwise the density cannot be
    compared against its reflection and a ParameterError is raised.

    Clusters are formed over the whole solved set and residuals reported for
    the first ``n_report`` modes, so solve a few buffer modes beyond the range
    of interest: a degenerate pair cut by the truncation boundary would
    otherwise masquerade as a symmetry violation.
    """
    grid = modes.grid
    y = grid.y
    span = float(y[-1] - y[0])
    if np.max(np.abs(y + y[::-1])) > 1.0e-9 * max(span, 1.0e-30):
        raise ParameterError("slice grid is not symmetric under y -> -y")

    v = grid.values
    potential_residual = float(
        np.linalg.norm(v - v[::-1, :]) / max(np.linalg.norm(v), 1.0e-300)
    )

    energies = modes.energies
    n = energies.size
    scale = (energies[-1] - energies[0]) / max(n - 1, 1)
    if scale <= 0.0:
        scale = max(abs(float(energies[0])), 1.0e-300)
    clusters: list[list[int]] = [[0]]
    for k in range(1, n):
        if energies[k] - energies[k - 1] < cluster_gap_factor * scale:
            clusters[-1].append(k)
        else:
            clusters.append([k])

    measure = grid.dy * grid.dz
    residuals = np.empty(n)
    for cluster in clusters:
        if len(cluster) == 1:
            k = cluster[0]
            dens = modes.psi[k] ** 2
            diff = dens - dens[::-1, :]
            r = float(np.linalg.norm(diff) / max(np.linalg.norm(dens), 1.0e-300))
        else:
            # projector comparison: ||P - M P M||_F^2 = 2k - 2 ||V^T (M V)||_F^2
            vecs = np.stack(
                [modes.psi[k].ravel() * math.sqrt(measure) for k in cluster], axis=1
            )
            mirrored = np.stack(
                [modes.psi[k][::-1, :].ravel() * math.sqrt(measure) for k in cluster],
                axis=1,
            )
            overlap = vecs.T @ mirrored
            k = len(cluster)
            r2 = max(0.0, 2.0 * k - 2.0 * float(np.sum(overlap * overlap))) / k
            r = math.sqrt(r2)
        for k in cluster:
            residuals[k] = r

    if n_report is None:
        n_report = n
    n_report = min(n_report, n)
    last_reported_cluster = next(c for c in clusters if n_report - 1 in c)
    if last_reported_cluster[-1] == n - 1:
        warnings.warn(
            "reported modes reach the truncation boundary; a degenerate partner "
            "of the last cluster may be missing (solve more buffer modes)",
            stacklevel=2,
        )
    reported_clusters = [c for c in clusters if c[0] < n_report]
    return SymmetryReport(
        residuals=residuals[:n_report],
        clusters=reported_clusters,
        potential_residual=potential_residual,
    )
