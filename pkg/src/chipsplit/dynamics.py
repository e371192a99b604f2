"""Classical Monte Carlo transport of thermal ensembles through guide potentials.

Atoms are independent point particles under F = -mu grad|B|, integrated by
velocity-Verlet with automatic step halving in the stiff junction region.
Each atom owns a counter-based RNG stream derived from (master_seed, index),
so results are bit-identical for a given spec at any worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np

from . import _kernels
from .constants import KB, MU0
from .geometry import Circuit, YSplitterParams, build_y_splitter
from .potential import (
    AtomSpecies,
    ParameterError,
    find_transverse_minima,
    harmonic_frequencies,
    split_separation,
)


class SetupError(Exception):
    """Ensemble cannot be prepared (no usable trap minimum at the start plane)."""


class Fate(IntEnum):
    LEFT = _kernels.FATE_LEFT
    RIGHT = _kernels.FATE_RIGHT
    BACK = _kernels.FATE_BACK
    LOST_SURFACE = _kernels.FATE_LOST_SURFACE
    LOST_ESCAPE = _kernels.FATE_LOST_ESCAPE
    TIMEOUT = _kernels.FATE_TIMEOUT


@dataclass(frozen=True)
class EnsembleSpec:
    """Thermal ensemble definition; ``master_seed`` fixes every draw."""

    species: AtomSpecies
    temperature: float  # K
    n_atoms: int
    start_x: float  # m
    master_seed: int

    def __post_init__(self) -> None:
        if not (self.temperature > 0.0):
            raise ParameterError("temperature must be positive")
        if self.n_atoms < 1:
            raise ParameterError("n_atoms must be at least 1")


@dataclass(frozen=True)
class TransportRegion:
    """Termination geometry for trajectory integration.

    Crossing ``x_detect`` scores Left or Right; falling behind ``x_back``
    scores Back; z <= z_floor (or a wire impact) scores LostSurface; leaving
    |y| <= y_max, z <= z_max scores LostEscape.

    When ``capture_radius`` is positive and arm-guide centres are attached, a
    plane crossing counts as Left/Right only within that radius of the
    corresponding guide centre (unguided fly-bys are escapes, matching what a
    fluorescence image of the arms would integrate); otherwise the sign of y
    decides.
    """

    x_detect: float
    x_back: float
    y_max: float
    z_max: float
    z_floor: float = 1.0e-6
    capture_radius: float = 0.0
    left_center: tuple[float, float] | None = None  # (y, z) at the detection plane
    right_center: tuple[float, float] | None = None


def attach_arm_detectors(
    region: TransportRegion, circuit: Circuit, species: AtomSpecies
) -> TransportRegion:
    """Locate the actual arm-guide minima on the detection plane.

    An arm carrying no current has no guide there, and its detector stays
    disabled, so atoms drifting past on that side are counted as escapes.
    """
    minima = find_transverse_minima(circuit, species, region.x_detect)
    tol = 0.05 * region.capture_radius if region.capture_radius > 0 else 0.0
    left = [m for m in minima if m.y > tol]
    right = [m for m in minima if m.y < -tol]
    pick = lambda ms: min(ms, key=lambda m: m.potential)  # noqa: E731
    return replace(
        region,
        left_center=(pick(left).y, pick(left).z) if left else None,
        right_center=(pick(right).y, pick(right).z) if right else None,
    )


@dataclass(frozen=True)
class TrajectoryOutcome:
    fate: Fate
    position: np.ndarray
    velocity: np.ndarray
    min_field: float  # T, smallest |B| seen along the path
    flight_time: float  # s
    max_x: float  # m, furthest forward excursion


@dataclass(frozen=True)
class SplitStats:
    """Per-fate counts of one batch with binomial uncertainties."""

    n_atoms: int
    counts: dict[Fate, int]

    @classmethod
    def from_fates(cls, fates: np.ndarray) -> "SplitStats":
        counts = {fate: int(np.sum(fates == int(fate))) for fate in Fate}
        return cls(n_atoms=int(fates.size), counts=counts)

    def fraction(self, fate: Fate) -> float:
        return self.counts[fate] / self.n_atoms

    def stderr(self, fate: Fate) -> float:
        f = self.fraction(fate)
        return math.sqrt(f * (1.0 - f) / self.n_atoms)

    @property
    def n_detected(self) -> int:
        return self.counts[Fate.LEFT] + self.counts[Fate.RIGHT]

    @property
    def left_fraction(self) -> float:
        """Left share of the detected (Left + Right) atoms."""
        n = self.n_detected
        return self.counts[Fate.LEFT] / n if n else math.nan

    @property
    def left_stderr(self) -> float:
        n = self.n_detected
        if not n:
            return math.nan
        f = self.left_fraction
        return math.sqrt(f * (1.0 - f) / n)


def region_for_y(
    params: YSplitterParams, start_x: float, detect_fraction: float = 0.9
) -> TransportRegion:
    """Detection planes for a Y splitter: arm plane at 90% of the arm length,
    back plane at the launch position."""
    x_detect = detect_fraction * params.arm_length * math.cos(params.half_angle)
    b_perp = math.hypot(params.bias[1], params.bias[2])
    r_scale = (
        MU0 * abs(params.total_current) / (2.0 * math.pi * b_perp)
        if b_perp > 0.0
        else 1.0e-4
    )
    y_max = params.arm_length * math.sin(params.half_angle) + 6.0 * r_scale
    z_max = 8.0 * r_scale
    # capture discs just under half the arm separation at the detection plane
    capture = 0.45 * 2.0 * x_detect * math.tan(params.half_angle)
    return TransportRegion(
        x_detect=x_detect,
        x_back=start_x,
        y_max=y_max,
        z_max=z_max,
        capture_radius=capture,
    )


def sample_ensemble(
    spec: EnsembleSpec,
    circuit: Circuit,
    window=None,
    *,
    degenerate: str = "error",
    forward: float = +1.0,
):
    """Draw initial (positions, velocities) for the ensemble, shapes (n, 3).

    Positions are Gaussian about the deepest transverse minimum at start_x
    with harmonic thermal variance k_B T / (m w_i^2) per transverse axis;
    velocities are Maxwell-Boltzmann at T with the longitudinal sign forced
    toward the junction (``forward``).

    ``degenerate`` controls conical (|B| ~ 0) start traps: "error" raises
    SetupError per the harmonic contract; "thermal-width" substitutes a
    Gaussian whose variance matches the Boltzmann distribution of the linear
    trap, var = 3 (k_B T / mu B')^2, so zero-Ioffe control runs stay possible.
    """
    minima = find_transverse_minima(circuit, spec.species, spec.start_x, window)
    if not minima:
        raise SetupError(f"no transverse minimum at start_x = {spec.start_x:g} m")
    m = min(minima, key=lambda mm: mm.potential)

    kbt = KB * spec.temperature
    if m.conical:
        if degenerate == "error":
            raise SetupError(
                f"degenerate trap at start_x (|B| = {m.field_norm:.3g} T); "
                "pass degenerate='thermal-width' to sample a linear-trap ensemble"
            )
        if degenerate != "thermal-width":
            raise ValueError(f"unknown degenerate policy {degenerate!r}")
        grads = spec.species.moment * m.perp_grad_evals  # J/m, linear trap slopes
        if np.any(grads <= 0.0):
            raise SetupError("conical trap has a flat transverse direction")
        sigmas = math.sqrt(3.0) * kbt / grads
        axes = m.perp_grad_axes
    else:
        w1, w2 = harmonic_frequencies(circuit, spec.species, m)
        sigmas = np.array(
            [
                math.sqrt(kbt / (spec.species.mass * w1 * w1)),
                math.sqrt(kbt / (spec.species.mass * w2 * w2)),
            ]
        )
        axes = m.hess_axes
    sigma_v = math.sqrt(kbt / spec.species.mass)
    sign = 1.0 if forward >= 0.0 else -1.0

    positions = np.empty((spec.n_atoms, 3))
    velocities = np.empty((spec.n_atoms, 3))
    for i in range(spec.n_atoms):
        rng = np.random.default_rng([spec.master_seed, i])
        xi = rng.standard_normal(5)
        dy = xi[0] * sigmas[0] * axes[0, 0] + xi[1] * sigmas[1] * axes[0, 1]
        dz = xi[0] * sigmas[0] * axes[1, 0] + xi[1] * sigmas[1] * axes[1, 1]
        positions[i, 0] = spec.start_x
        positions[i, 1] = m.y + dy
        positions[i, 2] = m.z + dz
        velocities[i, 0] = sign * abs(xi[2]) * sigma_v
        velocities[i, 1] = xi[3] * sigma_v
        velocities[i, 2] = xi[4] * sigma_v
    return positions, velocities


def propagate_ensemble(
    positions: np.ndarray,
    velocities: np.ndarray,
    circuit: Circuit,
    species: AtomSpecies,
    region: TransportRegion,
    *,
    dt: float = 1.0e-7,
    t_max: float = 16.0e-3,
    gravity: float = 0.0,
) -> list[TrajectoryOutcome]:
    """Propagate a batch of independent atoms; one TrajectoryOutcome each."""
    fates, pos, vel, minb, times, maxx = _propagate_arrays(
        positions, velocities, circuit, species, region, dt=dt, t_max=t_max, gravity=gravity
    )
    return [
        TrajectoryOutcome(
            fate=Fate(int(fates[i])),
            position=pos[i].copy(),
            velocity=vel[i].copy(),
            min_field=float(minb[i]),
            flight_time=float(times[i]),
            max_x=float(maxx[i]),
        )
        for i in range(len(fates))
    ]


def propagate(
    position,
    velocity,
    circuit: Circuit,
    species: AtomSpecies,
    dt: float,
    t_max: float,
    region: TransportRegion,
    gravity: float = 0.0,
) -> TrajectoryOutcome:
    """Single-atom convenience wrapper around :func:`propagate_ensemble`."""
    outcomes = propagate_ensemble(
        np.asarray(position, dtype=np.float64).reshape(1, 3),
        np.asarray(velocity, dtype=np.float64).reshape(1, 3),
        circuit,
        species,
        region,
        dt=dt,
        t_max=t_max,
        gravity=gravity,
    )
    return outcomes[0]


def _propagate_arrays(
    positions, velocities, circuit, species, region, *, dt, t_max, gravity
):
    if dt <= 0.0:
        raise ParameterError("dt must be positive")
    pos = np.ascontiguousarray(positions, dtype=np.float64)
    vel = np.ascontiguousarray(velocities, dtype=np.float64)
    n = pos.shape[0]
    fates = np.empty(n, dtype=np.int64)
    pos_out = np.empty_like(pos)
    vel_out = np.empty_like(vel)
    minb = np.empty(n)
    times = np.empty(n)
    maxx = np.empty(n)
    detectors_on = region.left_center is not None or region.right_center is not None
    capture = region.capture_radius if detectors_on else 0.0
    ly, lz = region.left_center if region.left_center else (0.0, 0.0)
    ry, rz = region.right_center if region.right_center else (0.0, 0.0)
    _kernels.propagate_batch(
        circuit.packed,
        circuit.bias,
        pos,
        vel,
        species.moment,
        species.mass,
        gravity,
        dt,
        t_max,
        region.z_floor,
        region.x_detect,
        region.x_back,
        region.y_max,
        region.z_max,
        capture,
        ly,
        lz,
        region.left_center is not None,
        ry,
        rz,
        region.right_center is not None,
        fates,
        pos_out,
        vel_out,
        minb,
        times,
        maxx,
    )
    return fates, pos_out, vel_out, minb, times, maxx


@dataclass(frozen=True)
class SplitCurvePoint:
    fraction: float
    stats: SplitStats

    @property
    def left_fraction(self) -> float:
        return self.stats.left_fraction

    @property
    def left_stderr(self) -> float:
        return self.stats.left_stderr


def run_split_experiment(
    spec: EnsembleSpec,
    y_params: YSplitterParams,
    fractions,
    *,
    dt: float = 1.0e-7,
    t_max: float = 16.0e-3,
    detect_fraction: float = 0.9,
    degenerate: str = "thermal-width",
    gravity: float = 0.0,
) -> list[SplitCurvePoint]:
    """One Monte Carlo batch per current fraction, shared geometry and seeds.

    The same master seed is reused across fractions, so curve points differ
    only through the splitting potential, not through sampling noise.
    """
    points = []
    for fraction in fractions:
        if not (0.0 <= fraction <= 1.0):
            raise ParameterError(f"current fraction {fraction} outside [0, 1]")
        params = replace(y_params, current_fraction_left=float(fraction))
        circuit = build_y_splitter(params)
        region = region_for_y(params, spec.start_x, detect_fraction)
        region = attach_arm_detectors(region, circuit, spec.species)
        positions, velocities = sample_ensemble(
            spec, circuit, degenerate=degenerate, forward=+1.0
        )
        fates, *_ = _propagate_arrays(
            positions, velocities, circuit, spec.species, region,
            dt=dt, t_max=t_max, gravity=gravity,
        )
        points.append(
            SplitCurvePoint(fraction=float(fraction), stats=SplitStats.from_fates(fates))
        )
    return points


@dataclass(frozen=True)
class BackReflectionResult:
    fraction: float  # Back share among atoms that reached the junction region
    n_reached: int
    n_back: int
    stats: SplitStats


def back_reflection_estimate(
    spec: EnsembleSpec,
    y_params: YSplitterParams,
    *,
    dt: float = 1.0e-7,
    t_max: float = 16.0e-3,
    degenerate: str = "thermal-width",
) -> BackReflectionResult:
    """Equal-split run; Back fraction among atoms whose forward excursion
    reached within one split separation of the junction."""
    params = replace(y_params, current_fraction_left=0.5)
    circuit = build_y_splitter(params)
    region = region_for_y(params, spec.start_x)
    region = attach_arm_detectors(region, circuit, spec.species)
    positions, velocities = sample_ensemble(
        spec, circuit, degenerate=degenerate, forward=+1.0
    )
    fates, _pos, _vel, _minb, _times, maxx = _propagate_arrays(
        positions, velocities, circuit, spec.species, region, dt=dt, t_max=t_max, gravity=0.0
    )
    b_perp = math.hypot(params.bias[1], params.bias[2])
    junction_x = (
        -split_separation(abs(params.total_current), b_perp) if b_perp > 0 else 0.0
    )
    reached = maxx >= junction_x
    n_reached = int(np.sum(reached))
    n_back = int(np.sum(fates[reached] == int(Fate.BACK)))
    frac = n_back / n_reached if n_reached else math.nan
    return BackReflectionResult(
        fraction=frac,
        n_reached=n_reached,
        n_back=n_back,
        stats=SplitStats.from_fates(fates),
    )


@dataclass(frozen=True)
class MinFieldDiagnostic:
    """Histogram of per-trajectory minimum |B| (spin-flip risk proxy)."""

    counts: np.ndarray
    edges: np.ndarray  # T
    threshold: float  # T
    fraction_below: float


def min_field_diagnostic(
    outcomes: list[TrajectoryOutcome], threshold: float = 1.0e-4, bins: int = 50
) -> MinFieldDiagnostic:
    values = np.array([o.min_field for o in outcomes])
    counts, edges = np.histogram(values, bins=bins)
    fraction_below = float(np.mean(values < threshold))
    return MinFieldDiagnostic(
        counts=counts, edges=edges, threshold=threshold, fraction_below=fraction_below
    )
