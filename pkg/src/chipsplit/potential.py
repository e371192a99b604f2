"""Adiabatic trapping potential V = mu*|B|: transverse minima, bifurcation tracing,
two-wire case classification, barrier heights and harmonic trap frequencies.

The adiabatic low-field-seeker form V = +mu*|B| is used everywhere (the spin
follows the field); spin-flip risk is tracked separately via the min-|B|
diagnostic in the dynamics module.  Transverse always means restricted to a
plane x = const, with in-plane coordinates (y, z).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from enum import Enum

import numpy as np

from . import field as field_mod
from .constants import MU0, MU_B, LI7_MASS
from .geometry import Circuit

POSITION_TOL = 1.0e-8  # m (10 nm)
ENERGY_TOL = 1.0e-30  # J
Z_FLOOR = 1.0e-6  # m, search floor above the chip plane (thin-wire model diverges at z=0)
CONICAL_FIELD_FRACTION = 1.0e-3  # |B|/|bias| below this marks a conical (|B|=0) minimum


class ParameterError(ValueError):
    """Invalid physical parameters."""


class DegenerateTrapError(Exception):
    """Trap minimum has |B| ~ 0 (conical potential), no harmonic expansion exists."""


@dataclass(frozen=True)
class AtomSpecies:
    """Atom mass (kg) and effective magnetic moment mu = g_F m_F mu_B (J/T).

    Positive moment is the low-field-seeker convention.
    """

    mass: float
    moment: float

    def __post_init__(self) -> None:
        if not (self.mass > 0.0 and math.isfinite(self.mass)):
            raise ParameterError("mass must be positive")
        if not (self.moment >= 0.0 and math.isfinite(self.moment)):
            raise ParameterError("moment must be non-negative")


#: Default species: 7Li with one Bohr magneton of effective moment.
LI7 = AtomSpecies(mass=LI7_MASS, moment=MU_B)


def potential(circuit: Circuit, species: AtomSpecies, points):
    """V = mu * |B| at one point (3,) or a batch (n, 3)."""
    b = field_mod.total_field(circuit, points)
    return species.moment * np.linalg.norm(b, axis=-1)


def potential_gradient(circuit: Circuit, species: AtomSpecies, points):
    """Analytic grad V = mu * J^T B / |B|, shape like the input points."""
    b, j = field_mod.field_and_jacobian(circuit, points)
    bn = np.linalg.norm(b, axis=-1, keepdims=True)
    bn = np.maximum(bn, 1.0e-300)
    jt_b = np.einsum("...ij,...i->...j", j, b)
    return species.moment * jt_b / bn


def side_guide_height(current: float, bias_perp: float) -> float:
    """Height of the side-guide field zero above a straight wire: mu0*I/(2*pi*B).

    The identical formula gives the output-wire separation at which a stacked
    two-minimum structure fuses (see :func:`split_separation`).
    """
    if current < 0.0 or bias_perp <= 0.0:
        raise ParameterError("current must be >= 0 and bias_perp > 0")
    return MU0 * current / (2.0 * math.pi * bias_perp)


def split_separation(total_current: float, bias_perp: float) -> float:
    """Wire separation at which the two stacked minima of a wire pair fuse into one."""
    return side_guide_height(total_current, bias_perp)


def gradient_tolerance(circuit: Circuit, species: AtomSpecies) -> float:
    """Convergence tolerance on |grad V| at reported minima.

    1e-9 of the characteristic guide force scale mu*B_bias/r0; falls back to
    an absolute 1e-30 J/m when the circuit carries no current or bias.
    """
    b = float(np.linalg.norm(circuit.bias))
    i_max = circuit.max_abs_current
    if b <= 0.0 or i_max <= 0.0 or species.moment <= 0.0:
        return 1.0e-30
    r0 = MU0 * i_max / (2.0 * math.pi * b)
    return 1.0e-9 * species.moment * b / r0


@dataclass(frozen=True)
class MinimumPoint:
    """A transverse local minimum of V in the plane x = const.

    ``hess_evals``/``hess_axes`` hold the in-plane (y, z) Hessian eigensystem
    of V and are None for conical (|B| ~ 0) minima, where no harmonic
    expansion exists.  ``perp_grad_evals`` are the singular values of the
    in-plane field Jacobian (T/m), defined for every minimum.
    """

    position: np.ndarray  # (3,)
    potential: float  # J
    field_norm: float  # T
    grad_norm: float  # J/m, |grad V| at the point
    conical: bool
    hess_evals: np.ndarray | None  # (2,) J/m^2, ascending
    hess_axes: np.ndarray | None  # (2, 2) columns = eigenvectors in (y, z)
    perp_grad_evals: np.ndarray  # (2,) T/m, ascending
    perp_grad_axes: np.ndarray  # (2, 2)

    @property
    def y(self) -> float:
        return float(self.position[1])

    @property
    def z(self) -> float:
        return float(self.position[2])


def transverse_window(circuit: Circuit, x: float, z_floor: float = Z_FLOOR):
    """Default (y, z) search window for a slice, sized from the guide height scale."""
    b_perp = math.hypot(circuit.bias[1], circuit.bias[2])
    i_max = circuit.max_abs_current
    if b_perp > 0.0 and i_max > 0.0:
        r_scale = MU0 * i_max / (2.0 * math.pi * b_perp)
    else:
        r_scale = 1.0e-3
    y_span = 0.0
    for seg in circuit.segments:
        x0, x1 = seg.start[0], seg.end[0]
        if (x0 - x) * (x1 - x) <= 0.0 and x1 != x0:
            t = (x - x0) / (x1 - x0)
            y_span = max(y_span, abs(seg.start[1] + t * (seg.end[1] - seg.start[1])))
    y_half = y_span + 2.5 * r_scale
    z_top = max(3.0 * r_scale, 1.5 * y_span + 2.0 * r_scale)
    return (-y_half, y_half), (z_floor, z_top)


def _hessian_2d(circuit, species, point, step=None) -> np.ndarray:
    """In-plane (y, z) Hessian of V by central differences of the analytic gradient."""
    p = np.asarray(point, dtype=np.float64)
    if step is None:
        step = max(1.0e-9, 1.0e-5 * abs(p[2]))
    h = np.empty((2, 2))
    for col, axis in enumerate((1, 2)):
        dp = np.zeros(3)
        dp[axis] = step
        gp = potential_gradient(circuit, species, p + dp)
        gm = potential_gradient(circuit, species, p - dp)
        h[:, col] = (gp[1:] - gm[1:]) / (2.0 * step)
    return 0.5 * (h + h.T)


def _refine_minimum(circuit, x, y, z, window, max_iter=80):
    """Gauss-Newton descent on |B|^2 restricted to the plane x = const.

    |B|^2 and V = mu|B| share minimizers, and |B|^2 stays smooth through
    conical (B = 0) minima.  Returns (y, z) or None if the iterate leaves the
    window.
    """
    (y_lo, y_hi), (z_lo, z_hi) = window
    lam = 0.0
    b, jac = field_mod.field_and_jacobian(circuit, np.array([x, y, z]))
    w = float(b @ b)
    for _ in range(max_iter):
        m = jac[:, 1:3]  # in-plane columns
        g = m.T @ b  # half of grad(|B|^2)
        h = m.T @ m
        try:
            step = np.linalg.solve(h + lam * np.trace(h) * np.eye(2), -g)
        except np.linalg.LinAlgError:
            return None
        step_norm = float(np.hypot(step[0], step[1]))
        cap = 0.25 * max(y_hi - y_lo, z_hi - z_lo)
        if step_norm > cap:
            step *= cap / step_norm
            step_norm = cap
        y_new = min(max(y + step[0], y_lo), y_hi)
        z_new = min(max(z + step[1], z_lo), z_hi)
        b_new, jac_new = field_mod.field_and_jacobian(circuit, np.array([x, y_new, z_new]))
        w_new = float(b_new @ b_new)
        if w_new <= w:
            y, z, b, jac, w = y_new, z_new, b_new, jac_new, w_new
            lam = max(lam * 0.25, 0.0)
            if step_norm < 1.0e-13:
                break
        else:
            lam = max(lam * 10.0, 1.0e-6)
            if lam > 1.0e12:
                break
    return y, z


def _newton_polish(circuit, species, x, y, z, window, grad_tol, max_iter=12):
    """Damped Newton on grad V = 0 for smooth minima; GN on |B|^2 converges only
    linearly when |B| stays finite at the minimum, which can stall just above
    the strict gradient tolerance."""
    (y_lo, y_hi), (z_lo, z_hi) = window
    for _ in range(max_iter):
        point = np.array([x, y, z])
        g = potential_gradient(circuit, species, point)[1:]
        if float(np.hypot(g[0], g[1])) < 0.2 * grad_tol:
            break
        h = _hessian_2d(circuit, species, point)
        evals = np.linalg.eigvalsh(h)
        if evals[0] <= 0.0:
            break  # not locally convex; leave as-is
        step = np.linalg.solve(h, -g)
        step_norm = float(np.hypot(step[0], step[1]))
        if step_norm > 1.0e-6:
            step *= 1.0e-6 / step_norm
        y = min(max(y + step[0], y_lo), y_hi)
        z = min(max(z + step[1], z_lo), z_hi)
        if step_norm < 1.0e-15:
            break
    return y, z


def _is_local_min_2d(circuit, species, x, y, z, v_center, ring_radius):
    """Sample V on a small ring around (y, z); True if the centre is lowest."""
    angles = np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False)
    pts = np.column_stack(
        [
            np.full(8, x),
            y + ring_radius * np.cos(angles),
            z + ring_radius * np.sin(angles),
        ]
    )
    try:
        v_ring = potential(circuit, species, pts)
    except field_mod.FieldSingularityError:
        return False
    return bool(np.all(v_ring >= v_center - ENERGY_TOL))


def _axis_probe_seeds(circuit, x, y_star, z_star, window, n=512):
    """1D scans through a found minimum along y and along z.

    Resolves partners that share a coarse cell with it: stacked pairs just
    below fusion (same y, close z) and side pairs just past it (same z,
    close y).  Returns candidate (y, z) seeds at the 1D local minima.
    """
    (y_lo, y_hi), (z_lo, z_hi) = window
    seeds = []
    zgrid = np.geomspace(z_lo, z_hi, n)
    pts = np.column_stack([np.full(n, x), np.full(n, y_star), zgrid])
    bn = np.linalg.norm(field_mod.total_field(circuit, pts), axis=1)
    for i in range(1, n - 1):
        if bn[i] < bn[i - 1] and bn[i] < bn[i + 1]:
            seeds.append((y_star, zgrid[i]))
    dyj = (y_hi - y_lo) / (n + 1)
    ygrid = y_lo + dyj * (np.arange(n) + 0.7236067977)
    pts = np.column_stack([np.full(n, x), ygrid, np.full(n, z_star)])
    bn = np.linalg.norm(field_mod.total_field(circuit, pts), axis=1)
    for i in range(1, n - 1):
        if bn[i] < bn[i - 1] and bn[i] < bn[i + 1]:
            seeds.append((ygrid[i], z_star))
    return seeds


def find_transverse_minima(
    circuit: Circuit,
    species: AtomSpecies,
    x: float,
    window=None,
    *,
    grid_shape=(96, 96),
    grad_tol: float | None = None,
) -> list[MinimumPoint]:
    """All local minima of V restricted to the plane x = const inside the window.

    Coarse grid scan (uniform in y, geometric in z, so near-surface structure
    is resolved) followed by in-plane Gauss-Newton refinement.  For smooth
    (Ioffe-type) minima the reported |grad V| satisfies ``grad_tol``; conical
    minima (|B| ~ 0) are flagged instead, since grad V does not vanish at a
    cone tip.
    """
    if window is None:
        window = transverse_window(circuit, x)
    (y_lo, y_hi), (z_lo, z_hi) = window
    if not (y_hi > y_lo and z_hi > z_lo and z_lo > 0.0):
        raise ParameterError(f"empty or invalid search window {window}")
    if grad_tol is None:
        grad_tol = gradient_tolerance(circuit, species)

    ny, nz = grid_shape
    # Offset the y grid by an irrational cell fraction: on mirror-symmetric
    # circuits a symmetric grid produces exact floating-point ties between
    # +/-y neighbours, which defeats the strict local-minimum comparison.
    dy_cell = (y_hi - y_lo) / (ny + 1)
    ys = y_lo + dy_cell * (np.arange(ny) + 0.7236067977)
    zs = np.geomspace(z_lo, z_hi, nz)
    z_ratio = (z_hi / z_lo) ** (1.0 / (nz - 1))
    yy, zz = np.meshgrid(ys, zs, indexing="ij")
    pts = np.column_stack([np.full(yy.size, x), yy.ravel(), zz.ravel()])
    b = field_mod.total_field(circuit, pts)
    bn = np.linalg.norm(b, axis=1).reshape(ny, nz)

    interior = bn[1:-1, 1:-1]
    mask = np.ones_like(interior, dtype=bool)
    for dy in (-1, 0, 1):
        for dz in (-1, 0, 1):
            if dy == 0 and dz == 0:
                continue
            mask &= interior < bn[1 + dy : ny - 1 + dy, 1 + dz : nz - 1 + dz]
    cand = np.argwhere(mask)

    def interior(y_min, z_min):
        return (
            y_min - y_lo > POSITION_TOL
            and y_hi - y_min > POSITION_TOL
            and z_min - z_lo > POSITION_TOL
            and z_hi - z_min > POSITION_TOL
        )

    positions: list[tuple[float, float]] = []

    def refine_and_collect(seeds):
        for y_seed, z_seed in seeds:
            refined = _refine_minimum(circuit, x, y_seed, z_seed, window)
            if refined is None or not interior(*refined):
                continue
            y_min, z_min = refined
            if any(
                abs(py - y_min) < POSITION_TOL and abs(pz - z_min) < POSITION_TOL
                for py, pz in positions
            ):
                continue
            v_min = float(potential(circuit, species, np.array([x, y_min, z_min])))
            ring = max(1.0e-7, 1.0e-3 * z_min)
            if _is_local_min_2d(circuit, species, x, y_min, z_min, v_min, ring):
                positions.append((y_min, z_min))

    for iy, iz in cand:
        y0, z0 = ys[iy + 1], zs[iz + 1]
        # seeds split in y and z so that a barely-bifurcated pair of minima
        # inside one coarse cell still yields both members
        refine_and_collect(
            [
                (y0, z0),
                (y0 - 0.45 * dy_cell, z0),
                (y0 + 0.45 * dy_cell, z0),
                (y0, z0 * z_ratio**-0.45),
                (y0, z0 * z_ratio**0.45),
            ]
        )
    # fine 1D probes through each find catch partners hidden in the same cell
    for y_star, z_star in list(positions):
        refine_and_collect(_axis_probe_seeds(circuit, x, y_star, z_star, window))

    bias_norm = float(np.linalg.norm(circuit.bias))
    found: list[MinimumPoint] = []
    for y_min, z_min in positions:
        b_here = field_mod.total_field(circuit, np.array([x, y_min, z_min]))
        if np.linalg.norm(b_here) >= CONICAL_FIELD_FRACTION * max(bias_norm, 1.0e-12):
            y_min, z_min = _newton_polish(
                circuit, species, x, y_min, z_min, window, grad_tol
            )
        point = np.array([x, y_min, z_min])
        b_min, jac = field_mod.field_and_jacobian(circuit, point)
        b_norm = float(np.linalg.norm(b_min))
        v_min = species.moment * b_norm
        m_inplane = jac[:, 1:3]
        gram = m_inplane.T @ m_inplane
        g_evals, g_axes = np.linalg.eigh(gram)
        g_evals = np.sqrt(np.maximum(g_evals, 0.0))
        grad_v = potential_gradient(circuit, species, point)
        grad_norm = float(np.hypot(grad_v[1], grad_v[2]))
        conical = b_norm < CONICAL_FIELD_FRACTION * max(bias_norm, 1.0e-12)
        if conical:
            hess_evals, hess_axes = None, None
        else:
            hess = _hessian_2d(circuit, species, point)
            evals, axes = np.linalg.eigh(hess)
            hess_evals, hess_axes = evals, axes
            if grad_norm > grad_tol:
                continue  # refinement failed to converge on a smooth trap; reject
        found.append(
            MinimumPoint(
                position=point,
                potential=v_min,
                field_norm=b_norm,
                grad_norm=grad_norm,
                conical=conical,
                hess_evals=hess_evals,
                hess_axes=hess_axes,
                perp_grad_evals=g_evals,
                perp_grad_axes=g_axes,
            )
        )
    found.sort(key=lambda m: (m.y, m.z))
    return found


def harmonic_frequencies(circuit: Circuit, species: AtomSpecies, minimum: MinimumPoint):
    """Transverse angular frequencies (w1, w2) = sqrt(h_i / mass) at a minimum.

    Raises DegenerateTrapError for conical minima (e.g. a zero-Ioffe
    quadrupole line), where |B| = 0 and no harmonic expansion exists.
    """
    if minimum.conical or minimum.hess_evals is None:
        raise DegenerateTrapError(
            f"|B| = {minimum.field_norm:.3g} T at the minimum: conical potential"
        )
    evals = minimum.hess_evals
    if np.any(evals <= 0.0):
        raise DegenerateTrapError(f"transverse Hessian not positive definite: {evals}")
    w = np.sqrt(evals / species.mass)
    return float(w[0]), float(w[1])


class TwoWireKind(Enum):
    STACKED_PAIR = "StackedPair"  # d < d_split: two minima stacked on the midline
    FUSED = "Fused"  # d = d_split: single minimum
    SIDE_BY_SIDE = "SideBySide"  # d > d_split: one minimum above each wire


@dataclass(frozen=True)
class TwoWireCase:
    kind: TwoWireKind
    d: float
    d_split: float


def classify_two_wire(
    d: float, total_current: float, bias: float, rel_tol: float = 1.0e-3
) -> TwoWireCase:
    """Classify the minima structure of two parallel same-current wires plus bias.

    Compares the wire separation d against d_split = mu0*I/(2*pi*B) with a
    relative tolerance band for the fused case.
    """
    if d <= 0.0 or total_current <= 0.0 or bias <= 0.0:
        raise ParameterError("d, total_current and bias must all be positive")
    ds = split_separation(total_current, bias)
    if abs(d - ds) <= rel_tol * ds:
        kind = TwoWireKind.FUSED
    elif d < ds:
        kind = TwoWireKind.STACKED_PAIR
    else:
        kind = TwoWireKind.SIDE_BY_SIDE
    return TwoWireCase(kind=kind, d=d, d_split=ds)


def barrier_height(
    circuit: Circuit,
    species: AtomSpecies,
    x: float,
    m1: MinimumPoint,
    m2: MinimumPoint,
    *,
    n_line: int = 129,
) -> float:
    """Barrier between two minima in a slice: saddle V minus the higher minimum.

    The straight connector is scanned for its potential maximum, which is then
    relaxed to the in-plane saddle by Newton iteration on grad V = 0 (the
    saddle of the lowest path and the connector maximum coincide for these
    field topologies; the Newton polish removes the straight-line bias).
    """
    p1 = np.array([x, m1.y, m1.z])
    p2 = np.array([x, m2.y, m2.z])
    sep = float(np.linalg.norm(p2 - p1))
    if sep < 10.0 * POSITION_TOL:
        raise ParameterError("minima are not distinct")

    ts = np.linspace(0.0, 1.0, n_line)
    line = p1[None, :] + ts[:, None] * (p2 - p1)[None, :]
    v_line = potential(circuit, species, line)
    k = int(np.argmax(v_line))
    point = line[k].copy()

    # Newton polish toward the stationary point
    for _ in range(60):
        g3 = potential_gradient(circuit, species, point)
        g = g3[1:]
        h = _hessian_2d(circuit, species, point, step=max(1.0e-9, 1.0e-6 * sep))
        try:
            step = np.linalg.solve(h, -g)
        except np.linalg.LinAlgError:
            break
        step_norm = float(np.hypot(step[0], step[1]))
        cap = 0.2 * sep
        if step_norm > cap:
            step *= cap / step_norm
        new = point.copy()
        new[1] += step[0]
        new[2] += step[1]
        if float(np.linalg.norm(new - point)) < 1.0e-13:
            point = new
            break
        point = new
        if np.linalg.norm(point[1:] - 0.5 * (p1 + p2)[1:]) > 2.0 * sep:
            point = line[k].copy()  # diverged; keep the line maximum
            break
    v_saddle = float(potential(circuit, species, point))
    v_saddle = max(v_saddle, float(v_line[k]))
    return v_saddle - max(m1.potential, m2.potential)


@dataclass(frozen=True)
class SliceMinima:
    """Minima of one slice, sorted by y, with barriers between y-adjacent pairs."""

    x: float
    minima: list[MinimumPoint]
    barriers: list[float]  # len = max(0, len(minima) - 1)


@dataclass
class Track:
    """One continuity-linked minimum followed across slices."""

    track_id: int
    slice_indices: list[int] = dc_field(default_factory=list)
    points: list[MinimumPoint] = dc_field(default_factory=list)


@dataclass
class MinimaTrace:
    """Per-slice minima plus linked tracks and detected bifurcation features.

    ``split_x`` is the midpoint between the last slice with a single upper
    (y-merged) structure and the first slice with a y-separated pair.
    ``fourth_port_range`` spans slices carrying two midline minima stacked in
    z (the extra near-surface minimum between the wire split and the
    potential split).
    """

    slices: list[SliceMinima]
    tracks: list[Track]
    split_x: float | None
    fourth_port_range: tuple[float, float] | None
    ambiguous_links: list[tuple[float, float, float]]  # (x, y, z) of unresolved links


def trace_minima(
    circuit: Circuit,
    species: AtomSpecies,
    x_range: tuple[float, float],
    n_slices: int,
    window=None,
    *,
    grid_shape=(96, 96),
    with_barriers: bool = False,
) -> MinimaTrace:
    """Trace transverse minima over ``n_slices`` planes spanning ``x_range``.

    ``window`` may be a fixed ((y_lo, y_hi), (z_lo, z_hi)) or a callable
    window(x).  Track linking is nearest-neighbour with a jump cap of twice
    the slice spacing times a per-track slope estimate; ambiguous links are
    flagged, not guessed.
    """
    if n_slices < 2:
        raise ParameterError("n_slices must be at least 2")
    x_lo, x_hi = x_range
    xs = np.linspace(x_lo, x_hi, n_slices)
    dx = abs(xs[1] - xs[0])

    b_perp = math.hypot(circuit.bias[1], circuit.bias[2])
    i_max = circuit.max_abs_current
    r_scale = (
        MU0 * i_max / (2.0 * math.pi * b_perp) if (b_perp > 0.0 and i_max > 0.0) else 1.0e-3
    )
    y_split_tol = max(20.0 * POSITION_TOL, 1.0e-3 * r_scale)

    slices: list[SliceMinima] = []
    for x in xs:
        win = window(x) if callable(window) else window
        minima = find_transverse_minima(circuit, species, x, win, grid_shape=grid_shape)
        barriers = []
        if with_barriers:
            for a, b in zip(minima[:-1], minima[1:]):
                barriers.append(barrier_height(circuit, species, x, a, b))
        slices.append(SliceMinima(x=float(x), minima=minima, barriers=barriers))

    tracks: list[Track] = []
    open_tracks: list[dict] = []  # {"track": Track, "pos": (y, z), "slope": per-metre}
    ambiguous: list[tuple[float, float, float]] = []
    next_id = 0
    for si, sl in enumerate(slices):
        taken = [False] * len(sl.minima)
        links = []
        for ot in open_tracks:
            allowed = max(2.0 * dx * ot["slope"], 4.0 * dx, 20.0 * POSITION_TOL)
            dists = [
                math.hypot(m.y - ot["pos"][0], m.z - ot["pos"][1]) for m in sl.minima
            ]
            order = np.argsort(dists) if dists else []
            best = int(order[0]) if len(order) else -1
            if best >= 0 and dists[best] <= allowed:
                links.append((dists[best], ot, best))
                second_competitive = (
                    len(order) > 1
                    and dists[int(order[1])] <= allowed
                    and dists[int(order[1])] <= 1.5 * dists[best]
                )
                if second_competitive:
                    m = sl.minima[best]
                    ambiguous.append((sl.x, m.y, m.z))
        links.sort(key=lambda t: t[0])
        surviving = []
        for dist, ot, idx in links:
            if taken[idx]:
                continue
            taken[idx] = True
            m = sl.minima[idx]
            ot["track"].slice_indices.append(si)
            ot["track"].points.append(m)
            jump = math.hypot(m.y - ot["pos"][0], m.z - ot["pos"][1])
            ot["slope"] = max(jump / dx if dx > 0 else 0.0, 0.5 * ot["slope"])
            ot["pos"] = (m.y, m.z)
            surviving.append(ot)
        open_tracks = surviving
        for idx, m in enumerate(sl.minima):
            if taken[idx]:
                continue
            tr = Track(track_id=next_id, slice_indices=[si], points=[m])
            next_id += 1
            tracks.append(tr)
            open_tracks.append({"track": tr, "pos": (m.y, m.z), "slope": 1.0})

    def is_y_split(sl: SliceMinima) -> bool:
        ys_here = [m.y for m in sl.minima]
        return len(ys_here) >= 2 and (max(ys_here) - min(ys_here)) > y_split_tol

    split_x = None
    for si in range(1, len(slices)):
        if is_y_split(slices[si]) and not is_y_split(slices[si - 1]):
            split_x = 0.5 * (slices[si].x + slices[si - 1].x)
            break

    fourth = []
    for sl in slices:
        midline = [m for m in sl.minima if abs(m.y) <= y_split_tol]
        # a genuine stacked pair is well separated in z; a just-fused
        # degenerate point can split into a sub-tolerance phantom pair
        if len(midline) >= 2:
            z_spread = max(m.z for m in midline) - min(m.z for m in midline)
            if z_spread > y_split_tol:
                fourth.append(sl.x)
    fourth_range = (min(fourth), max(fourth)) if fourth else None

    return MinimaTrace(
        slices=slices,
        tracks=tracks,
        split_x=split_x,
        fourth_port_range=fourth_range,
        ambiguous_links=ambiguous,
    )
