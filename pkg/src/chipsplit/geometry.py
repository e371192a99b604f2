"""Wire circuits: straight filament segments with signed currents plus a homogeneous bias field.

Conventions: the chip surface is the plane z = 0 with all wires lying in it,
atoms live at z > 0, the input guide runs along +x and the bias field points
along +y unless stated otherwise.  Wires are infinitely thin filaments; leads
are terminated at finite length instead of being closed into loops, and the
open ends (nodes of degree 1) are exempt from current conservation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .constants import MU0

#: A point or field vector; plain float64 ndarray of shape (3,).
Vec3 = np.ndarray

MAX_CURRENT = 100.0  # A, sanity bound on a single filament
BALANCE_TOL = 1.0e-12  # relative tolerance for junction current sums


def vec3(x: float, y: float, z: float) -> Vec3:
    """Build a finite 3-vector."""
    v = np.array([x, y, z], dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite vector components: {v}")
    return v


def as_vec3(v: Iterable[float]) -> Vec3:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite vector components: {v}")
    return v


@dataclass(frozen=True)
class WireSegment:
    """Straight filament from ``start`` to ``end`` carrying ``current`` amperes.

    Positive current flows from start to end.
    """

    start: Vec3
    end: Vec3
    current: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "start", as_vec3(self.start))
        object.__setattr__(self, "end", as_vec3(self.end))
        object.__setattr__(self, "current", float(self.current))
        if not math.isfinite(self.current):
            raise ValueError("segment current must be finite")
        if abs(self.current) >= MAX_CURRENT:
            raise ValueError(f"|current| = {abs(self.current)} A exceeds sanity bound {MAX_CURRENT} A")
        if self.length == 0.0:
            raise ValueError("segment start and end coincide")

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))

    @property
    def direction(self) -> Vec3:
        return (self.end - self.start) / self.length

    def mirrored(self) -> "WireSegment":
        """Reflection through the plane y = 0 (current value unchanged)."""
        s = self.start.copy()
        e = self.end.copy()
        s[1] = -s[1]
        e[1] = -e[1]
        return WireSegment(s, e, self.current)


@dataclass(frozen=True)
class Circuit:
    """A set of wire segments plus a homogeneous bias field (tesla).

    The bias includes any axial component along the input guide.  Circuits are
    immutable after construction and safe to share across workers.
    """

    segments: tuple[WireSegment, ...]
    bias: Vec3

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "bias", as_vec3(self.bias))
        object.__setattr__(self, "_packed", _pack_segments(self.segments))

    @property
    def packed(self) -> np.ndarray:
        """(n, 8) float64 rows of [start(3), unit direction(3), length, mu0*I/4pi]."""
        return self._packed  # type: ignore[attr-defined]

    @property
    def max_abs_current(self) -> float:
        return max((abs(s.current) for s in self.segments), default=0.0)

    def mirrored(self) -> "Circuit":
        """y -> -y reflection of geometry and currents; bias maps as a pseudovector."""
        bias = self.bias * np.array([-1.0, 1.0, -1.0])
        return Circuit(tuple(s.mirrored() for s in self.segments), bias)

    def with_currents_scaled(self, factor: float) -> "Circuit":
        segs = tuple(WireSegment(s.start, s.end, s.current * factor) for s in self.segments)
        return Circuit(segs, self.bias)


def _pack_segments(segments: tuple[WireSegment, ...]) -> np.ndarray:
    packed = np.zeros((len(segments), 8), dtype=np.float64)
    for i, seg in enumerate(segments):
        packed[i, 0:3] = seg.start
        packed[i, 3:6] = seg.direction
        packed[i, 6] = seg.length
        packed[i, 7] = MU0 * seg.current / (4.0 * math.pi)
    return packed


def _node_key(p: Vec3) -> tuple[float, float, float]:
    # Builder endpoints are constructed from identical expressions, and file
    # input repeats exact values, so exact float equality identifies nodes.
    return (float(p[0]), float(p[1]), float(p[2]))


def validate_circuit(circuit: Circuit) -> list[str]:
    """Return a list of violation messages; empty iff the circuit is consistent.

    Checks signed current conservation at every junction node (a point shared
    by three or more segment endpoints).  Degree-1 endpoints are open leads
    and exempt; degree-2 nodes are polyline bends and not constrained here.
    """
    violations: list[str] = []
    if not np.all(np.isfinite(circuit.bias)):
        violations.append("bias field has non-finite components")
    nodes: dict[tuple[float, float, float], list[float]] = {}
    for seg in circuit.segments:
        # current out of the start node, into the end node
        nodes.setdefault(_node_key(seg.start), []).append(-seg.current)
        nodes.setdefault(_node_key(seg.end), []).append(+seg.current)
    scale = max(1.0, max((abs(s.current) for s in circuit.segments), default=0.0))
    for key, flows in nodes.items():
        if len(flows) < 3:
            continue
        imbalance = math.fsum(flows)
        if abs(imbalance) > BALANCE_TOL * scale:
            violations.append(
                f"junction at ({key[0]:g}, {key[1]:g}, {key[2]:g}) m: "
                f"signed currents sum to {imbalance:g} A"
            )
    return violations


@dataclass(frozen=True)
class YSplitterParams:
    """Parameters of the Y-shaped splitter wire.

    The input wire runs along +x and ends at the origin; the two output arms
    leave the origin at +/- ``half_angle`` in the chip plane.  The left arm
    (toward +y) carries ``current_fraction_left`` of the total current.
    """

    input_length: float  # m
    arm_length: float  # m
    half_angle: float = math.radians(10.0)  # rad
    total_current: float = 0.8  # A
    current_fraction_left: float = 0.5
    bias: Vec3 = (0.0, 0.0, 0.0)  # T

    def __post_init__(self) -> None:
        object.__setattr__(self, "bias", as_vec3(self.bias))
        if not (self.input_length > 0.0 and self.arm_length > 0.0):
            raise ValueError("input_length and arm_length must be positive")
        if not (0.0 < self.half_angle < math.pi / 2.0):
            raise ValueError("half_angle must lie in (0, pi/2)")
        if not (0.0 <= self.current_fraction_left <= 1.0):
            raise ValueError("current_fraction_left must lie in [0, 1]")
        if abs(self.total_current) >= MAX_CURRENT:
            raise ValueError("total_current exceeds sanity bound")


def build_y_splitter(params: YSplitterParams) -> Circuit:
    """Y splitter: input wire along +x into the origin, two diverging output arms."""
    origin = vec3(0.0, 0.0, 0.0)
    c, s = math.cos(params.half_angle), math.sin(params.half_angle)
    left_end = vec3(params.arm_length * c, params.arm_length * s, 0.0)
    right_end = vec3(params.arm_length * c, -params.arm_length * s, 0.0)
    i_left = params.total_current * params.current_fraction_left
    i_right = params.total_current - i_left
    segments = (
        WireSegment(vec3(-params.input_length, 0.0, 0.0), origin, params.total_current),
        WireSegment(origin, left_end, i_left),
        WireSegment(origin, right_end, i_right),
    )
    return Circuit(segments, params.bias)


def build_side_guide(
    current: float,
    bias: Iterable[float],
    length: float | None = None,
    x_center: float = 0.0,
) -> Circuit:
    """Single straight wire along x plus bias: the elementary side guide.

    Default length is 2000x the guide height so the mid-wire field is
    indistinguishable from the infinite-wire limit.
    """
    bias = as_vec3(bias)
    if length is None:
        b_perp = math.hypot(bias[1], bias[2])
        height = MU0 * abs(current) / (2.0 * math.pi * b_perp) if b_perp > 0 else 1e-4
        length = 2000.0 * height
    seg = WireSegment(
        vec3(x_center - length / 2.0, 0.0, 0.0),
        vec3(x_center + length / 2.0, 0.0, 0.0),
        current,
    )
    return Circuit((seg,), bias)


def build_parallel_then_split(
    separation: float,
    split_x: float = 0.0,
    *,
    parallel_length: float,
    arm_length: float,
    half_angle: float = math.radians(10.0),
    total_current: float = 0.8,
    bias: Iterable[float] = (0.0, 0.0, 0.0),
) -> Circuit:
    """Two wires running parallel at ``separation`` until ``split_x``, then diverging.

    Each wire carries half the total current; there are no junctions, only
    degree-2 bends, so conservation is trivial.
    """
    if separation <= 0.0:
        raise ValueError("separation must be positive")
    if parallel_length <= 0.0 or arm_length <= 0.0:
        raise ValueError("parallel_length and arm_length must be positive")
    if not (0.0 < half_angle < math.pi / 2.0):
        raise ValueError("half_angle must lie in (0, pi/2)")
    bias = as_vec3(bias)
    half = total_current / 2.0
    c, s = math.cos(half_angle), math.sin(half_angle)
    segments = []
    for sign in (+1.0, -1.0):
        y0 = sign * separation / 2.0
        bend = vec3(split_x, y0, 0.0)
        start = vec3(split_x - parallel_length, y0, 0.0)
        end = vec3(split_x + arm_length * c, y0 + sign * arm_length * s, 0.0)
        segments.append(WireSegment(start, bend, half))
        segments.append(WireSegment(bend, end, half))
    return Circuit(tuple(segments), bias)


def build_counter_wire_guide(
    separation: float,
    *,
    current: float,
    bias_z: float,
    length: float | None = None,
) -> Circuit:
    """Two parallel wires with opposite currents and a bias perpendicular to the chip.

    The +y wire carries +current (along +x) and the -y wire carries -current.
    The bias is constrained to +/-z by construction.
    """
    if separation <= 0.0:
        raise ValueError("separation must be positive")
    if length is None:
        length = 2000.0 * separation
    half = separation / 2.0
    segments = (
        WireSegment(vec3(-length / 2.0, half, 0.0), vec3(length / 2.0, half, 0.0), current),
        WireSegment(vec3(-length / 2.0, -half, 0.0), vec3(length / 2.0, -half, 0.0), -current),
    )
    return Circuit(segments, vec3(0.0, 0.0, bias_z))
