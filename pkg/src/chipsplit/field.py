"""Magnetic field of a circuit: closed-form finite-segment fields plus homogeneous bias.

All evaluators accept a single point of shape (3,) or a batch of shape (n, 3)
and return matching shapes.  Points closer than ``WIRE_EPS`` (1 nm) to a
filament raise :class:`FieldSingularityError`: trajectories reaching a wire
are physically lost, so silent smoothing would corrupt loss statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import Circuit, Vec3, WireSegment

WIRE_EPS = _kernels.WIRE_EPS


class FieldSingularityError(Exception):
    """Evaluation point within WIRE_EPS of a current-carrying filament."""


@dataclass(frozen=True)
class FieldSample:
    """Field vector and (optionally) its spatial Jacobian at one point.

    In current-free regions the Jacobian is symmetric and traceless
    (curl-free and divergence-free) up to numerical tolerance.
    """

    B: Vec3
    jacobian: np.ndarray | None = None


def _as_points(points) -> tuple[np.ndarray, bool]:
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    if single:
        pts = pts.reshape(1, 3)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"points must have shape (3,) or (n, 3), got {pts.shape}")
    return np.ascontiguousarray(pts), single


def _check_singular(d2: np.ndarray) -> None:
    bad = d2 < WIRE_EPS * WIRE_EPS
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise FieldSingularityError(
            f"evaluation point {idx} lies within {WIRE_EPS:g} m of a wire "
            f"(distance {float(np.sqrt(d2[idx])):.3g} m)"
        )


def segment_field(segment: WireSegment, point) -> Vec3:
    """Field of a single finite straight filament at one point.

    The direction is azimuthal around the segment by the right-hand rule; on
    the extended axis beyond the endpoints the field vanishes identically.
    """
    circuit = Circuit((segment,), np.zeros(3))
    return total_field(circuit, point)


def total_field(circuit: Circuit, points):
    """Superposition of all segment fields plus the homogeneous bias."""
    pts, single = _as_points(points)
    out_b = np.empty_like(pts)
    out_d2 = np.empty(pts.shape[0])
    _kernels.field_batch(circuit.packed, circuit.bias, pts, out_b, out_d2)
    _check_singular(out_d2)
    return out_b[0] if single else out_b


def field_and_jacobian(circuit: Circuit, points):
    """Field and analytic Jacobian dB_i/dx_j; returns (B, J)."""
    pts, single = _as_points(points)
    out_b = np.empty_like(pts)
    out_j = np.empty((pts.shape[0], 3, 3))
    out_d2 = np.empty(pts.shape[0])
    _kernels.field_jac_batch(circuit.packed, circuit.bias, pts, out_b, out_j, out_d2)
    _check_singular(out_d2)
    if single:
        return out_b[0], out_j[0]
    return out_b, out_j


def field_jacobian(circuit: Circuit, points):
    """Analytic Jacobian of the field, shape (..., 3, 3)."""
    return field_and_jacobian(circuit, points)[1]


def sample(circuit: Circuit, point, with_jacobian: bool = True) -> FieldSample:
    if with_jacobian:
        b, j = field_and_jacobian(circuit, point)
        return FieldSample(b, j)
    return FieldSample(total_field(circuit, point), None)


def fd_jacobian(circuit: Circuit, point, step: float | None = None) -> np.ndarray:
    """Central-difference Jacobian, the independent cross-check for the analytic one.

    Default step: max(1 nm, 1e-6 x distance to the nearest wire).
    """
    p = np.asarray(point, dtype=np.float64)
    if step is None:
        step = max(1.0e-9, 1.0e-6 * min_wire_distance(circuit, p))
    jac = np.empty((3, 3))
    for axis in range(3):
        dp = np.zeros(3)
        dp[axis] = step
        bp = total_field(circuit, p + dp)
        bm = total_field(circuit, p - dp)
        jac[:, axis] = (bp - bm) / (2.0 * step)
    return jac


def min_wire_distance(circuit: Circuit, points):
    """Distance from each point to the nearest wire segment."""
    pts, single = _as_points(points)
    out_b = np.empty_like(pts)
    out_d2 = np.empty(pts.shape[0])
    _kernels.field_batch(circuit.packed, circuit.bias, pts, out_b, out_d2)
    d = np.sqrt(out_d2)
    return float(d[0]) if single else d
