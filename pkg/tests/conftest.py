import math

import numpy as np
import pytest

from chipsplit import geometry
from chipsplit.constants import GAUSS
from chipsplit.potential import LI7

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def li7():
    return LI7


@pytest.fixture(scope="session")
def side_guide_12g():
    """0.8 A wire with 12 G bias along y and 3 G axial field."""
    return geometry.build_side_guide(0.8, (3 * GAUSS, 12 * GAUSS, 0.0))


def two_wire_circuit(separation, total_current, bias, length=2.0):
    """Two parallel wires along x carrying equal co-directed currents."""
    half = separation / 2.0
    segs = (
        geometry.WireSegment(
            geometry.vec3(-length / 2, half, 0), geometry.vec3(length / 2, half, 0),
            total_current / 2,
        ),
        geometry.WireSegment(
            geometry.vec3(-length / 2, -half, 0), geometry.vec3(length / 2, -half, 0),
            total_current / 2,
        ),
    )
    return geometry.Circuit(segs, geometry.vec3(0.0, bias, 0.0))


def grid_minima_count(circuit, window, shape=(400, 400)):
    """Brute-force local-minimum census of |B| on a uniform slice grid.

    Independent oracle: nothing here touches the minima-finding machinery.
    Returns (count, positions).  The y grid is offset by an irrational cell
    fraction so mirror-symmetric layouts cannot produce exact ties.
    """
    from chipsplit.field import total_field

    (y_lo, y_hi), (z_lo, z_hi) = window
    ny, nz = shape
    dy = (y_hi - y_lo) / (ny + 1)
    ys = y_lo + dy * (np.arange(ny) + 0.5772156649)
    zs = np.linspace(z_lo, z_hi, nz)
    yy, zz = np.meshgrid(ys, zs, indexing="ij")
    pts = np.column_stack([np.zeros(yy.size), yy.ravel(), zz.ravel()])
    bn = np.linalg.norm(total_field(circuit, pts), axis=1).reshape(ny, nz)
    inner = bn[1:-1, 1:-1]
    mask = np.ones_like(inner, dtype=bool)
    for dy_i in (-1, 0, 1):
        for dz_i in (-1, 0, 1):
            if dy_i == 0 and dz_i == 0:
                continue
            mask &= inner < bn[1 + dy_i : ny - 1 + dy_i, 1 + dz_i : nz - 1 + dz_i]
    idx = np.argwhere(mask)
    positions = [(ys[i + 1], zs[j + 1]) for i, j in idx]
    return len(positions), positions


def y_splitter_for_trace(total_current, bias_gauss, half_angle_deg=3.0, fraction=0.5,
                         ioffe_gauss=0.0):
    """Long-lead Y splitter sized from its own split scale, for tracing tests."""
    from chipsplit.potential import split_separation

    bias_t = bias_gauss * GAUSS
    ds = split_separation(total_current, bias_t)
    alpha = math.radians(half_angle_deg)
    x_split = ds / (2.0 * math.tan(alpha))
    params = geometry.YSplitterParams(
        input_length=5.0 * x_split,
        arm_length=3.0 * x_split,
        half_angle=alpha,
        total_current=total_current,
        current_fraction_left=fraction,
        bias=(ioffe_gauss * GAUSS, bias_t, 0.0),
    )
    return geometry.build_y_splitter(params), params, ds, x_split
