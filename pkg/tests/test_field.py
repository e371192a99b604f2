"""Finite-segment Biot-Savart fields, superposition and Jacobians."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from chipsplit import field as fld
from chipsplit import geometry as geo
from chipsplit.constants import GAUSS, MU0


def long_wire(current=1.0, half=1e6):
    return geo.WireSegment(geo.vec3(-half, 0, 0), geo.vec3(half, 0, 0), current)


class TestSegmentField:
    def test_infinite_wire_limit(self):
        b = fld.segment_field(long_wire(), geo.vec3(0, 0, 1.0))
        expected = MU0 / (2 * math.pi)
        assert abs(np.linalg.norm(b) - expected) / expected < 1e-12
        # right-hand rule: current +x, point at +z -> field along -y
        assert b[1] < 0 and abs(b[0]) < 1e-25 and abs(b[2]) < 1e-25

    def test_on_axis_beyond_endpoint_is_zero(self):
        b = fld.segment_field(long_wire(half=1.0), geo.vec3(2.0, 0, 0))
        assert np.all(b == 0.0)

    def test_half_infinite_perpendicular_at_end(self):
        # quadrature of the Biot-Savart integrand is the independent oracle
        r = 0.01
        length = 1e5
        seg = geo.WireSegment(geo.vec3(0, 0, 0), geo.vec3(length, 0, 0), 1.0)
        b = fld.segment_field(seg, geo.vec3(0, 0, r))

        def integrand(s):
            return r / (r * r + s * s) ** 1.5

        oracle, _ = quad(integrand, 0.0, length, points=[r, 10 * r, 1000 * r])
        oracle *= MU0 / (4 * math.pi)
        assert np.linalg.norm(b) == pytest.approx(oracle, rel=1e-9)
        assert np.linalg.norm(b) == pytest.approx(MU0 / (4 * math.pi * r), rel=1e-6)

    def test_singularity_guard(self):
        seg = long_wire(half=1.0)
        with pytest.raises(fld.FieldSingularityError):
            fld.segment_field(seg, geo.vec3(0.5, 0, 0.5e-9))
        # 2 nm off the wire is legal
        fld.segment_field(seg, geo.vec3(0.5, 0, 2e-9))

    def test_finite_length_error_scaling(self):
        # relative deviation from the infinite-wire value scales as (r/L)^2
        r = 1.0
        expected = MU0 / (2 * math.pi * r)
        for half in (1e2, 1e3):
            b = fld.segment_field(long_wire(half=half), geo.vec3(0, 0, r))
            rel = abs(np.linalg.norm(b) - expected) / expected
            assert rel < (r / half) ** 2


class TestTotalField:
    def test_side_guide_zero_at_formula_height(self):
        current, bias = 0.8, 12 * GAUSS
        r0 = MU0 * current / (2 * math.pi * bias)
        c = geo.build_side_guide(current, (0, bias, 0), length=200.0)
        assert np.linalg.norm(fld.total_field(c, geo.vec3(0, 0, r0))) < 1e-9 * bias

    def test_axial_component_survives_cancellation(self):
        current, bias, ioffe = 0.8, 12 * GAUSS, 3 * GAUSS
        r0 = MU0 * current / (2 * math.pi * bias)
        c = geo.build_side_guide(current, (ioffe, bias, 0), length=200.0)
        b = fld.total_field(c, geo.vec3(0, 0, r0))
        assert np.linalg.norm(b) == pytest.approx(ioffe, rel=1e-9)

    def test_zero_current_gives_bias(self):
        c = geo.Circuit(
            (geo.WireSegment(geo.vec3(0, 0, 0), geo.vec3(1, 0, 0), 0.0),),
            geo.vec3(1 * GAUSS, 2 * GAUSS, -3 * GAUSS),
        )
        pts = np.array([[0.3, 1e-4, 2e-4], [-5.0, 0.1, 0.3]])
        assert np.allclose(fld.total_field(c, pts), c.bias)

    def test_current_linearity(self):
        p = geo.vec3(1e-4, 2e-4, 3e-4)
        c = geo.build_y_splitter(
            geo.YSplitterParams(
                input_length=2e-3, arm_length=2e-3, total_current=0.8,
                bias=(0, 12 * GAUSS, 0),
            )
        )
        b1 = fld.total_field(c, p)
        b2 = fld.total_field(c.with_currents_scaled(2.5), p)
        wire_part = b1 - c.bias
        assert np.allclose(b2, 2.5 * wire_part + c.bias, rtol=1e-13)


@pytest.fixture(scope="module")
def circuit():
    return geo.build_y_splitter(
        geo.YSplitterParams(
            input_length=2e-3, arm_length=2e-3, total_current=0.8,
            bias=(3 * GAUSS, 12 * GAUSS, 0),
        )
    )


class TestJacobian:

    def test_matches_finite_differences_at_random_points(self, circuit):
        rng = np.random.default_rng(1234)
        for _ in range(100):
            p = np.array(
                [
                    rng.uniform(-1.5e-3, 1.5e-3),
                    rng.uniform(-8e-4, 8e-4),
                    rng.uniform(2e-5, 1e-3),
                ]
            )
            ja = fld.field_jacobian(circuit, p)
            jf = fld.fd_jacobian(circuit, p)
            assert np.linalg.norm(ja - jf) <= 1e-6 * np.linalg.norm(jf)

    def test_divergence_free(self, circuit):
        rng = np.random.default_rng(99)
        for _ in range(50):
            p = np.array(
                [
                    rng.uniform(-1.5e-3, 1.5e-3),
                    rng.uniform(-8e-4, 8e-4),
                    rng.uniform(2e-5, 1e-3),
                ]
            )
            j = fld.field_jacobian(circuit, p)
            assert abs(np.trace(j)) < 1e-6 * np.linalg.norm(j)

    def test_curl_free_away_from_open_ends(self):
        # a filament with far-away ends is effectively a closed circuit; the
        # symmetric-Jacobian property only holds for conserved currents
        c = geo.build_side_guide(0.8, (0, 12 * GAUSS, 0), length=400.0)
        p = geo.vec3(1e-4, 5e-5, 2e-4)
        j = fld.field_jacobian(c, p)
        assert np.linalg.norm(j - j.T) < 1e-9 * np.linalg.norm(j)

    def test_side_guide_gradient_value(self):
        # |dB/dr| at the guide height equals B_bias / r0 = 9.0 T/m here
        current, bias = 0.8, 12 * GAUSS
        r0 = MU0 * current / (2 * math.pi * bias)
        c = geo.build_side_guide(current, (0, bias, 0), length=200.0)
        j = fld.field_jacobian(c, geo.vec3(0, 0, r0))
        expected = bias / r0
        assert j[1, 2] == pytest.approx(expected, rel=1e-5)
        assert j[2, 1] == pytest.approx(expected, rel=1e-5)

    def test_uniform_bias_jacobian_zero(self):
        c = geo.Circuit(
            (geo.WireSegment(geo.vec3(0, 0, 0), geo.vec3(1, 0, 0), 0.0),),
            geo.vec3(0, 12 * GAUSS, 0),
        )
        j = fld.field_jacobian(c, geo.vec3(0.3, 1e-4, 2e-4))
        assert np.all(j == 0.0)

    def test_sample_carries_field_and_jacobian(self, circuit):
        s = fld.sample(circuit, geo.vec3(1e-4, 0, 2e-4))
        assert s.jacobian is not None and s.B.shape == (3,)
        s2 = fld.sample(circuit, geo.vec3(1e-4, 0, 2e-4), with_jacobian=False)
        assert s2.jacobian is None
