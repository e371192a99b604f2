"""Trapping potential, transverse minima, two-wire cases, barriers, frequencies."""

import math

import numpy as np
import pytest

from chipsplit import geometry as geo
from chipsplit import potential as pot
from chipsplit.constants import GAUSS, MU0, MU_B
from conftest import grid_minima_count, two_wire_circuit, y_splitter_for_trace

LI7 = pot.LI7


class TestPotentialValue:
    def test_bias_only_product(self, li7):
        c = geo.Circuit(
            (geo.WireSegment(geo.vec3(0, 0, 0), geo.vec3(1, 0, 0), 0.0),),
            geo.vec3(0, 3 * GAUSS, 0),
        )
        v = pot.potential(c, li7, geo.vec3(0.1, 0.0, 1e-4))
        assert v == pytest.approx(MU_B * 3 * GAUSS, rel=1e-12)
        assert v == pytest.approx(2.78e-27, rel=1e-2)

    def test_ioffe_floor_at_guide_minimum(self, li7, side_guide_12g):
        r0 = pot.side_guide_height(0.8, 12 * GAUSS)
        m = pot.find_transverse_minima(side_guide_12g, li7, 0.0)[0]
        assert m.z == pytest.approx(r0, rel=1e-4)
        assert m.potential == pytest.approx(li7.moment * 3 * GAUSS, rel=1e-6)

    def test_zero_moment_zero_potential(self):
        species = pot.AtomSpecies(mass=LI7.mass, moment=0.0)
        c = geo.build_side_guide(0.8, (0, 12 * GAUSS, 0))
        assert pot.potential(c, species, geo.vec3(0, 0, 1e-4)) == 0.0


class TestSideGuideHeight:
    def test_formula_values(self):
        assert pot.side_guide_height(0.8, 12 * GAUSS) == pytest.approx(133.33e-6, rel=1e-3)
        assert pot.side_guide_height(0.8, 6 * GAUSS) == pytest.approx(266.67e-6, rel=1e-3)

    def test_small_current_limit(self):
        assert pot.side_guide_height(1e-12, 12 * GAUSS) < 1e-12

    def test_rejects_nonpositive(self):
        with pytest.raises(pot.ParameterError):
            pot.side_guide_height(-0.1, 12 * GAUSS)
        with pytest.raises(pot.ParameterError):
            pot.side_guide_height(0.8, 0.0)

    def test_split_separation_same_formula(self):
        assert pot.split_separation(0.8, 6 * GAUSS) == pot.side_guide_height(0.8, 6 * GAUSS)


class TestFindTransverseMinima:
    def test_single_guide_single_minimum(self, li7, side_guide_12g):
        minima = pot.find_transverse_minima(side_guide_12g, li7, 0.0)
        assert len(minima) == 1
        m = minima[0]
        r0 = pot.side_guide_height(0.8, 12 * GAUSS)
        assert abs(m.y) < 1e-8
        assert m.z == pytest.approx(r0, rel=1e-4)
        assert m.grad_norm < pot.gradient_tolerance(side_guide_12g, li7)

    def test_gradient_and_hessian_invariants(self, li7, side_guide_12g):
        # independent finite differences of V itself
        m = pot.find_transverse_minima(side_guide_12g, li7, 0.0)[0]
        h = 1e-8
        p = m.position

        def v_at(dy, dz):
            return float(
                pot.potential(side_guide_12g, li7, p + np.array([0.0, dy, dz]))
            )

        v0 = v_at(0, 0)
        grad_fd = np.array(
            [(v_at(h, 0) - v_at(-h, 0)) / (2 * h), (v_at(0, h) - v_at(0, -h)) / (2 * h)]
        )
        assert np.linalg.norm(grad_fd) < 1e-6 * v0 / p[2]  # tiny vs natural scale
        hess_fd = np.array(
            [
                [(v_at(h, 0) - 2 * v0 + v_at(-h, 0)) / h**2,
                 (v_at(h, h) - v_at(h, -h) - v_at(-h, h) + v_at(-h, -h)) / (4 * h**2)],
                [0.0, (v_at(0, h) - 2 * v0 + v_at(0, -h)) / h**2],
            ]
        )
        hess_fd[1, 0] = hess_fd[0, 1]
        evals_fd = np.linalg.eigvalsh(hess_fd)
        assert np.allclose(evals_fd, m.hess_evals, rtol=1e-2)
        assert np.all(m.hess_evals > 0)

    def test_stacked_pair_positions_match_closed_form(self, li7):
        current, bias = 0.8, 6 * GAUSS
        ds = pot.split_separation(current, bias)
        d = 0.6 * ds
        c = two_wire_circuit(d, current, bias)
        minima = pot.find_transverse_minima(
            c, li7, 0.0, ((-d / 2 - ds, d / 2 + ds), (1e-6, 2.5 * ds))
        )
        assert len(minima) == 2
        z_lo = (ds - math.sqrt(ds**2 - d**2)) / 2
        z_hi = (ds + math.sqrt(ds**2 - d**2)) / 2
        got = sorted(m.z for m in minima)
        assert got[0] == pytest.approx(z_lo, abs=1e-8)
        assert got[1] == pytest.approx(z_hi, abs=1e-8)
        assert all(abs(m.y) < 1e-8 for m in minima)
        assert all(m.conical for m in minima)

    def test_y_slice_between_wire_and_potential_split(self, li7):
        circuit, params, ds, x_split = y_splitter_for_trace(0.8, 6.0)
        minima = pot.find_transverse_minima(circuit, li7, 0.55 * x_split)
        assert len(minima) == 2
        assert all(abs(m.y) < 1e-3 * ds for m in minima)  # stacked on the midline
        zs = sorted(m.z for m in minima)
        assert zs[0] < 0.5 * ds < zs[1]

    def test_y_slice_past_split(self, li7):
        circuit, params, ds, x_split = y_splitter_for_trace(0.8, 6.0)
        minima = pot.find_transverse_minima(circuit, li7, 1.4 * x_split)
        assert len(minima) == 2
        ys = sorted(m.y for m in minima)
        assert ys[0] < -0.01 * ds and ys[1] > 0.01 * ds

    def test_mirror_symmetry_of_minima(self, li7):
        circuit, params, ds, x_split = y_splitter_for_trace(0.8, 6.0)
        for x in (0.5 * x_split, 1.3 * x_split):
            minima = pot.find_transverse_minima(circuit, li7, x)
            ys = np.sort([m.y for m in minima])
            assert np.allclose(ys, -ys[::-1], atol=2e-8)

    def test_empty_window_rejected(self, li7, side_guide_12g):
        with pytest.raises(pot.ParameterError):
            pot.find_transverse_minima(side_guide_12g, li7, 0.0, ((1e-4, 1e-4), (1e-6, 1e-3)))


class TestClassifyTwoWire:
    def test_canonical_cases(self):
        current, bias = 0.8, 6 * GAUSS
        ds = pot.split_separation(current, bias)
        assert pot.classify_two_wire(0.5 * ds, current, bias).kind is pot.TwoWireKind.STACKED_PAIR
        assert pot.classify_two_wire(ds, current, bias).kind is pot.TwoWireKind.FUSED
        assert pot.classify_two_wire(2 * ds, current, bias).kind is pot.TwoWireKind.SIDE_BY_SIDE

    def test_case_consistent_with_separation_sign(self):
        case = pot.classify_two_wire(1.3e-4, 0.8, 6 * GAUSS)
        assert case.d > case.d_split or case.kind is not pot.TwoWireKind.SIDE_BY_SIDE

    def test_rejects_nonpositive(self):
        with pytest.raises(pot.ParameterError):
            pot.classify_two_wire(-1e-4, 0.8, 6 * GAUSS)

    def test_cross_check_against_minima_finder(self, li7):
        current, bias = 0.8, 6 * GAUSS
        ds = pot.split_separation(current, bias)
        for u, expected_n, stacked in ((0.5, 2, True), (1.6, 2, False)):
            d = u * ds
            c = two_wire_circuit(d, current, bias)
            minima = pot.find_transverse_minima(
                c, li7, 0.0, ((-d / 2 - ds, d / 2 + ds), (1e-6, 2.5 * ds))
            )
            case = pot.classify_two_wire(d, current, bias)
            assert len(minima) == expected_n
            spread = max(m.y for m in minima) - min(m.y for m in minima)
            assert (spread < 1e-3 * ds) == stacked
            assert (case.kind is pot.TwoWireKind.STACKED_PAIR) == stacked


class TestBarrierHeight:
    def _barrier(self, li7, d, current=0.8, bias=6 * GAUSS):
        ds = pot.split_separation(current, bias)
        c = two_wire_circuit(d, current, bias)
        minima = pot.find_transverse_minima(
            c, li7, 0.0, ((-d / 2 - ds, d / 2 + ds), (1e-6, 2.6 * ds))
        )
        assert len(minima) == 2
        return pot.barrier_height(c, li7, 0.0, minima[0], minima[1])

    def test_side_by_side_barrier_grows_with_separation(self, li7):
        ds = pot.split_separation(0.8, 6 * GAUSS)
        barriers = [self._barrier(li7, u * ds) for u in (1.2, 1.5, 2.0)]
        assert barriers[0] > 0
        assert barriers[0] < barriers[1] < barriers[2]

    def test_stacked_barrier_grows_toward_contact(self, li7):
        ds = pot.split_separation(0.8, 6 * GAUSS)
        barriers = [self._barrier(li7, u * ds) for u in (0.9, 0.6, 0.4)]
        assert barriers[0] > 0
        assert barriers[0] < barriers[1] < barriers[2]

    def test_identical_minima_rejected(self, li7, side_guide_12g):
        m = pot.find_transverse_minima(side_guide_12g, li7, 0.0)[0]
        with pytest.raises(pot.ParameterError):
            pot.barrier_height(side_guide_12g, li7, 0.0, m, m)

    def test_fused_slice_has_single_minimum(self, li7):
        current, bias = 0.8, 6 * GAUSS
        ds = pot.split_separation(current, bias)
        c = two_wire_circuit(ds * 0.9999, current, bias)
        case = pot.classify_two_wire(ds * 0.9999, current, bias)
        assert case.kind is pot.TwoWireKind.FUSED
        # at fusion the barrier degenerates to zero with the minima pair;
        # just inside the band the two stacked minima are ~one position
        # tolerance apart and no barrier is defined between them


class TestHarmonicFrequencies:
    def test_matches_closed_form_oracle(self, li7, side_guide_12g):
        # ideal Ioffe side guide: omega = B' sqrt(mu / (m B_axial))
        current, bias, ioffe = 0.8, 12 * GAUSS, 3 * GAUSS
        r0 = pot.side_guide_height(current, bias)
        b_prime = bias / r0
        oracle = b_prime * math.sqrt(li7.moment / (li7.mass * ioffe))
        m = pot.find_transverse_minima(side_guide_12g, li7, 0.0)[0]
        w1, w2 = pot.harmonic_frequencies(side_guide_12g, li7, m)
        assert w1 == pytest.approx(oracle, rel=5e-3)
        assert w2 == pytest.approx(oracle, rel=5e-3)
        assert w1 == pytest.approx(2 * math.pi * 2.33e3, rel=2e-2)

    def test_degenerate_quadrupole_raises(self, li7):
        c = geo.build_side_guide(0.8, (0, 12 * GAUSS, 0))
        m = pot.find_transverse_minima(c, li7, 0.0)[0]
        assert m.conical
        with pytest.raises(pot.DegenerateTrapError):
            pot.harmonic_frequencies(c, li7, m)

    def test_frequency_scales_linearly_with_current_and_bias(self, li7):
        # scaling I and B_bias together keeps r0 fixed and scales B', so
        # omega is linear in the scale factor at fixed axial field
        ioffe = 3 * GAUSS
        ws = []
        for s in (1.0, 2.0):
            c = geo.build_side_guide(0.8 * s, (ioffe, 12 * GAUSS * s, 0), length=1.0)
            m = pot.find_transverse_minima(c, li7, 0.0)[0]
            ws.append(pot.harmonic_frequencies(c, li7, m)[0])
        assert ws[1] / ws[0] == pytest.approx(2.0, rel=1e-3)


class TestTraceMinima:
    def test_straight_guide_single_flat_track(self, li7, side_guide_12g):
        trace = pot.trace_minima(side_guide_12g, li7, (-1e-3, 1e-3), 21)
        assert len(trace.tracks) == 1
        assert trace.split_x is None
        assert trace.fourth_port_range is None
        zs = [m.z for m in trace.tracks[0].points]
        assert len(zs) == 21
        assert max(zs) - min(zs) < 1e-8

    def test_y_track_structure_and_split(self, li7):
        circuit, params, ds, x_split = y_splitter_for_trace(0.8, 12.0)
        n_slices = 81
        trace = pot.trace_minima(circuit, li7, (0.2 * x_split, 1.4 * x_split), n_slices)
        # counts: stacked pair before the split, left/right pair after
        assert trace.split_x is not None
        sep = 2.0 * trace.split_x * math.tan(params.half_angle)
        slice_sep = 2.0 * (1.2 * x_split / (n_slices - 1)) * math.tan(params.half_angle)
        assert abs(sep - ds) <= slice_sep
        assert trace.fourth_port_range is not None
        lo, hi = trace.fourth_port_range
        assert 0.0 < lo < hi <= trace.split_x + 2 * (1.2 * x_split / (n_slices - 1))
        for sl in trace.slices:
            assert [m.y for m in sl.minima] == sorted(m.y for m in sl.minima)

    def test_output_guide_at_half_height(self, li7):
        # equal split at small opening angle: arm guides sit at half the
        # input-guide height because each carries half the current
        circuit, params, ds, x_split = y_splitter_for_trace(0.8, 6.0)
        far = pot.find_transverse_minima(circuit, li7, 2.0 * x_split)
        assert len(far) == 2
        for m in far:
            assert m.z == pytest.approx(ds / 2, rel=2e-2)

    def test_requires_two_slices(self, li7, side_guide_12g):
        with pytest.raises(pot.ParameterError):
            pot.trace_minima(side_guide_12g, li7, (0.0, 1e-3), 1)


class TestParallelSplitDesign:
    def test_matched_separation_splits_at_wire_split(self, li7):
        # wires held at exactly the splitting separation: the guide height is
        # maintained throughout, no extra near-surface minimum appears, and
        # macroscopic splitting sets in at the wire split.  The fused state is
        # quartically soft, so the pair separation is a power law around the
        # bend rather than a sharp transition; the oncoming divergence is felt
        # within about one transverse scale upstream.
        current, bias = 0.8, 6 * GAUSS
        ds = pot.split_separation(current, bias)
        alpha = math.radians(3.0)
        c = geo.build_parallel_then_split(
            ds, 0.0, parallel_length=6e-3, arm_length=6e-3, half_angle=alpha,
            total_current=current, bias=(0, bias, 0),
        )
        n_slices = 41
        trace = pot.trace_minima(c, li7, (-1.93 * ds, 2.07 * ds), n_slices)
        assert trace.fourth_port_range is None
        seps = []
        for sl in trace.slices:
            for m in sl.minima:
                assert m.z == pytest.approx(ds / 2, rel=7e-2)  # height maintained
            ys = [m.y for m in sl.minima]
            seps.append((sl.x, max(ys) - min(ys) if len(ys) > 1 else 0.0))
        assert seps[0][1] < 0.1 * ds  # essentially fused far upstream
        assert seps[-1][1] > 0.5 * ds  # cleanly split downstream
        # separation onset brackets the wire split within a transverse scale
        x_cross = next(x for x, s in seps if s > 0.15 * ds)
        assert abs(x_cross) < 0.5 * ds
        sep_vals = [s for _, s in seps]
        assert all(b >= a - 1e-8 for a, b in zip(sep_vals[:-1], sep_vals[1:]))
