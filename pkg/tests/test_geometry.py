import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.interpolate import CubicSpline

from foilskin.errors import GeometryError
from foilskin.geometry import (CAMBER_SAMPLES, FoilGeometry, PlanarPoint, camber_percent, chord_line,
                               fit_camber_spline, markers_to_camber, markers_to_camber_batch,
                               measure_camber, perpendicular_distance, spline_eval,
                               spline_second_derivatives)
from foilskin.plant import marker_positions

XS = np.linspace(0.0, 200.0, 6)


def parabola(x, apex=10.0):
    # apex height ``apex`` at mid-chord, zero at both ends
    return 4 * apex * x * (200 - x) / 200**2


def random_line(rng, n=6, amp=15.0):
    x = np.sort(rng.uniform(0, 200, n))
    x[0], x[-1] = 0.0, 200.0
    gaps = np.diff(x)
    if np.any(gaps < 5):
        x = np.linspace(0, 200, n) + np.r_[0, rng.uniform(-10, 10, n - 2), 0]
    y = amp * np.sin(np.pi * x / 200 * rng.uniform(0.5, 2.0)) + rng.normal(0, 1.0, n)
    return np.column_stack([x, y])


class TestSplineKernel:
    def test_matches_scipy_not_a_knot(self, rng):
        for _ in range(20):
            pts = random_line(rng)
            m = spline_second_derivatives(pts[:, 0], pts[:, 1])
            xq = np.linspace(0, 200, 333)
            ref = CubicSpline(pts[:, 0], pts[:, 1], bc_type="not-a-knot")(xq)
            assert np.max(np.abs(spline_eval(pts[:, 0], pts[:, 1], m, xq) - ref)) < 1e-9

    def test_natural_matches_scipy(self, rng):
        pts = random_line(rng)
        m = spline_second_derivatives(pts[:, 0], pts[:, 1], bc="natural")
        xq = np.linspace(0, 200, 101)
        ref = CubicSpline(pts[:, 0], pts[:, 1], bc_type="natural")(xq)
        assert np.allclose(spline_eval(pts[:, 0], pts[:, 1], m, xq), ref, atol=1e-9)

    def test_batched_equals_loop(self, rng):
        lines = np.array([random_line(rng) for _ in range(7)])
        x, y = lines[..., 0], lines[..., 1]
        m = spline_second_derivatives(x, y)
        xq = x[:, :1] + (x[:, -1:] - x[:, :1]) * np.linspace(-0.05, 1.05, 64)
        batch = spline_eval(x, y, m, xq)
        for i in range(len(lines)):
            assert np.array_equal(batch[i], spline_eval(x[i], y[i], m[i], xq[i]))

    def test_unknown_end_condition(self):
        with pytest.raises(ValueError):
            spline_second_derivatives(XS, XS, bc="clamped")


class TestFitCamberSpline:
    def test_collinear_points_give_flat_line(self):
        line = fit_camber_spline(np.column_stack([XS, np.zeros(6)]))
        assert np.max(np.abs(line.local(np.linspace(0, 200, 1001)))) == 0.0

    def test_parabola_at_midpoints(self):
        line = fit_camber_spline(np.column_stack([XS, parabola(XS, 0.2 * 200 / 4)]))
        mid = 0.5 * (XS[1:] + XS[:-1])
        expect = 0.2 * mid * (200 - mid) / 200
        assert np.max(np.abs(line.local(mid) - expect)) < 0.1

    def test_interpolates_knots(self, rng):
        pts = random_line(rng)
        line = fit_camber_spline(pts)
        assert np.max(np.abs(line.local(pts[:, 0]) - pts[:, 1])) < 1e-9

    def test_duplicate_abscissa_rejected(self):
        pts = np.column_stack([[0, 40, 40, 120, 160, 200], np.zeros(6)])
        with pytest.raises(GeometryError):
            fit_camber_spline(pts)

    @pytest.mark.parametrize("bad", [np.zeros((5, 2)), np.full((6, 2), np.nan)])
    def test_bad_shapes(self, bad):
        with pytest.raises(GeometryError):
            fit_camber_spline(bad)


class TestChordAndDistance:
    def test_horizontal_chord(self):
        c = chord_line(FoilGeometry(), PlanarPoint(200, 0))
        assert np.allclose(c.direction, [1, 0]) and c.length == 200

    def test_coincident_ends(self):
        with pytest.raises(GeometryError):
            chord_line(FoilGeometry(), (0.0, 0.0))

    def test_tilted_chord(self):
        c = chord_line(FoilGeometry(), (200, -20))
        # independent: normalise with math.hypot
        n = math.hypot(200, -20)
        assert c.length == pytest.approx(200.998, abs=5e-4)
        assert c.direction == pytest.approx([200 / n, -20 / n])
        assert c.direction == pytest.approx([0.995, -0.0995], abs=5e-4)

    def test_distance_examples(self):
        flat = chord_line(FoilGeometry(), (200, 0))
        assert perpendicular_distance((100, 10), flat) == 10
        assert perpendicular_distance((50, 0), flat) == 0
        tilted = chord_line(FoilGeometry(), (200, -20))
        # oracle: brute-force minimum over a dense set of points on the chord's line
        s = np.linspace(-100, 300, 400001)
        cand = np.column_stack([s, -0.1 * s])
        brute = np.min(np.hypot(cand[:, 0] - 100, cand[:, 1] - 10))
        assert perpendicular_distance((100, 10), tilted) == pytest.approx(brute, abs=1e-3)
        assert perpendicular_distance((100, 10), tilted) == pytest.approx(19.90, abs=0.005)

    def test_geometry_rejects_bad_chord(self):
        with pytest.raises(GeometryError):
            FoilGeometry(chord_length=0)


class TestCamberPercent:
    def test_straight_foil(self, straight_geometry):
        line = fit_camber_spline(np.column_stack([XS, np.zeros(6)]))
        assert camber_percent(line, straight_geometry, (200, 0)) == 0

    def test_parabola_apex(self, straight_geometry):
        line = fit_camber_spline(np.column_stack([XS, parabola(XS)]))
        c = camber_percent(line, straight_geometry, (200, 0))
        # oracle: brute-force max over 1e5 analytic samples
        x = np.linspace(0, 200, 100_000)
        assert c == pytest.approx(100 * parabola(x).max() / 200, abs=1e-3)
        assert c == pytest.approx(5.0, abs=1e-3)

    def test_side_and_station(self, straight_geometry):
        line = fit_camber_spline(np.column_stack([XS, -parabola(XS)]))
        c, station, side = measure_camber(line, straight_geometry, (200, 0))
        assert side == -1 and station == pytest.approx(100, abs=200 / (CAMBER_SAMPLES - 1))

    def test_tie_goes_to_smaller_station(self, straight_geometry):
        # symmetric about mid-chord with an even sample count: two equal maxima
        line = fit_camber_spline(np.column_stack([XS, parabola(XS)]))
        _, station, _ = measure_camber(line, straight_geometry, (200, 0), samples=4)
        assert station < 100

    def test_sampling_convergence(self, straight_geometry, rng):
        for _ in range(10):
            line = fit_camber_spline(random_line(rng))
            te = line.control_points[-1]
            a = camber_percent(line, straight_geometry, te)
            b = camber_percent(line, straight_geometry, te, samples=2 * CAMBER_SAMPLES)
            assert abs(a - b) < 0.01


def _rigid(pts, angle, shift, scale=1.0):
    c, s = math.cos(angle), math.sin(angle)
    return scale * pts @ np.array([[c, s], [-s, c]]) + shift


class TestMarkersToCamber:
    def test_rest_shape_is_zero(self, plant, geometry):
        assert markers_to_camber(marker_positions(0.0, plant), geometry) == pytest.approx(0, abs=0.05)

    def test_plant_at_8_5(self, plant, geometry):
        assert markers_to_camber(marker_positions(8.5, plant), geometry) == pytest.approx(8.5, abs=0.1)

    def test_rigid_motion(self, plant, geometry, rng):
        pts = marker_positions(6.0, plant)
        base = markers_to_camber(pts, geometry)
        angle, shift = rng.uniform(-np.pi, np.pi), rng.uniform(-500, 500, 2)
        moved = FoilGeometry(200.0, PlanarPoint(*_rigid(np.zeros((1, 2)), angle, shift)[0]),
                             silicone_start=PlanarPoint(*_rigid(np.array([geometry.silicone_start]),
                                                                angle, shift)[0]))
        assert markers_to_camber(_rigid(pts, angle, shift), moved) == pytest.approx(base, rel=1e-9)

    def test_batch_agrees_with_scalar(self, plant, geometry, rng):
        c = rng.uniform(0, 10, 200)
        pts = marker_positions(c, plant) + rng.normal(0, 1.5, (200, 5, 2))
        batch = markers_to_camber_batch(pts, geometry)
        single = np.array([markers_to_camber(p, geometry) for p in pts])
        assert np.allclose(batch, single, rtol=0, atol=1e-10)

    def test_batch_nan_for_unordered(self, plant, geometry):
        pts = marker_positions(np.array([3.0, 4.0]), plant)
        pts[1, 2, 0] = pts[1, 1, 0] - 1
        out = markers_to_camber_batch(pts, geometry)
        assert np.isfinite(out[0]) and np.isnan(out[1])
        with pytest.raises(GeometryError):
            markers_to_camber(pts[1], geometry)


finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(angle=st.floats(-math.pi, math.pi), dx=finite, dy=finite, scale=st.floats(0.05, 20.0),
       camber=st.floats(0.5, 9.5))
def test_camber_isometry_and_scale_property(angle, dx, dy, scale, camber):
    from foilskin.plant import PlantParams
    plant = PlantParams()
    g = plant.geometry
    pts = marker_positions(camber, plant)
    base = markers_to_camber(pts, g)
    anchor = np.array([[g.silicone_start.x, g.silicone_start.y], [0.0, 0.0]])
    moved_anchor = _rigid(anchor, angle, (dx, dy), scale)
    g2 = FoilGeometry(200.0 * scale, PlanarPoint(*moved_anchor[1]), silicone_start=PlanarPoint(*moved_anchor[0]))
    moved = markers_to_camber(_rigid(pts, angle, (dx, dy), scale), g2)
    assert moved == pytest.approx(base, rel=1e-9)
