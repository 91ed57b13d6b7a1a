import numpy as np
import pytest

from hairstudio.flowfield import FieldBrush, brush_field, minimum_change_field, structure_tensor
from hairstudio.imagecore import MaskImage, RasterImage
from hairstudio.strokes import (
    DegenerateStrokeError,
    GuideStroke,
    StrokeSet,
    colorize_stroke,
    extract_guide_strokes,
    rasterize_strokes,
    sample_seeds,
    trace_stroke,
)

from util import angdiff_mod_pi, circular_field, constant_field, full_mask


def fiber_image(size=64, n_fibers=16, angle_deg=0.0, seed=0):
    """Dark straight fibers spanning the window at a given orientation."""
    rng = np.random.default_rng(seed)
    a = np.deg2rad(angle_deg)
    d = np.array([np.cos(a), np.sin(a)])
    strokes = []
    for _ in range(n_fibers):
        c = rng.uniform(4, size - 4, size=2)
        ts = np.linspace(-2 * size, 2 * size, 65)
        pts = c + ts[:, None] * d
        keep = (
            (pts[:, 0] >= 1) & (pts[:, 0] <= size - 2)
            & (pts[:, 1] >= 1) & (pts[:, 1] <= size - 2)
        )
        pts = pts[keep]
        if len(pts) < 2:
            continue
        strokes.append(GuideStroke(points=pts, color=(0.15, 0.1, 0.08, 1.0), width=1.6))
    sset = StrokeSet(strokes=tuple(strokes), extent=(size, size))
    layer = rasterize_strokes(sset, full_mask(size))
    alpha = layer.data[:, :, 3:4]
    img = alpha * layer.data[:, :, :3] + (1 - alpha) * 0.85
    return RasterImage(img)


class TestSampleSeeds:
    def test_empty_mask_gives_no_seeds(self):
        m = MaskImage(np.zeros((20, 20), dtype=np.uint8))
        assert sample_seeds(m, density=2.0, rng_seed=0).shape == (0, 2)

    def test_full_mask_count_and_spacing(self):
        m = full_mask(100)
        seeds = sample_seeds(m, density=2.0, rng_seed=7)
        target = 20
        assert abs(len(seeds) - target) <= 0.2 * target
        min_dist = 0.6 * np.sqrt(10000 / target)
        for i in range(len(seeds)):
            for j in range(i + 1, len(seeds)):
                assert np.hypot(*(seeds[i] - seeds[j])) >= min_dist

    def test_deterministic_for_seed(self):
        m = full_mask(50)
        a = sample_seeds(m, density=3.0, rng_seed=42)
        b = sample_seeds(m, density=3.0, rng_seed=42)
        assert np.array_equal(a, b)
        c = sample_seeds(m, density=3.0, rng_seed=43)
        assert not np.array_equal(a, c)

    def test_seeds_inside_mask(self):
        rng = np.random.default_rng(8)
        m = MaskImage((rng.random((40, 40)) < 0.4).astype(np.uint8))
        for x, y in sample_seeds(m, density=5.0, rng_seed=1):
            assert m.data[int(round(y)), int(round(x))] == 1

    def test_density_must_be_positive(self):
        with pytest.raises(ValueError):
            sample_seeds(full_mask(10), density=0.0, rng_seed=0)


class TestTraceStroke:
    def test_straight_field_covers_expected_span(self):
        field = constant_field(21, 1, 0)
        stroke = trace_stroke(field, (10, 10), full_mask(21), max_len=5, h=1.0)
        xs = stroke.points[:, 0]
        ys = stroke.points[:, 1]
        assert np.allclose(ys, 10.0, atol=1e-9)
        assert xs.min() == pytest.approx(5.0) and xs.max() == pytest.approx(15.0)
        assert len(stroke.points) == 11

    def test_circular_field_radius_drift_below_tenth_pixel(self):
        size = 96
        c = (47.5, 47.5)
        field = circular_field(size, c)
        stroke = trace_stroke(field, (c[0] + 20.0, c[1]), full_mask(size), max_len=60, h=0.5)
        r = np.hypot(stroke.points[:, 0] - c[0], stroke.points[:, 1] - c[1])
        assert np.abs(r - 20.0).max() < 0.1
        assert len(stroke.points) > 200

    def test_stops_at_mask_border(self):
        m = np.zeros((21, 21), dtype=np.uint8)
        m[:, :10] = 1
        mask = MaskImage(m)
        stroke = trace_stroke(constant_field(21, 1, 0), (7, 10), mask, max_len=30, h=1.0)
        for x, y in stroke.points:
            assert mask.data[int(round(y)), int(round(x))] == 1
        assert stroke.points[:, 0].max() <= 9.5

    def test_zero_coherence_seed_is_degenerate(self):
        field = constant_field(16, 1, 0)
        dead = type(field)(
            direction=field.direction, coherence=np.zeros((16, 16), dtype=np.float32)
        )
        with pytest.raises(DegenerateStrokeError):
            trace_stroke(dead, (8, 8), full_mask(16), max_len=10, h=0.5)

    def test_seed_outside_mask_rejected(self):
        m = np.zeros((16, 16), dtype=np.uint8)
        m[2:6, 2:6] = 1
        with pytest.raises(ValueError):
            trace_stroke(constant_field(16, 1, 0), (12, 12), MaskImage(m), max_len=5)

    def test_consecutive_points_within_two_steps(self):
        field = circular_field(64, (31.5, 31.5))
        stroke = trace_stroke(field, (51.5, 31.5), full_mask(64), max_len=40, h=0.5)
        gaps = np.hypot(*np.diff(stroke.points, axis=0).T)
        assert gaps.max() <= 2 * 0.5 + 1e-9


class TestColorize:
    def test_constant_field_gives_that_color(self):
        cf = RasterImage(np.broadcast_to(np.array([1.0, 0.0, 0.0]), (20, 20, 3)).copy())
        stroke = GuideStroke(points=np.array([[2.0, 3.0], [10.0, 3.0]]), color=(0, 0, 0, 1), width=2)
        out = colorize_stroke(stroke, cf, alpha=0.8)
        assert out.color[:3] == pytest.approx((1.0, 0.0, 0.0))
        assert out.color[3] == pytest.approx(0.8)

    def test_two_tone_path_average_is_midpoint(self):
        data = np.zeros((20, 20, 3))
        data[:, :10] = [1.0, 0.0, 0.0]
        data[:, 10:] = [0.0, 0.0, 1.0]
        cf = RasterImage(data)
        xs = np.array([4.0, 5.0, 6.0, 7.0, 8.0, 11.0, 12.0, 13.0, 14.0, 15.0])
        pts = np.stack([xs, np.full(10, 10.0)], axis=1)
        out = colorize_stroke(GuideStroke(points=pts, color=(0, 0, 0, 1), width=2), cf, alpha=1.0)
        assert out.color[:3] == pytest.approx((0.5, 0.0, 0.5))

    def test_alpha_passthrough(self):
        cf = RasterImage(np.full((8, 8, 3), 0.5))
        stroke = GuideStroke(points=np.array([[1.0, 1.0], [5.0, 5.0]]), color=(0, 0, 0, 1), width=1)
        assert colorize_stroke(stroke, cf, alpha=0.3).color[3] == pytest.approx(0.3)


class TestRasterize:
    def test_empty_set_renders_zero(self):
        out = rasterize_strokes(StrokeSet(strokes=(), extent=(16, 16)), full_mask(16))
        assert out.channels == 4
        assert out.data.sum() == 0.0

    def test_opaque_horizontal_stroke(self):
        stroke = GuideStroke(
            points=np.array([[2.0, 8.0], [13.0, 8.0]]), color=(1.0, 0.0, 0.0, 1.0), width=1.0
        )
        out = rasterize_strokes(StrokeSet(strokes=(stroke,), extent=(16, 16)), full_mask(16))
        row = out.data[8]
        assert (row[3:12, 3] > 0.99).all()  # alpha ~1 along the row
        assert np.allclose(out.data[8, 3:12, :3], [1, 0, 0], atol=1e-6)
        assert out.data[10, :, 3].max() == 0.0
        assert out.data[6, :, 3].max() == 0.0

    def test_clipped_outside_mask_exactly(self):
        m = np.zeros((16, 16), dtype=np.uint8)
        m[:, :8] = 1
        stroke = GuideStroke(
            points=np.array([[1.0, 5.0], [14.0, 5.0]]), color=(0.0, 1.0, 0.0, 0.9), width=2.0
        )
        out = rasterize_strokes(StrokeSet(strokes=(stroke,), extent=(16, 16)), MaskImage(m))
        assert out.data[:, 8:, :].sum() == 0.0
        assert out.data[5, 2:7, 3].min() > 0.5

    def test_later_strokes_draw_over_earlier(self):
        a = GuideStroke(points=np.array([[2.0, 8.0], [13.0, 8.0]]), color=(1, 0, 0, 1), width=2)
        b = GuideStroke(points=np.array([[8.0, 2.0], [8.0, 13.0]]), color=(0, 0, 1, 1), width=2)
        out = rasterize_strokes(StrokeSet(strokes=(a, b), extent=(16, 16)), full_mask(16))
        assert np.allclose(out.data[8, 8, :3], [0, 0, 1], atol=1e-6)

    def test_extent_mismatch_rejected(self):
        with pytest.raises(ValueError):
            rasterize_strokes(StrokeSet(strokes=(), extent=(8, 8)), full_mask(16))


class TestExtract:
    def test_horizontal_fibers_give_horizontal_strokes(self):
        img = fiber_image(angle_deg=0.0)
        mask = full_mask(64)
        sset = extract_guide_strokes(img, mask, density=4.0, rng_seed=5)
        assert len(sset) >= 3
        angles = np.concatenate([s.segment_angles() for s in sset.strokes])
        err = np.rad2deg(angdiff_mod_pi(angles, 0.0))
        assert (err < 10.0).mean() >= 0.9

    def test_constant_region_yields_no_strokes(self):
        img = RasterImage(np.full((48, 48, 3), 0.6))
        sset = extract_guide_strokes(img, full_mask(48), density=4.0, rng_seed=2)
        assert len(sset) == 0

    def test_deterministic_byte_identical(self):
        img = fiber_image(angle_deg=30.0, seed=3)
        a = extract_guide_strokes(img, full_mask(64), density=4.0, rng_seed=9)
        b = extract_guide_strokes(img, full_mask(64), density=4.0, rng_seed=9)
        assert a.to_json() == b.to_json()

    def test_all_points_inside_mask(self):
        img = fiber_image(angle_deg=20.0, seed=4)
        m = np.zeros((64, 64), dtype=np.uint8)
        m[10:54, 6:58] = 1
        mask = MaskImage(m)
        sset = extract_guide_strokes(img, mask, density=6.0, rng_seed=11)
        for s in sset.strokes:
            for x, y in s.points:
                assert mask.data[int(round(y)), int(round(x))] == 1

    def test_mean_stroke_color_tracks_image(self):
        img = fiber_image(angle_deg=0.0, seed=6)
        sset = extract_guide_strokes(img, full_mask(64), density=4.0, rng_seed=13)
        raster = rasterize_strokes(sset, full_mask(64))
        footprint = raster.data[:, :, 3] > 0
        assert footprint.any()
        stroke_mean = raster.data[footprint, :3].mean(axis=0)
        img_mean = img.data[footprint, :3].mean(axis=0)
        assert np.abs(stroke_mean - img_mean).max() < 0.1

    def test_empty_mask_rejected(self):
        img = fiber_image()
        with pytest.raises(ValueError):
            extract_guide_strokes(img, MaskImage(np.zeros((64, 64), dtype=np.uint8)))

    def test_repopulation_follows_brushed_orientation(self):
        img = fiber_image(angle_deg=0.0, seed=7)
        mask = full_mask(64)
        field = minimum_change_field(structure_tensor(img))
        brushed = brush_field(
            field, FieldBrush(center=(32, 32), radius=14, intensity=1.0, angle=np.pi / 2, falloff="flat")
        )
        sset = extract_guide_strokes(img, mask, density=6.0, rng_seed=17, field=brushed)
        hits = []
        for s in sset.strokes:
            mids = 0.5 * (s.points[:-1] + s.points[1:])
            inside = np.hypot(mids[:, 0] - 32, mids[:, 1] - 32) <= 14
            if inside.any():
                ang = s.segment_angles()[inside]
                hits.append(np.rad2deg(angdiff_mod_pi(ang, np.pi / 2)))
        assert hits, "no strokes crossed the brushed disk"
        err = np.concatenate(hits)
        assert (err < 15.0).mean() >= 0.8


class TestSerialization:
    def test_json_roundtrip(self):
        img = fiber_image(seed=9)
        sset = extract_guide_strokes(img, full_mask(64), density=3.0, rng_seed=19)
        back = StrokeSet.from_json(sset.to_json())
        assert back.extent == sset.extent
        assert len(back) == len(sset)
        for a, b in zip(sset.strokes, back.strokes):
            assert np.allclose(a.points, b.points, atol=1e-5)
            assert a.color == pytest.approx(b.color, abs=1e-6)

    def test_file_roundtrip(self, tmp_path):
        stroke = GuideStroke(points=np.array([[1.0, 2.0], [3.0, 4.0]]), color=(0.2, 0.4, 0.6, 0.9), width=2.5)
        sset = StrokeSet(strokes=(stroke,), extent=(10, 10))
        path = tmp_path / "strokes.json"
        sset.save(path)
        assert StrokeSet.load(path).to_json() == sset.to_json()

    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            GuideStroke(points=np.array([[1.0, 1.0]]), color=(0, 0, 0, 1), width=1)
        with pytest.raises(ValueError):
            GuideStroke(points=np.array([[1, 1], [2, 2]]), color=(0, 0, 0, 0.0), width=1)
        with pytest.raises(ValueError):
            StrokeSet(
                strokes=(GuideStroke(points=np.array([[0.0, 0.0], [99.0, 0.0]]), color=(0, 0, 0, 1), width=1),),
                extent=(10, 10),
            )
