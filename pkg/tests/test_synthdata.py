import dataclasses
import json

import numpy as np
import pytest

from hairstudio.imagecore import save_image, save_mask
from hairstudio.strokes import StrokeSet
from hairstudio.synthdata import (
    GRID_SIZE,
    RenderError,
    StyleParams,
    enumerate_style_grid,
    fiber_curves,
    generate_dataset,
    ingest_real,
    load_manifest,
    render_background,
    render_sample,
)


@pytest.fixture(scope="module")
def grid():
    return enumerate_style_grid(0)


@pytest.fixture(scope="module")
def sample_params(grid):
    return grid[12345]


class TestGrid:
    def test_full_grid_cardinality(self, grid):
        assert len(grid) == GRID_SIZE == 30400
        cells = {(p.style_id, p.length_level, p.palette_id, p.yaw_deg) for p in grid}
        assert len(cells) == 30400

    def test_axes_extents(self, grid):
        assert {p.style_id for p in grid} == set(range(50))
        assert {p.length_level for p in grid} == set(range(4))
        assert {p.palette_id for p in grid} == set(range(8))
        assert {p.yaw_deg for p in grid} == set(range(-90, 91, 10))

    def test_params_validation(self):
        with pytest.raises(ValueError):
            StyleParams(style_id=50, length_level=0, palette_id=0, yaw_deg=0, density=0.1, curliness=0, rng_seed=1)
        with pytest.raises(ValueError):
            StyleParams(style_id=0, length_level=0, palette_id=0, yaw_deg=5, density=0.1, curliness=0, rng_seed=1)


class TestRender:
    def test_deterministic_per_seed(self, sample_params):
        a_img, a_mask = render_sample(sample_params, 64)
        b_img, b_mask = render_sample(sample_params, 64)
        assert np.array_equal(a_img.data, b_img.data)
        assert np.array_equal(a_mask.data, b_mask.data)

    def test_zero_density_is_error(self, sample_params):
        bad = dataclasses.replace(sample_params, density=0.0)
        with pytest.raises(RenderError):
            render_sample(bad, 64)

    def test_curliness_zero_fibers_straight(self, sample_params):
        straight = dataclasses.replace(sample_params, curliness=0.0)
        for pts, _, _, _ in fiber_curves(straight, 64):
            a, b = pts[0], pts[-1]
            chord = b - a
            norm = np.hypot(*chord)
            if norm < 1e-9:
                continue
            n = np.array([-chord[1], chord[0]]) / norm
            assert np.abs((pts - a) @ n).max() < 0.5

    def test_length_levels_scale_fiber_length(self, grid):
        means = {}
        for lvl in (0, 3):
            lengths = []
            for k in range(100):
                p = dataclasses.replace(grid[(k * 37) % len(grid)], length_level=lvl)
                for pts, _, _, _ in fiber_curves(p, 64):
                    d = np.diff(pts, axis=0)
                    lengths.append(np.hypot(d[:, 0], d[:, 1]).sum())
            means[lvl] = np.mean(lengths)
        assert means[3] >= 2.0 * means[0]

    def test_opposite_yaws_mirror(self, sample_params):
        pa = dataclasses.replace(sample_params, yaw_deg=90)
        pb = dataclasses.replace(sample_params, yaw_deg=-90)
        _, ma = render_sample(pa, 64)
        _, mb = render_sample(pb, 64)
        agree = (ma.data == np.flip(mb.data, axis=1)).mean()
        assert agree >= 0.99

    def test_mask_pixels_differ_from_background(self, sample_params):
        img, mask = render_sample(sample_params, 64)
        bg = render_background(sample_params, 64)
        differs = np.abs(img.data - bg).sum(axis=2) > 1e-6
        assert differs[mask.data.astype(bool)].mean() >= 0.99

    def test_real_proxy_domain_shifts_statistics(self, sample_params):
        a = render_background(sample_params, 64, domain="synthetic")
        b = render_background(sample_params, 64, domain="real-proxy")
        assert abs(a.mean() - b.mean()) > 0.05


class TestGenerateDataset:
    def test_manifest_byte_identical_across_runs(self, tmp_path):
        m1 = generate_dataset(10, 64, rng_seed=3, out_dir=tmp_path / "a")
        m2 = generate_dataset(10, 64, rng_seed=3, out_dir=tmp_path / "b")
        assert m1.read_bytes() == m2.read_bytes()
        rows1 = load_manifest(m1)
        rows2 = load_manifest(m2)
        assert [r["sha256"] for r in rows1] == [r["sha256"] for r in rows2]

    def test_rows_regenerate_bit_exactly(self, tmp_path):
        manifest = generate_dataset(4, 64, rng_seed=5, out_dir=tmp_path)
        for row in load_manifest(manifest):
            params = StyleParams.from_dict(row["params"])
            img, mask = render_sample(params, row["size"], row["domain"])
            save_image(img, tmp_path / "re.png")
            save_mask(mask, tmp_path / "re_mask.png")
            import hashlib

            assert hashlib.sha256((tmp_path / "re.png").read_bytes()).hexdigest() == row["sha256"]["image"]
            assert hashlib.sha256((tmp_path / "re_mask.png").read_bytes()).hexdigest() == row["sha256"]["mask"]

    def test_rows_satisfy_sample_invariants(self, tmp_path):
        manifest = generate_dataset(6, 64, rng_seed=7, out_dir=tmp_path)
        rows = load_manifest(manifest)
        assert len(rows) == 6
        from hairstudio.imagecore import load_image, load_mask
        from hairstudio.strokes import extract_guide_strokes

        for row in rows:
            img = load_image(tmp_path / row["image"])
            mask = load_mask(tmp_path / row["mask"])
            strokes = StrokeSet.load(tmp_path / row["strokes"])
            assert not mask.is_empty()
            assert strokes.extent == (mask.width, mask.height)
            redo = extract_guide_strokes(img, mask, rng_seed=row["params"]["rng_seed"])
            assert redo.to_json() == strokes.to_json()
            for s in strokes.strokes:
                xi = np.clip(np.round(s.points[:, 0]).astype(int), 0, mask.width - 1)
                yi = np.clip(np.round(s.points[:, 1]).astype(int), 0, mask.height - 1)
                assert mask.data[yi, xi].all()

    def test_split_assignment(self, tmp_path):
        manifest = generate_dataset(40, 64, rng_seed=11, out_dir=tmp_path)
        splits = [r["split"] for r in load_manifest(manifest)]
        assert splits.count("val") == 2 and splits.count("test") == 2
        assert splits.count("train") == 36

    def test_count_bounds(self, tmp_path):
        with pytest.raises(ValueError):
            generate_dataset(0, 64, 0, tmp_path)
        with pytest.raises(ValueError):
            generate_dataset(GRID_SIZE + 1, 64, 0, tmp_path)


class TestIngestReal:
    def test_empty_dir_empty_manifest(self, tmp_path):
        src = tmp_path / "src"
        src.mkdir()
        manifest, errors = ingest_real(src, tmp_path / "out")
        assert load_manifest(manifest) == []
        assert errors == []

    def test_pairs_ingested_and_bad_ones_reported(self, tmp_path, grid):
        src = tmp_path / "src"
        src.mkdir()
        img, mask = render_sample(grid[100], 64)
        save_image(img, src / "good.png")
        save_mask(mask, src / "good_mask.png")
        img2, mask2 = render_sample(grid[200], 64)
        save_image(img2, src / "dangling.png")  # no mask
        img3, _ = render_sample(grid[300], 64)
        save_image(img3, src / "mismatch.png")
        bad_mask, _ = render_sample(grid[300], 64)
        _, small_mask = render_sample(grid[300], 32)
        save_mask(small_mask, src / "mismatch_mask.png")
        manifest, errors = ingest_real(src, tmp_path / "out")
        rows = load_manifest(manifest)
        assert len(rows) == 1
        assert rows[0]["domain"] == "real"
        assert len(errors) == 2
        assert any("missing mask" in e for e in errors)
        assert any("extent mismatch" in e for e in errors)
        strokes = StrokeSet.load((tmp_path / "out") / rows[0]["strokes"])
        for s in strokes.strokes:
            xi = np.round(s.points[:, 0]).astype(int)
            yi = np.round(s.points[:, 1]).astype(int)
            assert mask.data[yi, xi].all()
