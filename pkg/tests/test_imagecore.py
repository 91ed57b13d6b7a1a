import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hairstudio.imagecore import (
    DegenerateKernelError,
    ExtentMismatchError,
    MaskImage,
    RasterImage,
    boundary_band,
    composite_over,
    dilate,
    erode,
    load_image,
    load_mask,
    save_image,
    save_mask,
)


def minmax_filter_oracle(mask: np.ndarray, k: int, op: str, pad_value: int = 0) -> np.ndarray:
    """Brute-force sliding-window min/max with the k//2 anchor and constant pad."""
    h, w = mask.shape
    lo = k // 2
    out = np.zeros_like(mask)
    for y in range(h):
        for x in range(w):
            vals = []
            for dy in range(-lo, k - lo):
                for dx in range(-lo, k - lo):
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w:
                        vals.append(mask[yy, xx])
                    else:
                        vals.append(pad_value)
            out[y, x] = min(vals) if op == "min" else max(vals)
    return out


def random_mask(rng, h=32, w=32, p=0.5) -> MaskImage:
    return MaskImage((rng.random((h, w)) < p).astype(np.uint8))


class TestContainers:
    def test_raster_clamps_on_construction(self):
        img = RasterImage(np.array([[[1.5, -0.25, 0.5]]]))
        assert img.data.min() >= 0.0 and img.data.max() <= 1.0
        assert img.data[0, 0, 0] == 1.0 and img.data[0, 0, 1] == 0.0

    def test_raster_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            RasterImage(np.full((2, 2, 3), np.nan))

    def test_raster_rejects_bad_channels(self):
        with pytest.raises(ValueError):
            RasterImage(np.zeros((4, 4, 2)))

    def test_mask_values_binary(self):
        with pytest.raises(ValueError):
            MaskImage(np.array([[0, 2]], dtype=np.uint8))

    def test_gray_promotes_to_rgb(self):
        g = RasterImage(np.full((3, 3, 1), 0.25))
        assert g.rgb().shape == (3, 3, 3)
        assert np.allclose(g.rgb(), 0.25)


class TestErode:
    def test_all_ones_k3_loses_outer_ring(self):
        m = MaskImage(np.ones((20, 20), dtype=np.uint8))
        out = erode(m, 3)
        assert out.data[1:-1, 1:-1].all()
        assert out.data[0, :].sum() == 0 and out.data[-1, :].sum() == 0
        assert out.data[:, 0].sum() == 0 and out.data[:, -1].sum() == 0

    def test_single_pixel_erodes_away(self):
        m = np.zeros((12, 12), dtype=np.uint8)
        m[5, 5] = 1
        assert erode(MaskImage(m), 3).count() == 0

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(11)
        m = random_mask(rng)
        out = erode(m, 10)
        assert np.array_equal(out.data, minmax_filter_oracle(m.data, 10, "min"))

    def test_kernel_too_large(self):
        m = MaskImage(np.ones((8, 8), dtype=np.uint8))
        with pytest.raises(DegenerateKernelError):
            erode(m, 9)
        # fits one dimension -> allowed
        wide = MaskImage(np.ones((8, 16), dtype=np.uint8))
        erode(wide, 9)


class TestDilate:
    def test_single_pixel_grows_to_block(self):
        m = np.zeros((12, 12), dtype=np.uint8)
        m[5, 5] = 1
        out = dilate(MaskImage(m), 3)
        assert out.count() == 9
        assert out.data[4:7, 4:7].all()

    def test_empty_stays_empty(self):
        m = MaskImage(np.zeros((9, 9), dtype=np.uint8))
        assert dilate(m, 3).count() == 0

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(12)
        m = random_mask(rng)
        out = dilate(m, 10)
        assert np.array_equal(out.data, minmax_filter_oracle(m.data, 10, "max"))


class TestBoundaryBand:
    def test_square_ring_matches_oracle_difference(self):
        m = np.zeros((64, 64), dtype=np.uint8)
        m[24:40, 24:40] = 1
        band = boundary_band(MaskImage(m), 10)
        d = minmax_filter_oracle(m, 10, "max")
        e = minmax_filter_oracle(m, 10, "min")
        assert np.array_equal(band.data, d & (1 - e))
        # ring straddles the square's edge with width ~ kernel size
        assert band.data[24, 31] == 1 and band.data[31, 24] == 1
        assert band.data[31, 31] == 0  # deep interior survives erosion

    def test_all_ones_band_hugs_border(self):
        m = MaskImage(np.ones((32, 32), dtype=np.uint8))
        band = boundary_band(m, 10)
        assert band.data[0, 0] == 1
        assert band.data[16, 16] == 0
        assert band.count() > 0

    def test_all_zero_band_empty(self):
        m = MaskImage(np.zeros((32, 32), dtype=np.uint8))
        assert boundary_band(m, 10).count() == 0

    @pytest.mark.parametrize("k", [3, 5, 10])
    def test_band_covers_set_boundary(self, k):
        rng = np.random.default_rng(13)
        for _ in range(10):
            m = dilate(random_mask(rng, p=0.3), 3)  # blob-ish nonempty mask
            if m.is_empty() or m.count() == m.width * m.height:
                continue
            band = boundary_band(m, k)
            padded = np.pad(m.data, 1)
            inner = padded[1:-1, 1:-1].astype(bool)
            nbr_off = (
                (padded[:-2, 1:-1] == 0)
                | (padded[2:, 1:-1] == 0)
                | (padded[1:-1, :-2] == 0)
                | (padded[1:-1, 2:] == 0)
            )
            set_boundary = inner & nbr_off
            assert (band.data.astype(bool) & set_boundary).sum() == set_boundary.sum()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 7))
def test_erode_dilate_duality(seed, k):
    rng = np.random.default_rng(seed)
    m = random_mask(rng, 16, 16)
    lhs = erode(m, k, pad_value=0)
    complement = MaskImage(1 - m.data)
    rhs = 1 - dilate(complement, k, pad_value=1).data
    assert np.array_equal(lhs.data, rhs)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 7))
def test_morphology_monotonicity(seed, k):
    rng = np.random.default_rng(seed)
    m2 = random_mask(rng, 16, 16)
    m1 = MaskImage(m2.data & random_mask(rng, 16, 16).data)
    assert (erode(m1, k).data <= erode(m2, k).data).all()
    assert (dilate(m1, k).data <= dilate(m2, k).data).all()


class TestComposite:
    def test_opaque_returns_foreground(self):
        rng = np.random.default_rng(3)
        fg = np.concatenate([rng.random((5, 5, 3)), np.ones((5, 5, 1))], axis=2)
        bg = RasterImage(rng.random((5, 5, 3)))
        out = composite_over(RasterImage(fg), bg)
        assert np.allclose(out.data, fg[:, :, :3], atol=1e-7)

    def test_transparent_returns_background(self):
        rng = np.random.default_rng(4)
        fg = np.concatenate([rng.random((5, 5, 3)), np.zeros((5, 5, 1))], axis=2)
        bg = RasterImage(rng.random((5, 5, 3)))
        out = composite_over(RasterImage(fg), bg)
        assert np.allclose(out.data, bg.data, atol=1e-7)

    def test_half_white_over_black_is_gray(self):
        fg = np.concatenate([np.ones((4, 4, 3)), np.full((4, 4, 1), 0.5)], axis=2)
        bg = RasterImage(np.zeros((4, 4, 3)))
        out = composite_over(RasterImage(fg), bg)
        assert np.allclose(out.data, 0.5, atol=1e-7)

    def test_extent_mismatch(self):
        fg = RasterImage(np.zeros((4, 4, 4)))
        bg = RasterImage(np.zeros((5, 4, 3)))
        with pytest.raises(ExtentMismatchError):
            composite_over(fg, bg)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.0, 1.0), st.integers(0, 2**31 - 1))
    def test_linear_in_alpha(self, alpha, seed):
        rng = np.random.default_rng(seed)
        rgb = rng.random((3, 3, 3))
        bg = RasterImage(rng.random((3, 3, 3)))
        fga = RasterImage(np.concatenate([rgb, np.full((3, 3, 1), alpha)], axis=2))
        out = composite_over(fga, bg)
        expected = alpha * rgb + (1 - alpha) * bg.data
        assert np.allclose(out.data, expected, atol=1e-6)


class TestPngIO:
    def test_image_roundtrip(self, tmp_path):
        rng = np.random.default_rng(5)
        img = RasterImage(np.round(rng.random((10, 12, 3)) * 255) / 255)
        path = tmp_path / "img.png"
        save_image(img, path)
        back = load_image(path)
        assert back.extent == img.extent
        assert np.allclose(back.data, img.data, atol=1 / 510)

    def test_rgba_roundtrip(self, tmp_path):
        rng = np.random.default_rng(6)
        img = RasterImage(np.round(rng.random((8, 8, 4)) * 255) / 255)
        path = tmp_path / "img.png"
        save_image(img, path)
        assert np.allclose(load_image(path).data, img.data, atol=1 / 510)

    def test_mask_roundtrip(self, tmp_path):
        rng = np.random.default_rng(7)
        mask = MaskImage((rng.random((9, 9)) < 0.5).astype(np.uint8))
        path = tmp_path / "mask.png"
        save_mask(mask, path)
        assert np.array_equal(load_mask(path).data, mask.data)
