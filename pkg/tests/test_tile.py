import numpy as np
import pytest

import oracles
from cutdiffusion.errors import ConfigError, InvariantViolation
from cutdiffusion.rng import substream
from cutdiffusion.tile import (
    PatchSet,
    extract_tiles,
    fuse_overlaps,
    pixel_gather,
    pixel_interaction,
    pixel_relocation,
    sample_patchset,
    shifted_window_tiles,
)


def random_patchset(seed, h_s, w_s, h=3, w=4, c=2):
    rng = oracles.philox_stream(seed, "tile-ps")
    patches = tuple(rng.standard_normal((h, w, c)) for _ in range(h_s * w_s))
    return PatchSet(patches=patches, h_s=h_s, w_s=w_s)


class TestSamplePatchset:
    def test_nine_patches_at_three_x(self):
        ps = sample_patchset(substream(0, "patchset"), 384, 384, 128, 128, 4)
        assert ps.count == 9
        assert ps.h_s == ps.w_s == 3
        assert ps.patch_shape == (128, 128, 4)

    def test_degenerate_single_patch(self):
        ps = sample_patchset(substream(0, "patchset"), 16, 16, 16, 16, 1)
        assert ps.count == 1

    def test_four_patches_at_two_x(self):
        ps = sample_patchset(substream(0, "patchset"), 256, 256, 128, 128, 1)
        assert ps.count == 4

    def test_draw_order_is_patch_major(self):
        ps = sample_patchset(substream(9, "patchset"), 4, 6, 2, 3, 2)
        rng = oracles.philox_stream(9, "patchset")
        for patch in ps.patches:
            np.testing.assert_array_equal(patch, rng.standard_normal((2, 3, 2)))

    def test_non_divisible_target_rejected_with_hint(self):
        with pytest.raises(ConfigError, match="target_h") as err:
            sample_patchset(substream(0, "patchset"), 100, 128, 32, 32, 1)
        assert "multiple" in str(err.value)
        with pytest.raises(ConfigError, match="target_w"):
            sample_patchset(substream(0, "patchset"), 128, 100, 32, 32, 1)


class TestShiftedWindowTiles:
    def test_three_x_geometry_counts(self):
        spec = shifted_window_tiles(384, 384, 128, 128, 64, 64)
        assert len(spec.rects) == 25

    def test_single_tile_degenerate(self):
        spec = shifted_window_tiles(64, 64, 64, 64, 32, 32)
        assert spec.rects == ((0, 0),)

    def test_two_x_geometry(self):
        spec = shifted_window_tiles(256, 256, 128, 128, 64, 64)
        assert len(spec.rects) == 9

    def test_rects_row_major_at_stride_multiples(self):
        spec = shifted_window_tiles(8, 6, 4, 4, 2, 2)
        assert spec.rects == ((0, 0), (0, 2), (2, 0), (2, 2), (4, 0), (4, 2))

    def test_count_formula_sweep(self):
        for h in (2, 4, 8):
            for stride in (1, 2):
                for extra in (0, 2, 4):
                    canvas = h + extra
                    if (canvas - h) % stride:
                        continue
                    if extra and stride > h:
                        continue
                    spec = shifted_window_tiles(canvas, canvas, h, h, stride, stride)
                    assert len(spec.rects) == spec.count_formula()

    def test_non_divisible_extent_rejected(self):
        with pytest.raises(ConfigError, match="stride_h"):
            shifted_window_tiles(10, 8, 4, 4, 4, 2)

    def test_gap_leaving_stride_rejected(self):
        with pytest.raises(ConfigError, match="stride_h"):
            shifted_window_tiles(12, 4, 2, 4, 5, 1)

    def test_coverage_is_complete(self):
        spec = shifted_window_tiles(12, 10, 4, 4, 4, 2)
        counts = oracles.coverage_counts(12, 10, spec.rects, 4, 4)
        assert counts.min() >= 1


class TestPixelInteraction:
    def test_single_patch_identity(self):
        ps = random_patchset(1, 1, 1)
        out = pixel_interaction(ps, substream(0, "interact", 5))
        assert out is ps

    def test_multiset_preserved_per_coordinate(self):
        ps = random_patchset(2, 2, 3)
        out = pixel_interaction(ps, substream(7, "interact", 9))
        h, w, c = ps.patch_shape
        for x in range(h):
            for y in range(w):
                for ch in range(c):
                    before = sorted(p[x, y, ch] for p in ps.patches)
                    after = sorted(p[x, y, ch] for p in out.patches)
                    assert before == after

    def test_channels_move_together(self):
        ps = random_patchset(3, 2, 2)
        out = pixel_interaction(ps, substream(11, "interact", 1))
        # every output channel vector must be one of the input vectors
        h, w, _ = ps.patch_shape
        for x in range(h):
            for y in range(w):
                inputs = {tuple(p[x, y, :]) for p in ps.patches}
                for p in out.patches:
                    assert tuple(p[x, y, :]) in inputs

    def test_matches_oracle_replay(self):
        seed, t = 5, 3
        p0 = np.array([[0.0, 1.0], [2.0, 3.0]])[:, :, None]
        p1 = np.array([[10.0, 11.0], [12.0, 13.0]])[:, :, None]
        ps = PatchSet(patches=(p0, p1), h_s=1, w_s=2)
        out = pixel_interaction(ps, substream(seed, "interact", t))
        want = oracles.interaction_replay(seed, t, [p0, p1])
        np.testing.assert_array_equal(out.patches[0], want[0])
        np.testing.assert_array_equal(out.patches[1], want[1])

    def test_frozen_golden_layout(self):
        # replay of stream (5, "interact", 3) on two 2x2x1 patches
        p0 = np.array([[0.0, 1.0], [2.0, 3.0]])[:, :, None]
        p1 = np.array([[10.0, 11.0], [12.0, 13.0]])[:, :, None]
        ps = PatchSet(patches=(p0, p1), h_s=1, w_s=2)
        out = pixel_interaction(ps, substream(5, "interact", 3))
        assert out.patches[0][:, :, 0].tolist() == [[0.0, 1.0], [2.0, 13.0]]
        assert out.patches[1][:, :, 0].tolist() == [[10.0, 11.0], [12.0, 3.0]]

    def test_property_sweep_random_shapes(self):
        rng = oracles.philox_stream(0, "tile-sweep")
        for trial in range(25):
            h_s = int(rng.integers(1, 4))
            w_s = int(rng.integers(1, 4))
            ps = random_patchset(100 + trial, h_s, w_s)
            out = pixel_interaction(ps, substream(trial, "interact", trial % 7 + 1))
            all_before = np.sort(np.stack(ps.patches).ravel())
            all_after = np.sort(np.stack(out.patches).ravel())
            np.testing.assert_array_equal(all_before, all_after)


class TestPixelRelocation:
    def test_hand_enumerated_two_by_two(self):
        patches = tuple(
            np.full((2, 2, 1), float(i + 1)) + np.arange(4).reshape(2, 2, 1) * 10.0
            for i in range(4)
        )
        # patch i value at (a, b) = (i + 1) + 10 * (2a + b)
        ps = PatchSet(patches=patches, h_s=2, w_s=2)
        canvas = pixel_relocation(ps)
        assert canvas.shape == (4, 4, 1)
        # top-left block = pixel (0, 0) of patches 1..4 in row-major order
        np.testing.assert_array_equal(
            canvas[:2, :2, 0], np.array([[1.0, 2.0], [3.0, 4.0]])
        )
        # block (a, b) holds pixel (a, b) of every patch
        for a in range(2):
            for b in range(2):
                block = canvas[2 * a : 2 * a + 2, 2 * b : 2 * b + 2, 0]
                np.testing.assert_array_equal(
                    block, np.array([[1.0, 2.0], [3.0, 4.0]]) + 10.0 * (2 * a + b)
                )

    def test_identity_at_unit_scale(self):
        ps = random_patchset(4, 1, 1)
        np.testing.assert_array_equal(pixel_relocation(ps), ps.patches[0])

    def test_matches_loop_reference(self):
        for seed, (h_s, w_s) in enumerate([(1, 2), (2, 1), (2, 3), (3, 3)]):
            ps = random_patchset(40 + seed, h_s, w_s)
            got = pixel_relocation(ps)
            want = oracles.relocate_reference(list(ps.patches), h_s, w_s)
            np.testing.assert_array_equal(got, want)

    def test_multiset_preserved(self):
        ps = random_patchset(6, 3, 2)
        canvas = pixel_relocation(ps)
        np.testing.assert_array_equal(
            np.sort(canvas.ravel()), np.sort(np.stack(ps.patches).ravel())
        )

    def test_remainder_indexed_variant_differs_and_duplicates(self):
        ps = random_patchset(7, 2, 2, h=4, w=4, c=1)
        verbatim = pixel_relocation(ps, remainder_indexed=True)
        standard = pixel_relocation(ps)
        assert verbatim.shape == standard.shape
        assert not np.array_equal(verbatim, standard)
        # remainder indexing reuses only the top-left h_s x w_s corner of
        # each patch, so the canvas cannot be a bijection of the inputs
        assert np.unique(verbatim).size < verbatim.size

    def test_remainder_indexed_needs_small_scale(self):
        ps = random_patchset(8, 3, 3, h=2, w=2)
        with pytest.raises(ConfigError, match="remainder_indexed"):
            pixel_relocation(ps, remainder_indexed=True)


class TestPixelGather:
    def test_round_trip_random(self):
        for seed, (h_s, w_s) in enumerate([(1, 1), (2, 2), (3, 2), (1, 3)]):
            ps = random_patchset(60 + seed, h_s, w_s)
            back = pixel_gather(pixel_relocation(ps), h_s, w_s)
            assert back.count == ps.count
            for a, b in zip(back.patches, ps.patches):
                np.testing.assert_array_equal(a, b)

    def test_constant_canvas_gives_identical_patches(self):
        canvas = np.full((6, 6, 2), 3.5)
        ps = pixel_gather(canvas, 2, 3)
        assert ps.count == 6
        for p in ps.patches:
            np.testing.assert_array_equal(p, np.full((3, 2, 2), 3.5))

    def test_golden_canvas_recovers_enumerated_patches(self):
        base = np.array([[1.0, 2.0], [3.0, 4.0]])
        blocks = [base + 10.0 * (2 * a + b) for a in range(2) for b in range(2)]
        canvas = np.block([[blocks[0], blocks[1]], [blocks[2], blocks[3]]])[:, :, None]
        ps = pixel_gather(canvas, 2, 2)
        for i in range(4):
            np.testing.assert_array_equal(
                ps.patches[i][:, :, 0],
                np.array([[1.0, 11.0], [21.0, 31.0]]) + i,
            )

    def test_divisibility_enforced(self):
        with pytest.raises(ConfigError, match="h_s"):
            pixel_gather(np.zeros((5, 4, 1)), 2, 2)
        with pytest.raises(ConfigError, match="w_s"):
            pixel_gather(np.zeros((4, 5, 1)), 2, 2)


class TestFuseOverlaps:
    def test_single_tile_identity(self):
        spec = shifted_window_tiles(4, 4, 4, 4, 2, 2)
        tile = oracles.philox_stream(1, "fuse").standard_normal((4, 4, 2))
        np.testing.assert_array_equal(fuse_overlaps([tile], spec), tile)

    def test_half_overlap_average(self):
        spec = shifted_window_tiles(6, 4, 4, 4, 2, 2)
        a = np.full((4, 4, 1), 2.0)
        b = np.full((4, 4, 1), 6.0)
        fused = fuse_overlaps([a, b], spec)
        np.testing.assert_array_equal(fused[:2], np.full((2, 4, 1), 2.0))
        np.testing.assert_array_equal(fused[2:4], np.full((2, 4, 1), 4.0))
        np.testing.assert_array_equal(fused[4:], np.full((2, 4, 1), 6.0))

    def test_coverage_counts_match_brute_force(self):
        spec = shifted_window_tiles(8, 8, 4, 4, 2, 2)
        ones = [np.ones((4, 4, 1)) for _ in spec.rects]
        # fusing all-ones gives exactly 1 everywhere regardless of counts
        np.testing.assert_array_equal(fuse_overlaps(ones, spec), np.ones((8, 8, 1)))
        counts = oracles.coverage_counts(8, 8, spec.rects, 4, 4)
        # per-axis pattern (1, 2, 2, ..., 2, 1) blocks of the stride size
        expect = np.outer([1, 1, 2, 2, 2, 2, 1, 1], [1, 1, 2, 2, 2, 2, 1, 1])
        np.testing.assert_array_equal(counts, expect)

    def test_extract_then_fuse_identity(self):
        spec = shifted_window_tiles(8, 6, 4, 2, 2, 2)
        canvas = oracles.philox_stream(2, "fuse-id").standard_normal((8, 6, 3))
        tiles = extract_tiles(canvas, spec)
        np.testing.assert_allclose(fuse_overlaps(tiles, spec), canvas, rtol=0, atol=1e-15)

    def test_weighted_average_value(self):
        spec = shifted_window_tiles(6, 4, 4, 4, 2, 2)
        a = np.zeros((4, 4, 1))
        b = np.ones((4, 4, 1))
        fused = fuse_overlaps([a, b], spec)
        np.testing.assert_array_equal(fused[2:4], np.full((2, 4, 1), 0.5))

    def test_count_mismatch_rejected(self):
        spec = shifted_window_tiles(6, 4, 4, 4, 2, 2)
        with pytest.raises(InvariantViolation):
            fuse_overlaps([np.zeros((4, 4, 1))], spec)

    def test_shape_mismatch_rejected(self):
        spec = shifted_window_tiles(6, 4, 4, 4, 2, 2)
        with pytest.raises(InvariantViolation):
            fuse_overlaps([np.zeros((4, 4, 1)), np.zeros((4, 3, 1))], spec)


class TestExtractTiles:
    def test_rect_order_and_content(self):
        spec = shifted_window_tiles(4, 4, 2, 2, 2, 2)
        canvas = np.arange(16, dtype=float).reshape(4, 4, 1)
        tiles = extract_tiles(canvas, spec)
        assert len(tiles) == 4
        np.testing.assert_array_equal(tiles[0][:, :, 0], [[0.0, 1.0], [4.0, 5.0]])
        np.testing.assert_array_equal(tiles[3][:, :, 0], [[10.0, 11.0], [14.0, 15.0]])

    def test_canvas_shape_checked(self):
        spec = shifted_window_tiles(4, 4, 2, 2, 2, 2)
        with pytest.raises(InvariantViolation):
            extract_tiles(np.zeros((4, 6, 1)), spec)
