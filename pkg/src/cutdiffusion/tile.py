"""Spatial machinery: patch sampling, shifted windows, pixel moves, fusion.

Two patch vocabularies coexist here. Phase 1 works on L1 = h_s * w_s
non-overlapping patches (h_s, w_s are the per-axis scale factors between
base and target). Phase 2 works on L overlapping shifted-window tiles over
the assembled canvas. Pixel interaction shuffles same-coordinate pixels
across the phase-1 patches; pixel relocation interleaves those patches into
the full canvas so that same-coordinate pixels land in adjacent cells.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InvariantViolation


@dataclass(frozen=True)
class TileSpec:
    """Shifted-window placements (top, left) over a canvas, row-major."""

    canvas_h: int
    canvas_w: int
    patch_h: int
    patch_w: int
    stride_h: int
    stride_w: int
    rects: tuple

    def __post_init__(self):
        for name, extent, patch, stride in (
            ("h", self.canvas_h, self.patch_h, self.stride_h),
            ("w", self.canvas_w, self.patch_w, self.stride_w),
        ):
            if patch > extent:
                raise ConfigError(f"patch_{name}", "patch exceeds canvas")
            if stride < 1:
                raise ConfigError(f"stride_{name}", "stride must be positive")
            if (extent - patch) % stride != 0:
                raise ConfigError(
                    f"stride_{name}",
                    f"(canvas - patch) = {extent - patch} not divisible by {stride}",
                )
            if extent > patch and stride > patch:
                raise ConfigError(
                    f"stride_{name}", "stride beyond patch size leaves uncovered cells"
                )
        expect = self.count_formula()
        if len(self.rects) != expect:
            raise InvariantViolation(f"{len(self.rects)} rects, formula gives {expect}")

    def count_formula(self) -> int:
        rows = (self.canvas_h - self.patch_h) // self.stride_h + 1
        cols = (self.canvas_w - self.patch_w) // self.stride_w + 1
        return rows * cols


@dataclass(frozen=True)
class PatchSet:
    """L1 equal-shape patches plus the scale factors they came from."""

    patches: tuple
    h_s: int
    w_s: int

    def __post_init__(self):
        object.__setattr__(self, "patches", tuple(self.patches))
        if self.h_s < 1 or self.w_s < 1:
            raise InvariantViolation("scale factors must be positive integers")
        if len(self.patches) != self.h_s * self.w_s:
            raise InvariantViolation(
                f"{len(self.patches)} patches, scale factors need {self.h_s * self.w_s}"
            )
        shapes = {p.shape for p in self.patches}
        if len(shapes) != 1 or self.patches[0].ndim != 3:
            raise InvariantViolation(f"patches must share one rank-3 shape, got {shapes}")

    @property
    def count(self) -> int:
        return len(self.patches)

    @property
    def patch_shape(self) -> tuple:
        return self.patches[0].shape


def _check_scale(canvas: int, patch: int, axis: str) -> int:
    if canvas % patch != 0:
        nearest = max(patch, round(canvas / patch) * patch)
        raise ConfigError(
            f"target_{axis}",
            f"{canvas} is not a multiple of the base {patch}; "
            f"round the target to a multiple (nearest: {nearest})",
        )
    return canvas // patch


def sample_patchset(rng, canvas_h, canvas_w, h, w, c) -> PatchSet:
    """Draw L1 = (canvas area)/(patch area) patches of standard normals.

    Draw order is documented and fixed: patch-major, row-major within a
    patch, channels fastest. The same stream therefore always produces the
    same patches regardless of how they are consumed.
    """
    h_s = _check_scale(canvas_h, h, "h")
    w_s = _check_scale(canvas_w, w, "w")
    patches = tuple(rng.standard_normal((h, w, c)) for _ in range(h_s * w_s))
    return PatchSet(patches=patches, h_s=h_s, w_s=w_s)


def shifted_window_tiles(canvas_h, canvas_w, h, w, stride_h, stride_w) -> TileSpec:
    """Row-major grid of (top, left) placements at multiples of the strides."""
    rects = []
    dims = dict(
        canvas_h=canvas_h, canvas_w=canvas_w, patch_h=h, patch_w=w,
        stride_h=stride_h, stride_w=stride_w,
    )
    # validation happens in TileSpec; build the rect list it expects
    if stride_h >= 1 and stride_w >= 1 and h <= canvas_h and w <= canvas_w:
        if (canvas_h - h) % stride_h == 0 and (canvas_w - w) % stride_w == 0:
            for top in range(0, canvas_h - h + 1, stride_h):
                for left in range(0, canvas_w - w + 1, stride_w):
                    rects.append((top, left))
    return TileSpec(rects=tuple(rects), **dims)


def extract_tiles(canvas: np.ndarray, spec: TileSpec) -> list:
    """Copy out every tile in rect order."""
    if canvas.shape[:2] != (spec.canvas_h, spec.canvas_w):
        raise InvariantViolation(
            f"canvas {canvas.shape[:2]} does not match spec "
            f"({spec.canvas_h}, {spec.canvas_w})"
        )
    return [
        canvas[top : top + spec.patch_h, left : left + spec.patch_w].copy()
        for top, left in spec.rects
    ]


def pixel_interaction(ps: PatchSet, rng) -> PatchSet:
    """Shuffle same-coordinate pixels across patches.

    For each coordinate (x, y) an independent uniform permutation of the L1
    channel vectors is applied; channels move together. The permutation is
    the ascending stable order of one uniform key array of shape (h, w, L1)
    drawn from ``rng``, so replaying the stream replays the shuffle.
    """
    if ps.count == 1:
        return ps
    h, w, _ = ps.patch_shape
    keys = rng.random((h, w, ps.count))
    order = np.argsort(keys, axis=-1, kind="stable")
    stack = np.stack(ps.patches, axis=2)  # (h, w, L1, c)
    mixed = np.take_along_axis(stack, order[:, :, :, None], axis=2)
    patches = tuple(np.ascontiguousarray(mixed[:, :, i, :]) for i in range(ps.count))
    return PatchSet(patches=patches, h_s=ps.h_s, w_s=ps.w_s)


def pixel_relocation(ps: PatchSet, remainder_indexed: bool = False) -> np.ndarray:
    """Interleave L1 patches into one (h * h_s) x (w * w_s) canvas.

    Output cell (X, Y) takes patch (X mod h_s) * w_s + (Y mod w_s) at patch
    coordinate (X div h_s, Y div w_s): every h_s x w_s block of the canvas
    holds the same-coordinate pixels of all patches in row-major patch
    order, so the top-left block collects every patch's (0, 0) pixel.

    ``remainder_indexed=True`` switches to a diagnostic variant that reads
    the patch coordinate from the remainders as well; it is not a bijection
    and exists only for side-by-side comparison in tests.
    """
    h, w, c = ps.patch_shape
    h_s, w_s = ps.h_s, ps.w_s
    stack = np.stack(ps.patches, axis=0)  # (L1, h, w, c)
    if remainder_indexed:
        if h_s > h or w_s > w:
            raise ConfigError(
                "remainder_indexed", "needs scale factors within the patch extent"
            )
        rows = np.arange(h * h_s)[:, None]
        cols = np.arange(w * w_s)[None, :]
        patch = (rows % h_s) * w_s + (cols % w_s)
        return stack[patch, rows % h_s, cols % w_s, :]
    grid = stack.reshape(h_s, w_s, h, w, c)
    return np.ascontiguousarray(grid.transpose(2, 0, 3, 1, 4)).reshape(
        h * h_s, w * w_s, c
    )


def pixel_gather(canvas: np.ndarray, h_s: int, w_s: int) -> PatchSet:
    """Exact inverse of pixel_relocation."""
    H, W, c = canvas.shape
    if H % h_s != 0:
        raise ConfigError("h_s", f"{h_s} does not divide canvas height {H}")
    if W % w_s != 0:
        raise ConfigError("w_s", f"{w_s} does not divide canvas width {W}")
    h, w = H // h_s, W // w_s
    grid = canvas.reshape(h, h_s, w, w_s, c).transpose(1, 3, 0, 2, 4)
    flat = np.ascontiguousarray(grid).reshape(h_s * w_s, h, w, c)
    return PatchSet(
        patches=tuple(flat[i] for i in range(h_s * w_s)), h_s=h_s, w_s=w_s
    )


def fuse_overlaps(tiles, spec: TileSpec) -> np.ndarray:
    """Average overlapping tiles back onto the canvas.

    Accumulates sums and coverage counts in rect order and divides once,
    so the result is bit-deterministic for a given tile list.
    """
    if len(tiles) != len(spec.rects):
        raise InvariantViolation(f"{len(tiles)} tiles for {len(spec.rects)} rects")
    c = tiles[0].shape[2] if tiles else 0
    for tile in tiles:
        if tile.shape != (spec.patch_h, spec.patch_w, c):
            raise InvariantViolation(
                f"tile shape {tile.shape} does not match spec "
                f"({spec.patch_h}, {spec.patch_w}, {c})"
            )
    total = np.zeros((spec.canvas_h, spec.canvas_w, c), dtype=np.float64)
    cover = np.zeros((spec.canvas_h, spec.canvas_w, 1), dtype=np.float64)
    for (top, left), tile in zip(spec.rects, tiles):
        total[top : top + spec.patch_h, left : left + spec.patch_w] += tile
        cover[top : top + spec.patch_h, left : left + spec.patch_w] += 1.0
    if np.any(cover == 0.0):
        raise InvariantViolation("tile placements leave uncovered canvas cells")
    return total / cover
