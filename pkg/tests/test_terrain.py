import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import ndimage

from stairplan.terrain import (
    ElevationMap,
    FootprintKernel,
    MapFormatError,
    SteepnessMap,
    TerrainError,
    TerrainSpec,
    aggregate_steepness,
    generate_terrain,
    height_at,
    load_map,
    save_map,
    sobel_gradient,
    steepness_map,
    write_pgm,
)

finite = st.floats(-2.0, 2.0, allow_nan=False, allow_infinity=False)


def grid(shape=(st.integers(3, 12), st.integers(3, 12))):
    return st.tuples(*shape).flatmap(lambda s: arrays(np.float64, s, elements=finite))


def scipy_sobel(h, res):
    # scipy's sobel(axis=1) is the x-derivative kernel; 'nearest' is replicate padding
    gx = ndimage.sobel(h, axis=1, mode="nearest") / (8.0 * res)
    gy = ndimage.sobel(h, axis=0, mode="nearest") / (8.0 * res)
    return np.hypot(gx, gy)


# -- generation ----------------------------------------------------------------------

def test_flat_default_map_is_zero():
    emap = generate_terrain(TerrainSpec())
    assert emap.shape == (24, 36)
    assert emap.resolution == 0.05
    assert np.all(emap.heights == 0.0)


def test_pyramid_band_heights():
    spec = TerrainSpec(kind="pyramid_stairs", width_cells=61, length_cells=61,
                       step_height=0.25, tread_depth=0.30, num_steps=4)
    emap = generate_terrain(spec)
    c = 30
    # Chebyshev distance d cells -> band floor(d / 6), capped at 4
    for d in range(31):
        band = min(d // 6, 4)
        assert emap.heights[c, c + d] == pytest.approx(0.25 * band)
        assert emap.heights[c - d, c] == pytest.approx(0.25 * band)
        assert emap.heights[c + d, c - d] == pytest.approx(0.25 * band)


def test_rough_is_seeded():
    spec = TerrainSpec(kind="rough", roughness_amplitude=0.03, seed=7)
    a, b = generate_terrain(spec), generate_terrain(spec)
    assert np.array_equal(a.heights, b.heights)
    assert a.heights.min() >= 0.0 and a.heights.max() <= 0.03
    other = generate_terrain(TerrainSpec(kind="rough", roughness_amplitude=0.03, seed=8))
    assert not np.array_equal(a.heights, other.heights)


@pytest.mark.parametrize("kw", [
    dict(width_cells=0), dict(length_cells=-3), dict(resolution=0.0),
    dict(step_height=-1.0), dict(kind="cliff"),
    dict(kind="pyramid_stairs", tread_depth=0.01), dict(kind="rough", roughness_amplitude=-0.1),
])
def test_invalid_specs_rejected(kw):
    with pytest.raises(TerrainError):
        generate_terrain(TerrainSpec(**kw))


def test_map_invariants_enforced():
    with pytest.raises(TerrainError):
        ElevationMap((0, 0), 0.05, np.array([[0.0, np.nan]]))
    with pytest.raises(TerrainError):
        ElevationMap((0, 0), -0.05, np.zeros((3, 3)))
    with pytest.raises(TerrainError):
        SteepnessMap((0, 0), 0.05, -np.ones((3, 3)))


def test_heights_are_immutable_copy():
    src = np.zeros((3, 4))
    emap = ElevationMap((0, 0), 0.1, src)
    src[0, 0] = 5.0
    assert emap.heights[0, 0] == 0.0
    with pytest.raises(ValueError):
        emap.heights[0, 0] = 1.0


@given(st.integers(1, 40), st.integers(1, 40), finite, finite, st.floats(0.01, 0.5))
def test_cell_world_round_trip(rows, cols, ox, oy, res):
    emap = ElevationMap((ox, oy), res, np.zeros((rows, cols)))
    i, j = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    x, y = emap.world_of(i, j)
    ri, rj = emap.cell_of(x, y)
    assert np.array_equal(ri, i) and np.array_equal(rj, j)


# -- gradient and steepness --------------------------------------------------------------

@given(grid(), st.floats(0.01, 0.2))
def test_sobel_matches_scipy(h, res):
    emap = ElevationMap((0.0, 0.0), res, h)
    np.testing.assert_allclose(sobel_gradient(emap), scipy_sobel(h, res), rtol=1e-12, atol=1e-12)


def test_sobel_step_edge_hand_convolution():
    # 5x5 patch, h = 0 for x < 0 and 0.25 from column 2 on
    h = np.zeros((5, 5))
    h[:, 2:] = 0.25
    g = sobel_gradient(ElevationMap((0, 0), 0.05, h))
    # edge-adjacent columns 1 and 2: (1 + 2 + 1) * 0.25 / (8 * 0.05) = 2.5
    np.testing.assert_allclose(g[:, 1], 2.5)
    np.testing.assert_allclose(g[:, 2], 2.5)
    np.testing.assert_array_equal(g[:, [0, 3, 4]], 0.0)


@pytest.mark.parametrize("slope", [0.1, -0.3, 1.0])
def test_ramp_has_uniform_slope(slope):
    x = np.arange(20) * 0.05
    h = np.tile(slope * x, (15, 1))
    emap = ElevationMap((0, 0), 0.05, h)
    s = steepness_map(emap).scores
    interior = s[2:-2, 2:-2]
    assert np.max(np.abs(interior - abs(slope))) < 1e-9


@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.floats(-3.0, 3.0))
def test_planar_map_steepness_equals_slope(sx, sy, c):
    yy, xx = np.mgrid[0:14, 0:16] * 0.05
    h = c + sx * xx + sy * yy
    s = steepness_map(ElevationMap((0, 0), 0.05, h)).scores
    assert np.max(np.abs(s[2:-2, 2:-2] - math.hypot(sx, sy))) < 1e-9


def test_flat_has_zero_gradient():
    emap = generate_terrain(TerrainSpec())
    assert np.all(sobel_gradient(emap) == 0.0)
    assert np.all(steepness_map(emap).scores == 0.0)


def test_sobel_rejects_small_map():
    with pytest.raises(TerrainError):
        sobel_gradient(ElevationMap((0, 0), 0.05, np.zeros((2, 5))))


@given(arrays(np.float64, (9, 11), elements=st.floats(0.0, 5.0)),
       st.sampled_from([(0.05, 0.05), (0.15, 0.10), (0.25, 0.05), (0.2, 0.2)]))
def test_aggregation_matches_uniform_filter(g, dims):
    kernel = FootprintKernel(*dims)
    kr, kc = kernel.extents(0.05)
    got = aggregate_steepness(g, kernel, 0.05).scores
    want = ndimage.uniform_filter(g, size=(kr, kc), mode="nearest")
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


def test_single_cell_spreads_over_kernel():
    g = np.zeros((7, 7))
    g[3, 3] = 9.0
    s = aggregate_steepness(g, FootprintKernel(0.15, 0.15), 0.05).scores
    expect = np.zeros((7, 7))
    expect[2:5, 2:5] = 1.0
    np.testing.assert_allclose(s, expect)


def test_kernel_extents_odd():
    assert FootprintKernel(0.15, 0.10).extents(0.05) == (3, 3)
    assert FootprintKernel(0.20, 0.10).extents(0.05) == (3, 5)
    assert FootprintKernel(0.01, 0.01).extents(0.05) == (1, 1)
    with pytest.raises(TerrainError):
        aggregate_steepness(np.zeros((3, 3)), FootprintKernel(0.5, 0.5), 0.05)


@given(grid(), finite)
def test_steepness_ignores_height_offset(h, c):
    a = steepness_map(ElevationMap((0, 0), 0.05, h)).scores
    b = steepness_map(ElevationMap((0, 0), 0.05, h + c)).scores
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_tread_center_less_steep_than_edge():
    spec = TerrainSpec(kind="pyramid_stairs", width_cells=61, length_cells=61,
                       step_height=0.25, tread_depth=0.30, num_steps=4)
    s = steepness_map(generate_terrain(spec)).scores
    row = s[30]
    # tread of band 2 spans columns 30+12 .. 30+17; edges at 41/42 and 47/48
    tread = row[42:48]
    assert tread[2] < row[41] and tread[3] < row[48]
    # per-tread minimum sits strictly inside the tread
    assert np.argmin(tread) not in (0, len(tread) - 1)
    assert tread[2] == 0.0 and tread[3] == 0.0


# -- lookup and files ----------------------------------------------------------------------

def test_height_at():
    spec = TerrainSpec(kind="pyramid_stairs", width_cells=61, length_cells=61,
                       step_height=0.15, tread_depth=0.30, num_steps=4)
    emap = generate_terrain(spec)
    assert height_at(generate_terrain(TerrainSpec()), (0.3, -0.2)) == 0.0
    for n in range(4):
        x = 0.3 * n + 0.15
        assert height_at(emap, (x, 0.0)) == pytest.approx(0.15 * n)
    with pytest.raises(TerrainError):
        height_at(emap, (10.0, 0.0))


@given(st.sampled_from(["flat", "pyramid_stairs", "rough"]), st.integers(0, 99))
def test_save_load_round_trip(tmp_path_factory, kind, seed):
    spec = TerrainSpec(kind=kind, step_height=0.17, roughness_amplitude=0.04, seed=seed,
                       center=(0.123, -4.56))
    emap = generate_terrain(spec)
    path = tmp_path_factory.mktemp("maps") / "m.emap"
    save_map(emap, path)
    back = load_map(path)
    assert back.origin == emap.origin and back.resolution == emap.resolution
    assert np.array_equal(back.heights, emap.heights)


@pytest.mark.parametrize("body", [
    "EMAP 1\n0 0 0.05 10 10\n" + "\n".join(" ".join(["0"] * 10) for _ in range(9)) + "\n0 0 0 0 0 0 0 0 0\n",
    "EMAP 1\n0 0 0.05 2 2\n0 nan\n0 0\n",
    "EMAP 2\n0 0 0.05 1 1\n0\n",
    "EMAP 1\n0 0 0.05 2\n0 0\n",
    "EMAP 1\n0 0 0.05 2 2\n0 0\n",
    "EMAP 1\n0 0 0.05 2 1\n0 x\n",
    "EMAP 1\n0 0 -1 1 1\n0\n",
])
def test_malformed_files_rejected(tmp_path, body):
    path = tmp_path / "bad.emap"
    path.write_text(body)
    with pytest.raises(MapFormatError):
        load_map(path)


def test_pgm_layout(tmp_path):
    g = np.arange(12, dtype=float).reshape(3, 4)
    write_pgm(g, tmp_path / "a.pgm", mark=(0, 0))
    data = (tmp_path / "a.pgm").read_bytes()
    header = b"P5\n4 3\n255\n"
    assert data.startswith(header)
    img = np.frombuffer(data[len(header):], dtype=np.uint8).reshape(3, 4)
    # row 0 is written last so +y points up; the mark is full white
    assert img[2, 0] == 255
    assert img[0, 3] == 223
