import math

import numpy as np
import pytest

from mapex.dynamics import Pose
from mapex.floorplan import FloorPlan, FloorPlanConfig, generate_plan
from mapex.grid import FREE, NON_FLIGHT, OCCUPIED, UNKNOWN, Grid2D
from mapex.occupancy import (EgoTransformSpec, HierarchicalMap, LogOddsConfig,
                             LogOddsGrid, ego_to_world, ego_transform,
                             inflate, integrate_scan, load_grid,
                             project_low_from_high, save_grid)
from mapex.sensor import ScanResult, SensorConfig, sense


def _scan_one_ray(plan, pose, **kw):
    config = SensorConfig(ray_count=1, fov_rad=0.01,
                          adjacent_occupied_prob=0.0, **kw)
    return sense(plan, pose, config)


def test_integrate_single_ray_against_line_oracle():
    grid = np.full((30, 30), FREE, dtype=np.int8)
    grid[:, 20] = OCCUPIED  # wall at x = 4.0
    plan = FloorPlan(grid, np.ones_like(grid, dtype=bool), 0.2)
    pose = Pose(2.0, 3.0, 0.0)
    scan = _scan_one_ray(plan, pose)
    lo = LogOddsGrid((30, 30), 0.2, origin=(0.1, 0.1))
    integrate_scan(lo, pose, scan)

    cfg = lo.config
    # oracle: cells along the horizontal line get a miss, the wall a hit
    row = 15
    for col in range(10, 20):
        assert lo.values[row, col] == pytest.approx(cfg.miss)
    assert lo.values[row, 20] == pytest.approx(cfg.hit)
    touched = np.abs(lo.values) > 0
    assert touched.sum() == len(scan.traversed[0]) + 1


def test_repeat_scan_monotone_never_flips():
    grid = np.full((30, 30), FREE, dtype=np.int8)
    grid[:, 20] = OCCUPIED
    plan = FloorPlan(grid, np.ones_like(grid, dtype=bool), 0.2)
    pose = Pose(2.0, 3.0, 0.0)
    scan = _scan_one_ray(plan, pose)
    lo = LogOddsGrid((30, 30), 0.2, origin=(0.1, 0.1))
    prev = lo.values.copy()
    prev_class = lo.classify().cells.copy()
    for _ in range(12):
        integrate_scan(lo, pose, scan)
        delta = lo.values - prev
        assert (delta >= 0)[lo.values > 0].all()
        assert (delta <= 0)[lo.values < 0].all()
        cls = lo.classify().cells
        flipped = (prev_class == FREE) & (cls == OCCUPIED)
        flipped |= (prev_class == OCCUPIED) & (cls == FREE)
        assert not flipped.any()
        prev = lo.values.copy()
        prev_class = cls


def test_equal_magnitude_hits_and_misses_cancel():
    config = LogOddsConfig(hit=0.85, miss=-0.85)
    lo = LogOddsGrid((5, 5), 0.2, origin=(0.1, 0.1), config=config)
    cell = np.array([[2, 2]], dtype=np.int64)
    empty = [np.empty((0, 2), dtype=np.int64)]
    hit_scan = ScanResult(0.2, np.array([True]), cell.copy(), empty,
                          np.empty((0, 2), dtype=np.int64))
    miss_scan = ScanResult(0.2, np.array([False]),
                           np.full((1, 2), -1, dtype=np.int64),
                           [cell.copy()], np.empty((0, 2), dtype=np.int64))
    pose = Pose(0.5, 0.5, 0.0)
    for _ in range(3):
        integrate_scan(lo, pose, hit_scan)
    for _ in range(3):
        integrate_scan(lo, pose, miss_scan)
    assert lo.values[2, 2] == pytest.approx(0.0, abs=1e-12)


def test_clamped_log_odds():
    lo = LogOddsGrid((3, 3), 0.2, origin=(0.1, 0.1))
    cell = np.array([[1, 1]], dtype=np.int64)
    scan = ScanResult(0.2, np.array([True]), cell, [np.empty((0, 2), dtype=np.int64)],
                      np.empty((0, 2), dtype=np.int64))
    for _ in range(20):
        integrate_scan(lo, Pose(0.3, 0.3, 0.0), scan)
    assert lo.values[1, 1] == lo.config.clamp


def test_miss_only_never_classifies_occupied():
    lo = LogOddsGrid((4, 4), 0.2, origin=(0.1, 0.1))
    cells = np.array([[r, c] for r in range(4) for c in range(4)], dtype=np.int64)
    scan = ScanResult(0.2, np.array([False]), np.full((1, 2), -1, dtype=np.int64),
                      [cells], np.empty((0, 2), dtype=np.int64))
    for _ in range(30):
        integrate_scan(lo, Pose(0.3, 0.3, 0.0), scan)
    assert not (lo.classify().cells == OCCUPIED).any()


def test_integrate_pose_bounds_checked():
    lo = LogOddsGrid((5, 5), 0.2, origin=(0.1, 0.1))
    scan = ScanResult(0.2, np.zeros(0, dtype=bool), np.empty((0, 2), dtype=np.int64),
                      [], np.empty((0, 2), dtype=np.int64))
    with pytest.raises(ValueError, match="outside map"):
        integrate_scan(lo, Pose(9.0, 0.3, 0.0), scan)
    with pytest.raises(ValueError, match="resolution"):
        integrate_scan(LogOddsGrid((5, 5), 0.1), Pose(0.2, 0.2, 0.0), scan)


# -- inflate -------------------------------------------------------------------


def _grid(cells, res=0.2):
    return Grid2D(np.asarray(cells, dtype=np.int8), res, origin=(res / 2, res / 2))


def test_inflate_zero_radius_identity():
    cells = np.full((8, 8), FREE)
    cells[3, 3] = OCCUPIED
    g = _grid(cells)
    out = inflate(g, 0.0)
    assert np.array_equal(out.cells, g.cells)


def test_inflate_single_cell_one_cell_radius():
    cells = np.full((7, 7), FREE)
    cells[3, 3] = OCCUPIED
    out = inflate(_grid(cells), 0.2)  # one cell
    nf = np.argwhere(out.cells == NON_FLIGHT)
    assert {tuple(x) for x in nf} == {(2, 3), (4, 3), (3, 2), (3, 4)}
    assert out.cells[3, 3] == OCCUPIED


def test_inflate_fully_free_noop():
    g = _grid(np.full((6, 6), FREE))
    assert not (inflate(g, 1.0).cells == NON_FLIGHT).any()


def test_inflate_matches_disc_oracle():
    rng = np.random.default_rng(1)
    for _ in range(30):
        cells = np.where(rng.random((12, 12)) < 0.15, OCCUPIED, FREE).astype(np.int8)
        cells[rng.random((12, 12)) < 0.2] = UNKNOWN
        radius = float(rng.choice([0.2, 0.3, 0.45, 0.6]))
        out = inflate(_grid(cells), radius)

        r_cells = radius / 0.2
        expected = cells.copy()
        occ = np.argwhere(cells == OCCUPIED)
        for r in range(12):
            for c in range(12):
                if cells[r, c] == OCCUPIED:
                    continue
                for orr, occ_c in occ:
                    if (r - orr) ** 2 + (c - occ_c) ** 2 <= r_cells ** 2:
                        expected[r, c] = NON_FLIGHT
                        break
        assert np.array_equal(out.cells, expected)


def test_inflate_monotone_in_radius():
    rng = np.random.default_rng(3)
    cells = np.where(rng.random((20, 20)) < 0.1, OCCUPIED, FREE).astype(np.int8)
    g = _grid(cells)
    prev = np.zeros((20, 20), dtype=bool)
    for radius in (0.2, 0.4, 0.6, 0.8):
        nf = inflate(g, radius).cells == NON_FLIGHT
        assert (prev & ~nf).sum() == 0
        prev = nf


# -- ego transform -------------------------------------------------------------


def _pattern_grid():
    cells = np.full((21, 31), UNKNOWN, dtype=np.int8)
    cells[4:17, 6:26] = FREE
    cells[4, 6:26] = OCCUPIED
    cells[10, 12] = OCCUPIED
    cells[8:12, 20] = NON_FLIGHT
    return _grid(cells)


def test_ego_identity_at_zero_yaw():
    g = _pattern_grid()
    pose = Pose(*g.center_of(10, 15), 0.0)
    spec = EgoTransformSpec(pose, (41, 41))
    ego = ego_transform(g, spec)
    # the source must appear centred and unrotated
    r0 = 20 - 10
    c0 = 20 - 15
    assert np.array_equal(ego.cells[r0:r0 + 21, c0:c0 + 31], g.cells)
    border = np.ones((41, 41), dtype=bool)
    border[r0:r0 + 21, c0:c0 + 31] = False
    assert (ego.cells[border] == UNKNOWN).all()


def test_ego_quarter_turn_is_index_permutation():
    g = _pattern_grid()
    x, y = g.center_of(10, 15)
    base = ego_transform(g, EgoTransformSpec(Pose(x, y, 0.0), (41, 41)))
    quarter = ego_transform(g, EgoTransformSpec(Pose(x, y, math.pi / 2), (41, 41)))
    assert np.array_equal(quarter.cells, np.rot90(base.cells, 1))
    half = ego_transform(g, EgoTransformSpec(Pose(x, y, math.pi), (41, 41)))
    assert np.array_equal(half.cells, np.rot90(base.cells, 2))
    neg = ego_transform(g, EgoTransformSpec(Pose(x, y, -math.pi / 2), (41, 41)))
    assert np.array_equal(neg.cells, np.rot90(base.cells, -1))


def test_ego_translation_invariance():
    g = _pattern_grid()
    pose = Pose(*g.center_of(9, 14), 0.7)
    spec = EgoTransformSpec(pose, (41, 41))
    base = ego_transform(g, spec)
    for dx, dy in ((1.73, -0.4), (-3.3, 12.9)):
        shifted = Grid2D(g.cells.copy(), g.resolution_m,
                         origin=(g.origin[0] + dx, g.origin[1] + dy))
        moved = Pose(pose.x + dx, pose.y + dy, pose.yaw)
        out = ego_transform(shifted, EgoTransformSpec(moved, (41, 41)))
        assert np.array_equal(out.cells, base.cells)


def test_ego_output_size_must_be_odd():
    with pytest.raises(ValueError):
        EgoTransformSpec(Pose(0, 0, 0), (40, 41))


def test_ego_round_trip_axis_aligned():
    g = _pattern_grid()
    pose = Pose(*g.center_of(10, 15), math.pi / 2)
    spec = EgoTransformSpec(pose, (81, 81))
    ego = ego_transform(g, spec)
    back = ego_to_world(ego, spec, g)
    assert np.array_equal(back.cells, g.cells)


def test_conservative_tie_rule_keeps_obstacles():
    # robot exactly on a cell boundary: the sample points tie between two
    # columns; the occupied state must win
    cells = np.full((5, 5), FREE, dtype=np.int8)
    cells[2, 3] = OCCUPIED
    g = _grid(cells)
    x = 3 * 0.2  # boundary between columns 2 and 3
    y = 0.2 * 2 + 0.1
    ego = ego_transform(g, EgoTransformSpec(Pose(x, y, 0.0), (5, 5)))
    assert (ego.cells == OCCUPIED).sum() >= 1


# -- projection ------------------------------------------------------------------


def test_project_all_free_block():
    cells = np.full((4, 4), FREE, dtype=np.int8)
    low = project_low_from_high(Grid2D(cells, 0.05, (0.025, 0.025)), 0.2)
    assert low.cells.shape == (1, 1)
    assert low.cells[0, 0] == FREE
    assert low.resolution_m == 0.2
    assert low.origin == (0.1, 0.1)


def test_project_one_occupied_dominates():
    cells = np.full((4, 4), FREE, dtype=np.int8)
    cells[3, 2] = OCCUPIED
    low = project_low_from_high(Grid2D(cells, 0.05, (0.025, 0.025)), 0.2)
    assert low.cells[0, 0] == OCCUPIED


def test_project_partial_evidence_is_free():
    cells = np.full((4, 4), UNKNOWN, dtype=np.int8)
    cells[0, 0] = FREE
    low = project_low_from_high(Grid2D(cells, 0.05, (0.025, 0.025)), 0.2)
    assert low.cells[0, 0] == FREE


def test_project_matches_block_reduction_oracle():
    rng = np.random.default_rng(5)
    for _ in range(20):
        hi = rng.choice([FREE, UNKNOWN, OCCUPIED], size=(16, 16)).astype(np.int8)
        low = project_low_from_high(Grid2D(hi, 0.05, (0.025, 0.025)), 0.2)
        expected = np.zeros((4, 4), dtype=np.int8)
        for r in range(4):
            for c in range(4):
                block = hi[4 * r:4 * r + 4, 4 * c:4 * c + 4]
                if (block == OCCUPIED).any():
                    expected[r, c] = OCCUPIED
                elif (block == FREE).any():
                    expected[r, c] = FREE
                else:
                    expected[r, c] = UNKNOWN
        assert np.array_equal(low.cells, expected)


def test_project_rejects_non_integer_ratio():
    with pytest.raises(ValueError):
        project_low_from_high(Grid2D(np.zeros((4, 4)), 0.05), 0.13)


# -- hierarchical map -------------------------------------------------------------


def test_hierarchical_map_updates_both_levels(small_plan):
    maps = HierarchicalMap(small_plan.width * 0.2, small_plan.height * 0.2)
    free = np.argwhere(small_plan.interior_mask & (small_plan.grid == FREE))
    r, c = free[len(free) // 2]
    pose = Pose((c + 0.5) * 0.2, (r + 0.5) * 0.2, 0.0)
    scan = sense(small_plan, pose, SensorConfig(adjacent_occupied_prob=0.0),
                 resolution_m=0.05)
    assert maps.observed_low_cells() == 0
    maps.integrate(pose, scan)
    assert (maps.high_grid().cells != UNKNOWN).any()
    assert (maps.low_grid().cells != UNKNOWN).any()
    assert maps.observed_low_cells() > 0


def test_observed_count_monotone_under_noise(small_plan):
    maps = HierarchicalMap(small_plan.width * 0.2, small_plan.height * 0.2)
    free = np.argwhere(small_plan.interior_mask & (small_plan.grid == FREE))
    rng = np.random.default_rng(2)
    config = SensorConfig(adjacent_occupied_prob=0.3, rng_seed=8)
    prev = 0
    for step in range(25):
        r, c = free[rng.integers(len(free))]
        pose = Pose((c + 0.5) * 0.2, (r + 0.5) * 0.2, rng.uniform(-np.pi, np.pi))
        maps.integrate(pose, sense(small_plan, pose, config,
                                   resolution_m=0.05, step=step))
        count = maps.observed_low_cells()
        assert count >= prev
        prev = count


# -- map files --------------------------------------------------------------------


def test_grid_export_round_trip(tmp_path):
    cells = np.array([[FREE, UNKNOWN], [OCCUPIED, NON_FLIGHT]], dtype=np.int8)
    g = Grid2D(cells, 0.2, origin=(0.1, 0.3))
    save_grid(g, tmp_path / "map.pgm")
    back = load_grid(tmp_path / "map.pgm")
    assert np.array_equal(back.cells, cells)
    assert back.resolution_m == 0.2
    assert back.origin == (0.1, 0.3)
    raw = (tmp_path / "map.pgm").read_bytes()
    assert raw.endswith(bytes([255, 128, 0, 64]))
