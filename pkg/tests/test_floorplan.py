import re
from collections import deque

import numpy as np
import pytest

from mapex import pgm
from mapex.floorplan import (FloorPlan, FloorPlanConfig, GenerationError,
                             generate_plan, load_plan, save_plan)
from mapex.grid import FREE, OCCUPIED


def flood_fill_reaches_all_free(plan: FloorPlan) -> bool:
    """Independent connectivity oracle: breadth-first flood fill."""
    free = plan.interior_mask & (plan.grid == FREE)
    seeds = np.argwhere(free)
    if len(seeds) == 0:
        return False
    seen = np.zeros_like(free)
    queue = deque([tuple(seeds[0])])
    seen[tuple(seeds[0])] = True
    while queue:
        r, c = queue.popleft()
        for nr, nc in ((r + 1, c), (r - 1, c), (r, c + 1), (r, c - 1)):
            if (0 <= nr < plan.height and 0 <= nc < plan.width
                    and free[nr, nc] and not seen[nr, nc]):
                seen[nr, nc] = True
                queue.append((nr, nc))
    return bool((seen == free).all())


def door_gaps_scanline_ok(plan: FloorPlan, min_gap: int) -> bool:
    """Independent doorway-width oracle: encode each grid line as a string
    and regex for a too-short free run bounded by occupied cells."""
    code = np.full(plan.grid.shape, "o", dtype="U1")  # outside
    code[plan.interior_mask] = "."
    code[plan.interior_mask & (plan.grid == OCCUPIED)] = "#"
    too_short = re.compile(r"#(\.{1,%d})#" % (min_gap - 1))
    for lines in (code, code.T):
        for line in lines:
            if too_short.search("".join(line)):
                return False
    return True


def test_default_config_plan_properties():
    plan = generate_plan(FloorPlanConfig(rng_seed=12))
    assert plan.grid.shape == (55, 105)
    assert plan.interior_cell_count == plan.interior_mask.sum()
    assert plan.interior_cell_count > 0
    # walls exist and are strictly inside the interior mask
    occ = plan.grid == OCCUPIED
    assert occ.any()
    assert not (occ & ~plan.interior_mask).any()
    assert flood_fill_reaches_all_free(plan)


def test_determinism_in_seed():
    a = generate_plan(FloorPlanConfig(rng_seed=99))
    b = generate_plan(FloorPlanConfig(rng_seed=99))
    assert np.array_equal(a.grid, b.grid)
    assert np.array_equal(a.interior_mask, b.interior_mask)
    c = generate_plan(FloorPlanConfig(rng_seed=100))
    assert not np.array_equal(a.grid, c.grid)


def test_single_room_degenerate_case():
    config = FloorPlanConfig(max_width_m=2.0, max_height_m=2.0,
                             min_room_dim_m=1.2, min_door_width_m=0.4,
                             furniture_count_range=(0, 0),
                             internal_room_prob=0.0, rng_seed=1)
    plan = generate_plan(config)
    occ = plan.grid == OCCUPIED
    inside = plan.interior_mask
    # interior free except the one-cell perimeter ring
    rows = np.nonzero(inside.any(axis=1))[0]
    cols = np.nonzero(inside.any(axis=0))[0]
    r0, r1, c0, c1 = rows[0], rows[-1], cols[0], cols[-1]
    ring = np.zeros_like(inside)
    ring[r0, c0:c1 + 1] = ring[r1, c0:c1 + 1] = True
    ring[r0:r1 + 1, c0] = ring[r0:r1 + 1, c1] = True
    assert np.array_equal(occ, ring & inside)
    assert ((plan.grid == FREE) & inside).sum() > 0


def test_infeasible_bounds_raise():
    with pytest.raises(GenerationError):
        generate_plan(FloorPlanConfig(max_width_m=2.0, max_height_m=2.0,
                                      min_room_dim_m=5.0, rng_seed=0))


def test_config_validation():
    with pytest.raises(ValueError):
        FloorPlanConfig(min_door_width_m=0.1, resolution_m=0.2)
    with pytest.raises(ValueError):
        FloorPlanConfig(internal_room_prob=1.5)
    with pytest.raises(ValueError):
        FloorPlanConfig(furniture_count_range=(3, 1))


def test_hundred_seeds_connectivity_and_door_width():
    config = FloorPlanConfig(max_width_m=10.0, max_height_m=8.0)
    door_cells = config.door_cells
    for seed in range(100):
        plan = generate_plan(FloorPlanConfig(max_width_m=10.0, max_height_m=8.0,
                                             rng_seed=seed))
        assert flood_fill_reaches_all_free(plan), f"seed {seed} disconnected"
        assert door_gaps_scanline_ok(plan, door_cells), f"seed {seed} narrow gap"


def test_bounds_invariant():
    for seed in (0, 7, 31):
        config = FloorPlanConfig(max_width_m=6.0, max_height_m=4.0, rng_seed=seed)
        plan = generate_plan(config)
        assert plan.grid.shape == config.grid_shape


def test_occupancy_upsample():
    plan = generate_plan(FloorPlanConfig(max_width_m=4.0, max_height_m=3.0,
                                         min_room_dim_m=1.0, rng_seed=3))
    hi = plan.occupancy(0.05)
    assert hi.shape == (plan.height * 4, plan.width * 4)
    assert hi[::4, ::4].sum() == (plan.grid == OCCUPIED).sum()
    with pytest.raises(ValueError):
        plan.occupancy(0.15)


# -- serialisation ------------------------------------------------------------


def test_save_load_round_trip(tmp_path):
    plan = generate_plan(FloorPlanConfig(max_width_m=6.0, max_height_m=5.0,
                                         rng_seed=8))
    path = tmp_path / "plan.pgm"
    save_plan(plan, path)
    back = load_plan(path)
    assert np.array_equal(back.grid, plan.grid)
    assert np.array_equal(back.interior_mask, plan.interior_mask)
    assert back.resolution_m == plan.resolution_m
    assert back.rng_seed == plan.rng_seed
    assert back.interior_cell_count == plan.interior_cell_count
    # bytes stable under a second save
    save_plan(back, tmp_path / "again.pgm")
    assert (tmp_path / "again.pgm").read_bytes() == path.read_bytes()


def test_unknown_pixel_value_rejected(tmp_path):
    path = tmp_path / "bad.pgm"
    pgm.write_pgm(path, np.full((3, 3), 7, dtype=np.uint8))
    pgm.write_sidecar(str(path) + ".meta", {
        "width": 3, "height": 3, "resolution_m": "0.2"})
    with pytest.raises(ValueError, match="unknown cell encoding"):
        load_plan(path)


def test_dimension_mismatch_rejected(tmp_path):
    path = tmp_path / "bad.pgm"
    pgm.write_pgm(path, np.full((3, 3), 255, dtype=np.uint8))
    pgm.write_sidecar(str(path) + ".meta", {
        "width": 4, "height": 3, "resolution_m": "0.2"})
    with pytest.raises(ValueError, match="mismatch"):
        load_plan(path)


def test_hand_written_p5_fixture(tmp_path):
    # 3x3 plan, all free except the centre cell
    path = tmp_path / "tiny.pgm"
    raw = np.full((3, 3), 255, dtype=np.uint8)
    raw[1, 1] = 0
    path.write_bytes(b"P5\n3 3\n255\n" + raw.tobytes())
    pgm.write_sidecar(str(path) + ".meta", {
        "width": 3, "height": 3, "resolution_m": "0.2",
        "rng_seed": 0, "interior_cells": 9})
    plan = load_plan(path)
    assert plan.grid[1, 1] == OCCUPIED
    assert (plan.grid == OCCUPIED).sum() == 1
    assert plan.interior_mask.all()
    assert plan.interior_cell_count == 9
