import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fmqa.encoding import (
    DiscretizationGrid,
    decode,
    encode,
    repair_decode,
    validate_onehot,
)


def grid_and_indices():
    """Strategy: a random grid plus a valid index vector for it."""
    return st.tuples(
        st.integers(min_value=1, max_value=5),   # n_vars
        st.integers(min_value=2, max_value=9),   # levels
        st.randoms(use_true_random=False),
    ).map(_build)


def _build(args):
    n_vars, levels, rnd = args
    bounds = []
    for _ in range(n_vars):
        lo = rnd.uniform(-10, 9)
        bounds.append((lo, lo + rnd.uniform(0.5, 10)))
    grid = DiscretizationGrid(bounds=tuple(bounds), levels=levels)
    indices = np.array([rnd.randrange(levels) for _ in range(n_vars)])
    return grid, indices


class TestGrid:
    def test_rejects_single_level(self):
        with pytest.raises(ValueError):
            DiscretizationGrid(bounds=((0.0, 1.0),), levels=1)

    def test_rejects_bad_bounds(self):
        with pytest.raises(ValueError):
            DiscretizationGrid(bounds=((1.0, 1.0),), levels=4)
        with pytest.raises(ValueError):
            DiscretizationGrid(bounds=((2.0, -1.0),), levels=4)
        with pytest.raises(ValueError):
            DiscretizationGrid(bounds=((0.0, np.inf),), levels=4)

    def test_linear_spacing(self):
        grid = DiscretizationGrid(bounds=((0.0, 10.0),), levels=11)
        np.testing.assert_allclose(grid.grid_values(0), np.arange(11.0))
        assert grid.values_at(np.array([3]))[0] == 3.0

    def test_endpoints_exact(self):
        # (0.1, 0.3) is a case where lo + (hi - lo) != hi in floating point
        grid = DiscretizationGrid(bounds=((0.1, 0.3), (-7.7, 2.2)), levels=7)
        for j, (lo, hi) in enumerate(grid.bounds):
            vals = grid.grid_values(j)
            assert vals[0] == lo
            assert vals[-1] == hi

    def test_bit_layout(self):
        grid = DiscretizationGrid(bounds=((0.0, 1.0), (0.0, 1.0)), levels=3)
        assert grid.n_bits == 6
        assert grid.block(0) == slice(0, 3)
        assert grid.block(1) == slice(3, 6)


class TestEncode:
    def test_layout_example(self):
        grid = DiscretizationGrid(bounds=((0.0, 1.0), (0.0, 1.0)), levels=3)
        x = encode(np.array([2, 0]), grid)
        np.testing.assert_array_equal(x, [0, 0, 1, 1, 0, 0])

    def test_rejects_out_of_range(self):
        grid = DiscretizationGrid(bounds=((0.0, 1.0),), levels=3)
        with pytest.raises(ValueError):
            encode(np.array([3]), grid)
        with pytest.raises(ValueError):
            encode(np.array([-1]), grid)
        with pytest.raises(ValueError):
            encode(np.array([0.5]), grid)

    @settings(max_examples=60)
    @given(grid_and_indices())
    def test_round_trip(self, case):
        grid, indices = case
        x = encode(indices, grid)
        assert validate_onehot(x, grid)
        np.testing.assert_array_equal(decode(x, grid), grid.values_at(indices))

    def test_injective(self):
        grid = DiscretizationGrid(bounds=((0.0, 1.0), (0.0, 1.0)), levels=4)
        seen = set()
        for a in range(4):
            for b in range(4):
                seen.add(encode(np.array([a, b]), grid).tobytes())
        assert len(seen) == 16


class TestDecode:
    def test_rejects_invalid(self):
        grid = DiscretizationGrid(bounds=((0.0, 1.0),), levels=3)
        for bad in ([0, 0, 0], [1, 1, 0], [0, 2, 0]):
            with pytest.raises(ValueError):
                decode(np.array(bad), grid)

    def test_validate_onehot(self):
        grid = DiscretizationGrid(bounds=((0.0, 1.0), (0.0, 1.0)), levels=2)
        assert validate_onehot(np.array([1, 0, 0, 1]), grid)
        assert not validate_onehot(np.array([1, 1, 0, 1]), grid)
        assert not validate_onehot(np.array([1, 0, 0, 0]), grid)


class TestRepairDecode:
    def test_valid_input_is_identity_and_uses_no_randomness(self):
        grid = DiscretizationGrid(bounds=((0.0, 1.0), (0.0, 1.0)), levels=4)
        rng = np.random.default_rng(5)
        state_before = rng.bit_generator.state
        indices = repair_decode(encode(np.array([1, 3]), grid), grid, rng)
        np.testing.assert_array_equal(indices, [1, 3])
        assert rng.bit_generator.state == state_before

    def test_multiple_active_takes_lowest(self):
        grid = DiscretizationGrid(bounds=((0.0, 1.0),), levels=4)
        rng = np.random.default_rng(0)
        np.testing.assert_array_equal(
            repair_decode(np.array([0, 1, 0, 1]), grid, rng), [1]
        )

    def test_empty_block_is_uniform(self):
        # one empty block, levels=3: each index should appear ~1/3 of the time
        grid = DiscretizationGrid(bounds=((0.0, 1.0),), levels=3)
        hits = np.zeros(3)
        n = 10_000
        for seed in range(n):
            idx = repair_decode(np.zeros(3, dtype=np.int8), grid, np.random.default_rng(seed))
            hits[idx[0]] += 1
        np.testing.assert_allclose(hits / n, 1 / 3, atol=0.02)

    def test_rejects_non_binary(self):
        grid = DiscretizationGrid(bounds=((0.0, 1.0),), levels=3)
        with pytest.raises(ValueError):
            repair_decode(np.array([0, 2, 0]), grid, np.random.default_rng(0))
