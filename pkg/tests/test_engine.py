import math

import numpy as np
import pytest

from fundstop import (
    FeeModelError,
    FeeParams,
    FundState,
    GridSpec,
    build_current_level_reward,
    build_reward_tensor,
    build_running_max_reward,
    full_chain_oracle,
    query,
    solve,
)

# hand-solved chain value for the running-max reward on m=n=2, h=1, w0=0
MAX_REWARD_V00 = 7.0 / 6.0


class TestGridSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            GridSpec(h=0.0, m=2, n=2, w0=1.0)
        with pytest.raises(ValueError):
            GridSpec(h=0.1, m=0, n=2, w0=1.0)
        with pytest.raises(ValueError):
            GridSpec(h=0.1, m=2.0, n=2, w0=1.0)  # non-integer
        with pytest.raises(ValueError):
            GridSpec(h=1.0, m=2, n=200, w0=1.0)  # sanity limit

    def test_zero_anchor_allowed_for_test_rewards(self):
        grid = GridSpec(h=1.0, m=2, n=2, w0=0.0)
        assert grid.level(-2) == -2.0

    def test_rounding_residue_snaps_to_zero(self):
        grid = GridSpec(h=0.025, m=40, n=40, w0=1.0)
        assert grid.level(-40) == 0.0
        assert grid.low_levels()[-1] == 0.0
        assert grid.w_levels()[0] == 0.0


class TestRewardTensor:
    def test_entry_count(self, worked_params):
        grid = GridSpec(h=0.05, m=2, n=2, w0=1.0)
        tensor = build_reward_tensor(worked_params, grid)
        assert tensor.data.size == 27

    def test_anchor_state_value(self, worked_params, small_grid):
        tensor = build_reward_tensor(worked_params, small_grid)
        assert tensor.get(0, 0, 0) == pytest.approx(math.log(0.02), abs=1e-12)

    def test_matches_scalar_reward(self, worked_params, small_grid):
        from fundstop import reward

        tensor = build_reward_tensor(worked_params, small_grid)
        grid = small_grid
        for j in range(grid.m + 1):
            for k in range(grid.n + 1):
                for i in (-j, 0, k):
                    state = FundState(grid.level(-j), grid.level(i), grid.level(k))
                    assert tensor.get(j, k, i) == pytest.approx(
                        reward(worked_params, state), abs=1e-12
                    )

    def test_domain_error_names_state(self):
        # power utility with eta > 1 blows up at zero total fee; construction
        # only guards the log case, so this surfaces during the tensor build
        params = FeeParams(alpha=0.0, beta=0.0, p=0.3, w0=1.0, utility="power", eta=2.0)
        grid = GridSpec(h=0.05, m=2, n=2, w0=1.0)
        with pytest.raises(FeeModelError, match=r"\(j=0, k=0, i=0\)"):
            build_reward_tensor(params, grid)

    def test_log_guard_blocks_construction(self):
        with pytest.raises(FeeModelError):
            FeeParams(alpha=0.0, beta=0.0, p=0.3, w0=1.0, utility="log")

    def test_negative_box_rejected_for_fees(self, worked_params):
        grid = GridSpec(h=0.3, m=4, n=4, w0=1.0)  # lower edge -0.2
        with pytest.raises(ValueError):
            build_reward_tensor(worked_params, grid)


class TestSolve:
    def test_identity_reward_is_martingale(self, small_grid):
        tensor = build_current_level_reward(small_grid)
        values, barriers = solve(tensor, small_grid)
        grid = small_grid
        for j in range(grid.m + 1):
            for k in range(grid.n + 1):
                expected = grid.w0 + grid.h * np.arange(-j, k + 1)
                assert np.allclose(values.cell(j, k), expected, atol=1e-12)
        assert values.initial_value() == pytest.approx(grid.w0, abs=1e-12)
        # stopping everywhere: barriers collapse to the cell edges
        for j in range(grid.m + 1):
            for k in range(grid.n + 1):
                assert barriers.stop_lo[j, k] == pytest.approx(grid.level(-j), abs=1e-12)
                assert barriers.stop_hi[j, k] == pytest.approx(grid.level(k), abs=1e-12)
        assert not barriers.continuation.any()

    def test_max_reward_small_grid(self):
        grid = GridSpec(h=1.0, m=2, n=2, w0=0.0)
        tensor = build_running_max_reward(grid)
        values, _ = solve(tensor, grid)
        assert values.initial_value() == pytest.approx(MAX_REWARD_V00, abs=1e-12)
        oracle = full_chain_oracle(tensor, grid, tol=1e-12)
        assert np.max(np.abs(values.data - oracle.data)) <= 1e-10

    def test_single_cell_recursion(self, worked_params):
        grid = GridSpec(h=0.05, m=1, n=1, w0=1.0)
        tensor = build_reward_tensor(worked_params, grid)
        values, _ = solve(tensor, grid)
        expected = max(
            tensor.get(0, 0, 0),
            0.5 * (tensor.get(0, 1, 1) + tensor.get(1, 0, -1)),
        )
        assert values.get(0, 0, 0) == pytest.approx(expected, abs=1e-14)

    def test_value_dominates_reward_and_boundary_equality(self, worked_params, small_grid):
        tensor = build_reward_tensor(worked_params, small_grid)
        values, _ = solve(tensor, small_grid)
        assert np.all(values.data >= tensor.data - 1e-12)
        for j in range(small_grid.m + 1):
            assert np.array_equal(values.cell(j, small_grid.n), tensor.cell(j, small_grid.n))
        for k in range(small_grid.n + 1):
            assert np.array_equal(values.cell(small_grid.m, k), tensor.cell(small_grid.m, k))

    def test_bellman_consistency(self, worked_params):
        grid = GridSpec(h=0.05, m=4, n=4, w0=1.0)
        tensor = build_reward_tensor(worked_params, grid)
        values, _ = solve(tensor, grid)
        tol = 1e-12
        for j in range(grid.m):
            for k in range(grid.n):
                v = values.cell(j, k)
                f = tensor.cell(j, k)
                left = values.cell(j + 1, k)[0]
                right = values.cell(j, k + 1)[-1]
                if j + k == 0:  # one interior point, both edges absorbing
                    expected = max(f[0], 0.5 * (left + right))
                    assert v[0] == pytest.approx(expected, abs=tol)
                    continue
                # interior: midpoint concavity plus exact averaging off the stop set
                mid = 0.5 * (v[:-2] + v[2:])
                assert np.all(v[1:-1] >= mid - tol)
                off_stop = v[1:-1] > f[1:-1] + 1e-10
                assert np.all(np.abs((v[1:-1] - mid))[off_stop] <= tol)
                # lower edge recursion against cell (j+1, k)
                low = max(f[0], 0.5 * (v[1] + left))
                assert v[0] == pytest.approx(low, abs=tol)
                # upper edge recursion against cell (j, k+1)
                high = max(f[-1], 0.5 * (right + v[-2]))
                assert v[-1] == pytest.approx(high, abs=tol)

    def test_oracle_equivalence_fee_model(self, worked_params):
        for m in (2, 4):
            grid = GridSpec(h=0.05, m=m, n=m, w0=1.0)
            tensor = build_reward_tensor(worked_params, grid)
            values, _ = solve(tensor, grid)
            oracle = full_chain_oracle(tensor, grid, tol=1e-12)
            assert np.max(np.abs(values.data - oracle.data)) <= 1e-9

    def test_barrier_pairing(self, worked_params):
        grid = GridSpec(h=0.05, m=8, n=8, w0=1.0)
        tensor = build_reward_tensor(worked_params, grid)
        _, barriers = solve(tensor, grid)
        for j in range(grid.m + 1):
            for k in range(grid.n + 1):
                lo, hi = barriers.stop_lo[j, k], barriers.stop_hi[j, k]
                if barriers.continuation[j, k]:
                    assert lo == pytest.approx(grid.level(k + 1), abs=1e-12)
                    assert hi == pytest.approx(grid.level(-(j + 1)), abs=1e-12)
                else:
                    assert lo <= hi + 1e-12
                    assert grid.level(-j) - 1e-12 <= lo and hi <= grid.level(k) + 1e-12

    def test_determinism(self, worked_params, small_grid):
        t1 = build_reward_tensor(worked_params, small_grid)
        v1, b1 = solve(t1, small_grid)
        t2 = build_reward_tensor(worked_params, small_grid)
        v2, b2 = solve(t2, small_grid)
        assert np.array_equal(t1.data, t2.data)
        assert np.array_equal(v1.data, v2.data)
        assert np.array_equal(b1.stop_lo, b2.stop_lo)
        assert np.array_equal(b1.stop_hi, b2.stop_hi)
        assert np.array_equal(b1.continuation, b2.continuation)

    def test_non_finite_rewards_rejected(self, small_grid):
        tensor = build_current_level_reward(small_grid)
        tensor.data[5] = np.nan
        with pytest.raises(ValueError):
            solve(tensor, small_grid)


class TestChainOracle:
    def test_identity_reward_exact(self, small_grid):
        tensor = build_current_level_reward(small_grid)
        values, _ = solve(tensor, small_grid)
        oracle = full_chain_oracle(tensor, small_grid, tol=1e-12)
        assert np.max(np.abs(oracle.data - tensor.data)) <= 1e-12
        assert np.max(np.abs(values.data - oracle.data)) <= 1e-12

    def test_refuses_large_grids(self, worked_params):
        grid = GridSpec(h=0.05, m=7, n=4, w0=1.0)
        tensor = build_current_level_reward(grid)
        with pytest.raises(ValueError):
            full_chain_oracle(tensor, grid, tol=1e-12)


class TestQuery:
    def test_index_mapping(self, worked_params, small_grid):
        tensor = build_reward_tensor(worked_params, small_grid)
        values, _ = solve(tensor, small_grid)
        w0, h = small_grid.w0, small_grid.h
        assert query(values, FundState(w0, w0, w0), small_grid) == values.get(0, 0, 0)
        assert query(values, FundState(w0 - h, w0, w0 + h), small_grid) == values.get(1, 1, 0)

    def test_off_grid_rejected(self, worked_params, small_grid):
        tensor = build_reward_tensor(worked_params, small_grid)
        values, _ = solve(tensor, small_grid)
        w0, h = small_grid.w0, small_grid.h
        with pytest.raises(ValueError, match="w="):
            query(values, FundState(w0 - h, w0 + h / 2, w0 + h), small_grid)
        with pytest.raises(ValueError, match="w_min"):
            query(values, FundState(w0 - 10 * h, w0, w0 + h), small_grid)
