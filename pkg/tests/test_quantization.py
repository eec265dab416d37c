import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

import quantcredit as qc
from quantcredit.quantization import (
    QuantizerGrid,
    grid_distortion,
    load_grid_cache,
    marginal_value_samples,
    nearest_index,
    quantile_grid,
    save_grid_cache,
)
from conftest import QUANT_SEED
from oracles import optimal_two_point_gaussian


def make_grid(points):
    points = np.asarray(points, dtype=float)
    w = np.full(len(points), 1.0 / len(points))
    return QuantizerGrid(points, w, 0.0)


class TestNearestProjection:
    def test_tie_goes_to_smaller_index(self):
        assert qc.nearest_projection(make_grid([1.0, 3.0]), 2.0) == 0

    def test_closest_neighbor(self):
        assert qc.nearest_projection(make_grid([1.0, 3.0]), 2.5) == 1

    def test_grid_points_map_to_themselves(self):
        g = make_grid([-2.0, 0.1, 0.7, 5.0])
        for i, p in enumerate(g.points):
            assert qc.nearest_projection(g, p) == i

    def test_vectorized(self):
        g = make_grid([0.0, 1.0, 2.0])
        idx = qc.nearest_projection(g, np.array([-5.0, 0.4, 1.6, 99.0]))
        assert list(idx) == [0, 0, 2, 2]


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=12, unique=True))
@settings(max_examples=200, deadline=None)
def test_projection_idempotent_on_random_grids(points):
    g = make_grid(sorted(points))
    # points a single ulp apart make the float midpoint collide with an
    # endpoint; bisection needs midpoints strictly between neighbors
    mids = 0.5 * (g.points[1:] + g.points[:-1])
    if len(mids) and not (np.all(mids > g.points[:-1]) and np.all(mids < g.points[1:])):
        return
    idx = nearest_index(g.points, g.points)
    assert list(idx) == list(range(len(points)))


class TestLloydPass:
    def test_point_mass_samples(self):
        out = qc.lloyd_pass(np.full(500, 3.25), make_grid([1.0, 10.0]))
        assert out.points[0] == 3.25
        assert out.distortion == 0.0
        assert out.empty_cells == 1

    def test_symmetric_fixed_point(self):
        samples = np.array([0.0, 1.0, 2.0, 3.0])
        out = qc.lloyd_pass(samples, make_grid([0.5, 2.5]))
        assert_allclose(out.points, [0.5, 2.5])
        out2 = qc.lloyd_pass(samples, out)
        assert_allclose(out2.points, [0.5, 2.5])

    def test_gaussian_two_point_optimum(self):
        target = optimal_two_point_gaussian()
        assert_allclose(target, np.sqrt(2.0 / np.pi), atol=1e-9)
        z = np.random.default_rng(505).standard_normal(1_000_000)
        g = make_grid([-1.0, 1.0])
        for _ in range(40):
            g = qc.lloyd_pass(z, g)
        assert np.max(np.abs(np.abs(g.points) - target)) < 0.02

    def test_monotone_distortion_along_passes(self, bs_model, bs_scenario, grid50):
        samples = marginal_value_samples(bs_model, bs_scenario, grid50, 20_000, QUANT_SEED)[:, 25]
        g = make_grid(quantile_grid(samples, 15))
        prev = grid_distortion(samples, g.points)
        for _ in range(30):
            g = qc.lloyd_pass(samples, g)
            assert g.distortion <= prev + 1e-12
            prev = g.distortion

    def test_weights_are_cell_frequencies(self):
        samples = np.concatenate([np.zeros(30), np.ones(70)])
        out = qc.lloyd_pass(samples, make_grid([0.1, 0.9]))
        assert_allclose(out.weights, [0.3, 0.7])
        assert abs(out.weights.sum() - 1.0) < 1e-12


@given(
    st.lists(st.floats(-50, 50), min_size=5, max_size=60),
    st.integers(2, 5),
)
@settings(max_examples=100, deadline=None)
def test_lloyd_never_increases_distortion(samples, size):
    samples = np.asarray(samples)
    try:
        init = quantile_grid(samples, size)
    except ValueError:
        return  # too few distinct values for a grid of this size
    g = make_grid(init)
    before = grid_distortion(samples, g.points)
    after = qc.lloyd_pass(samples, g).distortion
    assert after <= before + 1e-12


class TestBuildGridSequence:
    def test_all_singleton_sizes_give_sample_means(self, bs_model, bs_scenario):
        grid = qc.TimeGrid.uniform(1.0, 3)
        seq = qc.build_grid_sequence(bs_model, bs_scenario, grid, (1, 1, 1, 1), 500, 5, seed=1)
        samples = marginal_value_samples(bs_model, bs_scenario, grid, 500, 1)
        for k in range(1, 4):
            assert_allclose(seq.grids[k].points[0], samples[:, k].mean())
            assert_allclose(seq.grids[k].weights, [1.0])

    def test_beats_quantile_baseline_every_step(self, bs_quantization, bs_model, bs_scenario, grid50):
        seq, _ = bs_quantization
        samples = marginal_value_samples(bs_model, bs_scenario, grid50, 100_000, QUANT_SEED)
        for k in range(1, 51):
            baseline = grid_distortion(samples[:, k], quantile_grid(samples[:, k], 60))
            assert seq.grids[k].distortion <= baseline

    def test_doubling_size_halves_distortion_roughly(self, bs_model, bs_scenario, grid50):
        s30 = qc.build_grid_sequence(bs_model, bs_scenario, grid50, (1,) + (30,) * 50, 100_000, 80, QUANT_SEED)
        s60 = qc.build_grid_sequence(bs_model, bs_scenario, grid50, (1,) + (60,) * 50, 100_000, 80, QUANT_SEED)
        ratio = s60.grids[-1].distortion / s30.grids[-1].distortion
        assert 0.4 <= ratio <= 0.65

    def test_structure_and_weights(self, bs_quantization):
        seq, _ = bs_quantization
        assert seq.sizes == (1,) + (60,) * 50
        for g in seq.grids:
            g.validate()

    def test_insufficient_samples_rejected(self, bs_model, bs_scenario):
        grid = qc.TimeGrid.uniform(1.0, 2)
        with pytest.raises(ValueError, match="insufficient"):
            qc.build_grid_sequence(bs_model, bs_scenario, grid, (1, 50, 50), 600, 5, seed=1)

    def test_first_size_must_be_one(self, bs_model, bs_scenario):
        grid = qc.TimeGrid.uniform(1.0, 2)
        with pytest.raises(ValueError):
            qc.build_grid_sequence(bs_model, bs_scenario, grid, (2, 5, 5), 1000, 5, seed=1)


class TestTransitions:
    def test_forced_single_cell(self, bs_model, bs_scenario):
        grid = qc.TimeGrid.uniform(1.0, 2)
        seq = qc.build_grid_sequence(bs_model, bs_scenario, grid, (1, 1, 1), 500, 5, seed=1)
        trans = qc.estimate_transitions(seq, bs_model, bs_scenario, grid, 500, seed=1)
        for tm in trans:
            assert_allclose(tm.probs, [[1.0]])

    def test_rows_are_probability_vectors(self, bs_quantization):
        _, trans = bs_quantization
        for tm in trans:
            tm.validate()
            assert np.max(np.abs(tm.probs.sum(axis=1) - 1.0)) <= 1e-12

    def test_near_identity_for_slow_dynamics(self, bs_scenario):
        class Slow:
            def drift(self, t, v):
                return 0.0 * v

            def vol(self, t, v):
                return 1.0 + 0.0 * v

        grid = qc.TimeGrid(np.array([0.0, 10.0, 10.01, 10.02]))
        seq = qc.build_grid_sequence(Slow(), bs_scenario, grid, (1, 6, 6, 6), 5000, 40, seed=3)
        trans = qc.estimate_transitions(seq, Slow(), bs_scenario, grid, 5000, seed=3)
        for tm in trans[1:]:
            assert np.min(np.diag(tm.probs)) >= 0.9

    def test_dead_rows_get_nearest_point_mass(self, bs_model, bs_scenario):
        grid = qc.TimeGrid.uniform(1.0, 2)
        seq = qc.build_grid_sequence(bs_model, bs_scenario, grid, (1, 4, 4), 2000, 20, seed=5)
        # splice in an unreachable outlier point at step 1
        g1 = seq.grids[1]
        points = np.concatenate([g1.points, [500.0]])
        weights = np.concatenate([g1.weights, [0.0]])
        spliced = qc.GridSequence(
            (seq.grids[0], QuantizerGrid(points, weights, g1.distortion), seq.grids[2])
        )
        trans = qc.estimate_transitions(spliced, bs_model, bs_scenario, grid, 2000, seed=5)
        tm = trans[1]
        assert 4 in tm.dead_rows
        expected_col = nearest_index(seq.grids[2].points, 500.0)
        assert tm.probs[4, expected_col] == 1.0

    def test_chain_marginals_match_grid_weights(self, bs_quantization):
        seq, trans = bs_quantization
        mass = np.array([1.0])
        for k in range(1, 51):
            mass = mass @ trans[k - 1].probs
            tv = 0.5 * np.abs(mass - seq.grids[k].weights).sum()
            assert tv <= 0.02

    def test_mismatched_grid_rejected(self, bs_quantization, bs_model, bs_scenario):
        seq, _ = bs_quantization
        short = qc.TimeGrid.uniform(1.0, 5)
        with pytest.raises(ValueError):
            qc.estimate_transitions(seq, bs_model, bs_scenario, short, 1000, seed=1)


class TestGridCache:
    def test_round_trip_is_exact(self, tmp_path, reduced_quantization):
        seq, trans = reduced_quantization
        path = tmp_path / "grids.txt"
        save_grid_cache(path, seq, trans, "deadbeef00112233")
        seq2, trans2, h = load_grid_cache(path)
        assert h == "deadbeef00112233"
        assert seq2.sizes == seq.sizes
        for a, b in zip(seq.grids, seq2.grids):
            assert np.array_equal(a.points, b.points)
            assert np.array_equal(a.weights, b.weights)
            assert a.distortion == b.distortion
        for a, b in zip(trans, trans2):
            assert np.array_equal(a.probs, b.probs)
            assert a.samples == b.samples
            assert a.dead_rows == b.dead_rows

    def test_rejects_foreign_files(self, tmp_path):
        path = tmp_path / "nope.txt"
        path.write_text("something else\n")
        with pytest.raises(ValueError):
            load_grid_cache(path)
