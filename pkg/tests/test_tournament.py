import math

import numpy as np
import pytest

from covest import linalg, nets
from covest.errors import InsufficientDataError, InvalidParameterError, StageError, UnsupportedDimensionError
from covest.mom import partition_blocks
from covest.sampling import RandomStream, sample_gaussian, sample_rademacher_diag
from covest.tournament import (
    DirectionSet,
    PipelineConfig,
    block_matrices,
    build_direction_set,
    choose_beta,
    choose_gamma,
    empirical_covariance,
    epsilon_net_norm,
    estimate_covariance,
    estimate_norm_stage2,
    run_tournament,
    select_estimate,
    tournament_depth,
    truncate_samples,
)

E1 = np.array([[1.0, 0.0]])


def _pairs(u, v):
    u, v = np.atleast_2d(u).astype(float), np.atleast_2d(v).astype(float)
    return DirectionSet(u, v, ("test",) * len(u))


def test_truncate_keeps_and_drops():
    x = np.array([[1.0, 1.0]])
    assert np.array_equal(truncate_samples(x, 2.0), x)
    assert np.array_equal(truncate_samples(x, 1.0), [[0.0, 0.0]])


def test_truncate_boundary_kept():
    x = np.array([[3.0, 4.0]])
    assert np.array_equal(truncate_samples(x, 5.0), x)


def test_truncate_rejects_nonpositive_level():
    with pytest.raises(InvalidParameterError):
        truncate_samples(E1, 0.0)


def test_block_matrices_constant_rows():
    x = np.tile([1.0, 0.0], (12, 1))
    blocks = block_matrices(x, partition_blocks(12, math.exp(-3)))
    assert blocks.shape == (3, 2, 2)
    for m in blocks:
        assert np.array_equal(m, np.diag([1.0, 0.0]))


def test_block_matrices_single_block_is_second_moment():
    x = np.random.default_rng(2).standard_normal((40, 3))
    xt = truncate_samples(x, 2.0)
    (m,) = block_matrices(xt, partition_blocks(40, 0.9))
    np.testing.assert_allclose(m, xt.T @ xt / 40, atol=1e-14)


def test_block_matrices_rademacher():
    x = sample_rademacher_diag([1.0, 0.5], 4000, RandomStream(3))
    for m in block_matrices(x, partition_blocks(4000, 0.01)):
        assert linalg.operator_norm(m - np.diag([1.0, 0.25])) < 0.1


def test_directions_one_dimensional():
    dirs = build_direction_set(1, rng=0)
    assert len(dirs) == 1
    assert abs(dirs.u[0, 0]) == 1.0 and abs(dirs.v[0, 0]) == 1.0


def test_directions_two_dimensional_grid_step():
    net = nets.quarter_net(2)
    steps = np.diff(np.unwrap(np.arctan2(net[:, 1], net[:, 0])))
    assert steps.max() <= 2 * math.asin(1 / 8) + 1e-15
    chord = np.linalg.norm(net - np.roll(net, 1, axis=0), axis=1)
    assert chord.max() / 2 <= 0.25
    dirs = build_direction_set(2, rng=0)
    assert dirs.count("grid-net") > 0


def test_directions_three_dimensional_counts():
    dirs = build_direction_set(3, rng=RandomStream(4), policy="stochastic")
    assert dirs.count("basis") == 9
    assert dirs.count("random") == 450
    assert len(dirs) == 459


def test_directions_are_unit():
    dirs = build_direction_set(3, rng=1, candidates=[np.diag([3.0, 2.0, 1.0])])
    np.testing.assert_allclose(np.linalg.norm(dirs.u, axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(dirs.v, axis=1), 1.0, atol=1e-12)


def test_quarter_net_covers_sphere_3d():
    net = nets.quarter_net(3)
    probe = nets.fibonacci_sphere(20_000)
    dist = np.sqrt(np.maximum(2 - 2 * (probe @ net.T).max(axis=1), 0))
    assert dist.max() <= 0.25


def test_quarter_net_rejects_high_dimension():
    with pytest.raises(UnsupportedDimensionError):
        nets.quarter_net(4)


def test_depth_zero_when_blocks_agree():
    y = np.diag([2.0, 1.0])
    assert tournament_depth(y, [y, y, y], build_direction_set(2, rng=0)) == 0.0


def test_depth_two_blocks_needs_both():
    blocks = [np.diag([1.0, 1.0]), np.diag([3.0, 1.0])]
    assert tournament_depth(np.diag([2.0, 1.0]), blocks, _pairs([1, 0], [1, 0])) == 1.0


def test_depth_single_block_is_restricted_norm():
    rng = np.random.default_rng(5)
    g = rng.standard_normal((3, 3))
    m, y = g + g.T, np.eye(3)
    dirs = build_direction_set(3, rng=6)
    expect = np.max(np.abs(np.einsum("kd,de,ke->k", dirs.v, m - y, dirs.u)))
    assert tournament_depth(y, [m], dirs) == pytest.approx(expect, rel=1e-12)


def test_select_all_equal_blocks():
    m = np.array([[2.0, 0.3], [0.3, 1.0]])
    report = select_estimate([np.eye(2), m], [m] * 4, build_direction_set(2, rng=0))
    assert np.array_equal(report.estimate, m)
    assert report.depth == 0.0
    assert report.config["winner"] == 1


def test_select_ignores_corrupted_block():
    clean = np.array([[1.0, 0.2], [0.2, 0.5]])
    blocks = [clean.copy() for _ in range(5)]
    blocks[3] = clean * 100
    report = select_estimate(blocks, blocks, build_direction_set(2, rng=0))
    assert np.array_equal(report.estimate, clean)
    assert report.depth == 0.0


def test_select_tie_goes_to_first():
    m = np.eye(2)
    report = select_estimate([m, m.copy()], [m] * 3, build_direction_set(2, rng=0))
    assert report.config["winner"] == 0


def test_tournament_competitive_with_empirical():
    wins = 0
    for t in range(200):
        x = sample_gaussian(np.eye(4), 3000, RandomStream(31, t))
        emp = linalg.operator_norm(empirical_covariance(x) - np.eye(4))
        beta = (4.0 * 1.0 * 3000) ** 0.25
        r = run_tournament(x, beta, 0.01, RandomStream(32, t))
        wins += linalg.operator_norm(r.estimate - np.eye(4)) <= 1.5 * emp
    assert wins >= 180


def test_choose_gamma():
    assert choose_gamma("subgaussian", 50.0) == 1.0
    assert choose_gamma("heavy", math.e ** 2) == pytest.approx(2.0)
    assert choose_gamma("heavy", 1.2) == 1.0
    with pytest.raises(InvalidParameterError):
        choose_gamma("cauchy", 2.0)


def test_choose_beta():
    assert choose_beta(1.0, 1.0, 16, 1.0) == pytest.approx(2.0)
    assert choose_beta(4.0, 1.0, 4, 1.0) == pytest.approx(2.0)
    assert choose_beta(12.0, 20.0, 30, 1.5) == pytest.approx(2 * choose_beta(3.0, 5.0, 30, 1.5))
    with pytest.raises(InvalidParameterError):
        choose_beta(0.0, 1.0, 4, 1.0)


def test_stage2_constant_rows():
    x = np.tile([1.0, 0.0, 0.0], (60, 1))
    phi2, _ = estimate_norm_stage2(x, 1.0, 0.05, rng=0)
    assert phi2 == pytest.approx(1.0, abs=1e-12)


def test_stage2_high_level_is_noop():
    x = np.random.default_rng(7).standard_normal((90, 2))
    phi1 = (np.linalg.norm(x, axis=1).max() / 4.0) ** 2
    _, report = estimate_norm_stage2(x, phi1, 0.05, kappa=4.0, rng=0)
    _, plain = estimate_norm_stage2(x, 1e6, 0.05, kappa=4.0, rng=0)
    assert np.array_equal(report.estimate, plain.estimate)


def test_pipeline_constant_rows():
    x = np.tile([1.0, 0.0], (60, 1))
    report = estimate_covariance(x, 0.05, config=PipelineConfig(symmetrize=False))
    np.testing.assert_array_equal(report.estimate, np.diag([1.0, 0.0]))
    assert report.depth == 0.0


def test_pipeline_report_contents():
    x = sample_gaussian(np.eye(3), 600, RandomStream(8))
    report = estimate_covariance(x, 0.01, "heavy")
    s = report.state
    assert s.phi1 > 0 and s.phi2 > 0 and s.beta > 0 and s.gamma >= 1.0
    assert s.mode == "heavy"
    assert s.bounds == ((0, 100), (100, 200), (200, 300))
    summary = report.summary()
    for key in ("phi1", "phi2", "beta", "gamma", "depth", "gate.stage1", "gate.stage3"):
        assert key in summary


def test_pipeline_deterministic():
    x = sample_gaussian(np.eye(3), 600, RandomStream(9))
    a = estimate_covariance(x, 0.01, config=PipelineConfig(seed=4))
    b = estimate_covariance(x, 0.01, config=PipelineConfig(seed=4))
    assert np.array_equal(a.estimate, b.estimate)


def test_pipeline_input_errors():
    x = np.random.default_rng(0).standard_normal((11, 2))
    with pytest.raises(InsufficientDataError):
        estimate_covariance(x, 0.1)
    with pytest.raises(InvalidParameterError):
        estimate_covariance(np.ones((30, 2)), 1.5)
    with pytest.raises(InvalidParameterError):
        estimate_covariance(np.ones((30, 2)), 0.1, mode="other")


def test_pipeline_stage_error_on_degenerate_data():
    # symmetrizing identical rows leaves only zeros
    with pytest.raises(StageError) as info:
        estimate_covariance(np.ones((30, 2)), 0.1)
    assert info.value.stage in (1, 2, 3)


def test_empirical_covariance_examples():
    np.testing.assert_array_equal(empirical_covariance(E1), np.diag([1.0, 0.0]))
    np.testing.assert_array_equal(empirical_covariance(np.eye(2)), np.diag([0.5, 0.5]))
    x = sample_gaussian(np.eye(3), 100_000, RandomStream(10))
    assert linalg.operator_norm(empirical_covariance(x) - np.eye(3)) < 0.05


def test_epsilon_net_examples():
    assert epsilon_net_norm(np.ones((20, 1)), 0.1) == 2.0
    assert epsilon_net_norm(np.zeros((20, 2)), 0.1) == 0.0
    with pytest.raises(UnsupportedDimensionError):
        epsilon_net_norm(np.ones((20, 4)), 0.1)


def test_epsilon_net_coverage():
    hits = 0
    for t in range(200):
        x = sample_gaussian(np.diag([4.0, 1.0]), 4000, RandomStream(23, t))
        hits += 4.0 <= epsilon_net_norm(x, 0.01) <= 16.0
    assert hits >= 190
