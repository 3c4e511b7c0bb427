import io

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from covest import linalg, nets, oracle
from covest.mom import lower_median, majority_radius
from covest.sampling import RandomStream, read_samples, sample_student_t, write_samples
from covest.tournament import PipelineConfig, build_direction_set, estimate_covariance, tournament_depth

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@st.composite
def symmetric_matrices(draw, dims=(1, 2, 3, 4, 5)):
    d = draw(st.sampled_from(dims))
    a = draw(arrays(float, (d, d), elements=finite))
    return (a + a.T) / 2


def _orthogonal(seed, d):
    q, r = np.linalg.qr(np.random.default_rng(seed).standard_normal((d, d)))
    return q * np.sign(np.diagonal(r))


@settings(max_examples=60, deadline=None)
@given(symmetric_matrices())
def test_eigensystem_invariants(a):
    es = linalg.eigensystem(a)
    v, lam = es.vectors, es.values
    scale = max(np.abs(a).max(), 1e-300)
    np.testing.assert_allclose(v.T @ v, np.eye(len(a)), atol=1e-10)
    np.testing.assert_allclose(a @ v, v * lam, atol=1e-8 * scale)
    assert np.all(np.diff(lam) <= 1e-12 * scale)
    assert linalg.operator_norm(a) == max(abs(lam[0]), abs(lam[-1]))


@settings(max_examples=60, deadline=None)
@given(symmetric_matrices(dims=(3,)), symmetric_matrices(dims=(3,)), st.floats(-10, 10))
def test_operator_norm_is_a_norm(a, b, t):
    na, nb = linalg.operator_norm(a), linalg.operator_norm(b)
    tol = 1e-9 * (na + nb + 1)
    assert linalg.operator_norm(a + b) <= na + nb + tol
    assert abs(linalg.operator_norm(t * a) - abs(t) * na) <= 1e-9 * (abs(t) * na + 1)


@given(st.lists(finite, min_size=1, max_size=30))
def test_lower_median_is_an_order_statistic(values):
    m = lower_median(values)
    assert m in values
    assert sum(v <= m for v in values) >= (len(values) + 1) // 2


@given(st.lists(finite, min_size=1, max_size=30))
def test_majority_radius_covers_strict_majority(values):
    r = majority_radius(values)
    assert sum(abs(v) <= r for v in values) > len(values) / 2
    assert sum(abs(v) < r for v in values) <= len(values) / 2


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32), st.sampled_from([2, 3]))
def test_depth_triangle_inequality(seed, d):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((6, d, d))
    blocks = g + np.swapaxes(g, 1, 2)
    y, z = blocks[0] * 0.5, blocks[1] * 0.3
    dirs = build_direction_set(d, rng=seed % 7, policy="stochastic", n_random=40)
    gap = np.max(np.abs(np.einsum("kd,de,ke->k", dirs.v, y - z, dirs.u)))
    assert tournament_depth(y, blocks, dirs) <= tournament_depth(z, blocks, dirs) + gap + 1e-12


@settings(max_examples=80, deadline=None)
@given(symmetric_matrices(dims=(1, 2, 3)))
def test_quarter_net_brackets_norm(a):
    net = nets.quarter_net(len(a))
    sup = np.max(np.abs(net @ a @ net.T))
    norm = linalg.operator_norm(a)
    assert sup <= norm * (1 + 1e-12) + 1e-300
    assert norm <= 2 * sup * (1 + 1e-12) + 1e-300


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 32), st.sampled_from([0.5, 3.0, 10.0]))
def test_pipeline_scale_equivariance(seed, t):
    x = sample_student_t(6, np.diag([3.0, 1.0, 0.5]), 240, RandomStream(seed))
    cfg = PipelineConfig(n_random=60, seed=seed % 100)
    a = estimate_covariance(x, 0.05, "heavy", cfg).estimate
    b = estimate_covariance(t * x, 0.05, "heavy", cfg).estimate
    np.testing.assert_allclose(b, t * t * a, rtol=1e-9, atol=1e-9 * t * t * np.abs(a).max())


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_pipeline_rotation_equivariance(seed):
    q = _orthogonal(seed, 3)
    x = sample_student_t(6, np.diag([3.0, 1.0, 0.5]), 240, RandomStream(seed))
    a = estimate_covariance(x, 0.05, "heavy", PipelineConfig(n_random=60, seed=1)).estimate
    b = estimate_covariance(x @ q.T, 0.05, "heavy",
                            PipelineConfig(n_random=60, seed=1, frame=q)).estimate
    np.testing.assert_allclose(b, q @ a @ q.T, rtol=1e-9, atol=1e-9 * np.abs(a).max())


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 64 - 1), st.integers(0, 2 ** 64 - 1))
def test_pipeline_deterministic(seed, sid):
    x = sample_student_t(5, np.eye(2), 120, RandomStream(seed, sid))
    assert np.array_equal(x, sample_student_t(5, np.eye(2), 120, RandomStream(seed, sid)))
    cfg = PipelineConfig(n_random=30, seed=seed)
    a = estimate_covariance(x, 0.1, config=cfg)
    b = estimate_covariance(x, 0.1, config=cfg)
    assert np.array_equal(a.estimate, b.estimate) and a.depth == b.depth


@given(arrays(float, st.tuples(st.integers(1, 8), st.integers(1, 4)),
              elements=st.floats(allow_nan=False, allow_infinity=False, width=64)))
def test_sample_csv_round_trip(x):
    buf = io.StringIO()
    write_samples(x, buf, header=True)
    assert np.array_equal(read_samples(buf.getvalue()), x)


@given(st.floats(0.1, 10), st.floats(0.1, 10), st.lists(st.floats(0.05, 15), min_size=2, max_size=8))
def test_truncation_bias_monotone(a, b, alphas):
    table = oracle.verify_truncation_bias(oracle.two_point_law(a, b, d=1), alphas)
    assert table.monotone
    assert table.zero_beyond_support
