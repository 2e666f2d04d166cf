import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rvint.errors import GridMismatchError, InvalidParameterError
from rvint.paths import (
    CovarianceSpec,
    CylindricalWienerPath,
    SamplePath,
    SpaceGrid,
    make_time_grid,
    replica_seed,
    simulate_brownian,
    simulate_brownian_ensemble,
    simulate_cylindrical,
    simulate_cylindrical_ensemble,
    sine_basis,
)


def test_time_grid_nodes():
    assert np.allclose(make_time_grid(1, 4).nodes, [0, 0.25, 0.5, 0.75, 1])
    assert np.allclose(make_time_grid(2, 2).nodes, [0, 1, 2])
    assert make_time_grid(2, 2).dt == 1.0


@pytest.mark.parametrize("T, N", [(0, 4), (-1, 4), (1, 1), (1, 2.5), (float("nan"), 4)])
def test_time_grid_rejects(T, N):
    with pytest.raises(InvalidParameterError):
        make_time_grid(T, N)


def test_space_grid_weights_integrate_constants():
    sg = SpaceGrid(16)
    assert sg.weights.sum() == pytest.approx(1.0)
    assert sg.index(0.5) == 8


def test_sine_basis_orthonormal_on_trapezoid():
    sg = SpaceGrid(64)
    E = sine_basis(20, sg.nodes)
    gram = (E * sg.weights) @ E.T
    assert np.allclose(gram, np.eye(20), atol=1e-12)
    assert np.all(E[:, [0, -1]] == 0.0)


def test_zero_rate_is_zero_path():
    p = simulate_brownian(make_time_grid(1, 64), 0.0, seed=3)
    assert np.all(p.values == 0.0)


def test_negative_rate_rejected():
    with pytest.raises(InvalidParameterError):
        simulate_brownian(make_time_grid(1, 8), -1.0, seed=0)


def test_endpoint_variance_matches_rate():
    grid = make_time_grid(1.0, 16)
    ens = simulate_brownian_ensemble(grid, 1.0, [replica_seed(11, r) for r in range(10_000)])
    v = ens.values
    assert np.all(v[:, 0] == 0.0)
    for k in (8, 16):
        assert np.var(v[:, k]) == pytest.approx(grid.nodes[k], rel=0.05)


def test_increments_uncorrelated_at_lag_one():
    grid = make_time_grid(1.0, 4096)
    dW = simulate_brownian(grid, 1.0, seed=5).increments
    r = np.corrcoef(dW[:-1], dW[1:])[0, 1]
    assert abs(r) < 3 / np.sqrt(dW.size)


def test_orthogonal_modes_uncorrelated():
    grid = make_time_grid(1.0, 8)
    W = simulate_cylindrical_ensemble(grid, CovarianceSpec.standard(2), [replica_seed(2, r) for r in range(4000)])
    a, b = W.terminal()[:, 0], W.terminal()[:, 1]
    prod = a * b
    assert abs(prod.mean()) < 3 * prod.std(ddof=1) / np.sqrt(prod.size)


def test_standard_components_have_variance_T():
    grid = make_time_grid(0.5, 8)
    W = simulate_cylindrical_ensemble(grid, CovarianceSpec.standard(8), [replica_seed(4, r) for r in range(10_000)])
    assert np.allclose(W.terminal().var(axis=0), 0.5, rtol=0.05)


def test_single_mode_is_plain_brownian_motion():
    grid = make_time_grid(1.0, 32)
    W = simulate_cylindrical(grid, CovarianceSpec.standard(1), seed=9)
    assert W.paths.shape == (1, 33)
    assert W.mode(1).values[0] == 0.0


def test_adding_modes_keeps_earlier_modes():
    grid = make_time_grid(1.0, 32)
    a = simulate_cylindrical(grid, CovarianceSpec.standard(3), seed=21)
    b = simulate_cylindrical(grid, CovarianceSpec.standard(6), seed=21)
    assert np.array_equal(a.paths, b.paths[:3])


def test_replica_seeds_are_prefix_stable():
    first = [replica_seed(1, r) for r in range(5)]
    assert first == [replica_seed(1, r) for r in range(10)][:5]
    assert len(set(first)) == 5


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32), N=st.integers(2, 64))
def test_same_seed_bit_identical(seed, N):
    grid = make_time_grid(1.0, N)
    a = simulate_cylindrical(grid, CovarianceSpec.standard(3), seed)
    b = simulate_cylindrical(grid, CovarianceSpec.standard(3), seed)
    assert np.array_equal(a.paths, b.paths)
    assert np.all(a.paths[:, 0] == 0.0)


def test_sample_path_is_read_only_and_validated():
    grid = make_time_grid(1.0, 4)
    src = np.arange(5.0)
    p = SamplePath(grid, src)
    with pytest.raises(ValueError):
        p.values[0] = 1.0
    src[0] = 7.0  # caller keeps a writable array
    with pytest.raises(GridMismatchError):
        SamplePath(grid, np.zeros(4))


def test_covariance_validation():
    with pytest.raises(InvalidParameterError):
        CovarianceSpec((1.0, -1.0))
    with pytest.raises(InvalidParameterError):
        CovarianceSpec((1.0,), basis="cosine")


def test_covariance_coefficients_of_basis_field():
    sg = SpaceGrid(32)
    cov = CovarianceSpec((4.0, 1.0))
    field = sine_basis(2, sg.nodes)[1]
    assert np.allclose(cov.coefficients(field, sg), [0.0, 1.0], atol=1e-13)


def test_field_increments_sum_modes():
    grid = make_time_grid(1.0, 4)
    sg = SpaceGrid(8)
    paths = np.zeros((2, 5))
    paths[0, 1:] = 1.0
    W = CylindricalWienerPath(grid, paths, CovarianceSpec.standard(2))
    dW = W.field_increments(sg)
    assert np.allclose(dW[0], sine_basis(1, sg.nodes)[0])
    assert np.allclose(dW[1:], 0.0)
