import numpy as np
import pytest
from scipy.integrate import trapezoid

from rvint.cylindrical import (
    VQProcess,
    check_proposition1,
    isometry_diagnostic,
    ito_series_integral,
    rv_cylindrical_forward,
)
from rvint.errors import DimensionError, ModeDivergenceError
from rvint.paths import (
    CovarianceSpec,
    CylindricalWienerPath,
    SpaceGrid,
    TimeGrid,
    replica_seed,
    simulate_cylindrical_ensemble,
    sine_basis,
)
from rvint.regularization import EpsilonLadder


def _noise(grid, J, n, seed=0):
    return simulate_cylindrical_ensemble(grid, CovarianceSpec.standard(J), [replica_seed(seed, r) for r in range(n)])


def test_zero_integrand_zero_everywhere():
    grid = TimeGrid(1.0, 512)
    cov = CovarianceSpec.standard(4)
    W = _noise(grid, 4, 3)
    g = VQProcess.zero(grid, cov)
    assert np.all(ito_series_integral(g, W).partial_sums == 0.0)
    res = rv_cylindrical_forward(g, W, EpsilonLadder.to_floor(0.04, grid))
    assert np.all(res.value == 0.0)
    assert res.converged


def test_partial_sums_accumulate_terms():
    grid = TimeGrid(1.0, 128)
    cov = CovarianceSpec.standard(5)
    W = _noise(grid, 5, 4)
    g = VQProcess.constant(grid, cov, [1.0, -2.0, 0.5, 0.0, 3.0])
    res = ito_series_integral(g, W)
    assert np.array_equal(np.diff(res.partial_sums, axis=-1), np.diff(np.cumsum(res.terms, axis=-1), axis=-1))
    # constant integrand: series integral is sum_j a_j B_T(v_j)
    assert np.allclose(res.value, W.terminal() @ [1.0, -2.0, 0.5, 0.0, 3.0])


def test_anticipating_terminal_integrand():
    """g_t = B_T(v_1) v_1: the forward integral of a constant c is c (X_T - mean of X over [0, eps])."""
    grid = TimeGrid(1.0, 4096)
    cov = CovarianceSpec.standard(3)
    W = _noise(grid, 3, 20, seed=5)
    BT = W.terminal()[:, 0]
    coeffs = np.zeros((20, 3, grid.N + 1))
    coeffs[:, 0, :] = BT[:, None]
    ladder = EpsilonLadder.geometric(64 * grid.dt, 0.5, 3)
    res = rv_cylindrical_forward(VQProcess(grid, coeffs, cov), W, ladder)
    head = trapezoid(W.paths[:, 0, :17], dx=grid.dt, axis=-1) / ladder.smallest
    assert np.allclose(res.terms[:, 0], BT * (BT - head), atol=1e-12)
    assert np.all(res.terms[:, 1:] == 0.0)
    assert np.sqrt(np.mean((res.value - BT**2) ** 2)) < 0.1


def test_forward_series_is_linear():
    grid = TimeGrid(1.0, 1024)
    cov = CovarianceSpec.standard(3)
    W = _noise(grid, 3, 5, seed=2)
    rng = np.random.default_rng(1)
    c1, c2 = rng.standard_normal((2, 3, grid.N + 1)).cumsum(axis=-1) * 0.03
    ladder = EpsilonLadder.to_floor(0.08, grid)
    f = lambda c: rv_cylindrical_forward(VQProcess(grid, c, cov), W, ladder).value
    assert np.allclose(f(2 * c1 - 3 * c2), 2 * f(c1) - 3 * f(c2), atol=1e-11)


def test_mode_permutation_at_fixed_truncation():
    grid = TimeGrid(1.0, 1024)
    cov = CovarianceSpec.standard(4)
    W = _noise(grid, 4, 50, seed=7)
    a = np.array([1.0, 0.3, -0.7, 0.2])
    perm = [2, 0, 3, 1]
    ladder = EpsilonLadder.to_floor(0.08, grid)
    base = rv_cylindrical_forward(VQProcess.constant(grid, cov, a), W, ladder).value
    Wp = CylindricalWienerPath(grid, W.paths[:, perm, :], cov)
    permuted = rv_cylindrical_forward(VQProcess.constant(grid, cov, a[perm]), Wp, ladder).value
    assert np.allclose(base, permuted, atol=1e-12)


def test_dimension_mismatch():
    grid = TimeGrid(1.0, 64)
    W = _noise(grid, 4, 1)
    with pytest.raises(DimensionError):
        ito_series_integral(VQProcess.zero(grid, CovarianceSpec.standard(2)), W)
    with pytest.raises(DimensionError):
        ito_series_integral(VQProcess.zero(TimeGrid(1.0, 32), CovarianceSpec.standard(4)), W)


def test_extra_integrand_modes_give_tail_proxy():
    grid = TimeGrid(1.0, 64)
    W = _noise(grid, 2, 3)
    g = VQProcess.constant(grid, CovarianceSpec.standard(4), [1.0, 0.0, 0.5, 0.5])
    res = ito_series_integral(g, W)
    assert res.tail_known and res.tail_estimate == pytest.approx(0.5)
    assert not ito_series_integral(VQProcess.zero(grid, CovarianceSpec.standard(2)), W).tail_known


def test_divergent_mode_is_named():
    # coefficient equal to the next noise increment / dt: the eps-integral grows like T/eps
    grid = TimeGrid(1.0, 2048)
    cov = CovarianceSpec.standard(2)
    W = _noise(grid, 2, 10, seed=3)
    coeffs = np.zeros((10, 2, grid.N + 1))
    coeffs[:, 1, :-1] = np.diff(W.paths[:, 1, :], axis=-1) / grid.dt
    with pytest.raises(ModeDivergenceError) as err:
        rv_cylindrical_forward(VQProcess(grid, coeffs, cov), W, EpsilonLadder.to_floor(0.08, grid))
    assert err.value.mode == 2


def test_from_field_projects_basis():
    grid = TimeGrid(1.0, 4)
    sg = SpaceGrid(32)
    cov = CovarianceSpec.standard(3)
    field = np.repeat(sine_basis(3, sg.nodes)[2][None, :], 5, axis=0)
    g = VQProcess.from_field(grid, sg, field, cov)
    assert np.allclose(g.coefficients[2], 1.0) and np.allclose(g.coefficients[:2], 0.0, atol=1e-13)


def test_isometry_unit_norm_and_zero():
    grid = TimeGrid(1.0, 64)
    cov = CovarianceSpec.standard(16)
    a = np.ones(16) / 4.0
    rep = isometry_diagnostic(VQProcess.constant(grid, cov, a), grid, cov, 10_000, seed=17)
    assert rep.extra["right"] == pytest.approx(1.0)
    assert rep.passed, rep.to_csv()
    zero = isometry_diagnostic(VQProcess.zero(grid, cov), grid, cov, 100, seed=1)
    assert zero.extra["left"] == 0.0 and zero.passed


def test_isometry_indicator_integrand():
    grid = TimeGrid(1.0, 64)
    cov = CovarianceSpec.standard(2)
    c = np.zeros((2, 65))
    c[0, grid.nodes < 0.5] = 1.0
    rep = isometry_diagnostic(VQProcess(grid, c, cov), grid, cov, 10_000, seed=3)
    assert rep.extra["right"] == pytest.approx(0.5)
    assert rep.passed


def test_gaussian_amplitudes_variance():
    grid = TimeGrid(1.0, 16)
    cov = CovarianceSpec.standard(3)
    W = _noise(grid, 3, 10_000, seed=8)
    val = ito_series_integral(VQProcess.constant(grid, cov, [1.0, 0.5, 0.25]), W).value
    assert val.var() == pytest.approx(1 + 0.25 + 1 / 16, rel=0.05)


def test_proposition1_zero_integrand_exact():
    grid = TimeGrid(1.0, 1024)
    cov = CovarianceSpec.standard(2)
    rep = check_proposition1(VQProcess.zero(grid, cov), grid, cov, EpsilonLadder.to_floor(0.08, grid), 50, seed=1)
    assert np.all(rep.extra["differences"] == 0.0) and rep.passed


def test_proposition1_linear_noise_integrand():
    grid = TimeGrid(1.0, 4096)
    cov = CovarianceSpec.standard(4)

    def g(W):
        c = np.zeros(W.batch_shape + (4, grid.N + 1))
        c[..., 0, :] = W.paths[..., 0, :]
        return VQProcess(grid, c, cov)

    rep = check_proposition1(g, grid, cov, EpsilonLadder.geometric(0.04, 0.5, 5), 400, seed=23)
    assert rep.passed, rep.to_csv()


def test_proposition1_parallel_matches_serial():
    grid = TimeGrid(1.0, 512)
    cov = CovarianceSpec.standard(2)
    g = VQProcess.constant(grid, cov, [1.0])
    ladder = EpsilonLadder.to_floor(0.08, grid)
    a = check_proposition1(g, grid, cov, ladder, 64, seed=4, chunk=16)
    b = check_proposition1(g, grid, cov, ladder, 64, seed=4, chunk=16, workers=4)
    assert np.array_equal(a.extra["differences"], b.extra["differences"])


@pytest.mark.xfail(strict=True, reason="forward-vs-Ito gap for a constant integrand is B_T - mean of B over [0, eps], "
                   "RMS sqrt(eps/3) ~ 0.028 at the N = 4096 ladder floor, above 1e-2")
def test_proposition1_constant_mode_rms_below_1e_2():
    grid = TimeGrid(1.0, 4096)
    cov = CovarianceSpec.standard(16)
    rep = check_proposition1(VQProcess.constant(grid, cov, [1.0]), grid, cov,
                             EpsilonLadder.to_floor(0.04, grid), 1000, seed=29, tolerance=1e-2)
    assert rep.row("rms difference").passed
