"""Integration against a truncated cylindrical Wiener process.

Two routes are provided for a V_Q-valued integrand g given by its
coordinates c_j(t) = <g_t, v_j>_{V_Q}:

* ``ito_series_integral``: sum over modes of left-endpoint Riemann sums
  against B(v_j).  Requires an adapted integrand.
* ``rv_cylindrical_forward``: sum over modes of pathwise forward integrals
  obtained by regularization.  No adaptedness is needed, so anticipating
  integrands are allowed.

For adapted square-integrable integrands the two agree, which
``check_proposition1`` measures by Monte Carlo.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import DimensionError, GridMismatchError, ModeDivergenceError
from .paths import (
    CovarianceSpec,
    CylindricalWienerPath,
    SamplePath,
    SpaceGrid,
    TimeGrid,
    replica_seed,
    simulate_cylindrical_ensemble,
)
from .regularization import DEFAULT_TOLERANCE, UCP_FRACTION, EpsilonLadder, estimate_ucp_limit
from .parallel import ordered_map
from .report import CheckReport

#: partial sums S_m with m >= J - SERIES_WINDOW + 1 must agree for series stabilization
SERIES_WINDOW = 4


@dataclass(frozen=True)
class VQProcess:
    """Coordinates c_j(t_k) of a V_Q-valued process, shape (..., J, N + 1)."""

    grid: TimeGrid
    coefficients: np.ndarray
    covariance: CovarianceSpec

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float).view()
        if c.ndim < 2 or c.shape[-1] != self.grid.N + 1:
            raise GridMismatchError("coefficient paths do not match the time grid")
        if c.shape[-2] > self.covariance.modes:
            raise DimensionError(f"{c.shape[-2]} coefficient modes but covariance has {self.covariance.modes}")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def modes(self) -> int:
        return self.coefficients.shape[-2]

    @classmethod
    def zero(cls, grid: TimeGrid, cov: CovarianceSpec) -> "VQProcess":
        return cls(grid, np.zeros((cov.modes, grid.N + 1)), cov)

    @classmethod
    def constant(cls, grid: TimeGrid, cov: CovarianceSpec, amplitudes) -> "VQProcess":
        """g_t = sum_j a_j v_j for all t."""
        a = np.zeros(cov.modes)
        amp = np.asarray(amplitudes, dtype=float)
        if amp.size > cov.modes:
            raise DimensionError("more amplitudes than covariance modes")
        a[: amp.size] = amp
        return cls(grid, np.repeat(a[:, None], grid.N + 1, axis=1), cov)

    @classmethod
    def from_field(cls, grid: TimeGrid, space: SpaceGrid, values, cov: CovarianceSpec) -> "VQProcess":
        """Project fields g(t_k, x_i) (time axis then space axis last) onto the basis."""
        values = np.asarray(values, dtype=float)
        if values.shape[-2:] != (grid.N + 1, space.P + 1):
            raise GridMismatchError("field values do not match (time, space) grids")
        coeffs = cov.coefficients(values, space)
        return cls(grid, np.swapaxes(coeffs, -1, -2), cov)

    def mode_path(self, j: int) -> SamplePath:
        return SamplePath(self.grid, self.coefficients[..., j - 1, :])

    def norm_sq_integral(self) -> np.ndarray:
        """int_0^T ||g_s||^2_{V_Q} ds with the left-endpoint rule used by Ito sums."""
        c = self.coefficients[..., :-1]
        return (c**2).sum(axis=(-1, -2)) * self.grid.dt


@dataclass(frozen=True)
class SeriesIntegralResult:
    terms: np.ndarray
    partial_sums: np.ndarray
    tail_estimate: float
    tail_known: bool
    fraction_stable: float
    converged: bool
    mode_fraction_converged: np.ndarray = None

    @property
    def value(self) -> np.ndarray:
        return self.partial_sums[..., -1]


def _check_pair(g: VQProcess, W: CylindricalWienerPath) -> int:
    if g.grid != W.grid:
        raise DimensionError(f"integrand on {g.grid}, noise on {W.grid}")
    if g.modes < W.modes:
        raise DimensionError(f"integrand has {g.modes} modes, noise has {W.modes}")
    if g.covariance.eigenvalues[: W.modes] != W.covariance.eigenvalues[: W.modes]:
        raise DimensionError("integrand and noise use different covariances")
    return W.modes


def _series_result(terms, g: VQProcess, J: int, tolerance: float, mode_fraction=None) -> SeriesIntegralResult:
    partial = np.cumsum(terms, axis=-1)
    window = partial[..., max(0, J - SERIES_WINDOW):]
    osc = window.max(axis=-1) - window.min(axis=-1)
    frac = float(np.mean(osc < tolerance))
    if g.modes > J:
        extra = g.coefficients[..., J : min(2 * J, g.modes), :-1]
        tail = float(np.mean((extra**2).sum(axis=(-1, -2)) * g.grid.dt))
        known = True
    else:
        tail, known = float("nan"), False
    return SeriesIntegralResult(terms, partial, tail, known, frac, frac >= UCP_FRACTION, mode_fraction)


def ito_series_integral(g: VQProcess, W: CylindricalWienerPath, tolerance: float = DEFAULT_TOLERANCE) -> SeriesIntegralResult:
    """sum_j sum_k c_j(t_k) (B_{t_{k+1}}(v_j) - B_{t_k}(v_j)), accumulated in mode order."""
    J = _check_pair(g, W)
    dB = np.diff(W.paths, axis=-1)
    terms = np.sum(g.coefficients[..., :J, :-1] * dB, axis=-1)
    return _series_result(terms, g, J, tolerance)


def rv_cylindrical_forward(
    g: VQProcess,
    W: CylindricalWienerPath,
    ladder: EpsilonLadder,
    t: float = None,
    tolerance: float = DEFAULT_TOLERANCE,
    series_tolerance: float = DEFAULT_TOLERANCE,
) -> SeriesIntegralResult:
    """Series of pathwise forward integrals c_j = int_0^t c_j(s) dB^-(v_j).

    Each c_j is the regularized forward integral at the smallest ladder eps.
    A mode whose ensemble-mean sup-difference neither shrinks over the last
    three rungs nor falls below ``tolerance`` times the series scale
    (sum over modes of sup|B(v_j)| sup|c_j|) raises ``ModeDivergenceError``.
    A series that fails to settle over the last modes is reported through
    ``converged`` only.
    """
    J = _check_pair(g, W)
    t = W.grid.T if t is None else t
    ladder.check(W.grid)
    batch = np.broadcast_shapes(g.coefficients.shape[:-2], W.batch_shape)
    terms = np.zeros(batch + (J,))
    fractions = np.ones(J)
    results = {}
    for j in range(1, J + 1):
        Y = g.coefficients[..., j - 1, :]
        if not np.any(Y):
            continue
        res = estimate_ucp_limit("forward", SamplePath(g.grid, Y), W.mode(j), ladder, tolerance)
        results[j] = res
        fractions[j - 1] = res.fraction_converged
        terms[..., j - 1] = np.broadcast_to(res.limit_at(t), batch)
    # natural scale of the series: sum over modes of sup|B(v_j)| sup|c_j|
    level = tolerance * sum(float(np.mean(r.scale)) for r in results.values())
    for j, res in results.items():
        if not res.ensemble_trend_ok(level):
            raise ModeDivergenceError(j, f"final mean sup-difference {res.sup_differences[-1].mean():.3g}")
    return _series_result(terms, g, J, series_tolerance, fractions)


Integrand = Union[VQProcess, Callable[[CylindricalWienerPath], VQProcess]]


def _integrand(g: Integrand, W: CylindricalWienerPath) -> VQProcess:
    return g(W) if callable(g) else g


def _replica_chunks(n_mc: int, seed: int, chunk: int):
    for start in range(0, n_mc, chunk):
        yield [replica_seed(seed, r) for r in range(start, min(n_mc, start + chunk))]


def check_proposition1(
    g: Integrand,
    grid: TimeGrid,
    cov: CovarianceSpec,
    ladder: EpsilonLadder,
    n_mc: int,
    seed: int,
    tolerance: float = 5e-2,
    chunk: int = 128,
    ucp_tolerance: float = DEFAULT_TOLERANCE,
    workers: int = 1,
) -> CheckReport:
    """Monte Carlo comparison of the Ito series integral and the forward series integral.

    ``g`` is a fixed ``VQProcess`` or a function of the noise realization
    (which lets the integrand depend on the path, adaptedly).
    """

    def run(seeds):
        W = simulate_cylindrical_ensemble(grid, cov, seeds)
        gp = _integrand(g, W)
        ito = ito_series_integral(gp, W).value
        rv = rv_cylindrical_forward(gp, W, ladder, tolerance=ucp_tolerance).value
        return np.broadcast_to(ito - rv, (len(seeds),))

    d = np.concatenate(ordered_map(run, _replica_chunks(n_mc, seed, chunk), workers))
    mean = float(d.mean())
    se = float(d.std(ddof=1) / np.sqrt(d.size)) if d.size > 1 else 0.0
    rms = float(np.sqrt(np.mean(d**2)))
    rep = CheckReport("proposition1", extra={"differences": d})
    rep.add("mean difference", mean, se, 3 * se, abs(mean) <= 3 * se)
    rep.add("rms difference", rms, float(np.std(d**2) / (2 * max(rms, 1e-300) * np.sqrt(d.size))), tolerance, rms < tolerance)
    return rep


def isometry_diagnostic(
    g: Integrand,
    grid: TimeGrid,
    cov: CovarianceSpec,
    n_mc: int,
    seed: int,
    rel_tolerance: float = 0.05,
    chunk: int = 1024,
    workers: int = 1,
) -> CheckReport:
    """E[(g.B)^2] by Monte Carlo against E int_0^T ||g||^2_{V_Q} ds.

    The right side uses the left-endpoint rule, which is the exact
    expectation of the discrete Ito sum for deterministic integrands.
    """

    def run(seeds):
        W = simulate_cylindrical_ensemble(grid, cov, seeds)
        gp = _integrand(g, W)
        val = ito_series_integral(gp, W).value
        n = len(seeds)
        return np.broadcast_to(val**2, (n,)), np.broadcast_to(gp.norm_sq_integral(), (n,))

    parts = ordered_map(run, _replica_chunks(n_mc, seed, chunk), workers)
    sq = np.concatenate([p[0] for p in parts])
    norms = np.concatenate([p[1] for p in parts])
    left = float(sq.mean())
    left_se = float(sq.std(ddof=1) / np.sqrt(sq.size)) if sq.size > 1 else 0.0
    right = float(norms.mean())
    if right == 0.0:
        rel, ok = (0.0 if left == 0.0 else float("inf")), left == 0.0
    else:
        rel = abs(left - right) / right
        ok = rel < rel_tolerance
    rep = CheckReport("isometry", extra={"left": left, "right": right})
    rep.add("E[(g.B)^2]", left, left_se, float("nan"), True)
    rep.add("E int ||g||^2 ds", right, 0.0, float("nan"), True)
    rep.add("relative error", rel, left_se / right if right else 0.0, rel_tolerance, ok)
    return rep
