"""Dirichlet heat kernel on [0, 1] in truncated spectral form.

    G(t, x, y) = 2 sum_{n=1}^{M} sin(n pi x) sin(n pi y) exp(-n^2 pi^2 t)

Pointwise evaluation is only trusted for t >= t_min(M), where the first
discarded mode is damped below 1e-12.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, TruncationInadmissibleError
from .paths import SpaceGrid, sine_basis
from .report import CheckReport

TRUNCATION_LEVEL = 1e-12
LP_POWERS = (1, 2, 3)


@dataclass(frozen=True)
class HeatKernel:
    modes: int

    def __post_init__(self):
        if int(self.modes) != self.modes or self.modes < 1:
            raise InvalidParameterError(f"kernel needs at least one mode, got {self.modes}")
        object.__setattr__(self, "modes", int(self.modes))

    @property
    def t_min(self) -> float:
        return -np.log(TRUNCATION_LEVEL) / (self.modes**2 * np.pi**2)

    @property
    def eigenvalues(self) -> np.ndarray:
        n = np.arange(1, self.modes + 1)
        return (n * np.pi) ** 2

    def check_time(self, t: float) -> None:
        if not t >= self.t_min * (1 - 1e-12):
            raise TruncationInadmissibleError(
                f"t={t:g} is below the truncation floor {self.t_min:g} for M={self.modes}"
            )

    def matrix(self, t: float, x, y) -> np.ndarray:
        """G(t, x_a, y_b) for all pairs, shape (len(x), len(y)), without the admissibility check."""
        Ex = sine_basis(self.modes, np.atleast_1d(x))
        Ey = sine_basis(self.modes, np.atleast_1d(y))
        return (Ex.T * np.exp(-self.eigenvalues * t)) @ Ey


def kernel_eval(K: HeatKernel, t: float, x, y):
    """Truncated spectral sum; ``x`` and ``y`` broadcast against each other."""
    K.check_time(t)
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if np.any((x < 0) | (x > 1) | (y < 0) | (y > 1)):
        raise InvalidParameterError("positions must lie in [0, 1]")
    n = np.arange(1, K.modes + 1)
    sx = np.sin(np.pi * np.multiply.outer(x, n))
    sy = np.sin(np.pi * np.multiply.outer(y, n))
    sx[(x == 0) | (x == 1)] = 0.0
    sy[(y == 0) | (y == 1)] = 0.0
    out = 2.0 * np.sum(sx * sy * np.exp(-K.eigenvalues * t), axis=-1)
    return float(out) if out.ndim == 0 else out


def project(field, space: SpaceGrid, modes: int) -> np.ndarray:
    """Sine coefficients <field, e_n> by the trapezoidal rule (space axis last)."""
    E = sine_basis(modes, space.nodes)
    return np.asarray(field, dtype=float) @ (E * space.weights).T


def synthesize(coeffs, space: SpaceGrid) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=float)
    return coeffs @ sine_basis(coeffs.shape[-1], space.nodes)


def apply_kernel(K: HeatKernel, t: float, field, space: SpaceGrid = None) -> np.ndarray:
    """(e^{t Laplacian} field)(x_i) computed mode by mode.

    Uses modes 1..min(M, P - 1); higher modes alias on a P-interval grid.
    ``t = 0`` is the projection round trip.
    """
    field = np.asarray(field, dtype=float)
    if space is None:
        space = SpaceGrid(field.shape[-1] - 1)
    if field.shape[-1] != space.P + 1:
        raise InvalidParameterError("field does not match the space grid")
    if t < 0:
        raise InvalidParameterError(f"t must be nonnegative, got {t}")
    if t != 0:
        K.check_time(t)
    m = min(K.modes, space.P - 1)
    c = project(field, space, m)
    return synthesize(c * np.exp(-K.eigenvalues[:m] * t), space)


def lp_integrals(K: HeatKernel, p: float, t: float, space: SpaceGrid, refine: int = 10) -> np.ndarray:
    """int_0^1 G(t, x_i, y)^p dy for every x_i of ``space``, trapezoidal on a ``refine``-times finer grid."""
    fine = SpaceGrid(space.P * refine)
    G = K.matrix(t, space.nodes, fine.nodes)
    if p != int(p):
        G = np.clip(G, 0.0, None)
    return (G**p) @ fine.weights


def check_lp_bound(K: HeatKernel, p: int, t_list, space: SpaceGrid = None, slope_tolerance: float = 0.05, refine: int = 10) -> CheckReport:
    """Fit the small-time power law of max_x int G^p dy and compare with t^{(1-p)/2}."""
    if p not in LP_POWERS:
        raise InvalidParameterError(f"p must be one of {LP_POWERS}, got {p}")
    t_list = np.asarray(sorted(float(t) for t in t_list))
    for t in t_list:
        K.check_time(t)
    if space is None:
        space = SpaceGrid(max(64, 2 * K.modes))
    peaks = np.array([lp_integrals(K, p, t, space, refine).max() for t in t_list])
    expected = (1.0 - p) / 2.0
    slope = float(np.polyfit(np.log(t_list), np.log(peaks), 1)[0]) if len(t_list) > 1 else float("nan")
    C_p = float(np.max(peaks / t_list**expected))
    rep = CheckReport(f"lp-bound p={p}", extra={"t": t_list, "peaks": peaks, "slope": slope, "C_p": C_p})
    if p == 1:
        rep.add("p=1 max mass", float(peaks.max()), 0.0, 1.0, bool(np.all(peaks <= 1.0 + 1e-12)))
    rep.add(f"p={p} log-log slope", slope, 0.0, slope_tolerance, abs(slope - expected) <= slope_tolerance,
            note=f"expected {expected:g}")
    rep.add(f"p={p} constant C_p", C_p, 0.0, float("inf"), bool(np.isfinite(C_p)))
    return rep


def semigroup_error(K: HeatKernel, t: float, s: float, space: SpaceGrid, refine: int = 10) -> float:
    """max_{x,y} |int G(t,x,z) G(s,z,y) dz - G(t+s,x,y)| with trapezoidal z-quadrature."""
    K.check_time(t)
    K.check_time(s)
    fine = SpaceGrid(space.P * refine)
    A = K.matrix(t, space.nodes, fine.nodes)
    B = K.matrix(s, fine.nodes, space.nodes)
    lhs = (A * fine.weights) @ B
    rhs = K.matrix(t + s, space.nodes, space.nodes)
    return float(np.max(np.abs(lhs - rhs)))
