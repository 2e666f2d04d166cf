"""Pathwise regularized integrals and covariation on a uniform time grid.

For a regularization width eps > 0 the four integrals are

    forward     I-(eps)(t) = int_0^t Y_s (X_{s+eps} - X_s) / eps ds
    backward    I+(eps)(t) = int_0^t Y_s (X_s - X_{s-eps}) / eps ds
    symmetric   I0(eps)(t) = int_0^t Y_s (X_{s+eps} - X_{s-eps}) / (2 eps) ds
    covariation C(eps)(t)  = int_0^t (Y_{s+eps} - Y_s)(X_{s+eps} - X_s) / eps ds

Paths are extended by X_T to the right of T and by X_0 to the left of 0.
Off-grid reads use linear interpolation and the ds-integral is the
trapezoidal rule, so every quantity is a deterministic function of the
sampled paths.  No adaptedness is assumed anywhere.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import GridMismatchError, InvalidParameterError, LadderTooFineError
from .paths import SamplePath, TimeGrid

KINDS = ("forward", "backward", "symmetric", "covariation")

#: smallest admissible eps in units of the grid step
LADDER_FLOOR_STEPS = 10
DEFAULT_TOLERANCE = 1e-2
#: fraction of converged paths needed to call an ensemble ucp-converged
UCP_FRACTION = 0.95


def shift(values: np.ndarray, steps: float) -> np.ndarray:
    """Read ``values`` at node index k + steps (steps may be negative or fractional).

    Reads past either end return the end value (constant extension).
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[-1] - 1
    if np.isclose(steps, round(steps), rtol=0, atol=1e-9):
        m = int(round(steps))
        idx = np.clip(np.arange(n + 1) + m, 0, n)
        return values[..., idx]
    pos = np.clip(np.arange(n + 1) + steps, 0, n)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, n)
    w = pos - lo
    return (1.0 - w) * values[..., lo] + w * values[..., hi]


def eps_curves(kind: str, Y, X, eps: float, dt: float) -> np.ndarray:
    """Running value of the ``kind`` eps-integral at every grid node.

    ``Y`` and ``X`` are arrays with time on the last axis; leading axes
    broadcast.  This is the vectorized kernel behind the public functions.
    """
    if kind not in KINDS:
        raise InvalidParameterError(f"unknown integral kind {kind!r}; expected one of {KINDS}")
    if not np.isfinite(eps) or eps <= 0:
        raise InvalidParameterError(f"eps must be positive, got {eps}")
    Y = np.asarray(Y, dtype=float)
    X = np.asarray(X, dtype=float)
    if Y.shape[-1] != X.shape[-1]:
        raise GridMismatchError("Y and X are sampled on different grids")
    m = eps / dt
    if kind == "forward":
        h = Y * (shift(X, m) - X) / eps
    elif kind == "backward":
        h = Y * (X - shift(X, -m)) / eps
    elif kind == "symmetric":
        h = Y * (shift(X, m) - shift(X, -m)) / (2.0 * eps)
    else:
        h = (shift(Y, m) - Y) * (shift(X, m) - X) / eps
    return cumulative_trapezoid(h, dx=dt, initial=0.0, axis=-1)


def _check_pair(Y: SamplePath, X: SamplePath) -> TimeGrid:
    if Y.grid != X.grid:
        raise GridMismatchError(f"Y on {Y.grid}, X on {X.grid}")
    return X.grid


def _at_time(curve: np.ndarray, grid: TimeGrid, t: float):
    if t < 0 or t > grid.T * (1 + 1e-12):
        raise InvalidParameterError(f"t={t} outside [0, {grid.T}]")
    pos = min(t / grid.dt, grid.N)
    lo = int(np.floor(pos + 1e-9))
    if lo >= grid.N or abs(pos - lo) < 1e-9:
        return curve[..., min(lo, grid.N)]
    w = pos - lo
    return (1 - w) * curve[..., lo] + w * curve[..., lo + 1]


def _eps_value(kind, Y: SamplePath, X: SamplePath, eps, t):
    grid = _check_pair(Y, X)
    out = _at_time(eps_curves(kind, Y.values, X.values, eps, grid.dt), grid, t)
    return float(out) if np.ndim(out) == 0 else out


def eps_forward(Y: SamplePath, X: SamplePath, eps: float, t: float):
    return _eps_value("forward", Y, X, eps, t)


def eps_backward(Y: SamplePath, X: SamplePath, eps: float, t: float):
    return _eps_value("backward", Y, X, eps, t)


def eps_symmetric(Y: SamplePath, X: SamplePath, eps: float, t: float):
    return _eps_value("symmetric", Y, X, eps, t)


def eps_covariation(Y: SamplePath, X: SamplePath, eps: float, t: float):
    return _eps_value("covariation", Y, X, eps, t)


@dataclass(frozen=True)
class EpsilonLadder:
    """Strictly decreasing regularization widths eps_1 > ... > eps_L > 0."""

    values: tuple

    def __post_init__(self):
        v = tuple(float(e) for e in self.values)
        if len(v) < 1:
            raise InvalidParameterError("ladder needs at least one eps")
        if any(not np.isfinite(e) or e <= 0 for e in v):
            raise InvalidParameterError("ladder entries must be positive")
        if any(b >= a for a, b in zip(v, v[1:])):
            raise InvalidParameterError("ladder must be strictly decreasing")
        object.__setattr__(self, "values", v)

    @classmethod
    def geometric(cls, eps0: float, ratio: float, length: int) -> "EpsilonLadder":
        if not 0 < ratio < 1:
            raise InvalidParameterError(f"ladder ratio must lie in (0, 1), got {ratio}")
        return cls(tuple(eps0 * ratio**k for k in range(int(length))))

    @classmethod
    def to_floor(cls, eps0: float, grid: TimeGrid, ratio: float = 0.5) -> "EpsilonLadder":
        """Geometric ladder from ``eps0`` down to the last rung above the grid floor."""
        floor = LADDER_FLOOR_STEPS * grid.dt
        vals = [eps0]
        while vals[-1] * ratio >= floor * (1 - 1e-9):
            vals.append(vals[-1] * ratio)
        return cls(tuple(vals))

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    @property
    def smallest(self) -> float:
        return self.values[-1]

    def check(self, grid: TimeGrid) -> None:
        floor = LADDER_FLOOR_STEPS * grid.dt
        if self.smallest < floor * (1 - 1e-9):
            raise LadderTooFineError(
                f"ladder entry eps={self.smallest:g} is below the floor "
                f"{LADDER_FLOOR_STEPS}*dt={floor:g}"
            )


def _decreasing(d: np.ndarray, atol) -> np.ndarray:
    """True where the last (up to) three entries along axis 0 decrease."""
    tail = d[-3:]
    if tail.shape[0] < 2:
        return np.ones(d.shape[1:], dtype=bool)
    steps = (tail[1:] < tail[:-1]) | (tail[1:] <= atol)
    return np.all(steps, axis=0)


@dataclass(frozen=True)
class RegularizedIntegralResult:
    """One eps-integral evaluated along a ladder for every grid time.

    ``curves`` has shape (L, ..., N + 1).  ``sup_differences[l]`` is
    sup_t |curve(eps_l) - curve(eps_{l+1})|, shape (L - 1, ...).
    """

    kind: str
    grid: TimeGrid
    ladder: EpsilonLadder
    curves: np.ndarray
    sup_differences: np.ndarray
    scale: np.ndarray
    tolerance: float
    converged: np.ndarray

    @property
    def limit(self) -> np.ndarray:
        return self.curves[-1]

    @property
    def diagnostic(self) -> np.ndarray:
        """Largest successive sup-difference over the ladder (zero for L = 1)."""
        if self.sup_differences.shape[0] == 0:
            return np.zeros(self.curves.shape[1:-1])
        return self.sup_differences.max(axis=0)

    @property
    def fraction_converged(self) -> float:
        return float(np.mean(self.converged))

    @property
    def ucp_converged(self) -> bool:
        return self.fraction_converged >= UCP_FRACTION

    def limit_at(self, t: float):
        return _at_time(self.limit, self.grid, t)

    def ensemble_trend_ok(self, level: float = None) -> bool:
        """Ensemble-level stabilization used for mode-divergence decisions.

        Fails only when the ensemble-mean sup-difference at the last rung is
        at least ``level`` (default ``tolerance * mean scale``) and shows no
        net decrease over the last three rungs.
        """
        if self.sup_differences.shape[0] == 0:
            return True
        d = self.sup_differences.reshape(self.sup_differences.shape[0], -1).mean(axis=1)
        if level is None:
            level = self.tolerance * float(np.mean(self.scale))
        first = d[-3] if d.shape[0] >= 3 else d[0]
        return bool(d[-1] < level or d[-1] < first or d.shape[0] == 1)

    def to_csv(self, path) -> None:
        t = self.grid.nodes
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            batched = self.curves.ndim > 2
            head = (["replica"] if batched else []) + ["t"] + [f"eps={e:.17g}" for e in self.ladder] + ["limit"]
            w.writerow(head)
            curves = self.curves.reshape(len(self.ladder), -1, self.grid.N + 1)
            for r in range(curves.shape[1]):
                for k in range(self.grid.N + 1):
                    row = ([r] if batched else []) + [f"{t[k]:.17g}"]
                    row += [f"{curves[l, r, k]:.17g}" for l in range(curves.shape[0])]
                    row.append(f"{curves[-1, r, k]:.17g}")
                    w.writerow(row)


def estimate_ucp_limit(
    kind: str,
    Y: SamplePath,
    X: SamplePath,
    ladder: EpsilonLadder,
    tolerance: float = DEFAULT_TOLERANCE,
) -> RegularizedIntegralResult:
    """Evaluate the ``kind`` integral on every ladder rung and judge stabilization.

    The limit is the curve at the smallest eps.  A path counts as converged
    when its sup-differences between successive rungs decrease over the last
    three rungs and the final one is below ``tolerance * sup|X| * sup|Y|``.
    """
    grid = _check_pair(Y, X)
    ladder.check(grid)
    curves = np.stack([eps_curves(kind, Y.values, X.values, e, grid.dt) for e in ladder])
    d = np.abs(np.diff(curves, axis=0)).max(axis=-1)
    scale = np.max(np.abs(X.values), axis=-1) * np.max(np.abs(Y.values), axis=-1)
    scale = np.broadcast_to(scale, curves.shape[1:-1])
    scale = np.where(scale > 0, scale, 1.0)
    if d.shape[0] == 0:
        converged = np.ones(curves.shape[1:-1], dtype=bool)
    else:
        small = d[-1] < tolerance * scale
        converged = small & _decreasing(d, 1e-12 * scale)
    return RegularizedIntegralResult(kind, grid, ladder, curves, d, scale, float(tolerance), np.asarray(converged))
