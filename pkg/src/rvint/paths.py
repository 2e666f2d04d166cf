"""Grids, Brownian sample paths and truncated cylindrical Wiener processes.

Randomness is drawn from one independent ``numpy`` stream per
``(seed, mode)`` pair, so adding modes never perturbs the earlier ones and
every path is reproducible from its integer seed alone.

The cylindrical process lives on V = L^2([0, 1]) with the Dirichlet sine
basis e_j(x) = sqrt(2) sin(j pi x) and a covariance Q that is diagonal in
that basis, Q e_j = q_j e_j.  The V_Q-orthonormal basis is then
v_j = e_j / sqrt(q_j) and each B(v_j) is a standard Brownian motion.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import GridMismatchError, InvalidParameterError

__all__ = [
    "TimeGrid",
    "SpaceGrid",
    "CovarianceSpec",
    "SamplePath",
    "CylindricalWienerPath",
    "make_time_grid",
    "make_space_grid",
    "rng_stream",
    "replica_seed",
    "simulate_brownian",
    "simulate_brownian_ensemble",
    "simulate_cylindrical",
    "simulate_cylindrical_ensemble",
    "sine_basis",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k T / N on [0, T]."""

    T: float
    N: int

    def __post_init__(self):
        if not np.isfinite(self.T) or self.T <= 0:
            raise InvalidParameterError(f"horizon T must be positive, got {self.T}")
        if int(self.N) != self.N or self.N < 2:
            raise InvalidParameterError(f"steps N must be an integer >= 2, got {self.N}")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "N", int(self.N))

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.dt

    def __len__(self):
        return self.N + 1

    def index(self, t: float) -> int:
        """Index of the node nearest to ``t``."""
        if t < -1e-12 * self.T or t > self.T * (1 + 1e-12):
            raise InvalidParameterError(f"time {t} outside [0, {self.T}]")
        return int(np.clip(round(t / self.dt), 0, self.N))


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform grid x_i = i / P on [0, 1]; both endpoints are Dirichlet nodes."""

    P: int

    def __post_init__(self):
        if int(self.P) != self.P or self.P < 4:
            raise InvalidParameterError(f"space points P must be an integer >= 4, got {self.P}")
        object.__setattr__(self, "P", int(self.P))

    @property
    def dx(self) -> float:
        return 1.0 / self.P

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.P + 1) / self.P

    @property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights."""
        w = np.full(self.P + 1, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w

    def __len__(self):
        return self.P + 1

    def index(self, x: float) -> int:
        if x < -1e-12 or x > 1 + 1e-12:
            raise InvalidParameterError(f"position {x} outside [0, 1]")
        return int(np.clip(round(x * self.P), 0, self.P))


def make_time_grid(T: float, N: int) -> TimeGrid:
    return TimeGrid(T, N)


def make_space_grid(P: int) -> SpaceGrid:
    return SpaceGrid(P)


def sine_basis(modes: int, x: np.ndarray) -> np.ndarray:
    """Rows e_n(x) = sqrt(2) sin(n pi x), n = 1..modes.

    Values at x = 0 and x = 1 are set to exactly zero so that fields
    synthesized from the basis satisfy the Dirichlet condition bit-exactly.
    """
    x = np.asarray(x, dtype=float)
    n = np.arange(1, modes + 1)[:, None]
    E = np.sqrt(2.0) * np.sin(np.pi * n * x[None, :])
    E[:, (x == 0.0) | (x == 1.0)] = 0.0
    return E


@dataclass(frozen=True)
class CovarianceSpec:
    """Diagonal covariance Q e_j = q_j e_j in the sine basis."""

    eigenvalues: tuple
    basis: str = "sine"

    def __post_init__(self):
        q = np.asarray(self.eigenvalues, dtype=float)
        if q.ndim != 1 or q.size < 1:
            raise InvalidParameterError("covariance needs at least one eigenvalue")
        if np.any(~np.isfinite(q)) or np.any(q < 0):
            raise InvalidParameterError("covariance eigenvalues must be finite and nonnegative")
        if self.basis != "sine":
            raise InvalidParameterError(f"unsupported basis family {self.basis!r}")
        object.__setattr__(self, "eigenvalues", tuple(float(v) for v in q))

    @classmethod
    def standard(cls, modes: int) -> "CovarianceSpec":
        if modes < 1:
            raise InvalidParameterError("modes must be >= 1")
        return cls((1.0,) * int(modes))

    @property
    def modes(self) -> int:
        return len(self.eigenvalues)

    @property
    def q(self) -> np.ndarray:
        return np.asarray(self.eigenvalues)

    def coefficients(self, field: np.ndarray, space: SpaceGrid) -> np.ndarray:
        """V_Q coordinates <g, v_j>_{V_Q} = sqrt(q_j) <g, e_j> of fields on ``space``.

        ``field`` has the space axis last; the mode axis replaces it.
        """
        E = sine_basis(self.modes, space.nodes)
        proj = np.asarray(field) @ (E * space.weights).T
        return proj * np.sqrt(self.q)


@dataclass(frozen=True)
class SamplePath:
    """Values on a time grid; leading axes (if any) index independent replicas."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).view()
        if v.shape[-1:] != (self.grid.N + 1,):
            raise GridMismatchError(
                f"path has {v.shape[-1] if v.ndim else 0} nodes, grid has {self.grid.N + 1}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.grid.N + 1

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=-1)

    def at(self, t: float):
        return self.values[..., self.grid.index(t)]


@dataclass(frozen=True)
class CylindricalWienerPath:
    """J component Brownian paths B(v_1), ..., B(v_J) sharing one grid.

    ``paths`` has shape ``(..., J, N + 1)``; leading axes index replicas.
    """

    grid: TimeGrid
    paths: np.ndarray
    covariance: CovarianceSpec
    seeds: tuple = field(default=())

    def __post_init__(self):
        p = np.asarray(self.paths, dtype=float).view()
        if p.ndim < 2 or p.shape[-1] != self.grid.N + 1:
            raise GridMismatchError("component paths do not match the time grid")
        if p.shape[-2] != self.covariance.modes:
            raise GridMismatchError(
                f"{p.shape[-2]} component paths for {self.covariance.modes} covariance modes"
            )
        p.setflags(write=False)
        object.__setattr__(self, "paths", p)

    @property
    def modes(self) -> int:
        return self.paths.shape[-2]

    @property
    def batch_shape(self) -> tuple:
        return self.paths.shape[:-2]

    def mode(self, j: int) -> SamplePath:
        """Component B(v_j) for 1-based mode index ``j``."""
        if not 1 <= j <= self.modes:
            raise InvalidParameterError(f"mode {j} outside 1..{self.modes}")
        return SamplePath(self.grid, self.paths[..., j - 1, :])

    def terminal(self) -> np.ndarray:
        return self.paths[..., -1]

    def field_increments(self, space: SpaceGrid) -> np.ndarray:
        """dW_k(x_i) = sum_j sqrt(q_j) e_j(x_i) dB_k(v_j), shape (..., N, P + 1).

        With v_j = e_j / sqrt(q_j) this is the increment of the truncated
        noise sum_j B(v_j) Q v_j read as a field on ``space``.
        """
        E = sine_basis(self.modes, space.nodes) * np.sqrt(self.covariance.q)[:, None]
        dB = np.diff(self.paths, axis=-1)
        return np.swapaxes(dB, -1, -2) @ E


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``seed`` and the optional substream ``key``."""
    if int(seed) != seed or seed < 0:
        raise InvalidParameterError(f"seed must be a nonnegative integer, got {seed}")
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def replica_seed(master_seed: int, replica: int) -> int:
    """Counter-based split: seed for replica ``replica`` of an ensemble.

    Replica r's seed depends only on (master_seed, r), so enlarging the
    ensemble leaves earlier replicas untouched.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(replica),))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def _brownian_values(grid: TimeGrid, variance_rate: float, rng: np.random.Generator) -> np.ndarray:
    dW = rng.standard_normal(grid.N) * np.sqrt(variance_rate * grid.dt)
    out = np.empty(grid.N + 1)
    out[0] = 0.0
    np.cumsum(dW, out=out[1:])
    return out


def simulate_brownian(grid: TimeGrid, variance_rate: float, seed: int, stream: Sequence[int] = ()) -> SamplePath:
    """Brownian path with Var(B_t) = variance_rate * t, reproducible from ``seed``."""
    if not np.isfinite(variance_rate) or variance_rate < 0:
        raise InvalidParameterError(f"variance_rate must be >= 0, got {variance_rate}")
    return SamplePath(grid, _brownian_values(grid, variance_rate, rng_stream(seed, *stream)))


def simulate_brownian_ensemble(grid: TimeGrid, variance_rate: float, seeds: Iterable[int]) -> SamplePath:
    """Stack of independent paths, one per seed (axis 0)."""
    if not np.isfinite(variance_rate) or variance_rate < 0:
        raise InvalidParameterError(f"variance_rate must be >= 0, got {variance_rate}")
    vals = [_brownian_values(grid, variance_rate, rng_stream(s)) for s in seeds]
    return SamplePath(grid, np.stack(vals))


def _cylindrical_values(grid: TimeGrid, cov: CovarianceSpec, seed: int) -> np.ndarray:
    out = np.empty((cov.modes, grid.N + 1))
    for j, q in enumerate(cov.eigenvalues, start=1):
        # B(v_j) is standard when v_j = e_j / sqrt(q_j); a null direction carries no noise
        rate = 1.0 if q > 0 else 0.0
        out[j - 1] = _brownian_values(grid, rate, rng_stream(seed, j))
    return out


def simulate_cylindrical(grid: TimeGrid, cov: CovarianceSpec, seed: int) -> CylindricalWienerPath:
    return CylindricalWienerPath(grid, _cylindrical_values(grid, cov, seed), cov, (int(seed),))


def simulate_cylindrical_ensemble(grid: TimeGrid, cov: CovarianceSpec, seeds: Iterable[int]) -> CylindricalWienerPath:
    seeds = tuple(int(s) for s in seeds)
    paths = np.stack([_cylindrical_values(grid, cov, s) for s in seeds])
    return CylindricalWienerPath(grid, paths, cov, seeds)
