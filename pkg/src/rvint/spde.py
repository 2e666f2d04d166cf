"""Stochastic heat equation on [0, 1] with Dirichlet boundary and random initial data.

    du = u_xx dt + g(t, x, u) dW_t,   u(t, 0) = u(t, 1) = 0,   u(0, x) = f(x, F)

W is a standard cylindrical Wiener process truncated to J sine modes and F
may depend on the whole noise path (anticipating).  The solution is built
by substitution: solve the parametrized adapted problem v^z, then set
z = F(omega) on the same realization.

Discretization is spectral Galerkin in space (M sine modes) with the
exponential Euler step

    u_n(t_{k+1}) = exp(-n^2 pi^2 dt) [u_n(t_k) + < g(t_k, ., u(t_k)) dW_k, e_n >],

where dW_k = sum_j e_j (B_{t_{k+1}}(v_j) - B_{t_k}(v_j)) and g is read at the
left endpoint.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Callable

import numpy as np

from .cylindrical import VQProcess, ito_series_integral, rv_cylindrical_forward
from .errors import BlowUpError, DimensionError, InvalidParameterError, OutOfRangeError
from .heat_kernel import HeatKernel, apply_kernel
from .paths import (
    CovarianceSpec,
    CylindricalWienerPath,
    SpaceGrid,
    TimeGrid,
    replica_seed,
    rng_stream,
    simulate_cylindrical_ensemble,
    sine_basis,
)
from .regularization import DEFAULT_TOLERANCE, EpsilonLadder
from .report import CheckReport

BLOWUP_LEVEL = 1e6


def _sin_mode(n: int, x: np.ndarray) -> np.ndarray:
    s = np.sin(n * np.pi * x)
    s[(x == 0.0) | (x == 1.0)] = 0.0
    return s


# --- coefficient registries -------------------------------------------------


@dataclass(frozen=True)
class NoiseCoefficient:
    """g(t, x, u), Lipschitz in u with constant ``lipschitz``."""

    name: str
    fn: Callable
    lipschitz: float
    params: dict = field(default_factory=dict)

    def __call__(self, t, x, u):
        return self.fn(t, x, u)


@dataclass(frozen=True)
class InitialProfile:
    """f(x, z) with f(0, z) = f(1, z) = 0; Lipschitz in z on bounded sets."""

    name: str
    fn: Callable
    lipschitz: float
    params: dict = field(default_factory=dict)

    def __call__(self, x, z):
        """``z`` has shape (..., d); the result has shape (..., len(x))."""
        return self.fn(x, z)


@dataclass(frozen=True)
class RandomParameter:
    """F as a function of the noise realization, returning shape batch + (d,)."""

    name: str
    fn: Callable
    anticipating: bool
    params: dict = field(default_factory=dict)

    def __call__(self, noise: CylindricalWienerPath):
        return self.fn(noise)


def _g_zero(**_):
    return NoiseCoefficient("zero", lambda t, x, u: np.zeros_like(u), 0.0)


def _g_constant(c=1.0):
    c = float(c)
    return NoiseCoefficient("constant", lambda t, x, u: np.full_like(u, c), 0.0, {"c": c})


def _g_linear(sigma=0.5):
    s = float(sigma)
    return NoiseCoefficient("linear", lambda t, x, u: s * u, abs(s), {"sigma": s})


def _g_sine(sigma=0.5):
    s = float(sigma)
    return NoiseCoefficient("sine", lambda t, x, u: s * np.sin(u), abs(s), {"sigma": s})


def _sin_profile_fn(clip=None):
    def fn(x, z):
        z = np.asarray(z, dtype=float)
        if clip is not None:
            z = np.clip(z, -clip, clip)
        out = 0.0
        for i in range(z.shape[-1]):
            out = out + z[..., i, None] * _sin_mode(i + 1, x)
        return out

    return fn


def _f_zero(**_):
    return InitialProfile("zero", lambda x, z: np.zeros(np.shape(z)[:-1] + np.shape(x)), 0.0)


def _f_sin(**_):
    return InitialProfile("sin-profile", _sin_profile_fn(), 1.0)


def _f_clipped(bound=10.0):
    b = float(bound)
    return InitialProfile("clipped-identity", _sin_profile_fn(b), 1.0, {"bound": b})


def _F_constant(value=1.0, dim=1):
    v = np.atleast_1d(np.asarray(value, dtype=float))
    v = np.resize(v, int(dim))

    def fn(noise):
        return np.broadcast_to(v, noise.batch_shape + v.shape).copy()

    return RandomParameter("constant", fn, False, {"value": value, "dim": int(dim)})


def _F_terminal(mode=1, scale=1.0, dim=1):
    mode, scale, dim = int(mode), float(scale), int(dim)

    def fn(noise):
        if mode + dim - 1 > noise.modes:
            raise DimensionError(f"terminal-noise needs modes {mode}..{mode + dim - 1}")
        return scale * noise.paths[..., mode - 1 : mode - 1 + dim, -1]

    return RandomParameter("terminal-noise", fn, True, {"mode": mode, "scale": scale, "dim": dim})


def _F_independent(scale=1.0, dim=1):
    scale, dim = float(scale), int(dim)

    def fn(noise):
        if len(noise.seeds) != int(np.prod(noise.batch_shape)):
            raise InvalidParameterError("independent F needs per-replica noise seeds")
        # substream 0 is never used by a noise mode (modes start at 1)
        z = np.stack([rng_stream(s, 0).standard_normal(dim) for s in noise.seeds])
        return scale * z.reshape(noise.batch_shape + (dim,))

    return RandomParameter("independent", fn, False, {"scale": scale, "dim": dim})


G_REGISTRY = {"zero": _g_zero, "constant": _g_constant, "linear": _g_linear, "sine": _g_sine}
F_REGISTRY = {"zero": _f_zero, "sin-profile": _f_sin, "clipped-identity": _f_clipped}
RANDOM_REGISTRY = {"constant": _F_constant, "terminal-noise": _F_terminal, "independent": _F_independent}
REGISTRIES = {"g": G_REGISTRY, "f": F_REGISTRY, "F": RANDOM_REGISTRY}


def lookup(kind: str, name: str, **params):
    """Build a registry entry, e.g. ``lookup("g", "linear", sigma=0.5)``."""
    reg = REGISTRIES[kind]
    if name not in reg:
        raise InvalidParameterError(f"unknown {kind} function {name!r}; registry has {sorted(reg)}")
    try:
        return reg[name](**params)
    except TypeError as exc:
        raise InvalidParameterError(f"bad parameters for {kind}={name}: {exc}") from None


# --- problem and solution types ---------------------------------------------


@dataclass(frozen=True)
class SpdeProblem:
    grid: TimeGrid
    space: SpaceGrid
    noise_modes: int
    kernel_modes: int
    g: NoiseCoefficient
    f: InitialProfile
    F: RandomParameter = None
    dim: int = 1
    name: str = "spde"

    def __post_init__(self):
        J, M, P = self.noise_modes, self.kernel_modes, self.space.P
        if J < 1 or M < 1:
            raise InvalidParameterError("noise and kernel truncations must be >= 1")
        if J > M:
            raise InvalidParameterError(f"noise modes J={J} exceed kernel modes M={M}")
        if M > P - 1:
            raise InvalidParameterError(f"kernel modes M={M} alias on a P={P} space grid (need M <= P-1)")
        if not 1 <= self.dim <= 3:
            raise InvalidParameterError("parameter dimension d must be 1, 2 or 3")
        z = np.ones(self.dim)
        ends = self.f(np.array([0.0, 1.0]), z)
        if np.any(ends != 0.0):
            raise InvalidParameterError(f"initial profile {self.f.name} does not vanish at x=0,1")

    @property
    def covariance(self) -> CovarianceSpec:
        return CovarianceSpec.standard(self.noise_modes)

    @property
    def kernel(self) -> HeatKernel:
        return HeatKernel(self.kernel_modes)


@dataclass(frozen=True)
class FieldPath:
    """u(t_k, x_i), shape (..., N + 1, P + 1); leading axes are replicas."""

    grid: TimeGrid
    space: SpaceGrid
    values: np.ndarray
    z: np.ndarray = None
    seeds: tuple = ()
    problem: str = ""

    @property
    def batch_shape(self):
        return self.values.shape[:-2]

    def replica(self, r: int) -> "FieldPath":
        z = None if self.z is None else self.z[r]
        seeds = self.seeds[r : r + 1] if self.seeds else ()
        return FieldPath(self.grid, self.space, self.values[r], z, seeds, self.problem)

    def to_csv(self, path) -> None:
        t, x = self.grid.nodes, self.space.nodes
        vals = self.values.reshape(-1, self.grid.N + 1, self.space.P + 1)
        batched = self.values.ndim > 2
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow((["replica"] if batched else []) + ["t", "x", "value"])
            for r in range(vals.shape[0]):
                for k in range(len(t)):
                    for i in range(len(x)):
                        w.writerow(([r] if batched else []) + [f"{t[k]:.17g}", f"{x[i]:.17g}", f"{vals[r, k, i]:.17g}"])

    def to_binary(self, path) -> None:
        """Header <N int64, P int64, T float64>, then row-major float64 values, little-endian."""
        if self.values.ndim != 2:
            raise InvalidParameterError("binary dump holds a single replica; use .replica(r)")
        with open(path, "wb") as fh:
            fh.write(struct.pack("<qqd", self.grid.N, self.space.P, self.grid.T))
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())

    @classmethod
    def from_binary(cls, path) -> "FieldPath":
        with open(path, "rb") as fh:
            N, P, T = struct.unpack("<qqd", fh.read(24))
            vals = np.frombuffer(fh.read(), dtype="<f8").reshape(N + 1, P + 1)
        return cls(TimeGrid(T, N), SpaceGrid(P), vals.astype(float))


# --- solvers ------------------------------------------------------------------


def _check_noise(problem: SpdeProblem, noise: CylindricalWienerPath) -> None:
    if noise.grid != problem.grid:
        raise DimensionError(f"noise on {noise.grid}, problem on {problem.grid}")
    if noise.modes != problem.noise_modes:
        raise DimensionError(f"noise has {noise.modes} modes, problem expects J={problem.noise_modes}")


def _as_parameter(problem: SpdeProblem, z, batch) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if problem.dim == 1 and (z.ndim == 0 or z.shape[-1:] != (1,)):
        z = z[..., None]
    if not np.all(np.isfinite(z)):
        raise InvalidParameterError("parameter z must be finite")
    return np.broadcast_to(z, tuple(batch) + (problem.dim,))


def solve_auxiliary(problem: SpdeProblem, z, noise: CylindricalWienerPath) -> FieldPath:
    """Adapted mild solution v^z for a fixed parameter z on the given noise."""
    _check_noise(problem, noise)
    batch = noise.batch_shape
    z = _as_parameter(problem, z, batch)
    grid, space = problem.grid, problem.space
    x = space.nodes
    M, J = problem.kernel_modes, problem.noise_modes
    E = sine_basis(M, x)
    proj = (E * space.weights).T
    EJ = E[:J]
    damp = np.exp(-problem.kernel.eigenvalues * grid.dt)
    dB = np.diff(noise.paths, axis=-1)
    t = grid.nodes

    out = np.empty(batch + (grid.N + 1, space.P + 1))
    coeff = problem.f(x, z) @ proj
    out[..., 0, :] = coeff @ E
    for k in range(grid.N):
        u = out[..., k, :]
        forcing = problem.g(t[k], x, u) * (dB[..., k] @ EJ)
        coeff = damp * (coeff + forcing @ proj)
        nxt = coeff @ E
        peak = np.max(np.abs(nxt)) if nxt.size else 0.0
        if not peak <= BLOWUP_LEVEL:
            raise BlowUpError(f"field sup-norm {peak:.3g} exceeds {BLOWUP_LEVEL:g} at t={t[k + 1]:.6g}")
        out[..., k + 1, :] = nxt
    return FieldPath(grid, space, out, np.array(z), tuple(noise.seeds), problem.name)


def solve_substitution(problem: SpdeProblem, noise: CylindricalWienerPath) -> FieldPath:
    """u = v^F: evaluate F on the full realization, then solve with z = F(omega)."""
    if problem.F is None:
        raise InvalidParameterError("problem has no random parameter F")
    z = np.asarray(problem.F(noise), dtype=float)
    if not np.all(np.isfinite(z)) or np.any(np.abs(z) > BLOWUP_LEVEL):
        raise OutOfRangeError(f"F(omega) outside the admissible range |z| <= {BLOWUP_LEVEL:g}")
    return solve_auxiliary(problem, z, noise)


# --- diagnostics ----------------------------------------------------------------


@dataclass(frozen=True)
class ZGrid:
    """Tensor grid of parameter values; one strictly increasing axis per dimension."""

    axes: tuple

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        if not 1 <= len(axes) <= 3:
            raise InvalidParameterError("ZGrid supports 1 to 3 dimensions")
        for a in axes:
            if a.ndim != 1 or a.size < 1 or np.any(np.diff(a) <= 0):
                raise InvalidParameterError("ZGrid axes must be strictly increasing")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def line(cls, values) -> "ZGrid":
        return cls((values,))

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def points(self) -> np.ndarray:
        return np.array(list(product(*self.axes)))

    @property
    def bound(self) -> float:
        return float(max(np.max(np.abs(a)) for a in self.axes))


def lipschitz_diagnostic(
    problem: SpdeProblem,
    zgrid: ZGrid,
    n_mc: int,
    seed: int,
    slope_tolerance: float = 0.1,
    chunk: int = 64,
) -> CheckReport:
    """Empirical C_N = max over z-pairs of sup_{t,x} E|v^{z1} - v^{z2}|^2 / |z1 - z2|^2.

    Passes when the ratio is finite and shows no growth as the pair
    separation shrinks (log-log slope of ratio against separation above
    ``-slope_tolerance``).
    """
    if zgrid.dim != problem.dim:
        raise DimensionError(f"ZGrid has dimension {zgrid.dim}, problem d={problem.dim}")
    pts = zgrid.points
    if len(pts) < 2:
        raise InvalidParameterError("need at least two z points")
    pairs = [(a, b) for a, b in combinations(range(len(pts)), 2) if np.any(pts[a] != pts[b])]
    sums = np.zeros((len(pairs), problem.grid.N + 1, problem.space.P + 1))
    cov = problem.covariance
    for start in range(0, n_mc, chunk):
        seeds = [replica_seed(seed, r) for r in range(start, min(n_mc, start + chunk))]
        noise = simulate_cylindrical_ensemble(problem.grid, cov, seeds)
        fields = [solve_auxiliary(problem, p, noise).values for p in pts]
        for i, (a, b) in enumerate(pairs):
            sums[i] += np.sum((fields[a] - fields[b]) ** 2, axis=0)
    msq = sums / n_mc
    sep = np.array([np.linalg.norm(pts[a] - pts[b]) for a, b in pairs])
    ratio = msq.reshape(len(pairs), -1).max(axis=1) / sep**2
    if len(np.unique(sep)) > 1 and np.all(ratio > 0):
        slope = float(np.polyfit(np.log(sep), np.log(ratio), 1)[0])
    else:
        slope = 0.0
    C_N = float(ratio.max())
    rep = CheckReport("lipschitz", extra={"separations": sep, "ratios": ratio, "slope": slope})
    rep.add("empirical C_N", C_N, 0.0, float("inf"), bool(np.isfinite(C_N)))
    rep.add("ratio trend slope", slope, 0.0, slope_tolerance, slope > -slope_tolerance)
    rep.add("separation span (decades)", float(np.log10(sep.max() / sep.min())), 0.0, float("nan"), True)
    return rep


def mild_residuals(
    problem: SpdeProblem,
    u: FieldPath,
    noise: CylindricalWienerPath,
    ladder: EpsilonLadder,
    probe_points,
    tolerance: float = DEFAULT_TOLERANCE,
):
    """Per-replica residuals of the mild equation at each probe.

    Returns ``(forward, ito, probes)``: residual arrays of shape batch + (n_probes,)
    using the regularized forward integral and, as a consistency check of the
    scheme, the left-endpoint Ito sum; ``probes`` are the snapped (t, x) pairs.
    """
    _check_noise(problem, noise)
    if u.values.shape[:-2] != noise.batch_shape:
        raise DimensionError("field and noise ensembles differ in size")
    grid, space, K = problem.grid, problem.space, problem.kernel
    x = space.nodes
    M, J = problem.kernel_modes, problem.noise_modes
    Jt = min(2 * J, space.P - 1)
    E = sine_basis(M, x)
    EJt = sine_basis(Jt, x)
    lam = K.eigenvalues
    t_nodes = grid.nodes
    batch = noise.batch_shape
    dB = np.diff(noise.paths, axis=-1)
    fwd, ito, probes = [], [], []
    for t, xp in probe_points:
        k, i = grid.index(t), space.index(xp)
        tk = t_nodes[k]
        K.check_time(tk)
        probes.append((tk, x[i]))
        initial = apply_kernel(K, tk, u.values[..., 0, :], space)[..., i]
        # G(t_k - t_l, x_i, y) on the space grid for l = 0..k
        rows = (E[:, i] * np.exp(-np.outer(tk - t_nodes[: k + 1], lam))) @ E
        gvals = problem.g(t_nodes[: k + 1, None], x, u.values[..., : k + 1, :])
        h = gvals * rows
        c = (h * space.weights) @ EJt.T
        coeffs = np.zeros(batch + (Jt, grid.N + 1))
        coeffs[..., : k + 1] = np.swapaxes(c, -1, -2)
        vq = VQProcess(grid, coeffs, CovarianceSpec.standard(Jt))
        rv = rv_cylindrical_forward(vq, noise, ladder, t=tk, tolerance=tolerance)
        ito_sum = np.sum(coeffs[..., :J, :k] * dB[..., :k], axis=(-1, -2))
        value = u.values[..., k, i]
        fwd.append(value - initial - rv.value)
        ito.append(value - initial - ito_sum)
    return np.stack(fwd, axis=-1), np.stack(ito, axis=-1), probes


def verify_mild(
    problem: SpdeProblem,
    u: FieldPath,
    noise: CylindricalWienerPath,
    ladder: EpsilonLadder,
    probe_points,
    rms_tolerance: float = 5e-2,
    tolerance: float = DEFAULT_TOLERANCE,
) -> CheckReport:
    """Check u(t,x) = (e^{t Lap} u_0)(x) + int_0^t G(t-s,x,.) g(s,.,u) dW^-_s at probe points.

    The stochastic term is the cylindrical forward integral, computed
    pathwise, so anticipating solutions are handled the same way as
    adapted ones.
    """
    fwd, ito, probes = mild_residuals(problem, u, noise, ladder, probe_points, tolerance)
    rep = CheckReport("verify-mild", extra={"residuals": fwd, "ito_residuals": ito, "probes": probes})
    n = max(1, int(np.prod(fwd.shape[:-1])))
    for p, (tk, xi) in enumerate(probes):
        r = fwd[..., p].ravel()
        rms = float(np.sqrt(np.mean(r**2)))
        rep.add(f"rms residual t={tk:.6g} x={xi:.6g}", rms, float(np.std(r**2) / (2 * max(rms, 1e-300) * np.sqrt(n))),
                rms_tolerance, rms < rms_tolerance)
    total = float(np.sqrt(np.mean(fwd**2)))
    rep.add("rms residual (all probes)", total, 0.0, rms_tolerance, total < rms_tolerance)
    rep.add("max discrete Ito residual", float(np.max(np.abs(ito))), 0.0, 1e-8, bool(np.max(np.abs(ito)) < 1e-8))
    return rep
