"""Exact Gaussian-channel evolution ``chi_t(xi) = chi_0(R_t^T xi) exp(-xi.D_t xi / 2hbar)``.

``R_t = exp(tA)`` and ``D_t = int_0^t R_s M R_s^T ds``.  Two independent routes
to ``D_t`` are provided: RK4 integration of ``D' = AD + DA^T + M`` with
Richardson step control (the default), and composite Simpson quadrature of
the integral (the oracle, which also accepts negative ``t``).
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal, Sequence, Union

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from .errors import ConvergenceError, DegenerateDiffusionError, FlowRangeError, IntegrityError
from .model import CatCoherence, SystemModel, symplectic_form

CP_TOL = 1e-10
KERNEL_DEGENERACY = 1e-12
ALIAS_TOL = 1e-8


@dataclass(frozen=True)
class QuadraticIntegratorConfig:
    """Settings for computing ``D_t``.

    ``steps`` is the starting step count for ``lyapunov_ode`` (doubled until
    the Richardson estimate meets ``rel_tol``) and the fixed number of Simpson
    subintervals for ``quadrature``.
    """

    method: Literal["lyapunov_ode", "quadrature"] = "lyapunov_ode"
    steps: int = 64
    rel_tol: float = 1e-11
    max_doublings: int = 14

    def __post_init__(self):
        if self.method not in ("lyapunov_ode", "quadrature"):
            raise ValueError(f"unknown method {self.method!r}")
        if not isinstance(self.steps, (int, np.integer)) or self.steps < 2:
            raise ValueError(f"steps must be an integer >= 2, got {self.steps!r}")
        if not (0 < self.rel_tol <= 1e-2):
            raise ValueError(f"rel_tol must lie in (0, 1e-2], got {self.rel_tol!r}")


DEFAULT_CONFIG = QuadraticIntegratorConfig()
ORACLE_CONFIG = QuadraticIntegratorConfig(method="quadrature", steps=2048)


@dataclass(frozen=True, eq=False)
class GaussianChannel:
    """Channel ``chi -> chi(R^T xi) exp(-xi.D xi / 2hbar)``."""

    R: NDArray[np.float64]
    D: NDArray[np.float64]
    hbar: float = 1.0

    @property
    def dim(self) -> int:
        return self.R.shape[0]


def identity_channel(dim: int, hbar: float = 1.0) -> GaussianChannel:
    return GaussianChannel(np.eye(dim), np.zeros((dim, dim)), hbar)


# -- R_t -------------------------------------------------------------------------

def flow(model: SystemModel, t: float) -> NDArray[np.float64]:
    """``R_t = exp(tA)``; negative ``t`` gives the inverse flow."""
    t = float(t)
    if not math.isfinite(t):
        raise ValueError(f"t must be finite, got {t!r}")
    if t == 0.0:
        return np.eye(model.dim)
    tA = t * model.A
    # exp(tA) overflows once the spectral abscissa times t passes ~709
    abscissa = float(np.max(np.linalg.eigvals(tA).real))
    if abscissa > 700.0:
        raise FlowRangeError(f"exp(tA) overflows: spectral abscissa of tA is {abscissa:.1f}")
    with np.errstate(over="raise", invalid="raise"):
        try:
            R = scipy.linalg.expm(tA)
        except FloatingPointError:
            R = None
    if R is None or not np.all(np.isfinite(R)):
        raise FlowRangeError(f"exp(tA) is not finite for t={t!r} (||tA||_1 = {np.linalg.norm(tA, 1):.3g})")
    return R


# -- D_t ---------------------------------------------------------------------------

def _sym(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + X.T)


_SUPEROP_MAX_DIM = 32


def _rk4(A: np.ndarray, M: np.ndarray, t: float, steps: int) -> np.ndarray:
    """Classical RK4 for ``D' = AD + DA^T + M`` from ``D = 0``, ``steps`` equal steps."""
    h = t / steps
    dim = A.shape[0]
    if dim <= _SUPEROP_MAX_DIM:
        # one RK4 step of a linear ODE is the affine map x -> T(hL) x + h S(hL) vec(M),
        # T(z) = 1 + z + z^2/2 + z^3/6 + z^4/24 and S(z) = 1 + z/2 + z^2/6 + z^3/24;
        # apply it `steps` times by repeated squaring
        I = np.eye(dim)
        Z = h * (np.kron(A, I) + np.kron(I, A))
        Z2 = Z @ Z
        Z3 = Z2 @ Z
        E = np.eye(dim * dim)
        P = E + Z + Z2 / 2.0 + Z3 / 6.0 + (Z3 @ Z) / 24.0
        q = h * ((E + Z / 2.0 + Z2 / 6.0 + Z3 / 24.0) @ M.ravel())
        x = np.zeros(dim * dim)
        n = steps
        while n:
            if n & 1:
                x = P @ x + q
            n >>= 1
            if n:
                q = P @ q + q
                P = P @ P
        return x.reshape(dim, dim)
    At = A.T

    def rhs(D):
        return A @ D + D @ At + M

    D = np.zeros_like(M)
    for _ in range(steps):
        k1 = rhs(D)
        k2 = rhs(D + 0.5 * h * k1)
        k3 = rhs(D + 0.5 * h * k2)
        k4 = rhs(D + h * k3)
        D = D + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return D


def _diffusion_ode(model: SystemModel, t: float, cfg: QuadraticIntegratorConfig) -> np.ndarray:
    A, M = np.asarray(model.A), np.asarray(model.M)
    steps = int(cfg.steps)
    coarse = _rk4(A, M, t, steps)
    residual = math.inf
    for _ in range(cfg.max_doublings):
        steps *= 2
        fine = _rk4(A, M, t, steps)
        err = np.linalg.norm(fine - coarse) / 15.0
        scale = np.linalg.norm(fine)
        if scale == 0.0:
            return fine
        residual = err / scale
        if residual <= cfg.rel_tol:
            return _sym((16.0 * fine - coarse) / 15.0)
        coarse = fine
    raise ConvergenceError(
        f"lyapunov_ode did not reach rel_tol={cfg.rel_tol:g} at t={t:g} with {steps} steps", residual
    )


def _simpson_nodes(t: float, steps: int):
    steps += steps % 2
    h = t / steps
    w = np.ones(steps + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return h, w * (h / 3.0)


def _diffusion_quadrature(model: SystemModel, t: float, cfg: QuadraticIntegratorConfig) -> np.ndarray:
    A, M = np.asarray(model.A), np.asarray(model.M)
    h, weights = _simpson_nodes(t, int(cfg.steps))
    step = scipy.linalg.expm(h * A)
    R = np.eye(model.dim)
    D = np.zeros_like(M)
    for w in weights:
        D += w * (R @ M @ R.T)
        R = step @ R
    return _sym(D)


def diffusion(model: SystemModel, t: float, cfg: QuadraticIntegratorConfig | None = None) -> NDArray[np.float64]:
    """``D_t = int_0^t R_s M R_s^T ds``.

    Negative ``t`` (the signed integral) is accepted by the quadrature
    method only; the ODE route refuses it.
    """
    cfg = cfg or DEFAULT_CONFIG
    t = float(t)
    if not math.isfinite(t):
        raise ValueError(f"t must be finite, got {t!r}")
    if t == 0.0:
        return np.zeros((model.dim, model.dim))
    if cfg.method == "quadrature":
        return _diffusion_quadrature(model, t, cfg)
    if t < 0:
        raise ValueError("lyapunov_ode integrates forward in time only; use method='quadrature' for t < 0")
    return _diffusion_ode(model, t, cfg)


def diffusion_derivative_at_zero(model: SystemModel, j: int) -> NDArray[np.float64]:
    """``d^{j+1}/dt^{j+1} D_t`` at ``t = 0``: ``sum_l binom(j, l) A^{j-l} M (A^T)^l``."""
    A, M = np.asarray(model.A), np.asarray(model.M)
    powers = [np.eye(model.dim)]
    for _ in range(j):
        powers.append(A @ powers[-1])
    return sum(math.comb(j, l) * powers[j - l] @ M @ powers[l].T for l in range(j + 1))


def c_form(model: SystemModel, t: float, cfg: QuadraticIntegratorConfig | None = None) -> NDArray[np.float64]:
    """``C_t = R_{-t} D_t R_{-t}^T``, which equals ``-D_{-t}``."""
    if t < 0:
        raise ValueError("c_form requires t >= 0")
    Rm = flow(model, -t)
    return _sym(Rm @ diffusion(model, t, cfg) @ Rm.T)


def c_tilde(model: SystemModel, t: float, cfg: QuadraticIntegratorConfig | None = None) -> NDArray[np.float64]:
    """``C_t (I + 2 C_t)^{-1}``; symmetric with spectrum in ``[0, 1/2)``."""
    return _c_tilde_from(c_form(model, t, cfg))


def _c_tilde_from(C: np.ndarray) -> np.ndarray:
    I = np.eye(C.shape[0])
    return _sym(np.linalg.solve(I + 2.0 * C, C))


# -- channels ------------------------------------------------------------------------

def cp_matrix(channel: GaussianChannel, commutator_weight: float = 0.5) -> NDArray[np.complex128]:
    """Hermitian matrix ``D + i w (Omega - R Omega R^T)`` whose positivity certifies CP.

    With the coherent-state normalisation used here (vacuum has
    ``D = I/2``) the exact condition has ``w = 1/2``; ``w = 1`` is a strictly
    stronger test.
    """
    Om = symplectic_form(channel.dim // 2)
    R = channel.R
    X = channel.D + 1j * commutator_weight * (Om - R @ Om @ R.T)
    return 0.5 * (X + X.conj().T)


def cp_min_eig(channel: GaussianChannel, commutator_weight: float = 0.5) -> float:
    return float(np.linalg.eigvalsh(cp_matrix(channel, commutator_weight))[0])


def channel_at(model: SystemModel, t: float, cfg: QuadraticIntegratorConfig | None = None,
               cp_tol: float = CP_TOL) -> GaussianChannel:
    """Channel generated by the model over time ``t >= 0``.

    Raises :class:`IntegrityError` if the CP certificate fails by more than
    ``cp_tol``; that can only come from integrator error.
    """
    if t < 0:
        raise ValueError("channel_at requires t >= 0")
    ch = GaussianChannel(flow(model, t), diffusion(model, t, cfg), model.hbar)
    lo = cp_min_eig(ch)
    if lo < -cp_tol:
        raise IntegrityError(f"CP certificate violated at t={t:g}: min eigenvalue {lo:.3e}", lo)
    return ch


def compose(after: GaussianChannel, before: GaussianChannel) -> GaussianChannel:
    """Channel applying ``before`` then ``after``."""
    if after.R.shape != before.R.shape:
        raise ValueError(f"dimension mismatch: {after.R.shape} vs {before.R.shape}")
    if not math.isclose(after.hbar, before.hbar):
        raise ValueError(f"hbar mismatch: {after.hbar} vs {before.hbar}")
    R = after.R @ before.R
    D = _sym(after.D + after.R @ before.D @ after.R.T)
    return GaussianChannel(R, D, after.hbar)


# -- characteristic functions ------------------------------------------------------------

def cat_term_characteristic(channel: GaussianChannel, cat: CatCoherence, xi: ArrayLike) -> np.ndarray:
    """Characteristic function of ``V(|z1><z2|)`` at ``xi`` (shape (..., 2n))."""
    xi = np.asarray(xi, dtype=float)
    hbar = channel.hbar
    Om = symplectic_form(channel.dim // 2)
    eta = xi @ channel.R  # rows are R^T xi
    shift = eta - Om @ cat.dz
    quad = np.einsum("...i,...i->...", shift, shift) + 2.0 * np.einsum("...i,ij,...j->...", xi, channel.D, xi)
    phase = eta @ cat.zbar
    return np.exp(-1j * phase / hbar - quad / (4.0 * hbar))


def cat_state_terms(z1: ArrayLike, z2: ArrayLike) -> list[tuple[float, CatCoherence]]:
    """The four weighted terms of ``(|z1> + |z2>)(<z1| + <z2|)/2``."""
    return [
        (0.5, CatCoherence(z1, z1)),
        (0.5, CatCoherence(z2, z2)),
        (0.5, CatCoherence(z1, z2)),
        (0.5, CatCoherence(z2, z1)),
    ]


StateLike = Union[CatCoherence, Sequence[tuple[complex, CatCoherence]]]


def _terms(state: StateLike) -> list[tuple[complex, CatCoherence]]:
    if isinstance(state, CatCoherence):
        return [(1.0, state)]
    return list(state)


def state_characteristic(channel: GaussianChannel, state: StateLike, xi: ArrayLike) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    out = np.zeros(xi.shape[:-1], dtype=complex)
    for w, term in _terms(state):
        out += w * cat_term_characteristic(channel, term, xi)
    return out


# -- propagator ------------------------------------------------------------------------------

def propagator_kernel(model: SystemModel, t: float, x: ArrayLike, y: ArrayLike,
                      cfg: QuadraticIntegratorConfig | None = None) -> np.ndarray:
    """Phase-space transition density ``K(t, x, y)`` (requires ``D_t > 0``)."""
    R = flow(model, t)
    D = diffusion(model, t, cfg)
    evals, evecs = np.linalg.eigh(D)
    threshold = KERNEL_DEGENERACY * max(float(evals[-1]), 1.0)
    bad = evals <= threshold
    if np.any(bad):
        dirs = evecs[:, bad]
        raise DegenerateDiffusionError(
            f"D_t is degenerate at t={t:g} along {int(bad.sum())} direction(s) "
            f"{np.round(dirs.T, 6).tolist()}; the Hormander condition fails or t = 0",
            dirs,
        )
    hbar = model.hbar
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y @ R.T
    z = d @ evecs
    quad = np.sum(z * z / evals, axis=-1)
    norm = (2.0 * math.pi * hbar) ** model.n * math.sqrt(float(np.prod(evals)))
    return np.exp(-quad / (2.0 * hbar)) / norm


# -- Wigner fields -------------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Uniform phase-space grid; axis ``k`` has ``counts[k]`` points on ``[lower, upper)``."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.lower) == len(self.upper) == len(self.counts)):
            raise ValueError("lower, upper and counts must have equal length")
        for c in self.counts:
            if c < 2 or c & (c - 1):
                raise ValueError(f"per-axis sample counts must be powers of two, got {c}")
        for lo, hi in zip(self.lower, self.upper):
            if not hi > lo:
                raise ValueError("upper bounds must exceed lower bounds")

    @classmethod
    def square(cls, dim: int, half_width: float, count: int) -> "GridSpec":
        return cls((-half_width,) * dim, (half_width,) * dim, (count,) * dim)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / c for lo, hi, c in zip(self.lower, self.upper, self.counts))

    def axes(self) -> list[np.ndarray]:
        return [lo + dx * np.arange(c) for lo, dx, c in zip(self.lower, self.spacing, self.counts)]

    def dual_axes(self, hbar: float) -> list[np.ndarray]:
        return [(2.0 * math.pi * hbar / (c * dx)) * (np.arange(c) - c // 2)
                for dx, c in zip(self.spacing, self.counts)]


@dataclass(frozen=True, eq=False)
class WignerField:
    grid: GridSpec
    t: float
    values: np.ndarray


def wigner_field(model: SystemModel, state: StateLike, t: float, grid: GridSpec,
                 cfg: QuadraticIntegratorConfig | None = None, alias_tol: float = ALIAS_TOL) -> WignerField:
    """Wigner function at time ``t`` by inverse FFT of the evolved characteristic function.

    ``W(x) = (2 pi hbar)^{-2n} int chi(xi) exp(i x.xi/hbar) dxi``, sampled on
    the dual grid of ``grid``.  Returns real values when the state is
    Hermitian, complex otherwise.  Warns when ``|chi|`` at the dual-grid
    boundary exceeds ``alias_tol`` of its maximum.
    """
    dim = model.dim
    if len(grid.counts) != dim:
        raise ValueError(f"grid must have {dim} axes, got {len(grid.counts)}")
    hbar = model.hbar
    ch = channel_at(model, t, cfg) if t > 0 else identity_channel(dim, hbar)
    xis = grid.dual_axes(hbar)
    mesh = np.stack(np.meshgrid(*xis, indexing="ij"), axis=-1)
    chi = state_characteristic(ch, state, mesh)

    peak = float(np.max(np.abs(chi)))
    edge = 0.0
    for ax in range(dim):
        edge = max(edge, float(np.max(np.abs(np.take(chi, [0, -1], axis=ax)))))
    if peak > 0 and edge > alias_tol * peak:
        warnings.warn(f"characteristic function not resolved: |chi| at dual-grid edge is "
                      f"{edge / peak:.2e} of its maximum; refine the x-grid spacing", RuntimeWarning)

    # x_j xi_k / hbar = x0 xi_k / hbar + 2 pi j (k - N/2) / N on each axis
    g = chi
    for ax, (lo, xi) in enumerate(zip(grid.lower, xis)):
        shape = [1] * dim
        shape[ax] = xi.size
        g = g * np.exp(1j * lo * xi / hbar).reshape(shape)
    W = np.fft.ifftn(g) * np.prod(grid.counts)
    for ax, c in enumerate(grid.counts):
        shape = [1] * dim
        shape[ax] = c
        W = W * ((-1.0) ** np.arange(c)).reshape(shape)
    dxi = np.prod([xi[1] - xi[0] for xi in xis])
    W = W * dxi / (2.0 * math.pi * hbar) ** dim

    if np.max(np.abs(W.imag), initial=0.0) <= 1e-12 * max(np.max(np.abs(W)), 1e-300):
        W = W.real
    return WignerField(grid, float(t), W)


# -- exports ------------------------------------------------------------------------------------

def timeseries_rows(model: SystemModel, t_grid: Iterable[float], cfg: QuadraticIntegratorConfig | None = None):
    """Rows ``(t, D_t entries row-major..., min_eig_D, cp_min_eig)``."""
    for t in t_grid:
        ch = GaussianChannel(flow(model, t), diffusion(model, t, cfg), model.hbar)
        yield [float(t), *ch.D.ravel().tolist(), float(np.linalg.eigvalsh(ch.D)[0]), cp_min_eig(ch)]


def timeseries_header(dim: int) -> list[str]:
    return ["t", *[f"D_{i}{j}" for i in range(dim) for j in range(dim)], "min_eig_D", "cp_min_eig"]


def write_timeseries_csv(path, model: SystemModel, t_grid: Iterable[float],
                         cfg: QuadraticIntegratorConfig | None = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(timeseries_header(model.dim))
        for row in timeseries_rows(model, t_grid, cfg):
            w.writerow([format(v, ".17g") for v in row])


def write_field(base, field: WignerField, fmt: Literal["bin", "csv"] = "bin") -> tuple[Path, Path]:
    """Write ``field`` as raw little-endian float64 (or CSV, 2-d only) plus a JSON sidecar."""
    base = Path(base)
    vals = np.asarray(field.values)
    parts = ["real"] if np.isrealobj(vals) else ["real", "imag"]
    if fmt == "bin":
        data_path = base.with_suffix(".bin")
        stacked = np.stack([vals.real, vals.imag]) if len(parts) == 2 else vals
        data_path.write_bytes(np.ascontiguousarray(stacked, dtype="<f8").tobytes(order="C"))
    elif fmt == "csv":
        if vals.ndim != 2 or len(parts) != 1:
            raise ValueError("CSV field export supports real 2-d fields only")
        data_path = base.with_suffix(".csv")
        qs = field.grid.axes()
        with open(data_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["p", "q", "W"])
            for i, p in enumerate(qs[0]):
                for j, q in enumerate(qs[1]):
                    w.writerow([format(p, ".17g"), format(q, ".17g"), format(vals[i, j], ".17g")])
    else:
        raise ValueError(f"unknown field format {fmt!r}")
    meta = {
        "t": field.t,
        "data_file": data_path.name,
        "format": fmt,
        "dtype": "float64-le",
        "order": "C",
        "components": parts,
        "shape": list(vals.shape),
        "axes": [
            {"lower": lo, "upper": hi, "count": c, "spacing": dx}
            for lo, hi, c, dx in zip(field.grid.lower, field.grid.upper, field.grid.counts, field.grid.spacing)
        ],
    }
    meta_path = base.with_suffix(".json")
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    return data_path, meta_path
