"""System specification for quadratic Hamiltonians with linear Lindblad operators.

Phase space uses interleaved per-mode ordering ``(p_1, q_1, ..., p_n, q_n)``
with symplectic form ``Omega = I_n (x) [[0, -1], [1, 0]]``.  A Lindblad
operator ``L(x) = x . Omega^T l`` is stored through its complex vector ``l``,
which is also its Hamiltonian vector field.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ModelError, ModelFileError

SYMMETRY_TOL = 1e-12
SCHEMA_VERSION = 1

_OMEGA2 = np.array([[0.0, -1.0], [1.0, 0.0]])


def symplectic_form(n: int) -> NDArray[np.float64]:
    """Block-diagonal symplectic form for ``n`` modes in interleaved order."""
    return np.kron(np.eye(n), _OMEGA2)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Quadratic open system ``H(x) = x.Qx/2`` with Lindblad vectors ``l_k``.

    Only ``n``, ``hbar``, ``Q`` and ``lindblad`` are inputs; ``omega``, ``F``,
    ``N``, ``M`` and ``A`` are derived on construction and read-only.
    """

    n: int
    hbar: float
    Q: NDArray[np.float64]
    lindblad: tuple[NDArray[np.complex128], ...]
    omega: NDArray[np.float64] = field(init=False)
    F: NDArray[np.float64] = field(init=False)
    N: NDArray[np.float64] = field(init=False)
    M: NDArray[np.float64] = field(init=False)
    A: NDArray[np.float64] = field(init=False)

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
            raise ModelError(f"n must be a positive integer, got {n!r}")
        n = int(n)
        dim = 2 * n
        hbar = float(self.hbar)
        if not math.isfinite(hbar) or hbar <= 0:
            raise ModelError(f"hbar must be positive and finite, got {self.hbar!r}")

        Q = np.asarray(self.Q, dtype=float)
        if Q.shape != (dim, dim):
            raise ModelError(f"Q must have shape {(dim, dim)}, got {Q.shape}")
        if not np.all(np.isfinite(Q)):
            raise ModelError("Q has non-finite entries")
        asym = float(np.max(np.abs(Q - Q.T))) if Q.size else 0.0
        if asym > SYMMETRY_TOL:
            raise ModelError(f"Q is not symmetric (max asymmetry {asym:.3e} > {SYMMETRY_TOL:g})")
        Q = 0.5 * (Q + Q.T)

        ls = []
        for k, l in enumerate(self.lindblad):
            l = np.asarray(l, dtype=complex)
            if l.shape != (dim,):
                raise ModelError(f"lindblad[{k}] must have length {dim}, got shape {l.shape}")
            if not np.all(np.isfinite(l)):
                raise ModelError(f"lindblad[{k}] has non-finite entries")
            ls.append(_readonly(l))

        omega = symplectic_form(n)
        F = omega @ Q
        N = np.zeros((dim, dim))
        M = np.zeros((dim, dim))
        for l in ls:
            re, im = l.real, l.imag
            N += np.outer(re, im) - np.outer(im, re)
            M += np.outer(re, re) + np.outer(im, im)
        A = F + N @ omega

        set_ = object.__setattr__
        set_(self, "n", n)
        set_(self, "hbar", hbar)
        set_(self, "Q", _readonly(Q))
        set_(self, "lindblad", tuple(ls))
        set_(self, "omega", _readonly(omega))
        set_(self, "F", _readonly(F))
        set_(self, "N", _readonly(N))
        set_(self, "M", _readonly(M))
        set_(self, "A", _readonly(A))

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def noise_vectors(self) -> NDArray[np.float64]:
        """Real columns ``Re l_k, Im l_k`` spanning the noise directions (2n x 2K)."""
        cols = [v for l in self.lindblad for v in (l.real, l.imag)]
        if not cols:
            return np.zeros((self.dim, 0))
        return np.column_stack(cols)

    def lindblad_values(self, x: ArrayLike) -> NDArray[np.complex128]:
        """Evaluate ``L_k(x) = x . Omega^T l_k`` for every k; ``x`` has shape (..., 2n)."""
        x = np.asarray(x, dtype=float)
        if not self.lindblad:
            return np.zeros(x.shape[:-1] + (0,), dtype=complex)
        L = np.column_stack(self.lindblad)
        return x @ (self.omega.T @ L)

    def with_hbar(self, hbar: float) -> "SystemModel":
        return SystemModel(self.n, hbar, self.Q, self.lindblad)


def build_model(n: int, hbar: float, Q: ArrayLike, lindblad: Sequence[ArrayLike]) -> SystemModel:
    """Validate inputs and derive ``Omega, F = Omega Q, N, M, A = F + N Omega``.

    Raises :class:`ModelError` on dimension mismatch, asymmetric ``Q``
    (beyond 1e-12) or non-finite entries.
    """
    return SystemModel(n, hbar, np.asarray(Q, dtype=float), tuple(lindblad))


@dataclass(frozen=True, eq=False)
class CatCoherence:
    """Off-diagonal term ``|z1><z2|`` between two coherent states."""

    z1: NDArray[np.float64]
    z2: NDArray[np.float64]

    def __post_init__(self):
        z1 = np.asarray(self.z1, dtype=float)
        z2 = np.asarray(self.z2, dtype=float)
        if z1.ndim != 1 or z1.shape != z2.shape or z1.size % 2:
            raise ModelError(f"cat centres must be equal-length even vectors, got {z1.shape} and {z2.shape}")
        object.__setattr__(self, "z1", _readonly(z1))
        object.__setattr__(self, "z2", _readonly(z2))

    @property
    def dz(self) -> NDArray[np.float64]:
        return self.z1 - self.z2

    @property
    def zbar(self) -> NDArray[np.float64]:
        return 0.5 * (self.z1 + self.z2)


# -- Lindblad vector builders -------------------------------------------------

def position_coupling(n: int, mode: int, rate: float) -> NDArray[np.complex128]:
    """Vector for ``L = sqrt(rate) q_mode`` (``mode`` is 0-based)."""
    l = np.zeros(2 * n, dtype=complex)
    l[2 * mode] = -math.sqrt(rate)
    return l


def annihilation(n: int, mode: int, rate: float) -> NDArray[np.complex128]:
    """Vector for ``L = sqrt(rate) a_mode`` with ``a = (q + i p)/sqrt 2``."""
    l = np.zeros(2 * n, dtype=complex)
    s = math.sqrt(rate / 2.0)
    l[2 * mode] = -s
    l[2 * mode + 1] = 1j * s
    return l


def creation(n: int, mode: int, rate: float) -> NDArray[np.complex128]:
    """Vector for ``L = sqrt(rate) a_mode^dagger``."""
    return annihilation(n, mode, rate).conj()


def thermal_bath(n: int, mode: int, gamma: float, nbar: float) -> list[NDArray[np.complex128]]:
    """Lindblad pair ``sqrt(gamma(nbar+1)) a`` and ``sqrt(gamma nbar) a^dagger``.

    The creation term is omitted when its rate vanishes.
    """
    ls = [annihilation(n, mode, gamma * (nbar + 1.0))]
    if nbar > 0:
        ls.append(creation(n, mode, gamma * nbar))
    return ls


# -- scenarios ------------------------------------------------------------------

def _require_positive(**kw):
    for name, v in kw.items():
        if not (math.isfinite(v) and v > 0):
            raise ModelError(f"{name} must be positive, got {v!r}")


def _require_nonnegative(**kw):
    for name, v in kw.items():
        if not (math.isfinite(v) and v >= 0):
            raise ModelError(f"{name} must be nonnegative, got {v!r}")


def scenario_free_particle(m: float = 1.0, Lambda: float = 1.0, hbar: float = 1.0) -> SystemModel:
    """``H = p^2/2m`` with collisional decoherence ``L = sqrt(Lambda) q``."""
    _require_positive(m=m, Lambda=Lambda)
    return build_model(1, hbar, np.diag([1.0 / m, 0.0]), [position_coupling(1, 0, Lambda)])


def scenario_quadratic_potential(m: float = 1.0, omega0: float = 1.0, Lambda: float = 1.0,
                                 hbar: float = 1.0) -> SystemModel:
    """``H = p^2/2m + m omega0^2 q^2/2`` with ``L = sqrt(Lambda) q``."""
    _require_positive(m=m, Lambda=Lambda)
    if not math.isfinite(omega0):
        raise ModelError(f"omega0 must be finite, got {omega0!r}")
    Q = np.diag([1.0 / m, m * omega0 ** 2])
    return build_model(1, hbar, Q, [position_coupling(1, 0, Lambda)])


def scenario_damped_oscillator(gamma: float = 1.0, omega: float = 1.0, nbar: float = 0.5,
                               hbar: float = 1.0) -> SystemModel:
    """Oscillator ``H = omega (p^2 + q^2)/2`` coupled to a thermal bath of occupation ``nbar``."""
    _require_positive(gamma=gamma, omega=omega)
    _require_nonnegative(nbar=nbar)
    return build_model(1, hbar, omega * np.eye(2), thermal_bath(1, 0, gamma, nbar))


def scenario_pq(lam: float = 1.0, Lambda: float = 1.0, hbar: float = 1.0) -> SystemModel:
    """Hyperbolic normal form ``H = lam p q`` with ``L = sqrt(Lambda) q``."""
    _require_positive(lam=lam, Lambda=Lambda)
    Q = np.array([[0.0, lam], [lam, 0.0]])
    return build_model(1, hbar, Q, [position_coupling(1, 0, Lambda)])


def scenario_chain(frequencies: Sequence[float], Delta: ArrayLike, noise_site: int,
                   gamma: float = 1.0, nbar: float = 0.5, hbar: float = 1.0) -> SystemModel:
    """Coupled oscillators, ``Q = (diag(frequencies) + Delta) (x) I_2``.

    ``noise_site`` is 1-based; that oscillator alone sees a thermal bath.
    """
    freqs = np.asarray(frequencies, dtype=float)
    if freqs.ndim != 1 or freqs.size == 0:
        raise ModelError("frequencies must be a non-empty list")
    for i, w in enumerate(freqs):
        _require_positive(**{f"frequencies[{i}]": float(w)})
    n = freqs.size
    Delta = np.asarray(Delta, dtype=float)
    if Delta.shape != (n, n):
        raise ModelError(f"Delta must have shape {(n, n)}, got {Delta.shape}")
    if np.any(np.diag(Delta) != 0):
        raise ModelError("Delta must have zero diagonal")
    if np.any(Delta < 0):
        raise ModelError("Delta entries (couplings) must be nonnegative")
    if np.max(np.abs(Delta - Delta.T), initial=0.0) > SYMMETRY_TOL:
        raise ModelError("Delta must be symmetric")
    if not (isinstance(noise_site, (int, np.integer)) and 1 <= noise_site <= n):
        raise ModelError(f"noise_site must be in 1..{n}, got {noise_site!r}")
    _require_positive(gamma=gamma)
    _require_nonnegative(nbar=nbar)
    Qn = np.diag(freqs) + Delta
    return build_model(n, hbar, np.kron(Qn, np.eye(2)), thermal_bath(n, int(noise_site) - 1, gamma, nbar))


def nearest_neighbour(n: int, delta: float) -> NDArray[np.float64]:
    """Tridiagonal coupling matrix with ``delta`` on the first off-diagonals."""
    D = np.zeros((n, n))
    idx = np.arange(n - 1)
    D[idx, idx + 1] = delta
    D[idx + 1, idx] = delta
    return D


# -- model files ------------------------------------------------------------------

def _num(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ModelError(f"cannot serialise non-finite value {x!r}")
    return format(x, ".17g")


def _vec(v) -> str:
    return "[" + ", ".join(_num(x) for x in v) + "]"


def dumps_model(model: SystemModel) -> str:
    """Serialise to the JSON model format, every number at 17 significant digits."""
    rows = ",\n    ".join(_vec(r) for r in model.Q)
    ls = ",\n    ".join(
        '{"re": ' + _vec(l.real) + ', "im": ' + _vec(l.imag) + "}" for l in model.lindblad
    )
    return (
        "{\n"
        f'  "schema_version": {SCHEMA_VERSION},\n'
        f'  "n": {model.n},\n'
        f'  "hbar": {_num(model.hbar)},\n'
        f'  "Q": [\n    {rows}\n  ],\n'
        f'  "lindblad": [' + (f"\n    {ls}\n  " if ls else "") + "]\n"
        "}\n"
    )


def save_model(model: SystemModel, path) -> None:
    Path(path).write_text(dumps_model(model))


def _field(doc: dict, name: str):
    if name not in doc:
        raise ModelFileError(f"missing required field {name!r}", field=name)
    return doc[name]


def _real_array(value, name: str, shape: tuple[int, ...]) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ModelFileError(f"field {name!r} must be a numeric array", field=name) from None
    if arr.shape != shape:
        raise ModelFileError(f"field {name!r} must have shape {shape}, got {arr.shape}", field=name)
    if not np.all(np.isfinite(arr)):
        raise ModelFileError(f"field {name!r} has non-finite entries", field=name)
    return arr


def loads_model(text: str, source: str = "<string>") -> SystemModel:
    """Parse the JSON model format; errors name the offending line or field."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}", line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise ModelFileError(f"{source}: top level must be an object")

    version = _field(doc, "schema_version")
    if version != SCHEMA_VERSION:
        raise ModelFileError(f"unsupported schema_version {version!r}", field="schema_version")
    n = _field(doc, "n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ModelFileError(f"field 'n' must be a positive integer, got {n!r}", field="n")
    hbar = _field(doc, "hbar")
    if isinstance(hbar, bool) or not isinstance(hbar, (int, float)) or not hbar > 0:
        raise ModelFileError(f"field 'hbar' must be a positive number, got {hbar!r}", field="hbar")
    dim = 2 * n
    Q = _real_array(_field(doc, "Q"), "Q", (dim, dim))
    raw = _field(doc, "lindblad")
    if not isinstance(raw, list):
        raise ModelFileError("field 'lindblad' must be a list", field="lindblad")
    ls = []
    for k, entry in enumerate(raw):
        name = f"lindblad[{k}]"
        if not isinstance(entry, dict):
            raise ModelFileError(f"field {name!r} must be an object with 're' and 'im'", field=name)
        for part in ("re", "im"):
            if part not in entry:
                raise ModelFileError(f"missing required field '{name}.{part}'", field=f"{name}.{part}")
        re = _real_array(entry["re"], f"{name}.re", (dim,))
        im = _real_array(entry["im"], f"{name}.im", (dim,))
        ls.append(re + 1j * im)
    try:
        return build_model(n, float(hbar), Q, ls)
    except ModelError as exc:
        raise ModelFileError(f"{source}: {exc}") from None


def load_model(path) -> SystemModel:
    path = Path(path)
    return loads_model(path.read_text(), source=str(path))
