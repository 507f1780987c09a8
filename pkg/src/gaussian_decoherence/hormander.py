"""Hormander filtration ``V_0 ⊂ V_1 ⊂ ...`` and the decoherence-free subspace.

For quadratic ``H`` and linear ``L_k`` the bracket condition reduces to a
Kalman-type rank test: ``V_k = V_0 + F V_0 + ... + F^k V_0`` with ``V_0``
spanned by the real and imaginary parts of the Lindblad vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import UnsupportedStructureError
from .model import SYMMETRY_TOL, SystemModel, symplectic_form

DEFAULT_TOL = 1e-10

DF: Literal["DF"] = "DF"
"""Classification marker for directions the noise never reaches."""

Order = Union[int, Literal["DF"]]


def _orth_new(candidate: np.ndarray, basis: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal directions of ``candidate`` outside ``span(basis)``."""
    dim = candidate.shape[0]
    if candidate.shape[1] == 0:
        return np.zeros((dim, 0))
    scale = np.linalg.norm(np.hstack([basis, candidate]), 2)
    if scale == 0.0:
        return np.zeros((dim, 0))
    P = candidate
    for _ in range(2):
        P = P - basis @ (basis.T @ P)
    U, s, _ = np.linalg.svd(P, full_matrices=False)
    keep = s > tol * scale
    new = U[:, keep]
    # re-orthogonalise against the existing basis
    new = new - basis @ (basis.T @ new)
    q, _ = np.linalg.qr(new)
    return q[:, : new.shape[1]]


@dataclass(frozen=True, eq=False)
class HormanderFiltration:
    """Result of :func:`filtration`.

    ``bases[k]`` is an orthonormal basis of ``V_k`` for ``k = 0..r``;
    ``W_blocks[k]`` spans ``V_k ⊖ V_{k-1}``; ``W_DF`` spans ``V_r^⊥``.
    ``dims`` lists ``dim V_0, ..., dim V_r`` and, when the filtration
    stalls below full dimension, the repeated ``dim V_{r+1}`` that
    witnessed the stall.
    """

    bases: list[NDArray[np.float64]]
    dims: list[int]
    r: int
    holds: bool
    W_blocks: list[NDArray[np.float64]]
    W_DF: NDArray[np.float64]
    tol: float

    @property
    def dim(self) -> int:
        return self.W_DF.shape[0]

    @property
    def V_r(self) -> NDArray[np.float64]:
        return self.bases[self.r]

    def symplectic_df(self) -> bool:
        """Whether ``Omega`` restricted to ``W_DF`` is nondegenerate."""
        B = self.W_DF
        if B.shape[1] == 0:
            return True
        if B.shape[1] % 2:
            return False
        G = B.T @ symplectic_form(self.dim // 2) @ B
        s = np.linalg.svd(G, compute_uv=False)
        return bool(s[-1] > 1e-8)

    def report(self) -> dict:
        return {
            "dims": list(self.dims),
            "r": self.r,
            "holds": self.holds,
            "W_dims": [b.shape[1] for b in self.W_blocks],
            "W_DF_dim": int(self.W_DF.shape[1]),
            "W_DF_basis": self.W_DF.T.tolist(),
            "symplectic_DF": self.symplectic_df(),
            "tol": self.tol,
        }


def filtration(model: SystemModel, tol: float = DEFAULT_TOL) -> HormanderFiltration:
    """Build ``V_0 ⊂ ... ⊂ V_r`` by orthonormal extension with SVD rank decisions.

    Singular values below ``tol`` times the largest singular value of the
    candidate ``[basis, F basis]`` count as zero.
    """
    if not (0 < tol <= 1e-4):
        raise ValueError(f"tol must lie in (0, 1e-4], got {tol!r}")
    dim = model.dim
    F = np.asarray(model.F)
    empty = np.zeros((dim, 0))

    W0 = _orth_new(model.noise_vectors, empty, tol)
    blocks = [W0]
    bases = [W0]
    dims = [W0.shape[1]]
    # dims strictly increase, so at most 2n extensions are needed
    for _ in range(dim):
        basis = bases[-1]
        if basis.shape[1] == dim:
            break
        new = _orth_new(F @ basis, basis, tol)
        if new.shape[1] == 0:
            dims.append(basis.shape[1])
            break
        blocks.append(new)
        bases.append(np.hstack([basis, new]))
        dims.append(bases[-1].shape[1])

    r = len(bases) - 1
    Vr = bases[-1]
    if Vr.shape[1] == 0:
        W_DF = np.eye(dim)
    else:
        U, _, _ = np.linalg.svd(Vr, full_matrices=True)
        W_DF = U[:, Vr.shape[1]:]
    return HormanderFiltration(bases, dims, r, Vr.shape[1] == dim, blocks, W_DF, tol)


def classify_direction(filt: HormanderFiltration, xi: ArrayLike, tol: float | None = None) -> Order:
    """Smallest ``j`` whose ``V_j`` carries a component of ``xi``; ``DF`` if none.

    ``D_t(xi)`` then grows like ``t^(2j+1)`` for small ``t``.
    """
    xi = np.asarray(xi, dtype=float)
    norm = float(np.linalg.norm(xi))
    if norm == 0.0:
        raise ValueError("cannot classify the zero vector")
    tol = filt.tol if tol is None else tol
    for j, B in enumerate(filt.bases):
        if np.linalg.norm(B.T @ xi) >= tol * norm:
            return j
    return DF


def order_exponent(order: Order) -> int | None:
    """Power ``2j+1`` of the leading term, or ``None`` for DF."""
    return None if order == DF else 2 * int(order) + 1


# -- chains ------------------------------------------------------------------------------------

def chain_coupling(model: SystemModel, tol: float = SYMMETRY_TOL) -> NDArray[np.float64]:
    """Return ``Q_n`` if ``Q = Q_n (x) I_2``, else raise :class:`UnsupportedStructureError`."""
    Q = np.asarray(model.Q)
    Qn = Q[0::2, 0::2]
    if not np.allclose(Q, np.kron(Qn, np.eye(2)), rtol=0.0, atol=tol):
        raise UnsupportedStructureError("model is not an oscillator chain: Q is not of the form Q_n ⊗ I_2")
    return Qn


@dataclass(frozen=True)
class ModeOrder:
    """Classification of one oscillator's 2-d block ``R^2_mode``.

    ``weights[k]`` is the squared norm of the block's projection onto
    ``W_k`` (summed over its two unit vectors); the last entry is the
    ``W_DF`` share.  The weights sum to 2.
    """

    mode: int
    order: Order
    fully_reached: bool
    weights: tuple[float, ...]


def chain_order_map(model: SystemModel, filt: HormanderFiltration | None = None,
                    tol: float = DEFAULT_TOL) -> list[ModeOrder]:
    """Per-mode decoherence orders for a chain model (modes are 1-based)."""
    chain_coupling(model)
    filt = filt or filtration(model, tol)
    table = []
    for i in range(model.n):
        E = np.zeros((model.dim, 2))
        E[2 * i, 0] = E[2 * i + 1, 1] = 1.0
        order: Order = DF
        for j, B in enumerate(filt.bases):
            if np.linalg.norm(B.T @ E) >= filt.tol:
                order = j
                break
        weights = [float(np.sum((W.T @ E) ** 2)) for W in filt.W_blocks]
        df_share = float(np.sum((filt.W_DF.T @ E) ** 2))
        weights.append(df_share)
        table.append(ModeOrder(i + 1, order, df_share < filt.tol, tuple(weights)))
    return table
