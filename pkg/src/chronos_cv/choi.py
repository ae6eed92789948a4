"""Two-event spacetime states from the channel-state duality.

The channel is turned into an operator on H_A x H_B through the partially
transposed, unnormalized maximally entangled state, and combined with the
initial state by a symmetrized (Jordan) product.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DimensionMismatchError, InvalidParameterError
from .fock import FockState, displacement, superoperator
from .spacetime_wigner import SpacetimeDensityMatrix

PHI_PAD = 40


def _basis(dim: int, alpha: complex) -> np.ndarray:
    """Columns |n, alpha> = D(alpha)|n> for n < dim."""
    if dim < 2:
        raise InvalidParameterError(f"dim must be at least 2, got {dim}")
    if alpha == 0:
        return np.eye(dim, dtype=complex)
    # a padded exponential keeps the low columns accurate
    return displacement(alpha, dim, pad=PHI_PAD)


def cv_phi_plus(dim: int, alpha: complex = 0.0) -> np.ndarray:
    """Unnormalized |Phi+><Phi+| with |Phi+> = sum_n |n, alpha> x |n, alpha>."""
    B = _basis(dim, complex(alpha))
    v = np.einsum("in,jn->ij", B, B).reshape(-1)
    return np.outer(v, v.conj())


def partial_transpose(M: np.ndarray, dim: int, leg: int = 1) -> np.ndarray:
    """Partial transpose of a two-leg operator on the given leg (0 or 1)."""
    t = M.reshape(dim, dim, dim, dim)
    t = t.transpose(0, 3, 2, 1) if leg == 1 else t.transpose(2, 1, 0, 3)
    return t.reshape(dim * dim, dim * dim)


def jamiolkowski(kraus: Sequence[np.ndarray], dim: int, alpha: complex = 0.0) -> SpacetimeDensityMatrix:
    """E = (I x channel) applied to the partially transposed Phi+ projector.

    The channel acts on the second (later) factor, so for alpha = 0
    E = sum_ij |i><j| x channel(|j><i|).
    """
    if kraus[0].shape != (dim, dim):
        raise DimensionMismatchError(f"channel acts on {kraus[0].shape[0]}, expected {dim}")
    if alpha == 0:
        return jamiolkowski_from_superoperator(superoperator(kraus), dim)
    gamma = partial_transpose(cv_phi_plus(dim, alpha), dim, leg=0)
    # apply the channel to every (a, c) slice of leg B: out[a, :, c, :] = E(t[a, :, c, :])
    t = gamma.reshape(dim, dim, dim, dim).transpose(0, 2, 1, 3).reshape(dim * dim, dim * dim)
    out = (t @ superoperator(kraus).T).reshape(dim, dim, dim, dim).transpose(0, 2, 1, 3)
    return SpacetimeDensityMatrix(out.reshape(dim * dim, dim * dim), 2, dim)


def jamiolkowski_from_superoperator(S: np.ndarray, dim: int) -> SpacetimeDensityMatrix:
    """Same as :func:`jamiolkowski` at alpha = 0, from a row-major superoperator matrix."""
    # E[(i, k), (j, l)] = channel(|j><i|)[k, l] = S[(k, l), (j, i)]
    t = S.reshape(dim, dim, dim, dim)
    E = t.transpose(3, 0, 2, 1).reshape(dim * dim, dim * dim)
    return SpacetimeDensityMatrix(E, 2, dim)


def jordan_state(rho_A, E: SpacetimeDensityMatrix) -> SpacetimeDensityMatrix:
    """R = 1/2 [E (rho_A x I) + (rho_A x I) E]."""
    rho = rho_A.rho if isinstance(rho_A, FockState) else np.asarray(rho_A)
    dim = E.dim
    if rho.shape != (dim, dim):
        raise DimensionMismatchError(f"rho_A has shape {rho.shape}, E has leg dimension {dim}")
    A = np.kron(rho, np.eye(dim))
    return SpacetimeDensityMatrix(0.5 * (E.matrix @ A + A @ E.matrix), 2, dim)


def choi_spacetime_state(rho_A, kraus: Sequence[np.ndarray], alpha: complex = 0.0) -> SpacetimeDensityMatrix:
    rho = rho_A.rho if isinstance(rho_A, FockState) else np.asarray(rho_A)
    return jordan_state(rho, jamiolkowski(kraus, rho.shape[0], alpha))


def jamiolkowski_direct(kraus: Sequence[np.ndarray], dim: int) -> np.ndarray:
    """sum_ij |i><j| x channel(|j><i|), built term by term (small dims only)."""
    E = np.zeros((dim * dim, dim * dim), complex)
    for i in range(dim):
        for j in range(dim):
            X = np.zeros((dim, dim), complex)
            X[j, i] = 1
            A = np.zeros((dim, dim))
            A[i, j] = 1
            E += np.kron(A, sum(K @ X @ K.conj().T for K in kraus))
    return E
