"""Gaussian states in quadrature form.

Quadratures are ordered (q1, p1, ..., qN, pN) and the covariance matrix is
stored as twice the usual covariance, so the vacuum has ``cov = I``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidParameterError,
    InvalidStateError,
    SingularCovarianceError,
)

SYMMETRY_TOL = 1e-12
UNCERTAINTY_TOL = 1e-9


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def symplectic_form(n_modes: int) -> np.ndarray:
    """Block-diagonal symplectic form with blocks [[0, 1], [-1, 0]]."""
    if n_modes < 1:
        raise InvalidParameterError(f"n_modes must be positive, got {n_modes}")
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray
    kind: str | None = field(default=None, compare=False)
    params: tuple = field(default=(), compare=False)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        if mean.size % 2 or mean.size == 0:
            raise DimensionMismatchError(f"mean must have even positive length, got {mean.size}")
        if cov.shape != (mean.size, mean.size):
            raise DimensionMismatchError(
                f"cov shape {cov.shape} does not match mean length {mean.size}"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise InvalidStateError("mean and cov must be finite")
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "cov", _frozen(cov))
        object.__setattr__(self, "params", tuple(self.params))

    @property
    def n_modes(self) -> int:
        return self.mean.size // 2

    def is_symmetric(self, tol: float = SYMMETRY_TOL) -> bool:
        return bool(np.max(np.abs(self.cov - self.cov.T)) <= tol)

    def to_json(self) -> dict:
        from .serialization import matrix_to_json, vector_to_json

        return {"mean": vector_to_json(self.mean), "cov": matrix_to_json(self.cov)}


@dataclass(frozen=True)
class GaussianChannel:
    """Map d -> X d + shift, cov -> X cov X^T + 2 Y."""

    X: np.ndarray
    Y: np.ndarray
    shift: np.ndarray | None = None
    kind: str = field(default="custom", compare=False)
    params: tuple = field(default=(), compare=False)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        n = X.shape[0]
        if X.shape != (n, n) or Y.shape != (n, n) or n % 2:
            raise DimensionMismatchError(f"X {X.shape} and Y {Y.shape} must be equal even squares")
        shift = np.zeros(n) if self.shift is None else np.asarray(self.shift, dtype=float).reshape(-1)
        if shift.size != n:
            raise DimensionMismatchError(f"shift length {shift.size} != {n}")
        if np.max(np.abs(Y - Y.T)) > SYMMETRY_TOL:
            raise InvalidParameterError("Y must be symmetric")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "Y", _frozen(Y))
        object.__setattr__(self, "shift", _frozen(shift))
        object.__setattr__(self, "params", tuple(self.params))

    @property
    def n_modes(self) -> int:
        return self.X.shape[0] // 2

    @classmethod
    def identity(cls, n_modes: int = 1) -> "GaussianChannel":
        n = 2 * n_modes
        return cls(np.eye(n), np.zeros((n, n)), kind="identity")

    @classmethod
    def attenuation(cls, eta: float, n_modes: int = 1) -> "GaussianChannel":
        if not 0.0 <= eta <= 1.0:
            raise InvalidParameterError(f"attenuation eta must lie in [0, 1], got {eta}")
        n = 2 * n_modes
        return cls(
            np.sqrt(eta) * np.eye(n), 0.5 * (1.0 - eta) * np.eye(n), kind="attenuation", params=(eta,)
        )

    @classmethod
    def rotation(cls, theta: float, n_modes: int = 1) -> "GaussianChannel":
        """Phase rotation exp(i theta n) applied to every mode."""
        c, s = np.cos(theta), np.sin(theta)
        X = np.kron(np.eye(n_modes), np.array([[c, -s], [s, c]]))
        return cls(X, np.zeros_like(X), kind="rotation", params=(theta,))

    def is_completely_positive(self, tol: float = UNCERTAINTY_TOL) -> bool:
        omega = symplectic_form(self.n_modes)
        # Y here is in the half-covariance convention already (cov gets 2Y).
        M = self.Y + 0.5j * (omega - self.X @ omega @ self.X.T)
        return bool(np.linalg.eigvalsh(M).min() >= -tol)

    def compose(self, other: "GaussianChannel") -> "GaussianChannel":
        """Channel that applies ``self`` first and then ``other``."""
        X = other.X @ self.X
        Y = other.X @ self.Y @ other.X.T + other.Y
        shift = other.X @ self.shift + other.shift
        return GaussianChannel(X, Y, shift)


def make_reference_state(kind: str, params: Sequence[float] = ()) -> GaussianState:
    params = tuple(float(p) for p in params)
    if kind == "vacuum":
        return GaussianState(np.zeros(2), np.eye(2), kind="vacuum")
    if kind == "thermal":
        if len(params) != 1:
            raise InvalidParameterError("thermal expects one parameter (nbar)")
        nbar = params[0]
        if nbar < 0:
            raise InvalidParameterError(f"thermal nbar must be non-negative, got {nbar}")
        return GaussianState(np.zeros(2), (2 * nbar + 1) * np.eye(2), kind="thermal", params=params)
    if kind == "coherent":
        if len(params) != 2:
            raise InvalidParameterError("coherent expects two parameters (re, im)")
        # alpha = (q + i p) / sqrt(2)
        mean = np.sqrt(2.0) * np.array(params)
        return GaussianState(mean, np.eye(2), kind="coherent", params=params)
    if kind == "tmss":
        if len(params) != 1:
            raise InvalidParameterError("tmss expects one parameter (r)")
        return GaussianState(np.zeros(4), tmss_cov(params[0]), kind="tmss", params=params)
    raise InvalidParameterError(f"unknown reference state kind {kind!r}")


def tmss_cov(r: float) -> np.ndarray:
    c, s = np.cosh(2 * r), np.sinh(2 * r)
    Z = np.diag([1.0, -1.0])
    return np.block([[c * np.eye(2), s * Z], [s * Z, c * np.eye(2)]])


def check_uncertainty(state: GaussianState, tol: float = UNCERTAINTY_TOL) -> dict:
    """Smallest eigenvalue of cov + i*Omega and whether it clears -tol."""
    if not state.is_symmetric():
        raise InvalidStateError("covariance matrix is not symmetric")
    m = state.cov + 1j * symplectic_form(state.n_modes)
    min_eig = float(np.linalg.eigvalsh(m).min())
    return {"min_eig": min_eig, "physical": min_eig >= -tol}


def _check_len(state: GaussianState, v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != 2 * state.n_modes:
        raise DimensionMismatchError(f"{name} has length {v.shape[-1]}, expected {2 * state.n_modes}")
    return v


def char_function(state: GaussianState, xi) -> complex | np.ndarray:
    """chi(xi) = exp(-1/4 xi^T Omega cov Omega^T xi - i (Omega d)^T xi).

    Accepts a single vector or a stack of vectors along the leading axes.
    """
    xi = _check_len(state, xi, "xi")
    omega = symplectic_form(state.n_modes)
    A = omega @ state.cov @ omega.T
    quad = np.einsum("...i,ij,...j->...", xi, A, xi)
    lin = xi @ (omega @ state.mean)
    out = np.exp(-0.25 * quad - 1j * lin)
    return complex(out) if np.ndim(out) == 0 else out


def _regularized_inverse(state: GaussianState, reg: float):
    if reg < 0:
        raise InvalidParameterError(f"reg must be non-negative, got {reg}")
    cov = state.cov + reg * np.eye(state.cov.shape[0])
    w, v = np.linalg.eigh(0.5 * (cov + cov.T))
    scale = max(1.0, float(np.abs(w).max()))
    if w.min() <= 1e-12 * scale:
        k = int(np.argmin(w))
        raise SingularCovarianceError(
            f"covariance is singular (eigenvalue {w[k]:.3e}); pass reg > 0. "
            f"Null direction: {np.round(v[:, k], 6).tolist()}",
            null_direction=v[:, k].copy(),
        )
    return (v / w) @ v.T, float(np.prod(w))


def wigner(state: GaussianState, x, reg: float = 0.0) -> float | np.ndarray:
    """W(x) = exp(-(x-d)^T cov^-1 (x-d)) / (pi^N sqrt(det cov)), cov shifted by reg*I."""
    x = _check_len(state, x, "x")
    inv, det = _regularized_inverse(state, reg)
    y = x - state.mean
    val = np.exp(-np.einsum("...i,ij,...j->...", y, inv, y)) / (np.pi**state.n_modes * np.sqrt(det))
    return float(val) if np.ndim(val) == 0 else val


def _mode_indices(n_modes: int, modes: Iterable[int], what: str) -> list[int]:
    modes = sorted(set(int(m) for m in modes))
    if not modes:
        raise InvalidParameterError(f"{what} must be non-empty")
    bad = [m for m in modes if m < 0 or m >= n_modes]
    if bad:
        raise InvalidParameterError(f"{what} contains out-of-range modes {bad} (n_modes={n_modes})")
    return modes


def partial_trace(state: GaussianState, keep: Iterable[int]) -> GaussianState:
    """Reduced state on the ``keep`` modes (0-based)."""
    modes = _mode_indices(state.n_modes, keep, "keep")
    idx = np.array([2 * m + k for m in modes for k in (0, 1)])
    return GaussianState(state.mean[idx], state.cov[np.ix_(idx, idx)])


def partial_transpose(state: GaussianState, modes: Iterable[int]) -> GaussianState:
    """Flip the sign of p for the selected modes (0-based)."""
    modes = _mode_indices(state.n_modes, modes, "modes")
    flip = np.ones(2 * state.n_modes)
    for m in modes:
        flip[2 * m + 1] = -1.0
    return GaussianState(flip * state.mean, flip[:, None] * state.cov * flip[None, :])


def apply_channel(state: GaussianState, ch: GaussianChannel) -> GaussianState:
    if ch.X.shape[0] != state.mean.size:
        raise DimensionMismatchError(
            f"channel acts on {ch.n_modes} modes but state has {state.n_modes}"
        )
    return GaussianState(ch.X @ state.mean + ch.shift, ch.X @ state.cov @ ch.X.T + 2.0 * ch.Y)


def tensor(*states: GaussianState) -> GaussianState:
    from scipy.linalg import block_diag

    return GaussianState(
        np.concatenate([s.mean for s in states]), block_diag(*[s.cov for s in states])
    )


def grid_integral(
    state: GaussianState,
    radius: float = 6.0,
    step: float = 0.1,
    reg: float = 0.0,
    principal_axes: bool = False,
) -> float:
    """Midpoint-rule integral of the Wigner function over a cube centred on the mean.

    With ``principal_axes`` the cube lives in the eigenbasis of the (regularized)
    covariance and ``radius``/``step`` are measured in standard deviations, which
    keeps near-singular states integrable on a modest grid.
    """
    n = 2 * state.n_modes
    ax = np.arange(-radius + step / 2, radius, step)
    if ax.size**n > 2e7:
        raise InvalidParameterError("grid too large; lower the radius or increase the step")
    u = np.stack(np.meshgrid(*([ax] * n), indexing="ij"), axis=-1)
    if not principal_axes:
        return float(np.sum(wigner(state, u + state.mean, reg=reg)) * step**n)
    w, v = np.linalg.eigh(state.cov + reg * np.eye(n))
    sd = np.sqrt(np.clip(w, 0.0, None) / 2.0)
    pts = state.mean + (u * sd) @ v.T
    return float(np.sum(wigner(state, pts, reg=reg)) * step**n * np.prod(sd))
