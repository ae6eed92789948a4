"""Truncated Fock-space operators, states and channels.

Operators are plain complex ``ndarray`` matrices; states are wrapped in
:class:`FockState`, which validates the density matrix once at construction.
Identities that the truncation breaks near the cutoff are only expected to hold
on a low-photon block.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm
from scipy.special import comb, eval_genlaguerre, gammaln

from .errors import (
    DimensionMismatchError,
    InvalidParameterError,
    InvalidStateError,
    NotTracePreservingError,
    UnsupportedStateError,
)
from .gaussian import GaussianChannel, GaussianState

STATE_TOL = 1e-10
POSITIVITY_TOL = 1e-9
TP_TOL = 1e-8


@dataclass(frozen=True)
class FockState:
    rho: np.ndarray
    n_modes: int = 1
    physical: bool = field(default=True)

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex, copy=True)
        if rho.ndim == 1:
            rho = np.outer(rho, rho.conj())
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise DimensionMismatchError(f"density matrix must be square, got {rho.shape}")
        if not np.all(np.isfinite(rho)):
            raise InvalidStateError("density matrix has non-finite entries")
        if self.physical:
            if np.max(np.abs(rho - rho.conj().T)) > STATE_TOL:
                raise InvalidStateError("density matrix is not Hermitian")
            tr = np.trace(rho).real
            if abs(tr - 1.0) > STATE_TOL:
                raise InvalidStateError(f"density matrix has trace {tr:.12f}, expected 1")
            if np.linalg.eigvalsh(rho).min() < -POSITIVITY_TOL:
                raise InvalidStateError("density matrix is not positive semidefinite")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @property
    def mode_dim(self) -> int:
        return int(round(self.dim ** (1.0 / self.n_modes)))

    def expect(self, op) -> complex:
        return complex(np.trace(self.rho @ op))


def ladder(dim: int) -> np.ndarray:
    """Annihilation operator with <n-1|a|n> = sqrt(n)."""
    if dim < 2:
        raise InvalidParameterError(f"dim must be at least 2, got {dim}")
    return np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)


def number(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def parity(dim: int) -> np.ndarray:
    return np.diag((-1.0) ** np.arange(dim)).astype(complex)


def quadratures(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """q = (a + a^dag)/sqrt 2 and p = (a - a^dag)/(i sqrt 2)."""
    a = ladder(dim)
    return (a + a.conj().T) / np.sqrt(2), (a - a.conj().T) / (1j * np.sqrt(2))


def rotated_quadrature(theta: float, dim: int) -> np.ndarray:
    q, p = quadratures(dim)
    return np.cos(theta) * q + np.sin(theta) * p


def displacement(xi: complex, dim: int, pad: int = 0) -> np.ndarray:
    """exp(xi a^dag - xi* a) by dense expm.

    With ``pad`` > 0 the exponential is taken in a larger space and cropped,
    which improves the low-photon block at the cost of exact unitarity.
    """
    xi = complex(xi)
    if abs(xi) ** 2 > dim / 4:
        warnings.warn(
            f"|xi|^2 = {abs(xi) ** 2:.2f} exceeds dim/4 = {dim / 4:.1f}; truncation error may be large",
            RuntimeWarning,
            stacklevel=2,
        )
    big = dim + int(pad)
    a = ladder(big)
    D = expm(xi * a.conj().T - np.conj(xi) * a)
    return D[:dim, :dim]


def displacement_elements(xi: complex, dim: int) -> np.ndarray:
    """Exact matrix elements <m|D(xi)|n> of the untruncated operator for m, n < dim."""
    xi = complex(xi)
    if xi == 0:
        return np.eye(dim, dtype=complex)
    m = np.arange(dim)[:, None]
    n = np.arange(dim)[None, :]
    x = abs(xi) ** 2
    lo = np.minimum(m, n)
    k = np.abs(m - n)
    lag = eval_genlaguerre(lo, k, x)
    logmag = 0.5 * (gammaln(lo + 1) - gammaln(lo + k + 1)) + k * np.log(abs(xi)) - x / 2
    ang = np.angle(xi)
    phase = np.where(m >= n, np.exp(1j * ang * k), (-np.exp(-1j * ang)) ** k)
    return np.exp(logmag) * lag * phase


def t_operator(alpha: complex, dim: int, method: str = "expm") -> np.ndarray:
    """T(alpha) = 2 D(alpha) (-1)^n D(alpha)^dag.

    ``method="expm"`` builds it from the truncated unitary displacement, so
    T^2 = 4 I holds to machine precision. ``method="exact"`` uses the exact
    elements of 2 D(2 alpha)(-1)^n, the restriction of the untruncated operator.
    """
    if method == "expm":
        D = displacement(alpha, dim)
        return 2.0 * (D * ((-1.0) ** np.arange(dim))[None, :]) @ D.conj().T
    if method == "exact":
        return 2.0 * displacement_elements(2 * complex(alpha), dim) * ((-1.0) ** np.arange(dim))[None, :]
    raise InvalidParameterError(f"unknown method {method!r}")


def t_operators(alphas, dim: int) -> np.ndarray:
    """Stack of exact-element T operators, shape (len(alphas), dim, dim)."""
    alphas = np.asarray(alphas, dtype=complex).reshape(-1)
    sign = ((-1.0) ** np.arange(dim))[None, None, :]
    m = np.arange(dim)[:, None]
    n = np.arange(dim)[None, :]
    lo = np.minimum(m, n)
    k = np.abs(m - n)
    xi = 2 * alphas[:, None, None]
    x = np.abs(xi) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        lag = eval_genlaguerre(lo[None], k[None], x)
        logmag = 0.5 * (gammaln(lo + 1) - gammaln(lo + k + 1))[None] + k[None] * np.log(np.abs(xi)) - x / 2
        mag = np.exp(logmag)
    mag = np.where(np.abs(xi) == 0, (k == 0)[None].astype(float), mag)
    ang = np.angle(xi)
    phase = np.where((m >= n)[None], np.exp(1j * ang * k[None]), (-np.exp(-1j * ang)) ** k[None])
    return 2.0 * mag * lag * phase * sign


def parity_projectors(alpha: complex, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Projectors onto the +1 and -1 eigenspaces of the displaced parity."""
    U = 0.5 * t_operator(alpha, dim, method="expm")
    eye = np.eye(dim)
    return 0.5 * (eye + U), 0.5 * (eye - U)


def hermite_functions(nmax: int, x) -> np.ndarray:
    """Position wavefunctions <x|n> for n < nmax, shape (nmax, len(x))."""
    x = np.asarray(x, dtype=float)
    out = np.zeros((nmax,) + x.shape)
    out[0] = np.pi**-0.25 * np.exp(-(x**2) / 2)
    if nmax > 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(2, nmax):
        out[n] = np.sqrt(2.0 / n) * x * out[n - 1] - np.sqrt((n - 1) / n) * out[n - 2]
    return out


def thermal_rho(nbar: float, dim: int) -> np.ndarray:
    n = np.arange(dim)
    w = np.exp(n * np.log(nbar) - (n + 1) * np.log1p(nbar)) if nbar > 0 else (n == 0).astype(float)
    return np.diag(w / w.sum()).astype(complex)


def coherent_ket(alpha: complex, dim: int) -> np.ndarray:
    v = displacement_elements(alpha, dim)[:, 0]
    return v / np.linalg.norm(v)


def tmss_ket(r: float, dim: int) -> np.ndarray:
    """sum_n tanh^n r / cosh r |n, n>, on a dim x dim two-mode space."""
    v = np.zeros(dim * dim, dtype=complex)
    n = np.arange(dim)
    v[n * dim + n] = np.tanh(r) ** n / np.cosh(r)
    return v / np.linalg.norm(v)


def _classify(g: GaussianState) -> tuple[str, tuple]:
    if g.kind is not None:
        return g.kind, g.params
    if g.n_modes == 1 and np.allclose(g.cov, g.cov[0, 0] * np.eye(2), atol=1e-12):
        c = g.cov[0, 0]
        if np.allclose(g.mean, 0.0, atol=1e-12):
            return ("vacuum", ()) if abs(c - 1) < 1e-12 else ("thermal", ((c - 1) / 2,))
        if abs(c - 1) < 1e-12:
            return "coherent", tuple(g.mean / np.sqrt(2))
    if g.n_modes == 2 and np.allclose(g.mean, 0.0, atol=1e-12):
        from .gaussian import tmss_cov

        r = 0.5 * np.arccosh(max(g.cov[0, 0], 1.0))
        if np.allclose(g.cov, tmss_cov(r), atol=1e-10):
            return "tmss", (r,)
    return "unknown", ()


def gaussian_to_fock(g: GaussianState, dim: int) -> FockState:
    """Density matrix of a vacuum, thermal, coherent or two-mode squeezed state."""
    kind, params = _classify(g)
    if kind == "vacuum":
        rho = np.zeros((dim, dim), complex)
        rho[0, 0] = 1
        return FockState(rho)
    if kind == "thermal":
        return FockState(thermal_rho(params[0], dim))
    if kind == "coherent":
        return FockState(coherent_ket(complex(params[0], params[1]), dim))
    if kind == "tmss":
        return FockState(tmss_ket(params[0], dim), n_modes=2)
    raise UnsupportedStateError(
        "only vacuum, thermal, coherent and two-mode squeezed states have a Fock constructor"
    )


def kraus_completeness(kraus: Sequence[np.ndarray]) -> float:
    dim = kraus[0].shape[1]
    S = sum(K.conj().T @ K for K in kraus)
    return float(np.max(np.abs(S - np.eye(dim))))


def apply_kraus(rho, kraus: Sequence[np.ndarray], subnormalized: bool = False):
    """rho -> sum_k K rho K^dag. Returns the same type as ``rho``."""
    if not kraus:
        raise InvalidParameterError("empty Kraus list")
    is_state = isinstance(rho, FockState)
    mat = rho.rho if is_state else np.asarray(rho)
    if kraus[0].shape[1] != mat.shape[0]:
        raise DimensionMismatchError(f"Kraus operators act on {kraus[0].shape[1]}, state has {mat.shape[0]}")
    if not subnormalized:
        res = kraus_completeness(kraus)
        if res > TP_TOL:
            raise NotTracePreservingError(
                f"sum K^dag K deviates from identity by {res:.2e}; pass subnormalized=True"
            )
    out = sum(K @ mat @ K.conj().T for K in kraus)
    if is_state:
        return FockState(out, n_modes=rho.n_modes, physical=not subnormalized and rho.physical)
    return out


def identity_kraus(dim: int) -> list[np.ndarray]:
    return [np.eye(dim, dtype=complex)]


def attenuation_kraus(eta: float, dim: int) -> list[np.ndarray]:
    """Pure-loss channel with transmissivity eta (exact on the truncated space)."""
    if not 0.0 <= eta <= 1.0:
        raise InvalidParameterError(f"eta must lie in [0, 1], got {eta}")
    out = []
    n = np.arange(dim)
    for k in range(dim):
        K = np.zeros((dim, dim), complex)
        cols = n[k:]
        K[cols - k, cols] = np.sqrt(comb(cols, k) * eta ** (cols - k) * (1 - eta) ** k)
        out.append(K)
    return out


def rotation_kraus(theta: float, dim: int) -> list[np.ndarray]:
    return [np.diag(np.exp(1j * theta * np.arange(dim)))]


def reset_to_vacuum_kraus(dim: int) -> list[np.ndarray]:
    """Replace any input with the vacuum: K_n = |0><n|."""
    out = []
    for n in range(dim):
        K = np.zeros((dim, dim), complex)
        K[0, n] = 1
        out.append(K)
    return out


def kraus_from_gaussian(ch: GaussianChannel, dim: int) -> list[np.ndarray]:
    """Fock Kraus set for the single-mode identity, attenuation and rotation channels."""
    if ch.n_modes != 1:
        raise UnsupportedStateError("only single-mode channels have a Fock translation")
    if ch.kind == "identity":
        return identity_kraus(dim)
    if ch.kind == "attenuation":
        return attenuation_kraus(ch.params[0], dim)
    if ch.kind == "rotation":
        return rotation_kraus(ch.params[0], dim)
    raise UnsupportedStateError(f"no Fock translation for channel kind {ch.kind!r}")


def superoperator(kraus: Sequence[np.ndarray]) -> np.ndarray:
    """Matrix S with vec(E(X)) = S vec(X) for row-major vec."""
    return sum(np.kron(K, K.conj()) for K in kraus)


def pointer_kraus(x_op: np.ndarray, outcome: float, eps: float) -> np.ndarray:
    """Gaussian pointer Kraus (2 pi eps^2)^(-1/4) exp(-(v - x)^2 / (4 eps^2)) of a Hermitian x."""
    lam, V = np.linalg.eigh(x_op)
    amp = (2 * np.pi * eps**2) ** -0.25 * np.exp(-((outcome - lam) ** 2) / (4 * eps**2))
    return (V * amp) @ V.conj().T


def sequential_quadrature_moment(
    rho: FockState,
    channels: Sequence[Sequence[np.ndarray]],
    thetas: tuple[float, float],
    eps: float = 0.1,
    step: float = 0.05,
    span: float | None = None,
) -> float:
    """E[v1 v2] for two pointer measurements of rotated quadratures.

    The first outcome is integrated on a uniform grid; each branch is pushed
    through ``channels`` (applied in order) and the second quadrature is read
    off as a conditional expectation.
    """
    dim = rho.rho.shape[0]
    x1 = rotated_quadrature(thetas[0], dim)
    x2 = rotated_quadrature(thetas[1], dim)
    lam, V = np.linalg.eigh(x1)
    if span is None:
        sd = np.sqrt(max(np.trace(rho.rho @ x1 @ x1).real, 0.25) + eps**2)
        span = 10 * sd
    grid = np.arange(-span, span + step / 2, step)
    rho_e = V.conj().T @ rho.rho @ V
    S = np.eye(dim * dim, dtype=complex)
    for ks in channels:
        S = superoperator(ks) @ S
    # Heisenberg-picture observable H with Tr[x2 E(X)] = Tr[H X]
    x2h = (S.T @ x2.T.reshape(-1)).reshape(dim, dim).T
    x2h_e = V.conj().T @ x2h @ V
    total = 0.0
    for v in grid:
        amp = (2 * np.pi * eps**2) ** -0.25 * np.exp(-((v - lam) ** 2) / (4 * eps**2))
        post = amp[:, None] * rho_e * amp[None, :]
        total += v * np.sum(post.T * x2h_e).real
    return float(total * step)
