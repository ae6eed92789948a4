"""Successive position measurements and weak joint (q, p) measurements in one dimension.

Position measurements use the Gaussian resolution amplitude
``Y_eps(y) = (2 pi eps^2)^(-1/4) exp(-y^2 / (4 eps^2))`` multiplied onto the
wavefunction at each event, with exact propagation in between. The joint
probability of the outcomes is the squared norm of what is left at the end.

Weak measurements compose Gaussian Kraus operators over short time slices of
each event window; their product gives a joint density over (q, p) probes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import GridOverflowError, InvalidParameterError, NumericalGuardError
from .fock import FockState, ladder

EDGE_FRACTION = 0.02
EDGE_TOL = 1e-6
AMPLITUDE_CUTOFF = 6.0


@dataclass(frozen=True)
class PositionGrid:
    x_min: float = -12.0
    x_max: float = 12.0
    n_points: int = 1024

    def __post_init__(self):
        if self.x_max <= self.x_min or self.n_points < 8:
            raise InvalidParameterError("position grid needs x_max > x_min and at least 8 points")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_points, endpoint=False)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @property
    def k(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)


@dataclass(frozen=True)
class Hamiltonian:
    """``free`` (mass m), ``harmonic`` (mass m, frequency omega) or ``frozen`` (H = 0)."""

    kind: str = "free"
    m: float = 1.0
    omega: float = 1.0

    def __post_init__(self):
        if self.kind not in ("free", "harmonic", "frozen"):
            raise InvalidParameterError(f"unknown hamiltonian kind {self.kind!r}")
        if self.m <= 0:
            raise InvalidParameterError(f"mass must be positive, got {self.m}")


def gaussian_packet(grid: PositionGrid, x0: float = 0.0, p0: float = 0.0, sigma: float = 1.0) -> np.ndarray:
    """Normalized packet with position standard deviation sigma."""
    x = grid.x
    psi = np.exp(-((x - x0) ** 2) / (4 * sigma**2) + 1j * p0 * x)
    return psi / np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)


def harmonic_ground(grid: PositionGrid, m: float = 1.0, omega: float = 1.0) -> np.ndarray:
    return gaussian_packet(grid, sigma=np.sqrt(1.0 / (2 * m * omega)))


@lru_cache(maxsize=8)
def _harmonic_eig(grid: PositionGrid, m: float, omega: float):
    n = grid.n_points
    # kinetic term from the FFT (spectral) second derivative
    F = np.fft.fft(np.eye(n), axis=0)
    kin = (np.fft.ifft((grid.k**2 / (2 * m))[:, None] * F, axis=0)).real
    H = kin + np.diag(0.5 * m * omega**2 * grid.x**2)
    w, V = np.linalg.eigh(0.5 * (H + H.T))
    return w, V


def edge_mass(psi: np.ndarray, grid: PositionGrid) -> np.ndarray:
    """Probability in the outer EDGE_FRACTION of the grid, per wavefunction."""
    n_edge = max(1, int(EDGE_FRACTION * grid.n_points))
    prob = np.abs(psi) ** 2 * grid.dx
    return prob[..., :n_edge].sum(axis=-1) + prob[..., -n_edge:].sum(axis=-1)


def _check_edges(mass: float, tol: float = EDGE_TOL):
    if mass > tol:
        raise GridOverflowError(
            f"probability {mass:.2e} sits in the outer {EDGE_FRACTION:.0%} of the grid; widen the grid"
        )


def propagate(
    psi: np.ndarray, t: float, ham: Hamiltonian, grid: PositionGrid, check: bool = True, edge_tol: float = EDGE_TOL
) -> np.ndarray:
    """Exact evolution by time t; acts on the last axis so batches are allowed."""
    if t < 0:
        raise InvalidParameterError(f"propagation time must be non-negative, got {t}")
    psi = np.asarray(psi, dtype=complex)
    if t == 0 or ham.kind == "frozen":
        out = psi.copy()
    elif ham.kind == "free":
        out = np.fft.ifft(np.exp(-1j * grid.k**2 * t / (2 * ham.m)) * np.fft.fft(psi, axis=-1), axis=-1)
    else:
        w, V = _harmonic_eig(grid, ham.m, ham.omega)
        out = ((psi @ V) * np.exp(-1j * w * t)) @ V.T
    if check:
        _check_edges(float(np.max(edge_mass(out, grid))), edge_tol)
    return out


def free_kernel(x: np.ndarray, y: np.ndarray, t: float, m: float = 1.0) -> np.ndarray:
    """K(x, y; t) = sqrt(m / (2 pi i t)) exp(i m (x - y)^2 / (2 t))."""
    return np.sqrt(m / (2j * np.pi * t)) * np.exp(1j * m * (x[:, None] - y[None, :]) ** 2 / (2 * t))


def resolution_amplitude(y, eps: float, cutoff: float = AMPLITUDE_CUTOFF) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    amp = (2 * np.pi * eps**2) ** -0.25 * np.exp(-(y**2) / (4 * eps**2))
    return np.where(np.abs(y) <= cutoff * eps, amp, 0.0)


@dataclass(frozen=True)
class TrajectoryConfig:
    hamiltonian: Hamiltonian
    times: tuple
    eps: tuple
    grid: PositionGrid = PositionGrid()
    psi0: np.ndarray | None = field(default=None, compare=False)
    edge_tol: float = EDGE_TOL

    def __post_init__(self):
        times = tuple(float(t) for t in np.atleast_1d(self.times))
        eps = np.atleast_1d(self.eps).astype(float)
        if eps.size == 1:
            eps = np.repeat(eps, len(times))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "eps", tuple(eps))
        if not 1 <= len(times) <= 4:
            raise InvalidParameterError(f"between 1 and 4 events are supported, got {len(times)}")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidParameterError("event times must be strictly increasing")
        if len(eps) != len(times) or np.any(eps <= 0):
            raise InvalidParameterError("need one positive resolution per event")
        psi = self.psi0
        if psi is None:
            h = self.hamiltonian
            psi = harmonic_ground(self.grid, h.m, h.omega) if h.kind == "harmonic" else gaussian_packet(self.grid)
        psi = np.asarray(psi, dtype=complex)
        if psi.shape != (self.grid.n_points,):
            raise InvalidParameterError(f"psi0 has {psi.size} samples, grid has {self.grid.n_points}")
        object.__setattr__(self, "psi0", psi)

    @property
    def n_events(self) -> int:
        return len(self.times)


def joint_position_probability(cfg: TrajectoryConfig, outcomes: Sequence[float]) -> float:
    """Density of the outcome tuple: squared norm after all resolution amplitudes.

    ``psi0`` is the state at the first event time.
    """
    if len(outcomes) != cfg.n_events:
        raise InvalidParameterError(f"expected {cfg.n_events} outcomes, got {len(outcomes)}")
    x = cfg.grid.x
    psi = cfg.psi0
    for k, v in enumerate(outcomes):
        if k:
            psi = propagate(psi, cfg.times[k] - cfg.times[k - 1], cfg.hamiltonian, cfg.grid, edge_tol=cfg.edge_tol)
        psi = psi * resolution_amplitude(v - x, cfg.eps[k])
    return float(np.sum(np.abs(psi) ** 2) * cfg.grid.dx)


@dataclass(frozen=True)
class DiagonalDensity:
    axis: np.ndarray
    density: np.ndarray

    @property
    def step(self) -> float:
        return float(self.axis[1] - self.axis[0])

    @property
    def weights(self) -> np.ndarray:
        return self.density * self.step**self.density.ndim

    def marginal(self, event: int) -> np.ndarray:
        axes = tuple(k for k in range(self.density.ndim) if k != event)
        return self.density.sum(axis=axes) * self.step ** (self.density.ndim - 1)

    def correlation(self, i: int = 0, j: int = 1) -> float:
        """Pearson correlation of two outcomes under the tabulated weights."""
        w = self.weights / self.weights.sum()
        grids = np.meshgrid(*([self.axis] * w.ndim), indexing="ij")
        xi, xj = grids[i], grids[j]
        mi, mj = np.sum(w * xi), np.sum(w * xj)
        cov = np.sum(w * (xi - mi) * (xj - mj))
        return float(cov / np.sqrt(np.sum(w * (xi - mi) ** 2) * np.sum(w * (xj - mj) ** 2)))


def diagonal_spacetime_density(cfg: TrajectoryConfig, outcome_axis) -> DiagonalDensity:
    """Joint outcome density on the product of ``outcome_axis`` (uniform) for every event.

    Intermediate branches are propagated as one batch; the last event only needs
    |psi|^2 convolved with the squared resolution amplitude.
    """
    axis = np.asarray(outcome_axis, dtype=float)
    x = cfg.grid.x
    dx = cfg.grid.dx
    n = cfg.n_events
    if axis.size ** max(n - 1, 1) * x.size > 6e7:
        raise NumericalGuardError("outcome grid too large for batched tabulation")
    amps = [resolution_amplitude(axis[:, None] - x[None, :], e) for e in cfg.eps]
    step = axis[1] - axis[0] if axis.size > 1 else 1.0
    psi = cfg.psi0[None, :]
    for k in range(n - 1):
        if k:
            psi = propagate(psi, cfg.times[k] - cfg.times[k - 1], cfg.hamiltonian, cfg.grid, check=False)
            # branches are densities in the outcomes so far; weight by the cell volume
            _check_edges(float(edge_mass(psi, cfg.grid).sum() * step**k), cfg.edge_tol)
        psi = (psi[:, None, :] * amps[k][None, :, :]).reshape(-1, x.size)
    if n > 1:
        psi = propagate(psi, cfg.times[-1] - cfg.times[-2], cfg.hamiltonian, cfg.grid, check=False)
        _check_edges(float(edge_mass(psi, cfg.grid).sum() * step ** (n - 1)), cfg.edge_tol)
    dens = (np.abs(psi) ** 2) @ (amps[-1] ** 2).T * dx
    return DiagonalDensity(axis, dens.reshape((axis.size,) * n))


def path_lattice_probability(
    cfg: TrajectoryConfig, outcomes: Sequence[float], lattice: np.ndarray, slices: int = 3
) -> float:
    """Free-particle joint probability as an explicit sum over lattice paths.

    Between consecutive events the time is cut into ``slices`` steps; every
    intermediate position runs over ``lattice`` and each step contributes the
    analytic free kernel times the lattice spacing. The initial wavefunction is
    interpolated onto the lattice.
    """
    if cfg.hamiltonian.kind != "free":
        raise InvalidParameterError("the path-lattice sum is implemented for the free particle")
    lattice = np.asarray(lattice, dtype=float)
    h = lattice[1] - lattice[0]
    m = cfg.hamiltonian.m
    x = cfg.grid.x
    psi = np.interp(lattice, x, cfg.psi0.real) + 1j * np.interp(lattice, x, cfg.psi0.imag)
    psi = psi * resolution_amplitude(outcomes[0] - lattice, cfg.eps[0])
    for k in range(1, cfg.n_events):
        dt = (cfg.times[k] - cfg.times[k - 1]) / slices
        K = free_kernel(lattice, lattice, dt, m) * h
        for _ in range(slices):
            psi = K @ psi
        psi = psi * resolution_amplitude(outcomes[k] - lattice, cfg.eps[k])
    return float(np.sum(np.abs(psi) ** 2) * h)


# weak joint measurements of q and p


@dataclass(frozen=True)
class WeakMeasConfig:
    gamma: float = 0.5
    lam: float = 1.0
    slices: int = 8
    times: tuple = (1.0,)
    dim: int = 40
    omega: float = 0.0
    start: float = 0.0
    max_slice_deviation: float = 0.5

    def __post_init__(self):
        times = tuple(float(t) for t in np.atleast_1d(self.times))
        object.__setattr__(self, "times", times)
        if self.gamma <= 0 or self.lam <= 0:
            raise InvalidParameterError("gamma and lam must be positive")
        if self.slices < 1:
            raise InvalidParameterError("slices must be at least 1")
        edges = (self.start,) + times
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise InvalidParameterError("event times must increase and follow start")

    @property
    def windows(self) -> tuple:
        edges = (self.start,) + self.times
        return tuple(b - a for a, b in zip(edges, edges[1:]))


_WEAK_PAD = 40


def _quadrature_ops(dim: int):
    a = ladder(dim)
    return (a + a.conj().T) / np.sqrt(2), (a - a.conj().T) / (1j * np.sqrt(2))


def _gaussian_operators(qs, ps, strength: float, lam: float, dim: int) -> np.ndarray:
    """exp[-strength ((q_op - q)^2 + lam (p_op - p)^2)] for each (q, p), shape (n, dim, dim).

    Built in a padded space by batched eigendecomposition and cropped to dim.
    """
    qs = np.atleast_1d(np.asarray(qs, dtype=float))
    ps = np.atleast_1d(np.asarray(ps, dtype=float))
    big = dim + _WEAK_PAD
    Q, P = _quadrature_ops(big)
    eye = np.eye(big)
    base = Q @ Q + lam * (P @ P)
    X = (
        base[None]
        - 2 * qs[:, None, None] * Q[None]
        - 2 * lam * ps[:, None, None] * P[None]
        + (qs**2 + lam * ps**2)[:, None, None] * eye[None]
    )
    w, V = np.linalg.eigh(X)
    out = (V * np.exp(-strength * w)[:, None, :]) @ V.conj().transpose(0, 2, 1)
    return out[:, :dim, :dim]


def _gaussian_operator(q: float, p: float, strength: float, lam: float, dim: int) -> np.ndarray:
    return _gaussian_operators([q], [p], strength, lam, dim)[0]


def weak_normalization(strength: float, lam: float) -> float:
    """C with the integral of C exp[-strength(...)] over dq dp equal to the identity."""
    return float(np.sinh(strength * np.sqrt(lam)) / np.pi)


def weak_povm_density(q: float, p: float, alpha_strength: float, lam: float = 1.0, dim: int = 40) -> np.ndarray:
    if alpha_strength <= 0:
        raise InvalidParameterError(f"strength must be positive, got {alpha_strength}")
    return weak_normalization(alpha_strength, lam) * _gaussian_operator(q, p, alpha_strength, lam, dim)


def slice_deviation(cfg: WeakMeasConfig, window: float) -> float:
    """1 - smallest eigenvalue of the origin-centred slice Kraus on the n <= dim/4 block."""
    delta = window / cfg.slices
    top = cfg.dim // 4
    # spectrum of q^2 + lam p^2 is sqrt(lam)(2n + 1)
    return float(1 - np.exp(-0.5 * cfg.gamma * delta * np.sqrt(cfg.lam) * (2 * top + 1)))


def _event_kraus(cfg: WeakMeasConfig, qs, ps, window: float) -> np.ndarray:
    """Product of the slice operators for one event window, probe held constant over the window.

    Returns a stack with one Kraus operator per (q, p) pair.
    """
    dev = slice_deviation(cfg, window)
    if dev >= cfg.max_slice_deviation:
        raise NumericalGuardError(
            f"slice Kraus deviates from identity by {dev:.2f} (limit {cfg.max_slice_deviation}); use more slices"
        )
    delta = window / cfg.slices
    M = _gaussian_operators(qs, ps, 0.5 * cfg.gamma * delta, cfg.lam, cfg.dim)
    phase = np.exp(-1j * cfg.omega * (np.arange(cfg.dim) + 0.5) * delta)
    step = M * phase[None, None, :]
    G = step
    for _ in range(cfg.slices - 1):
        G = step @ G
    return np.sqrt(weak_normalization(cfg.gamma * window, cfg.lam)) * G


def temporal_wigner_weak(rho0, cfg: WeakMeasConfig, probes: Sequence[tuple]) -> float:
    """Joint density of weak (q, p) readings, one probe per event window."""
    if len(probes) != len(cfg.times):
        raise InvalidParameterError(f"expected {len(cfg.times)} probes, got {len(probes)}")
    rho = rho0.rho if isinstance(rho0, FockState) else np.asarray(rho0)
    for (q, p), window in zip(probes, cfg.windows):
        G = _event_kraus(cfg, [q], [p], window)[0]
        rho = G @ rho @ G.conj().T
    return float(np.trace(rho).real)


def weak_density_grid(rho0, cfg: WeakMeasConfig, axis) -> np.ndarray:
    """Joint density on the product grid axis x axis for every event, shape (K^2,)*n.

    Probes are flattened with q as the slow index.
    """
    axis = np.asarray(axis, dtype=float)
    probes = [(q, p) for q in axis for p in axis]
    rho = rho0.rho if isinstance(rho0, FockState) else np.asarray(rho0)
    n = len(cfg.times)
    if len(probes) ** n > 5e6:
        raise NumericalGuardError("probe grid too large")
    qs = np.array([q for q, _ in probes])
    ps = np.array([p for _, p in probes])
    kraus = [_event_kraus(cfg, qs, ps, w) for w in cfg.windows]
    states = rho[None]
    for k in range(n - 1):
        G = kraus[k]
        states = (G[None] @ states[:, None] @ G.conj().transpose(0, 2, 1)[None]).reshape(-1, cfg.dim, cfg.dim)
    effects = kraus[-1].conj().transpose(0, 2, 1) @ kraus[-1]
    out = states.reshape(states.shape[0], -1) @ effects.transpose(0, 2, 1).reshape(len(probes), -1).T
    return out.real.reshape((len(probes),) * n)


def spatial_weak_wigner(rho: np.ndarray, n_modes: int, probes: Sequence[tuple], strength: float, lam: float = 1.0) -> float:
    """Tr[(f(q1, p1) x ... x f(qn, pn)) rho] for an n-mode state."""
    d = int(round(rho.shape[0] ** (1.0 / n_modes)))
    if len(probes) != n_modes:
        raise InvalidParameterError(f"expected {n_modes} probes, got {len(probes)}")
    E = np.ones((1, 1))
    for q, p in probes:
        E = np.kron(E, weak_povm_density(q, p, strength, lam, d))
    return float(np.trace(E @ rho).real)


def weak_slice_convergence(rho0, cfg: WeakMeasConfig, probes: Sequence[tuple], doublings: int = 2) -> list:
    """Joint density at fixed probes as the slice count doubles.

    Returns (slices, value, change from previous) rows.
    """
    rows = []
    prev = None
    for k in range(doublings + 1):
        c = replace(cfg, slices=cfg.slices * 2**k)
        val = temporal_wigner_weak(rho0, c, probes)
        rows.append((c.slices, val, None if prev is None else abs(val - prev)))
        prev = val
    return rows


def completeness_residual(strength: float, lam: float = 1.0, dim: int = 40, radius: float = 5.0,
                          step: float = 0.25, block: int = 11, units: str = "alpha") -> float:
    """Max entry of |sum f(q, p) dq dp - I| on the low block of the Fock space.

    With units="alpha" the square grid is laid out in alpha = (q + ip)/sqrt(2),
    the same convention as the phase-space grids used elsewhere; "quadrature"
    takes radius and step directly in q and p.
    """
    if units not in ("alpha", "quadrature"):
        raise InvalidParameterError(f"units must be 'alpha' or 'quadrature', got {units!r}")
    scale = np.sqrt(2) if units == "alpha" else 1.0
    radius, step = radius * scale, step * scale
    axis = np.arange(-radius, radius + step / 2, step)
    qq, pp = np.meshgrid(axis, axis, indexing="ij")
    total = weak_normalization(strength, lam) * _gaussian_operators(qq.ravel(), pp.ravel(), strength, lam, dim).sum(0)
    total *= step**2
    return float(np.abs(total[:block, :block] - np.eye(block)).max())
