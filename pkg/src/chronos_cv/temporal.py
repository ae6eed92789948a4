"""Gaussian states over events in time, built from sequential quadrature measurements.

A measurement of the quadrature x_theta = cos(theta) q + sin(theta) p is modelled
by the Gaussian pointer Kraus operator ``(2 pi eps^2)^(-1/4) exp(-(v - x)^2 / (4 eps^2))``.
On a Gaussian state this acts in closed form: the conjugate quadrature picks up
variance 1/(4 eps^2) and the measured one is conditioned on ``v`` with pointer
noise eps^2. Two-event correlations are obtained by measuring only the two
events involved, and the sharp limit is taken by polynomial extrapolation in eps^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from .errors import InvalidParameterError, ScheduleError
from .gaussian import GaussianChannel, GaussianState, apply_channel, wigner

DEFAULT_EPS_LADDER = (0.2, 0.1, 0.05)
EXTRAPOLATION_TOL = 1e-3

_QUAD_ANGLES = {"q": 0.0, "p": np.pi / 2}


def quad_angle(quad) -> float:
    if isinstance(quad, str):
        if quad not in _QUAD_ANGLES:
            raise InvalidParameterError(f"quadrature must be 'q', 'p' or an angle, got {quad!r}")
        return _QUAD_ANGLES[quad]
    return float(quad)


def _direction(n_modes: int, mode: int, theta: float) -> np.ndarray:
    if not 0 <= mode < n_modes:
        raise InvalidParameterError(f"mode {mode} out of range for {n_modes} modes")
    u = np.zeros(2 * n_modes)
    u[2 * mode] = np.cos(theta)
    u[2 * mode + 1] = np.sin(theta)
    return u


@dataclass(frozen=True)
class Event:
    t: int
    mode: int


@dataclass(frozen=True)
class EventSchedule:
    initial: GaussianState
    events: tuple
    channels: tuple = ()

    def __post_init__(self):
        events = tuple(e if isinstance(e, Event) else Event(int(e[0]), int(e[1])) for e in self.events)
        channels = tuple(self.channels)
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "channels", channels)
        if not events:
            raise ScheduleError("schedule has no events")
        n = self.initial.n_modes
        for k, ev in enumerate(events):
            if ev.t < 0:
                raise ScheduleError(f"event {k} has negative time index {ev.t}")
            if not 0 <= ev.mode < n:
                raise ScheduleError(f"event {k} measures mode {ev.mode} but the state has {n} modes")
            if k and ev.t < events[k - 1].t:
                raise ScheduleError(f"event {k} has time index {ev.t} before event {k - 1}")
        seen = set()
        for k, ev in enumerate(events):
            if (ev.t, ev.mode) in seen:
                raise ScheduleError(f"event {k} repeats mode {ev.mode} at time index {ev.t}")
            seen.add((ev.t, ev.mode))
        t_max = max(ev.t for ev in events)
        if len(channels) != t_max:
            raise ScheduleError(f"expected {t_max} channels (one per time gap), got {len(channels)}")
        for k, ch in enumerate(channels):
            if ch.n_modes != n:
                raise ScheduleError(f"channel {k} acts on {ch.n_modes} modes, state has {n}")

    @property
    def n_events(self) -> int:
        return len(self.events)

    def state_at(self, t: int) -> GaussianState:
        s = self.initial
        for ch in self.channels[:t]:
            s = apply_channel(s, ch)
        return s

    def channel_between(self, t0: int, t1: int) -> GaussianChannel:
        ch = GaussianChannel.identity(self.initial.n_modes)
        for c in self.channels[t0:t1]:
            ch = ch.compose(c)
        return ch

    @classmethod
    def from_json(cls, obj: dict) -> "EventSchedule":
        from .gaussian import make_reference_state

        init = obj["initial"]
        initial = make_reference_state(init["kind"], init.get("params", []))
        n = initial.n_modes
        builders = {
            "identity": lambda p: GaussianChannel.identity(n),
            "attenuation": lambda p: GaussianChannel.attenuation(p[0], n),
            "rotation": lambda p: GaussianChannel.rotation(p[0], n),
        }
        chans = []
        for c in obj.get("channels", []):
            if c["kind"] not in builders:
                raise ScheduleError(f"unknown channel kind {c['kind']!r}")
            chans.append(builders[c["kind"]](c.get("params", [])))
        events = [(e["t"], e.get("mode", 0)) for e in obj["events"]]
        return cls(initial, events, chans)


def quadrature_collapse(state: GaussianState, mode: int, quad, outcome: float, eps: float):
    """Apply the pointer Kraus for one outcome.

    Returns the normalized posterior and the outcome probability density.
    """
    if eps <= 0:
        raise InvalidParameterError(f"eps must be positive, got {eps}")
    theta = quad_angle(quad)
    u = _direction(state.n_modes, mode, theta)
    w = _direction(state.n_modes, mode, theta + np.pi / 2)
    cov = 0.5 * state.cov + np.outer(w, w) / (4 * eps**2)
    m = u @ state.mean
    var = u @ cov @ u + eps**2
    gain = cov @ u / var
    mean = state.mean + gain * (outcome - m)
    cov = cov - np.outer(gain, cov @ u)
    weight = np.exp(-((outcome - m) ** 2) / (2 * var)) / np.sqrt(2 * np.pi * var)
    # symmetrize and convert back to the doubled convention
    return GaussianState(mean, cov + cov.T), float(weight)


def outcome_moments(state: GaussianState, mode: int, quad, eps: float) -> tuple[float, float]:
    """Mean and variance of the pointer outcome."""
    u = _direction(state.n_modes, mode, quad_angle(quad))
    return float(u @ state.mean), float(u @ state.cov @ u / 2 + eps**2)


def _check_pair(schedule: EventSchedule, i: int, j: int):
    n = schedule.n_events
    if not (0 <= i < n and 0 <= j < n):
        raise InvalidParameterError(f"event indices ({i}, {j}) out of range for {n} events")
    if i > j:
        raise InvalidParameterError(f"event {i} comes after event {j}; pass them in schedule order")


def _same_time_moment(schedule, ei: Event, ej: Event, ti: float, tj: float) -> float:
    s = schedule.state_at(ei.t)
    n = s.n_modes
    u = _direction(n, ei.mode, ti)
    v = _direction(n, ej.mode, tj)
    return float(u @ s.cov @ v / 2 + (u @ s.mean) * (v @ s.mean))


def two_event_correlation(
    schedule: EventSchedule, i: int, j: int, quads=("q", "q"), eps: float = 0.05, nodes: int = 12
) -> float:
    """E[v_i v_j] when only events i and j are measured.

    The first outcome is integrated by Gauss-Hermite quadrature over its
    Gaussian density, each posterior is evolved to the later time and the
    conditional mean of the second quadrature is read off. Same-time events
    return the symmetrized moment directly from the state.
    """
    _check_pair(schedule, i, j)
    ei, ej = schedule.events[i], schedule.events[j]
    ti, tj = quad_angle(quads[0]), quad_angle(quads[1])
    if ei.t == ej.t:
        return _same_time_moment(schedule, ei, ej, ti, tj)
    if eps <= 0:
        raise InvalidParameterError(f"eps must be positive, got {eps}")
    s = schedule.state_at(ei.t)
    ch = schedule.channel_between(ei.t, ej.t)
    uj = _direction(s.n_modes, ej.mode, tj)
    m, var = outcome_moments(s, ei.mode, ti, eps)
    x, w = hermegauss(nodes)
    w = w / w.sum()
    total = 0.0
    for xk, wk in zip(x, w):
        v = m + np.sqrt(var) * xk
        post, _ = quadrature_collapse(s, ei.mode, ti, v, eps)
        total += wk * v * (uj @ (ch.X @ post.mean + ch.shift))
    return float(total)


def analytic_two_event_correlation(schedule: EventSchedule, i: int, j: int, quads=("q", "q")) -> float:
    """Sharp-limit closed form: m_i (X d + shift)_j + (X cov u_i)_j / 2."""
    _check_pair(schedule, i, j)
    ei, ej = schedule.events[i], schedule.events[j]
    ti, tj = quad_angle(quads[0]), quad_angle(quads[1])
    if ei.t == ej.t:
        return _same_time_moment(schedule, ei, ej, ti, tj)
    s = schedule.state_at(ei.t)
    ch = schedule.channel_between(ei.t, ej.t)
    ui = _direction(s.n_modes, ei.mode, ti)
    uj = _direction(s.n_modes, ej.mode, tj)
    return float((ui @ s.mean) * (uj @ (ch.X @ s.mean + ch.shift)) + uj @ ch.X @ s.cov @ ui / 2)


def event_means(schedule: EventSchedule) -> np.ndarray:
    d = np.zeros(2 * schedule.n_events)
    for k, ev in enumerate(schedule.events):
        s = schedule.state_at(ev.t)
        d[2 * k : 2 * k + 2] = s.mean[2 * ev.mode : 2 * ev.mode + 2]
    return d


@dataclass(frozen=True)
class SpacetimeGaussian:
    mean: np.ndarray
    cov: np.ndarray
    schedule: EventSchedule | None = None
    residuals: np.ndarray | None = None
    eps_ladder: tuple = ()
    nonconvergent: tuple = field(default=())

    @property
    def n_events(self) -> int:
        return self.mean.size // 2

    def as_state(self) -> GaussianState:
        return GaussianState(self.mean, self.cov)


def richardson(eps_ladder: Sequence[float], values: Sequence[float]) -> tuple[float, float]:
    """Extrapolate to eps = 0 with a polynomial in eps^2 through all ladder points.

    The residual is the change against the same fit with the largest eps dropped.
    """
    e2 = np.asarray(eps_ladder, dtype=float) ** 2
    y = np.asarray(values, dtype=float)
    full = np.polyval(np.polyfit(e2, y, len(e2) - 1), 0.0)
    reduced = np.polyval(np.polyfit(e2[1:], y[1:], len(e2) - 2), 0.0)
    return float(full), float(abs(full - reduced))


def _pair_moment(schedule, i, j, a, b, correlation):
    """Symmetrized second moment of quadrature a of event i and b of event j."""
    if i == j:
        ev = schedule.events[i]
        s = schedule.state_at(ev.t)
        k = 2 * ev.mode
        return s.cov[k + a, k + b] / 2 + s.mean[k + a] * s.mean[k + b]
    return correlation(i, j, (("q", "p")[a], ("q", "p")[b]))


def analytic_spacetime_gaussian(schedule: EventSchedule) -> SpacetimeGaussian:
    n = schedule.n_events
    d = event_means(schedule)
    cov = np.zeros((2 * n, 2 * n))
    corr = lambda i, j, q: analytic_two_event_correlation(schedule, i, j, q)  # noqa: E731
    for i in range(n):
        for j in range(i, n):
            for a in (0, 1):
                for b in (0, 1):
                    val = 2 * _pair_moment(schedule, i, j, a, b, corr) - 2 * d[2 * i + a] * d[2 * j + b]
                    cov[2 * i + a, 2 * j + b] = cov[2 * j + b, 2 * i + a] = val
    return SpacetimeGaussian(d, cov, schedule)


def build_spacetime_gaussian(
    schedule: EventSchedule,
    eps_ladder: Sequence[float] = DEFAULT_EPS_LADDER,
    tol: float = EXTRAPOLATION_TOL,
) -> SpacetimeGaussian:
    """Means and covariance over events, each timelike entry extrapolated to eps = 0.

    Entries whose extrapolation residual exceeds ``tol`` are listed in
    ``nonconvergent`` as (row, col, residual) rather than raising.
    """
    eps_ladder = tuple(float(e) for e in eps_ladder)
    if len(eps_ladder) < 2:
        raise InvalidParameterError("eps ladder needs at least two values")
    if any(e <= 0 for e in eps_ladder) or any(b >= a for a, b in zip(eps_ladder, eps_ladder[1:])):
        raise InvalidParameterError(f"eps ladder must be positive and strictly decreasing, got {eps_ladder}")
    n = schedule.n_events
    d = event_means(schedule)
    cov = np.zeros((2 * n, 2 * n))
    res = np.zeros_like(cov)
    bad = []
    same_time = lambda i, j, q: two_event_correlation(schedule, i, j, q)  # noqa: E731
    for i in range(n):
        for j in range(i, n):
            timelike = i != j and schedule.events[i].t != schedule.events[j].t
            for a in (0, 1):
                for b in (0, 1):
                    r = 0.0
                    if timelike:
                        vals = [
                            two_event_correlation(schedule, i, j, (("q", "p")[a], ("q", "p")[b]), eps)
                            for eps in eps_ladder
                        ]
                        moment, r = richardson(eps_ladder, vals)
                    else:
                        moment = _pair_moment(schedule, i, j, a, b, same_time)
                    val = 2 * moment - 2 * d[2 * i + a] * d[2 * j + b]
                    row, col = 2 * i + a, 2 * j + b
                    cov[row, col] = cov[col, row] = val
                    res[row, col] = res[col, row] = r
                    if r > tol:
                        bad.append((row, col, r))
    return SpacetimeGaussian(d, cov, schedule, res, eps_ladder, tuple(bad))


def reduced_event_state(st: SpacetimeGaussian, event: int) -> GaussianState:
    if not 0 <= event < st.n_events:
        raise InvalidParameterError(f"event {event} out of range for {st.n_events} events")
    idx = slice(2 * event, 2 * event + 2)
    return GaussianState(st.mean[idx], st.cov[idx, idx])


def temporal_wigner(st: SpacetimeGaussian, x, reg: float = 0.0):
    return wigner(st.as_state(), x, reg=reg)
