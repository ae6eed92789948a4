"""Simulated homodyne tomography of spacetime Gaussian states.

Sequential records measure one quadrature per event with a finite-resolution
pointer and collapse the Gaussian state between events. Joint (q, p) records
sample every event of a time slice at once, either from the exact symmetric
statistics ("ideal") or with the extra vacuum unit of an eight-port detector.
Estimators are plug-in moments with the pointer noise removed from the
diagonal and standard errors from batch means.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidParameterError, SampleSizeError, ScheduleError
from .serialization import canonical_hash
from .temporal import EventSchedule, SpacetimeGaussian, _direction, quad_angle

MIN_SAMPLES = 30
N_BATCHES = 50
NOISE_MODELS = ("ideal", "eight_port_vacuum_noise")
# added variance, in covariance-matrix units, of an eight-port joint measurement
EIGHT_PORT_UNIT = 1.0
DISTURBANCE_TOL = 1e-12


def schedule_fingerprint(schedule: EventSchedule) -> str:
    s = schedule.initial
    return canonical_hash(
        {
            "mean": s.mean.tolist(),
            "cov": s.cov.tolist(),
            "events": [(e.t, e.mode) for e in schedule.events],
            "channels": [(c.X.tolist(), c.Y.tolist(), c.shift.tolist()) for c in schedule.channels],
        }
    )


@dataclass(frozen=True)
class HomodyneRecord:
    """M x k outcome matrix; column c holds quadrature columns[c][1] of event columns[c][0].

    ``kind`` is "sequential" for pointer records or one of NOISE_MODELS for
    joint same-time records. ``disturbed`` flags sequential columns whose
    marginal variance carries back-action from an earlier pointer.
    """

    samples: np.ndarray
    columns: tuple
    eps: float
    seed: int | None
    schedule: EventSchedule = field(repr=False)
    kind: str = "sequential"
    disturbed: tuple = ()
    fingerprint: str = ""

    @property
    def M(self) -> int:
        return self.samples.shape[0]

    def header(self) -> list:
        return [f"e{e}_{q}" for e, q in self.columns]


def _seedseq(seed) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


def _streams(seed, n: int) -> list:
    return [np.random.default_rng(s) for s in _seedseq(seed).spawn(n)]


def _seed_value(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed.entropy if not seed.spawn_key else None
    return seed


def simulate_records(
    schedule: EventSchedule, quads: Sequence, M: int, eps: float, seed=0, events: Sequence[int] | None = None
) -> HomodyneRecord:
    """Sample M shots of sequential pointer outcomes.

    Only the events listed in ``events`` (default: all) are measured, in
    schedule order, with ``quads`` giving one quadrature per measured event.
    Each column draws from its own RNG stream spawned from ``seed``.
    """
    if M < 1:
        raise InvalidParameterError(f"M must be at least 1, got {M}")
    if eps <= 0:
        raise InvalidParameterError(f"eps must be positive, got {eps}")
    events = list(range(schedule.n_events)) if events is None else [int(e) for e in events]
    if sorted(set(events)) != events:
        raise ScheduleError(f"measured events must be distinct and in schedule order, got {events}")
    if any(not 0 <= e < schedule.n_events for e in events):
        raise ScheduleError(f"event indices {events} out of range for {schedule.n_events} events")
    if len(quads) != len(events):
        raise InvalidParameterError(f"need one quadrature per measured event, got {len(quads)} for {len(events)}")
    quads = tuple(q if isinstance(q, str) else float(q) for q in quads)
    streams = _streams(seed, len(events))
    s = schedule.initial
    n = s.mean.size
    mean = np.tile(s.mean, (M, 1))
    C = s.cov / 2
    t_now = 0
    out = np.empty((M, len(events)))
    # conjugate directions already kicked, propagated to the current time
    kicks: list[np.ndarray] = []
    disturbed = []
    for c, (e, quad) in enumerate(zip(events, quads)):
        ev = schedule.events[e]
        for ch in schedule.channels[t_now : ev.t]:
            mean = mean @ ch.X.T + ch.shift
            C = ch.X @ C @ ch.X.T + ch.Y
            kicks = [ch.X @ w for w in kicks]
        t_now = ev.t
        theta = quad_angle(quad)
        u = _direction(s.n_modes, ev.mode, theta)
        w = _direction(s.n_modes, ev.mode, theta + np.pi / 2)
        disturbed.append(any(abs(u @ k) > DISTURBANCE_TOL for k in kicks))
        Cb = C + np.outer(w, w) / (4 * eps**2)
        var = u @ Cb @ u + eps**2
        m = mean @ u
        v = m + np.sqrt(var) * streams[c].standard_normal(M)
        gain = Cb @ u / var
        mean = mean + np.outer(v - m, gain)
        C = Cb - var * np.outer(gain, gain)
        C = 0.5 * (C + C.T)
        kicks.append(w)
        out[:, c] = v
    assert mean.shape[1] == n
    return HomodyneRecord(
        out,
        tuple((e, q) for e, q in zip(events, quads)),
        float(eps),
        _seed_value(seed),
        schedule,
        "sequential",
        tuple(disturbed),
        schedule_fingerprint(schedule),
    )


def _time_slices(schedule: EventSchedule) -> dict:
    slices: dict = {}
    for k, ev in enumerate(schedule.events):
        slices.setdefault(ev.t, []).append(k)
    return slices


def joint_quadrature_record(schedule: EventSchedule, M: int, eps: float, noise_model: str = "ideal", seed=0) -> HomodyneRecord:
    """Sample q and p of every event, one independent run per time slice.

    Within a slice all quadratures of the measured modes are drawn jointly from
    the symmetric-ordered (Wigner) statistics N(d, sigma/2); the eight-port
    model adds half a unit of vacuum noise per quadrature. Each quadrature also
    carries pointer noise of variance eps^2.
    """
    if noise_model not in NOISE_MODELS:
        raise InvalidParameterError(f"noise_model must be one of {NOISE_MODELS}, got {noise_model!r}")
    if M < 1:
        raise InvalidParameterError(f"M must be at least 1, got {M}")
    if eps < 0:
        raise InvalidParameterError(f"eps must be nonnegative, got {eps}")
    slices = _time_slices(schedule)
    columns = [(k, q) for k in range(schedule.n_events) for q in ("q", "p")]
    streams = _streams(seed, len(slices))
    out = np.empty((M, len(columns)))
    for rng, (t, evs) in zip(streams, sorted(slices.items())):
        s = schedule.state_at(t)
        idx = [2 * schedule.events[k].mode + a for k in evs for a in (0, 1)]
        cov = s.cov[np.ix_(idx, idx)] / 2
        if noise_model == "eight_port_vacuum_noise":
            cov = cov + 0.5 * EIGHT_PORT_UNIT * np.eye(len(idx))
        cov = cov + eps**2 * np.eye(len(idx))
        L = np.linalg.cholesky(cov)
        draw = s.mean[idx] + rng.standard_normal((M, len(idx))) @ L.T
        cols = [2 * k + a for k in evs for a in (0, 1)]
        out[:, cols] = draw
    return HomodyneRecord(
        out, tuple(columns), float(eps), _seed_value(seed), schedule, noise_model, (), schedule_fingerprint(schedule)
    )


def _batch_se(values: np.ndarray, stat) -> tuple[float, float]:
    """Statistic on all rows and its batch-means standard error."""
    M = values.shape[0]
    nb = min(N_BATCHES, M // 3)
    full = stat(values)
    parts = np.array([stat(b) for b in np.array_split(values, nb)])
    return float(full), float(parts.std(ddof=1) / np.sqrt(nb))


@dataclass(frozen=True)
class TomographyEstimate:
    """Estimated means and covariance with standard errors; NaN marks entries no record covers."""

    mean: np.ndarray
    cov: np.ndarray
    mean_se: np.ndarray
    cov_se: np.ndarray
    M: int

    @property
    def complete(self) -> bool:
        return bool(np.all(np.isfinite(self.cov)) and np.all(np.isfinite(self.mean)))

    @property
    def gaussian(self) -> SpacetimeGaussian:
        if not self.complete:
            raise InvalidParameterError("estimate does not cover every entry; add records")
        return SpacetimeGaussian(self.mean, self.cov)

    def z_scores(self, target: np.ndarray) -> np.ndarray:
        return (self.cov - target) / self.cov_se

    def to_json(self) -> dict:
        tolist = lambda a: np.where(np.isfinite(a), a, None).tolist()  # noqa: E731
        return {
            "M": self.M,
            "mean": tolist(self.mean),
            "mean_se": tolist(self.mean_se),
            "cov": tolist(self.cov),
            "cov_se": tolist(self.cov_se),
        }


class _Pool:
    """Inverse-variance pooling of repeated estimates of the same entry."""

    def __init__(self, shape):
        self.w = np.zeros(shape)
        self.wx = np.zeros(shape)

    def add(self, idx, value, se):
        wt = 1.0 / max(se, 1e-300) ** 2
        self.w[idx] += wt
        self.wx[idx] += wt * value

    def result(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            val = np.where(self.w > 0, self.wx / self.w, np.nan)
            se = np.where(self.w > 0, 1.0 / np.sqrt(self.w), np.nan)
        return val, se


def estimate_spacetime_gaussian(records, correct_vacuum: bool = True) -> TomographyEstimate:
    """Plug-in estimate of the event means and covariance from one or more records.

    Diagonal entries use 2 (Var - eps^2), minus the eight-port vacuum unit when
    ``correct_vacuum`` is set; off-diagonal entries use twice the sample
    covariance. Sequential columns flagged as disturbed do not contribute
    diagonal entries, and joint records only pair columns from the same time.
    """
    if isinstance(records, HomodyneRecord):
        records = [records]
    records = list(records)
    if not records:
        raise InvalidParameterError("no records given")
    n = records[0].schedule.n_events
    fp = records[0].fingerprint
    for r in records:
        if r.fingerprint != fp:
            raise ScheduleError("records come from different schedules")
        if r.M < MIN_SAMPLES:
            raise SampleSizeError(f"need at least {MIN_SAMPLES} shots per record, got {r.M}")
    means, covs = _Pool(2 * n), _Pool((2 * n, 2 * n))
    for r in records:
        times = [r.schedule.events[e].t for e, _ in r.columns]
        pos = [2 * e + ("q", "p").index(q) if isinstance(q, str) else None for e, q in r.columns]
        vac = EIGHT_PORT_UNIT if (correct_vacuum and r.kind == "eight_port_vacuum_noise") else 0.0
        x = r.samples
        for c, p in enumerate(pos):
            if p is None:
                continue
            means.add(p, *_batch_se(x[:, c], np.mean))
            if r.kind == "sequential" and r.disturbed[c]:
                continue
            val, se = _batch_se(x[:, c], lambda b, c=c: 2 * (b.var() - r.eps**2) - vac)
            covs.add((p, p), val, se)
        for c1 in range(len(pos)):
            for c2 in range(c1 + 1, len(pos)):
                p1, p2 = pos[c1], pos[c2]
                if p1 is None or p2 is None:
                    continue
                if r.kind != "sequential" and times[c1] != times[c2]:
                    continue
                pair = x[:, [c1, c2]]
                stat = lambda b: 2 * np.mean((b[:, 0] - b[:, 0].mean()) * (b[:, 1] - b[:, 1].mean()))  # noqa: E731
                val, se = _batch_se(pair, stat)
                covs.add((p1, p2), val, se)
                covs.add((p2, p1), val, se)
    mean, mean_se = means.result()
    cov, cov_se = covs.result()
    return TomographyEstimate(mean, cov, mean_se, cov_se, min(r.M for r in records))


def mixed_quadrature_protocol(
    schedule: EventSchedule, M: int, eps: float, noise_model: str = "ideal", seed=0, correct_vacuum: bool = True
):
    """Joint same-time (q, p) sampling and its estimate of the same-time blocks."""
    rec = joint_quadrature_record(schedule, M, eps, noise_model, seed)
    return rec, estimate_spacetime_gaussian(rec, correct_vacuum=correct_vacuum)


def tomography_settings(schedule: EventSchedule) -> list:
    """Sequential settings covering every cross-time entry: each pair of events at
    different times is measured alone with every combination of quadratures."""
    out = []
    ev = schedule.events
    for i in range(len(ev)):
        for j in range(i + 1, len(ev)):
            if ev[i].t == ev[j].t:
                continue
            for a in ("q", "p"):
                for b in ("q", "p"):
                    out.append(((i, j), (a, b)))
    return out


def spacetime_tomography(schedule: EventSchedule, M: int, eps: float = 0.05, seed=0, noise_model: str = "ideal"):
    """Full estimate: joint records for same-time blocks, pairwise sequential records for the rest.

    Returns (estimate, records).
    """
    settings = tomography_settings(schedule)
    children = _seedseq(seed).spawn(len(settings) + 1)
    records = [joint_quadrature_record(schedule, M, eps, noise_model, children[0])]
    for child, (evs, qs) in zip(children[1:], settings):
        records.append(simulate_records(schedule, qs, M, eps, child, events=evs))
    return estimate_spacetime_gaussian(records), records


def error_scaling(
    schedule: EventSchedule,
    target: np.ndarray,
    Ms: Sequence[int] = (1000, 10000, 100000),
    reps: int = 20,
    eps: float = 0.05,
    seed=0,
):
    """RMS entrywise error of the full estimate against ``target`` for each M.

    Returns (Ms, rms errors, fitted log-log slope).
    """
    root = _seedseq(seed)
    errs = []
    for M, child in zip(Ms, root.spawn(len(Ms))):
        sq = []
        for rep in child.spawn(reps):
            est, _ = spacetime_tomography(schedule, M, eps, rep)
            sq.append(np.mean((est.cov - target) ** 2))
        errs.append(float(np.sqrt(np.mean(sq))))
    slope = float(np.polyfit(np.log(Ms), np.log(errs), 1)[0])
    return tuple(int(m) for m in Ms), tuple(errs), slope
