"""Build numerical objects from validated config blocks and run each workflow.

Each ``run_*`` function returns a plain dict of results plus the arrays the
command-line front end writes out; nothing here touches the filesystem.
"""

from __future__ import annotations

import numpy as np

from . import config as C
from .choi import choi_spacetime_state
from .fock import (
    FockState,
    attenuation_kraus,
    coherent_ket,
    identity_kraus,
    reset_to_vacuum_kraus,
    rotation_kraus,
    thermal_rho,
    tmss_ket,
)
from .errors import InvalidParameterError
from .gaussian import check_uncertainty
from .spacetime_wigner import (
    PhaseSpaceGrid,
    SequentialConfig,
    _embed,
    assemble_R,
    r_to_wigner,
    r_to_wigner_grid,
    sequential_t_correlation,
    wigner_field,
)
from .temporal import analytic_spacetime_gaussian, build_spacetime_gaussian
from .tomography import error_scaling, spacetime_tomography
from .trajectory import (
    Hamiltonian,
    PositionGrid,
    TrajectoryConfig,
    WeakMeasConfig,
    diagonal_spacetime_density,
    gaussian_packet,
    harmonic_ground,
    joint_position_probability,
    path_lattice_probability,
    weak_density_grid,
)

# builders


def fock_rho(spec: C.FockStateSpec, dim: int) -> tuple[np.ndarray, int]:
    """Density matrix of the spec with ``dim`` levels per mode, and its mode count."""
    p = spec.params
    if spec.kind == "vacuum":
        rho = np.zeros((dim, dim), complex)
        rho[0, 0] = 1
        return rho, 1
    if spec.kind == "thermal":
        return thermal_rho(p[0], dim), 1
    if spec.kind == "coherent":
        v = coherent_ket(complex(p[0], p[1] if len(p) > 1 else 0.0), dim)
        return np.outer(v, v.conj()), 1
    if spec.kind == "fock":
        n = int(p[0])
        if not 0 <= n < dim:
            raise InvalidParameterError(f"Fock level {n} outside dimension {dim}")
        rho = np.zeros((dim, dim), complex)
        rho[n, n] = 1
        return rho, 1
    if spec.kind == "tmss":
        v = tmss_ket(p[0], dim)
        return np.outer(v, v.conj()), 2
    rho, modes = np.ones((1, 1), complex), 0
    for f in spec.factors:
        r, m = fock_rho(f, dim)
        rho, modes = np.kron(rho, r), modes + m
    return rho, modes


def kraus_channel(spec: C.KrausChannelSpec, dim: int, n_modes: int):
    if spec.kind == "none":
        return None
    if spec.mode >= n_modes:
        raise InvalidParameterError(f"channel acts on mode {spec.mode} of a {n_modes}-mode state")
    p = spec.params
    local = {
        "identity": lambda: identity_kraus(dim),
        "attenuation": lambda: attenuation_kraus(p[0], dim),
        "rotation": lambda: rotation_kraus(p[0], dim),
        "reset": lambda: reset_to_vacuum_kraus(dim),
    }[spec.kind]()
    return [_embed(K, spec.mode, n_modes, dim) for K in local]


def sequential_config(run: C.FieldRun) -> SequentialConfig:
    rho, n_modes = fock_rho(run.initial, run.dim)
    chans = tuple(kraus_channel(c, run.dim, n_modes) for c in run.channels)
    return SequentialConfig(FockState(rho, n_modes=n_modes), tuple(run.modes), chans)


def trajectory_config(run: C.TrajectoryRun) -> TrajectoryConfig:
    grid = PositionGrid(run.grid.x_min, run.grid.x_max, run.grid.n_points)
    h = run.hamiltonian
    ham = Hamiltonian(h.kind, h.m, h.omega)
    if run.initial.kind == "harmonic_ground":
        psi0 = harmonic_ground(grid, h.m, h.omega)
    else:
        psi0 = gaussian_packet(grid, run.initial.x0, run.initial.p0, run.initial.sigma)
    return TrajectoryConfig(ham, tuple(run.times), run.eps, grid, psi0, run.edge_tol)


def field_grid(run: C.FieldRun) -> PhaseSpaceGrid:
    return PhaseSpaceGrid(run.radius, run.step)


# workflows


def run_gaussian(run: C.GaussianRun) -> dict:
    schedule = run.schedule.build()
    st = build_spacetime_gaussian(schedule, tuple(run.schedule.eps), run.extrapolation_tol)
    exact = analytic_spacetime_gaussian(schedule)
    sym = 0.5 * (st.cov + st.cov.T)
    n = st.n_events
    omega = np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    return {
        "schedule": schedule,
        "estimate": st,
        "analytic": exact,
        "summary": {
            "n_events": n,
            "max_dev_vs_analytic": float(np.abs(st.cov - exact.cov).max()),
            "analytic_tol": run.analytic_tol,
            "extrapolation_tol": run.extrapolation_tol,
            "max_residual": float(np.max(st.residuals)) if st.residuals is not None else 0.0,
            "nonconvergent": [list(map(float, b)) for b in st.nonconvergent],
            "min_eig_sigma_plus_i_omega": float(np.linalg.eigvalsh(sym + 1j * omega).min()),
            "initial_state_physical": check_uncertainty(schedule.initial)["physical"],
        },
    }


def run_field(run: C.FieldRun, assemble: bool = True) -> dict:
    cfg = sequential_config(run)
    grid = field_grid(run)
    field = wigner_field(cfg, grid)
    out = {
        "config": cfg,
        "field": field,
        "summary": {
            "n_events": field.n_events,
            "dim": field.dim,
            "integral": field.integral(),
            "normalization_tol": run.normalization_tol,
            "rim_max": field.rim_max,
            "rim_tol": run.rim_tol,
            "imag_max": field.imag_max,
        },
    }
    if assemble and field.n_events <= 2:
        R = assemble_R(field, run.block, run.rim_tol, run.max_step)
        back = r_to_wigner_grid(R, grid).reshape(field.values.shape)
        out["R"] = R
        out["summary"].update(
            {
                "trace_R": R.trace(),
                "trace_tol": run.trace_tol,
                "hermiticity_residual": R.hermiticity_residual(),
                "roundtrip_max_dev": float(np.abs(back - field.values).max()),
                "roundtrip_tol": run.roundtrip_tol,
                "block": R.dim,
            }
        )
    return out


def cross_check(cfg: SequentialConfig, R, n_probes: int, radius: float, rng: np.random.Generator) -> dict:
    """R from the channel-state construction against sequential correlations at random probes."""
    worst = 0.0
    rows = []
    for _ in range(n_probes):
        a, b = (complex(*rng.uniform(-radius, radius, 2)) for _ in range(2))
        direct = sequential_t_correlation(cfg, [a, b])
        via_r = r_to_wigner(R, [a, b])
        worst = max(worst, abs(direct - via_r))
        rows.append([a.real, a.imag, b.real, b.imag, direct, via_r])
    return {"max_dev": worst, "rows": rows}


def run_pdm(run: C.PdmRun, seed: int) -> dict:
    if run.construction == "grid":
        out = run_field(run, assemble=True)
        return {"R": out["R"], "summary": out["summary"], "field": out["field"]}
    cfg = sequential_config(run)
    if cfg.n_events != 2 or cfg.rho0.n_modes != 1 or cfg.channels[0] is None:
        raise InvalidParameterError("the channel-state construction needs one mode, two events and a channel")
    R = choi_spacetime_state(cfg.rho0, cfg.channels[0])
    check = cross_check(cfg, R, run.n_probes, run.probe_radius, np.random.default_rng(seed))
    return {
        "R": R,
        "probes": check["rows"],
        "summary": {
            "dim": R.dim,
            "trace_R": R.trace(),
            "hermiticity_residual": R.hermiticity_residual(),
            "min_eig": R.min_eig(),
            "cross_check_max_dev": check["max_dev"],
            "cross_tol": run.cross_tol,
        },
    }


def run_trajectory(run: C.TrajectoryRun) -> dict:
    cfg = trajectory_config(run)
    axis = run.outcome_axis.values()
    dens = diagonal_spacetime_density(cfg, axis)
    total = float(dens.weights.sum())
    summary = {
        "n_events": cfg.n_events,
        "normalization": total,
        "normalization_tol": run.normalization_tol,
        "min_weight": float(dens.density.min()),
    }
    if cfg.n_events > 1:
        summary["correlation_01"] = dens.correlation(0, 1)
    if run.lattice_check and run.hamiltonian.kind == "free" and cfg.n_events >= 2:
        summary.update(lattice_agreement(cfg))
        summary["lattice_tol"] = run.lattice_tol
    out = {"density": dens, "summary": summary}
    if run.weak is not None:
        w = run.weak
        wc = WeakMeasConfig(w.gamma, w.lam, w.slices, tuple(w.times), w.dim, w.omega, 0.0, w.max_slice_deviation)
        rho0 = np.zeros((w.dim, w.dim), complex)
        rho0[0, 0] = 1
        ax = w.probe_axis.values()
        wd = weak_density_grid(rho0, wc, ax)
        cell = w.probe_axis.step ** (2 * len(w.times))
        out["weak"] = (ax, wd)
        summary["weak_normalization"] = float(wd.sum() * cell)
        summary["weak_normalization_tol"] = w.normalization_tol
        summary["weak_min"] = float(wd.min())
    return out


def lattice_agreement(cfg: TrajectoryConfig, outcomes=((0.0, 0.0), (0.5, -0.3), (1.0, 1.0)), slices: int = 3) -> dict:
    """Operator slicing against the explicit path-lattice sum on the first two events."""
    two = TrajectoryConfig(cfg.hamiltonian, cfg.times[:2], cfg.eps[:2], cfg.grid, cfg.psi0, cfg.edge_tol)
    lattice = np.linspace(-8.0, 8.0, 401)
    worst = 0.0
    for o in outcomes:
        a = joint_position_probability(two, o)
        b = path_lattice_probability(two, o, lattice, slices)
        worst = max(worst, abs(a - b) / max(abs(a), 1e-300))
    return {"lattice_rel_dev": worst}


def run_tomo(run: C.TomoRun, seed: int) -> dict:
    schedule = run.schedule.build()
    est, records = spacetime_tomography(schedule, run.M, run.eps, seed, run.noise_model)
    target = analytic_spacetime_gaussian(schedule).cov
    z = est.z_scores(target)
    summary = {
        "M": run.M,
        "eps": run.eps,
        "noise_model": run.noise_model,
        "max_abs_z": float(np.nanmax(np.abs(z))),
        "z_tol": run.z_tol,
        "worst_entry": [int(i) for i in np.unravel_index(np.nanargmax(np.abs(z)), z.shape)],
    }
    if run.scaling:
        Ms, errs, slope = error_scaling(schedule, target, tuple(run.scaling_M), run.scaling_reps, run.eps, seed)
        summary.update({"scaling_M": list(Ms), "scaling_rms_error": list(errs), "slope": slope,
                        "slope_target": run.slope_target, "slope_tol": run.slope_tol})
    return {"estimate": est, "records": records, "target": target, "summary": summary}

