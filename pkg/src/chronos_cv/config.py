"""Run configuration schema for the command-line front end.

Every tolerance used by a run lives here with its module default, so a config
file fully determines what was checked. Unknown keys are rejected.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import spacetime_wigner as sw
from . import temporal, tomography, trajectory


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# Gaussian schedules


class GaussianStateSpec(_Strict):
    kind: Literal["vacuum", "thermal", "coherent", "tmss"]
    params: list[float] = []


class GaussianChannelSpec(_Strict):
    kind: Literal["identity", "attenuation", "rotation"]
    params: list[float] = []


class EventSpec(_Strict):
    t: int = Field(ge=0)
    mode: int = Field(0, ge=0)


class ScheduleSpec(_Strict):
    initial: GaussianStateSpec
    events: list[EventSpec] = Field(min_length=1)
    channels: list[GaussianChannelSpec] = []
    eps: list[float] = list(temporal.DEFAULT_EPS_LADDER)

    def build(self) -> temporal.EventSchedule:
        return temporal.EventSchedule.from_json(self.model_dump(exclude={"eps"}))


class GaussianRun(_Strict):
    schedule: ScheduleSpec
    extrapolation_tol: float = Field(temporal.EXTRAPOLATION_TOL, gt=0)
    analytic_tol: float = Field(1e-9, gt=0)
    # temporal Wigner normalization, singular directions regularized
    wigner_reg: float = Field(1e-3, gt=0)
    wigner_step: float = Field(0.25, gt=0)
    wigner_radius: float = Field(6.0, gt=0)
    normalization_tol: float = Field(1e-2, gt=0)
    heisenberg_tol: float = Field(1e-3, gt=0)
    mixing_tol: float = Field(1e-3, gt=0)
    fock_dim: int = Field(40, ge=8)


# Fock-space configurations for fields and spacetime density matrices


class FockStateSpec(_Strict):
    kind: Literal["vacuum", "thermal", "coherent", "fock", "tmss", "product"]
    params: list[float] = []
    factors: list["FockStateSpec"] = []

    @model_validator(mode="after")
    def _factors_only_for_products(self):
        if (self.kind == "product") != bool(self.factors):
            raise ValueError("factors must be given exactly when kind is 'product'")
        return self


class KrausChannelSpec(_Strict):
    kind: Literal["identity", "attenuation", "rotation", "reset", "none"]
    params: list[float] = []
    mode: int = Field(0, ge=0)


class FieldRun(_Strict):
    initial: FockStateSpec
    dim: int = Field(40, ge=4, le=200)
    modes: list[int] = Field([0, 0], min_length=1, max_length=sw.MAX_EVENTS)
    channels: list[KrausChannelSpec] = [KrausChannelSpec(kind="attenuation", params=[0.5])]
    radius: float = Field(4.0, gt=0)
    step: float = Field(0.25, gt=0)
    rim_tol: float = Field(sw.RIM_TOL, gt=0)
    max_step: float = Field(sw.MAX_STEP, gt=0)
    block: Optional[int] = Field(None, ge=2)
    normalization_tol: float = Field(0.02, gt=0)
    trace_tol: float = Field(0.05, gt=0)
    roundtrip_tol: float = Field(0.02, gt=0)
    hermitian_tol: float = Field(1e-8, gt=0)
    imag_tol: float = Field(1e-10, gt=0)


class PdmRun(FieldRun):
    construction: Literal["choi", "grid"] = "choi"
    n_probes: int = Field(20, ge=1)
    probe_radius: float = Field(1.0, gt=0)
    cross_tol: float = Field(1e-6, gt=0)


class PropertiesRun(FieldRun):
    n_probes: int = Field(8, ge=1)
    property_tol: float = Field(0.02, gt=0)
    exact_tol: float = Field(1e-6, gt=0)
    expectation_tol: float = Field(0.05, gt=0)
    mixing_tol: float = Field(1e-8, gt=0)


# Trajectories


class HamiltonianSpec(_Strict):
    kind: Literal["free", "harmonic", "frozen"] = "free"
    m: float = Field(1.0, gt=0)
    omega: float = Field(1.0, gt=0)


class PositionGridSpec(_Strict):
    x_min: float = -12.0
    x_max: float = 12.0
    n_points: int = Field(1024, ge=16)

    @model_validator(mode="after")
    def _ordered(self):
        if self.x_max <= self.x_min:
            raise ValueError("x_max must exceed x_min")
        return self


class PacketSpec(_Strict):
    kind: Literal["packet", "harmonic_ground"] = "packet"
    x0: float = 0.0
    p0: float = 0.0
    sigma: float = Field(1.0, gt=0)


class AxisSpec(_Strict):
    start: float
    stop: float
    step: float = Field(gt=0)

    def values(self) -> np.ndarray:
        n = int(round((self.stop - self.start) / self.step))
        return self.start + self.step / 2 + self.step * np.arange(n)


class WeakSpec(_Strict):
    gamma: float = Field(0.5, gt=0)
    lam: float = Field(1.0, gt=0)
    slices: int = Field(8, ge=1)
    times: list[float] = [1.0]
    dim: int = Field(40, ge=4)
    omega: float = 0.0
    max_slice_deviation: float = Field(0.5, gt=0)
    probe_axis: AxisSpec = AxisSpec(start=-7.0, stop=7.0, step=0.5)
    normalization_tol: float = Field(0.05, gt=0)


class TrajectoryRun(_Strict):
    hamiltonian: HamiltonianSpec = HamiltonianSpec()
    times: list[float] = Field([0.0, 1.0], min_length=1, max_length=4)
    eps: float = Field(0.5, gt=0)
    grid: PositionGridSpec = PositionGridSpec()
    initial: PacketSpec = PacketSpec()
    outcome_axis: AxisSpec = AxisSpec(start=-8.0, stop=8.0, step=0.2)
    normalization_tol: float = Field(1e-3, gt=0)
    edge_tol: float = Field(trajectory.EDGE_TOL, gt=0)
    lattice_check: bool = True
    lattice_tol: float = Field(0.01, gt=0)
    weak: Optional[WeakSpec] = None

    @field_validator("times")
    @classmethod
    def _increasing(cls, v):
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("times must be strictly increasing")
        return v


# Tomography


class TomoRun(_Strict):
    schedule: ScheduleSpec
    M: int = Field(100000, ge=tomography.MIN_SAMPLES)
    eps: float = Field(0.05, gt=0)
    noise_model: Literal["ideal", "eight_port_vacuum_noise"] = "ideal"
    z_tol: float = Field(3.0, gt=0)
    scaling: bool = False
    scaling_M: list[int] = [1000, 10000, 100000]
    scaling_reps: int = Field(20, ge=2)
    slope_target: float = -0.5
    slope_tol: float = Field(0.1, gt=0)
    write_records: bool = True


SUBCOMMANDS = ("gaussian", "wigner-grid", "pdm", "properties", "trajectory", "tomo")
_BLOCKS = {
    "gaussian": "gaussian",
    "wigner-grid": "wigner_grid",
    "pdm": "pdm",
    "properties": "properties",
    "trajectory": "trajectory",
    "tomo": "tomo",
}


class RunConfig(_Strict):
    subcommand: Literal["gaussian", "wigner-grid", "pdm", "properties", "trajectory", "tomo"]
    seed: int = Field(0, ge=0)
    output: str = "chronos_out"
    deterministic: bool = False
    gaussian: Optional[GaussianRun] = None
    wigner_grid: Optional[FieldRun] = None
    pdm: Optional[PdmRun] = None
    properties: Optional[PropertiesRun] = None
    trajectory: Optional[TrajectoryRun] = None
    tomo: Optional[TomoRun] = None

    @model_validator(mode="after")
    def _block_present(self):
        key = _BLOCKS[self.subcommand]
        if getattr(self, key) is None:
            raise ValueError(f"subcommand {self.subcommand!r} needs a {key!r} block")
        return self

    @property
    def block(self):
        return getattr(self, _BLOCKS[self.subcommand])


def load_config(path) -> RunConfig:
    text = Path(path).read_text()
    return RunConfig.model_validate(json.loads(text))
