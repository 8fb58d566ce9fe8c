"""Run configuration: a YAML tree validated with pydantic, unknown keys rejected."""

from __future__ import annotations

from pathlib import Path
from typing import Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .lattice import DEFAULT_LATTICE_VECTORS, PhysicalConstants, TriclinicLattice
from .potentials import FourierPotential, Parity, random_fourier_potential

Vec3 = tuple[float, float, float]
IntVec3 = tuple[int, int, int]

GENERIC_K = (0.137, 0.211, 0.093)


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class LatticeSpec(Strict):
    a1: Vec3 = tuple(DEFAULT_LATTICE_VECTORS[0])
    a2: Vec3 = tuple(DEFAULT_LATTICE_VECTORS[1])
    a3: Vec3 = tuple(DEFAULT_LATTICE_VECTORS[2])

    def build(self) -> TriclinicLattice:
        return TriclinicLattice.from_vectors(self.a1, self.a2, self.a3)


class ConstantsSpec(Strict):
    hbar: float = 1.0
    mass: float = 1.0
    charge: float = 1.0
    c_light: float = 137.035999
    so_scale: float = Field(1.0, ge=0)

    def build(self) -> PhysicalConstants:
        return PhysicalConstants(self.hbar, self.mass, self.charge, self.c_light, self.so_scale)


class Amplitude(Strict):
    g: IntVec3
    re: float = 0.0
    im: float = 0.0


class PotentialSpec(Strict):
    """Either explicit amplitudes or a seeded shell-limited random map."""

    parity: Parity
    amplitudes: list[Amplitude] | None = None
    shells: int = Field(3, ge=1)
    amplitude: float = Field(0.2, gt=0)
    decay: float = Field(0.6, gt=0, lt=1)
    seed: int | None = Field(None, ge=0)

    def build(self, lattice: TriclinicLattice, stream_seed: int) -> FourierPotential:
        if self.amplitudes is not None:
            return FourierPotential({a.g: complex(a.re, a.im) for a in self.amplitudes}, self.parity)
        seed = self.seed if self.seed is not None else stream_seed
        return random_fourier_potential(lattice, seed, self.parity, self.shells, self.amplitude, self.decay)


class VerifySpec(Strict):
    n_states: int = Field(50, ge=1)
    gmax: float = Field(23.0, gt=0)
    axes: list[Vec3] = [(0.0, 0.0, 1.0), (1.0, 1.0, 1.0)]
    n_eigenstates: int = Field(10, ge=1)


class BandsSpec(Strict):
    nodes: list[Vec3] = [(0.0, 0.0, 0.0), (0.5, 0.0, 0.0), (0.5, 0.5, 0.0), (0.0, 0.0, 0.0), (0.5, 0.5, 0.5)]
    samples_per_segment: int = Field(12, ge=1)
    n_bands: int = Field(8, ge=1)
    regime: Literal["pinacoidal", "pedial"] = "pedial"
    spin_orbit: bool = True
    plot: bool = False


class DegeneracySpec(Strict):
    n_quartets: int = Field(8, ge=1)


class NullResultSpec(Strict):
    n_seeds: int = Field(20, ge=1)
    lambdas: list[float] = [1e-3, 2e-3, 4e-3, 8e-3]
    window: float = Field(1e-2, gt=0)


class ExternalSpec(Strict):
    supercell: IntVec3 = (8, 1, 1)
    m: IntVec3 = (1, 0, 0)
    direction: IntVec3 = (1, 0, 0)
    origin: float = 0.0
    lambda_ref: float = Field(1e-3, gt=0)
    lambdas: list[float] = [1e-4, 2e-4, 4e-4, 8e-4]
    bulk_scale: float = Field(0.02, gt=0)
    window_factor: float = Field(50.0, gt=0)
    tolerance: float = Field(0.05, gt=0)

    @field_validator("supercell")
    @classmethod
    def _positive(cls, v):
        if min(v) < 1:
            raise ValueError("supercell repetitions must be >= 1")
        return v


class RunConfig(Strict):
    seed: int = Field(20240917, ge=0, lt=2**64)
    lattice: LatticeSpec = LatticeSpec()
    gmax: float = Field(16.0, gt=0)
    constants: ConstantsSpec = ConstantsSpec()
    v0: PotentialSpec = PotentialSpec(parity=Parity.EVEN, amplitude=0.2)
    phi: PotentialSpec = PotentialSpec(parity=Parity.ODD, amplitude=0.02)
    kpoint: Vec3 = GENERIC_K
    band: int = Field(0, ge=0)
    spin_axis: Vec3 = (0.0, 0.0, 1.0)
    verify: VerifySpec = VerifySpec()
    bands: BandsSpec = BandsSpec()
    degeneracy: DegeneracySpec = DegeneracySpec()
    null_result: NullResultSpec = NullResultSpec()
    external: ExternalSpec = ExternalSpec()

    @model_validator(mode="after")
    def _check(self):
        if self.v0.parity is not Parity.EVEN:
            raise ValueError("v0 must have parity 'even'")
        if self.phi.parity is not Parity.ODD:
            raise ValueError("phi must have parity 'odd'")
        if np.linalg.norm(self.spin_axis) == 0:
            raise ValueError("spin_axis must be nonzero")
        return self

    def with_seed(self, seed: int | None) -> RunConfig:
        return self if seed is None else self.model_copy(update={"seed": seed})

    def echo(self) -> dict:
        return self.model_dump(mode="json")


def stream_seeds(seed: int, count: int) -> list[int]:
    """Independent child seeds derived from the run seed."""
    return [int(s.generate_state(1, dtype=np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
