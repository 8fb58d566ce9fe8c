"""Fourier-series potentials: periodic V0 / phi with parity tags, and
translation-breaking external potentials V' periodized on a supercell.

A :class:`FourierPotential` stores amplitudes on the integer grid
``Q = sum_i n_i b_i / grid_i``. Unit-cell periodic potentials use
``grid = (1, 1, 1)``; external potentials use the supercell repetition
numbers as their grid.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from math import gcd

import numpy as np

from .errors import NonHermitianAmplitudes, ParityViolation
from .lattice import TWO_PI, TriclinicLattice, enumerate_gvectors

AMP_TOL = 1e-12


class Parity(str, enum.Enum):
    EVEN = "even"
    ODD = "odd"
    NONE = "none"


def _label(g) -> tuple[int, int, int]:
    return (int(g[0]), int(g[1]), int(g[2]))


@dataclass(frozen=True, eq=False)
class FourierPotential:
    """V(r) = sum_Q amp(Q) e^{iQ.r}, amplitudes in Hartree."""

    amplitudes: dict
    parity: Parity = Parity.NONE
    grid: tuple = (1, 1, 1)

    def __post_init__(self):
        amps = {_label(g): complex(v) for g, v in self.amplitudes.items()}
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "parity", Parity(self.parity))
        object.__setattr__(self, "grid", _label(self.grid))
        herm = self.real_field_residual()
        if herm > AMP_TOL:
            raise NonHermitianAmplitudes(f"amp(-G) != conj(amp(G)) by {herm:.3e}")
        even_res, odd_res = parity_residual(self)
        if self.parity is Parity.EVEN and even_res > AMP_TOL:
            raise ParityViolation(f"potential tagged even has even_residual {even_res:.3e}")
        if self.parity is Parity.ODD:
            if odd_res > AMP_TOL:
                raise ParityViolation(f"potential tagged odd has odd_residual {odd_res:.3e}")
            if abs(amps.get((0, 0, 0), 0.0)) > AMP_TOL:
                raise ParityViolation("odd potential must have zero mean amplitude")

    @classmethod
    def zero(cls, grid=(1, 1, 1)) -> FourierPotential:
        return cls({}, Parity.EVEN, grid)

    def __len__(self):
        return len(self.amplitudes)

    def amp(self, g) -> complex:
        return self.amplitudes.get(_label(g), 0j)

    def real_field_residual(self) -> float:
        worst = 0.0
        for g, v in self.amplitudes.items():
            partner = self.amplitudes.get((-g[0], -g[1], -g[2]), 0j)
            worst = max(worst, abs(partner - v.conjugate()))
        return worst

    def is_zero(self) -> bool:
        return all(abs(v) == 0 for v in self.amplitudes.values())

    def scaled(self, factor: float) -> FourierPotential:
        return FourierPotential(
            {g: factor * v for g, v in self.amplitudes.items()}, self.parity, self.grid
        )

    def __add__(self, other: FourierPotential) -> FourierPotential:
        if self.grid != other.grid:
            raise ValueError("cannot add potentials on different grids")
        merged = dict(self.amplitudes)
        for g, v in other.amplitudes.items():
            merged[g] = merged.get(g, 0j) + v
        parity = self.parity if self.parity is other.parity else Parity.NONE
        return FourierPotential(merged, parity, self.grid)

    @cached_property
    def _dense(self):
        if not self.amplitudes:
            return np.zeros((1, 1, 1), dtype=complex), np.zeros(3, dtype=np.int64)
        labels = np.array(list(self.amplitudes.keys()), dtype=np.int64)
        ext = np.abs(labels).max(axis=0)
        table = np.zeros(tuple(2 * ext + 1), dtype=complex)
        idx = labels + ext
        table[idx[:, 0], idx[:, 1], idx[:, 2]] = list(self.amplitudes.values())
        table.setflags(write=False)
        return table, ext

    def lookup(self, q_frac) -> np.ndarray:
        """Amplitudes at momentum transfers given in units of the unit-cell b_i.

        Transfers that do not fall on this potential's grid get amplitude 0;
        this is what makes periodic potentials blind to k -> -k couplings
        at a generic k.
        """
        q = np.asarray(q_frac, dtype=float) * np.asarray(self.grid, dtype=float)
        qi = np.rint(q)
        on_grid = np.all(np.abs(q - qi) < 1e-8, axis=-1)
        qi = qi.astype(np.int64)
        table, ext = self._dense
        inside = on_grid & np.all(np.abs(qi) <= ext, axis=-1)
        out = np.zeros(q.shape[:-1], dtype=complex)
        hit = qi[inside] + ext
        out[inside] = table[hit[:, 0], hit[:, 1], hit[:, 2]]
        return out

    def cartesian(self, lattice: TriclinicLattice) -> tuple[np.ndarray, np.ndarray]:
        """(Q vectors, amplitudes) as arrays, in insertion order."""
        if not self.amplitudes:
            return np.zeros((0, 3)), np.zeros(0, dtype=complex)
        labels = np.array(list(self.amplitudes.keys()), dtype=float)
        q = lattice.cartesian_k(labels / np.asarray(self.grid, dtype=float))
        return q, np.array(list(self.amplitudes.values()), dtype=complex)

    def to_spec(self) -> dict:
        return {
            "parity": self.parity.value,
            "grid": list(self.grid),
            "amplitudes": [
                {"g": list(g), "re": v.real, "im": v.imag}
                for g, v in sorted(self.amplitudes.items())
            ],
        }


def parity_residual(potential: FourierPotential) -> tuple[float, float]:
    """(max_G |amp(-G) - amp(G)|, max_G |amp(-G) + amp(G)|)."""
    even_res = 0.0
    odd_res = 0.0
    amps = potential.amplitudes
    for g, v in amps.items():
        partner = amps.get((-g[0], -g[1], -g[2]), 0j)
        even_res = max(even_res, abs(partner - v))
        odd_res = max(odd_res, abs(partner + v))
    return even_res, odd_res


def _shells(lattice: TriclinicLattice, count: int) -> list[list[tuple[int, int, int]]]:
    """Lowest `count` nonzero |G| shells, each as a list of +/- pairs' representatives."""
    gmax = 1.05 * np.linalg.norm(lattice.reciprocal, axis=1).min()
    while True:
        gvecs = enumerate_gvectors(lattice, gmax)[1:]
        norms = np.linalg.norm(gvecs @ lattice.reciprocal, axis=1)
        shells: list[list[tuple[int, int, int]]] = []
        last = None
        for g, nrm in zip(gvecs.tolist(), norms):
            nz = next(x for x in g if x != 0)
            if nz < 0:
                continue
            if last is None or nrm > last * (1 + 1e-9):
                shells.append([])
                last = nrm
            shells[-1].append(_label(g))
        # the outermost shell may be incomplete at this cutoff
        if len(shells) > count:
            return shells[:count]
        gmax *= 1.5


def random_fourier_potential(
    lattice: TriclinicLattice,
    seed: int,
    parity: Parity | str,
    shell_count: int,
    amplitude_scale: float,
    decay: float,
) -> FourierPotential:
    """Seeded shell-limited potential: |amp| = scale * decay**shell_index.

    Even maps get real amplitudes with a random sign, odd maps purely
    imaginary ones with amp(-G) = -amp(G); untagged maps get a random phase.
    """
    parity = Parity(parity)
    if shell_count < 1:
        raise ValueError("shell_count must be >= 1")
    if not amplitude_scale > 0:
        raise ValueError("amplitude_scale must be positive")
    if not 0 < decay < 1:
        raise ValueError("decay must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    amps: dict[tuple[int, int, int], complex] = {}
    for index, shell in enumerate(_shells(lattice, shell_count)):
        magnitude = amplitude_scale * decay**index
        for g in shell:
            neg = (-g[0], -g[1], -g[2])
            if parity is Parity.EVEN:
                v = magnitude * rng.choice((-1.0, 1.0))
                amps[g], amps[neg] = complex(v), complex(v)
            elif parity is Parity.ODD:
                v = 1j * magnitude * rng.choice((-1.0, 1.0))
                amps[g], amps[neg] = v, -v
            else:
                v = magnitude * np.exp(1j * rng.uniform(0.0, TWO_PI))
                amps[g], amps[neg] = complex(v), complex(np.conj(v))
    return FourierPotential(amps, parity)


def evaluate_real(potential: FourierPotential, lattice: TriclinicLattice, r_points) -> np.ndarray:
    """V(r) at Cartesian points, shape (..., 3) -> (...)."""
    r = np.asarray(r_points, dtype=float)
    herm = potential.real_field_residual()
    if herm > AMP_TOL:
        raise NonHermitianAmplitudes(f"real-field residual {herm:.3e}")
    q, a = potential.cartesian(lattice)
    if len(a) == 0:
        return np.zeros(r.shape[:-1])
    flat = r.reshape(-1, 3)
    values = np.exp(1j * (flat @ q.T)) @ a
    scale = max(1.0, float(np.abs(a).sum()))
    if np.abs(values.imag).max() > AMP_TOL * scale:
        raise NonHermitianAmplitudes(
            f"imaginary part {np.abs(values.imag).max():.3e} in real-space evaluation"
        )
    return values.real.reshape(r.shape[:-1])


@dataclass(frozen=True, eq=False)
class ExternalPotential:
    """Translation-breaking V' periodized over a supercell of `supercell_n` cells.

    Only harmonics that are *not* unit-cell reciprocal vectors are kept: the
    unit-periodic remainder of a sawtooth or bump is an ordinary crystal
    potential and belongs to V0/phi, not to V'.
    """

    kind: str
    direction: np.ndarray | None
    strength: float
    supercell_n: tuple
    fourier: FourierPotential
    params: dict = field(default_factory=dict)

    def profile(self, lattice: TriclinicLattice, r_points) -> np.ndarray:
        """Exact real-space V'(r); for the sawtooth this is free of Fourier truncation."""
        r = np.asarray(r_points, dtype=float)
        if self.kind == "sawtooth":
            q1 = lattice.cartesian_k(np.asarray(self.params["harmonic"]) / np.asarray(self.supercell_n))
            period = self.params["unit_period"]
            t = r @ q1 / TWO_PI - self.params.get("origin", 0.0)
            saw = (t - np.floor(t)) - 0.5
            unit = (period * t - np.floor(period * t)) - 0.5
            return self.strength * (saw - unit / period)
        return evaluate_real(self.fourier, lattice, r)

    def describe(self) -> dict:
        out = {
            "kind": self.kind,
            "strength": self.strength,
            "supercell": list(self.supercell_n),
            "n_amplitudes": len(self.fourier),
        }
        if self.direction is not None:
            out["direction"] = [float(x) for x in self.direction]
        out.update({k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params.items()})
        return out


def _is_unit_periodic(label, supercell_n) -> bool:
    return all(x % n == 0 for x, n in zip(label, supercell_n))


def sawtooth_external(
    lattice: TriclinicLattice,
    direction,
    strength: float,
    supercell_n,
    qmax: float,
    origin: float = 0.0,
) -> ExternalPotential:
    """Sawtooth V'(r) = strength * (frac(Q1.r / 2pi) - 1/2), unit-periodic part removed.

    ``direction`` is an integer triple p in reciprocal coordinates: the
    field varies along u_E = (p . b) / |p . b|, and Q1 is the shortest
    supercell reciprocal vector parallel to it. Harmonics n Q1 carry
    amp = i strength / (2 pi n) for |n Q1| <= qmax. ``origin`` shifts the
    jump to Q1.r / 2pi = origin, multiplying each harmonic by e^{-2 pi i n origin}.
    """
    if strength < 0:
        raise ValueError("strength must be >= 0")
    n_cells = _label(supercell_n)
    p = _label(direction)
    if p == (0, 0, 0):
        raise ValueError("direction must be a nonzero integer triple")
    scaled = [pi * ni for pi, ni in zip(p, n_cells)]
    common = gcd(gcd(abs(scaled[0]), abs(scaled[1])), abs(scaled[2]))
    harmonic = tuple(x // common for x in scaled)
    q1 = lattice.cartesian_k(np.array(harmonic) / np.array(n_cells))
    unit_period = next(
        m for m in range(1, int(np.prod(n_cells)) + 1)
        if _is_unit_periodic([m * h for h in harmonic], n_cells)
    )
    n_max = int(np.floor(qmax / np.linalg.norm(q1) + 1e-12))
    amps: dict[tuple[int, int, int], complex] = {}
    for n in range(1, n_max + 1):
        if n % unit_period == 0:
            continue
        v = 1j * strength / (TWO_PI * n) * np.exp(-1j * TWO_PI * n * origin)
        amps[tuple(n * h for h in harmonic)] = v
        amps[tuple(-n * h for h in harmonic)] = np.conj(v)
    fourier = FourierPotential(amps, Parity.NONE, n_cells)
    return ExternalPotential(
        kind="sawtooth",
        direction=q1 / np.linalg.norm(q1),
        strength=float(strength),
        supercell_n=n_cells,
        fourier=fourier,
        params={"harmonic": harmonic, "unit_period": unit_period, "qmax": float(qmax), "origin": float(origin)},
    )


def gaussian_external(
    lattice: TriclinicLattice,
    strength: float,
    supercell_n,
    width: float,
    center,
    qmax: float,
) -> ExternalPotential:
    """Periodized Gaussian bump centred at fractional supercell position `center`."""
    if strength < 0:
        raise ValueError("strength must be >= 0")
    if not width > 0:
        raise ValueError("width must be positive")
    n_cells = _label(supercell_n)
    super_lattice = lattice.supercell(n_cells)
    r0 = super_lattice.cartesian_r(np.asarray(center, dtype=float))
    labels = enumerate_gvectors(super_lattice, qmax)
    q = super_lattice.cartesian_k(labels)
    pref = strength * (TWO_PI * width**2) ** 1.5 / super_lattice.volume
    values = pref * np.exp(-0.5 * width**2 * np.sum(q * q, axis=1)) * np.exp(-1j * (q @ r0))
    amps = {
        _label(g): complex(v)
        for g, v in zip(labels.tolist(), values)
        if not _is_unit_periodic(g, n_cells)
    }
    # exact conjugate pairs: rounding in exp(-iQ.r0) is not symmetric
    for g in list(amps):
        neg = (-g[0], -g[1], -g[2])
        if g > neg:
            amps[g] = amps[neg].conjugate()
    fourier = FourierPotential(amps, Parity.NONE, n_cells)
    return ExternalPotential(
        kind="gaussian",
        direction=None,
        strength=float(strength),
        supercell_n=n_cells,
        fourier=fourier,
        params={"width": float(width), "center": tuple(float(c) for c in center), "qmax": float(qmax)},
    )


def translation_breaking(ext: ExternalPotential, lattice: TriclinicLattice, r_points) -> float:
    """max over points and primitive a_i of |V'(r + a_i) - V'(r)|."""
    r = np.asarray(r_points, dtype=float).reshape(-1, 3)
    base = ext.profile(lattice, r)
    return max(
        float(np.abs(ext.profile(lattice, r + a) - base).max()) for a in lattice.direct
    )
