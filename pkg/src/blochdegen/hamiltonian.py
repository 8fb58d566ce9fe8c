"""Plane-wave matrices for H0, -e phi and the spin-orbit terms U1, U2.

Spinful matrices use interleaved ordering: row ``2*i + s`` is plane wave
``i`` with z-spin ``s`` (0 = up, 1 = down), so a spin-independent block is
``kron(M, I2)``.

Spin-orbit matrix element between plane waves K = k+G and K' = k'+G'::

    <K, s| pref sigma.(grad V x p) |K', s'> = pref amp(K-K') [i (K-K') x K'] . <s|sigma|s'>

which follows from grad V = sum_Q i Q amp(Q) e^{iQr} and p e^{iK'r} = K' e^{iK'r}.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ParityViolation
from .lattice import PhysicalConstants, PlaneWaveBasis, TriclinicLattice, build_basis
from .potentials import FourierPotential, Parity

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)


@dataclass(frozen=True, eq=False)
class HamiltonianMatrix:
    kpoint: np.ndarray
    matrix: np.ndarray
    spinful: bool
    includes_so_even: bool = False
    includes_so_odd: bool = False
    includes_odd_potential: bool = False

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def hermiticity_residual(self) -> float:
        return float(np.abs(self.matrix - self.matrix.conj().T).max()) if self.dimension else 0.0

    def flags(self) -> dict:
        return {
            "spinful": self.spinful,
            "includes_so_even": self.includes_so_even,
            "includes_so_odd": self.includes_so_odd,
            "includes_odd_potential": self.includes_odd_potential,
        }


def spin_embed(orbital: np.ndarray) -> np.ndarray:
    return np.kron(orbital, SIGMA_0)


def kinetic_diagonal(basis: PlaneWaveBasis, constants: PhysicalConstants | None = None) -> np.ndarray:
    constants = constants or PhysicalConstants()
    kg = basis.wavevectors()
    return constants.hbar**2 / (2.0 * constants.mass) * np.sum(kg * kg, axis=1)


def scalar_coupling(bra: PlaneWaveBasis, ket: PlaneWaveBasis, potential: FourierPotential) -> np.ndarray:
    """Orbital matrix <bra_i| V |ket_j> = amp(K_i - K'_j)."""
    q = bra.wavevectors_frac()[:, None, :] - ket.wavevectors_frac()[None, :, :]
    return potential.lookup(q)


def so_orbital_parts(bra: PlaneWaveBasis, ket: PlaneWaveBasis, potential: FourierPotential) -> np.ndarray:
    """Array L of shape (3, n_bra, n_ket) with L_a = amp(q) [i q x K']_a, q = K - K'."""
    lattice = bra.lattice
    q_frac = bra.wavevectors_frac()[:, None, :] - ket.wavevectors_frac()[None, :, :]
    amp = potential.lookup(q_frac)
    q = q_frac @ lattice.reciprocal
    kp = ket.wavevectors()[None, :, :]
    cross = np.cross(q, np.broadcast_to(kp, q.shape))
    return np.moveaxis(1j * amp[..., None] * cross, -1, 0)


def so_coupling(
    bra: PlaneWaveBasis,
    ket: PlaneWaveBasis,
    potential: FourierPotential,
    constants: PhysicalConstants,
) -> np.ndarray:
    """Spinful matrix of so_prefactor * sigma.(grad V x p) between two bases."""
    parts = so_orbital_parts(bra, ket, potential)
    out = np.zeros((2 * bra.size, 2 * ket.size), dtype=complex)
    for part, sigma in zip(parts, PAULI):
        out += np.kron(part, sigma)
    return constants.so_prefactor * out


def potential_energy(phi: FourierPotential, constants: PhysicalConstants) -> FourierPotential:
    """-e phi as a potential-energy map."""
    return phi.scaled(-constants.charge)


def _require(potential: FourierPotential | None, parity: Parity, name: str):
    if potential is not None and potential.parity is not parity:
        raise ParityViolation(f"{name} must be tagged {parity.value}, got {potential.parity.value}")


def assemble_h0(
    basis: PlaneWaveBasis,
    v0: FourierPotential,
    constants: PhysicalConstants | None = None,
) -> HamiltonianMatrix:
    """Spinless |k+G|^2/2 delta_GG' + V0(G-G')."""
    _require(v0, Parity.EVEN, "v0")
    matrix = np.diag(kinetic_diagonal(basis, constants)).astype(complex)
    matrix += scalar_coupling(basis, basis, v0)
    return HamiltonianMatrix(basis.kpoint, matrix, spinful=False)


def so_block(
    basis: PlaneWaveBasis,
    v: FourierPotential,
    constants: PhysicalConstants,
) -> np.ndarray:
    """2N x 2N spin-orbit matrix of potential energy `v` at the basis k-point."""
    return so_coupling(basis, basis, v, constants)


def assemble_spinful(
    basis: PlaneWaveBasis,
    v0: FourierPotential,
    phi: FourierPotential | None,
    include_u1: bool,
    include_u2: bool,
    constants: PhysicalConstants,
) -> HamiltonianMatrix:
    """(T + V0 - e phi) sigma_0 + [U1] + [U2]."""
    _require(v0, Parity.EVEN, "v0")
    _require(phi, Parity.ODD, "phi")
    orbital = assemble_h0(basis, v0, constants).matrix
    if phi is not None:
        orbital = orbital + scalar_coupling(basis, basis, potential_energy(phi, constants))
    matrix = spin_embed(orbital)
    if include_u1:
        matrix += so_block(basis, v0, constants)
    use_u2 = include_u2 and phi is not None
    if use_u2:
        matrix += so_block(basis, potential_energy(phi, constants), constants)
    return HamiltonianMatrix(
        basis.kpoint,
        matrix,
        spinful=True,
        includes_so_even=include_u1,
        includes_so_odd=use_u2,
        includes_odd_potential=phi is not None,
    )


def inversion_matrix(basis: PlaneWaveBasis, spinful: bool = True) -> np.ndarray:
    """Permutation P with (P c)(G) = c(-G); maps the k block onto the -k block."""
    n = basis.size
    perm = np.zeros((n, n))
    perm[np.arange(n), basis.negation_index] = 1.0
    return np.kron(perm, np.eye(2)) if spinful else perm


@dataclass(frozen=True, eq=False)
class CrystalModel:
    """A pinacoidal (phi is None) or pedial (phi given) crystal with optional SO terms."""

    lattice: TriclinicLattice
    v0: FourierPotential
    gmax: float
    phi: FourierPotential | None = None
    constants: PhysicalConstants = PhysicalConstants()
    include_u1: bool = False
    include_u2: bool = False

    def __post_init__(self):
        _require(self.v0, Parity.EVEN, "v0")
        _require(self.phi, Parity.ODD, "phi")

    @property
    def regime(self) -> str:
        return "pedial" if self.phi is not None else "pinacoidal"

    @property
    def spin_orbit(self) -> bool:
        return self.include_u1 or (self.include_u2 and self.phi is not None)

    def with_options(self, **changes) -> CrystalModel:
        return replace(self, **changes)

    def basis(self, kpoint) -> PlaneWaveBasis:
        return build_basis(self.lattice, kpoint, self.gmax)

    def spinless(self, kpoint) -> HamiltonianMatrix:
        basis = self.basis(kpoint)
        h = assemble_h0(basis, self.v0, self.constants)
        if self.phi is None:
            return h
        matrix = h.matrix + scalar_coupling(basis, basis, potential_energy(self.phi, self.constants))
        return HamiltonianMatrix(basis.kpoint, matrix, spinful=False, includes_odd_potential=True)

    def spinful(self, kpoint) -> HamiltonianMatrix:
        return assemble_spinful(
            self.basis(kpoint), self.v0, self.phi, self.include_u1, self.include_u2, self.constants
        )

    def describe(self) -> dict:
        return {
            "regime": self.regime,
            "gmax": self.gmax,
            "so_scale": self.constants.so_scale,
            "include_u1": self.include_u1,
            "include_u2": self.include_u2 and self.phi is not None,
        }


# Debug dump: 4-byte magic, then little-endian uint32 version, uint64 rows,
# uint64 cols, followed by rows*cols complex128 values in row-major order.
_MAGIC = b"BDHM"
_HEADER = struct.Struct("<4sIQQ")


def dump_matrix(path, matrix: np.ndarray) -> None:
    matrix = np.ascontiguousarray(matrix, dtype="<c16")
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, 1, matrix.shape[0], matrix.shape[1]))
        fh.write(matrix.tobytes(order="C"))


def load_matrix(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    magic, version, rows, cols = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != 1:
        raise ValueError(f"{path}: not a matrix dump")
    return np.frombuffer(raw, dtype="<c16", offset=_HEADER.size).reshape(rows, cols).copy()
