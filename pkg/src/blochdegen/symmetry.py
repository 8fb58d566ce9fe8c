"""Action of T_R, K, I, C and S_u on plane-wave spinor states.

States store coefficients ``c[G, s]`` in the fixed z-spin basis; the spin
axis ``u`` only labels which S_u the state refers to. Time reversal uses
the convention K = (-i sigma_y) o complex conjugation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonLatticeVector
from .hamiltonian import PAULI
from .lattice import PlaneWaveBasis, build_basis, TriclinicLattice

# -i sigma_y
TR_SPIN = np.array([[0.0, -1.0], [1.0, 0.0]], dtype=complex)


def _unit(u) -> np.ndarray:
    u = np.asarray(u, dtype=float).reshape(3)
    norm = np.linalg.norm(u)
    if not norm > 0:
        raise ValueError("spin axis must be nonzero")
    return u / norm


@dataclass(frozen=True, eq=False)
class SpinorWave:
    basis: PlaneWaveBasis
    coefficients: np.ndarray  # shape (n_G, 2)
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex).reshape(self.basis.size, 2)
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "axis", _unit(self.axis))

    @property
    def kpoint(self) -> np.ndarray:
        return self.basis.kpoint

    @property
    def vector(self) -> np.ndarray:
        """Flattened coefficients in the interleaved spinful ordering."""
        return self.coefficients.reshape(-1)

    @classmethod
    def from_vector(cls, basis: PlaneWaveBasis, vector, axis=(0, 0, 1)) -> SpinorWave:
        return cls(basis, np.asarray(vector).reshape(basis.size, 2), axis)

    @classmethod
    def product(cls, basis: PlaneWaveBasis, orbital, spinor, axis=(0, 0, 1)) -> SpinorWave:
        return cls(basis, np.outer(orbital, spinor), axis)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))

    def inner(self, other: SpinorWave) -> complex:
        return complex(np.vdot(self.coefficients, other.coefficients))

    def replace(self, basis=None, coefficients=None) -> SpinorWave:
        return SpinorWave(basis or self.basis, self.coefficients if coefficients is None else coefficients, self.axis)


def spin_matrix(u) -> np.ndarray:
    """S_u = (u . sigma) / 2."""
    u = np.asarray(u, dtype=float)
    if abs(np.linalg.norm(u) - 1.0) > 1e-12:
        raise ValueError("spin axis must be a unit vector")
    return 0.5 * sum(ui * s for ui, s in zip(u, PAULI))


def spin_eigenspinors(u) -> tuple[np.ndarray, np.ndarray]:
    """(chi_+, chi_-) with S_u chi_pm = +-1/2 chi_pm and chi_- = K chi_+."""
    vals, vecs = np.linalg.eigh(spin_matrix(_unit(u)))
    up = vecs[:, np.argmax(vals)]
    pivot = int(np.argmax(np.round(np.abs(up), 12)))
    up = up * (abs(up[pivot]) / up[pivot])
    return up, TR_SPIN @ up.conj()


def apply_spin(state: SpinorWave, u=None) -> SpinorWave:
    s = spin_matrix(state.axis if u is None else _unit(u))
    return state.replace(coefficients=state.coefficients @ s.T)


def spin_expectation(state: SpinorWave, u=None) -> float:
    s = spin_matrix(state.axis if u is None else _unit(u))
    c = state.coefficients
    return float(np.real(np.einsum("gs,st,gt->", c.conj(), s, c)) / np.vdot(c, c).real)


def apply_translation(state: SpinorWave, r_n) -> SpinorWave:
    """Active translation by R_n = n . a: c(G) -> e^{-i (k+G) . R_n} c(G)."""
    n = np.asarray(r_n, dtype=float).reshape(3)
    if np.any(np.abs(n - np.rint(n)) > 1e-12):
        raise NonLatticeVector(f"translation {n.tolist()} is not an integer combination of a_i")
    lattice = state.basis.lattice
    phase = np.exp(-1j * (state.basis.wavevectors() @ lattice.translation(np.rint(n))))
    return state.replace(coefficients=state.coefficients * phase[:, None])


def apply_inversion(state: SpinorWave) -> SpinorWave:
    """k -> -k, c'(G) = c(-G), spin untouched."""
    basis = state.basis
    return state.replace(
        basis=basis.with_kpoint(-basis.kpoint),
        coefficients=state.coefficients[basis.negation_index],
    )


def apply_time_reversal(state: SpinorWave) -> SpinorWave:
    """k -> -k, c'(G) = (-i sigma_y) conj(c(-G))."""
    basis = state.basis
    flipped = state.coefficients[basis.negation_index].conj()
    return state.replace(
        basis=basis.with_kpoint(-basis.kpoint),
        coefficients=flipped @ TR_SPIN.T,
    )


def apply_conjugation(state: SpinorWave) -> SpinorWave:
    """C = K I: keeps k, flips spin."""
    return apply_time_reversal(apply_inversion(state))


def bare_conjugation(state: SpinorWave) -> SpinorWave:
    """Mutant time reversal (plain complex conjugation) used as a negative control."""
    return state.replace(coefficients=state.coefficients.conj())


def random_state(basis: PlaneWaveBasis, rng: np.random.Generator, axis=(0, 0, 1)) -> SpinorWave:
    c = rng.normal(size=(basis.size, 2)) + 1j * rng.normal(size=(basis.size, 2))
    return SpinorWave(basis, c / np.linalg.norm(c), axis)


def _distance(a: SpinorWave, b: SpinorWave) -> float:
    if not np.allclose(a.kpoint, b.kpoint, atol=1e-14, rtol=0):
        return float("inf")
    return float(np.linalg.norm(a.coefficients - b.coefficients))


@dataclass
class SymmetryReport:
    seed: int
    basis: dict
    axis: list
    n_states: int
    residuals: dict

    def max_residual(self) -> float:
        return max(self.residuals.values())

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "basis": self.basis,
            "axis": self.axis,
            "n_states": self.n_states,
            "residuals": dict(sorted(self.residuals.items())),
        }


def verify_identities(
    basis: PlaneWaveBasis,
    seed: int,
    n_states: int = 50,
    axis=(0, 0, 1),
    time_reversal=apply_time_reversal,
) -> SymmetryReport:
    """Check operator identities on random normalized spinor states.

    Each state sits at a random fractional k over the basis' G set;
    translations use random lattice vectors with entries in [-3, 3].
    """
    rng = np.random.default_rng(seed)
    u = _unit(axis)
    res = {
        "bloch_residual": 0.0,
        "iti_residual": 0.0,
        "kt_comm_residual": 0.0,
        "k2_residual": 0.0,
        "ks_anticomm_residual": 0.0,
        "c_composition_residual": 0.0,
        "norm_residual_inversion": 0.0,
        "norm_residual_time_reversal": 0.0,
        "norm_residual_conjugation": 0.0,
        "norm_residual_translation": 0.0,
    }
    for _ in range(n_states):
        k = rng.uniform(-0.5, 0.5, size=3)
        psi = random_state(basis.with_kpoint(k), rng, u)
        r = rng.integers(-3, 4, size=3)
        lattice = basis.lattice

        tpsi = apply_translation(psi, r)
        bloch = np.exp(-1j * (lattice.cartesian_k(k) @ lattice.translation(r)))
        res["bloch_residual"] = max(res["bloch_residual"], float(np.linalg.norm(tpsi.coefficients - bloch * psi.coefficients)))

        lhs = apply_inversion(tpsi)
        rhs = apply_translation(apply_inversion(psi), -r)
        res["iti_residual"] = max(res["iti_residual"], _distance(lhs, rhs))

        lhs = time_reversal(tpsi)
        rhs = apply_translation(time_reversal(psi), r)
        res["kt_comm_residual"] = max(res["kt_comm_residual"], _distance(lhs, rhs))

        kpsi = time_reversal(psi)
        kkpsi = time_reversal(kpsi)
        minus = psi.replace(coefficients=-psi.coefficients)
        res["k2_residual"] = max(res["k2_residual"], _distance(kkpsi, minus))

        lhs = time_reversal(apply_spin(psi, u))
        rhs = apply_spin(kpsi, u)
        res["ks_anticomm_residual"] = max(
            res["ks_anticomm_residual"], _distance(lhs, rhs.replace(coefficients=-rhs.coefficients))
        )

        res["c_composition_residual"] = max(
            res["c_composition_residual"],
            _distance(apply_conjugation(psi), apply_time_reversal(apply_inversion(psi))),
        )
        for name, op in (
            ("inversion", apply_inversion),
            ("time_reversal", time_reversal),
            ("conjugation", apply_conjugation),
            ("translation", lambda s: apply_translation(s, r)),
        ):
            key = f"norm_residual_{name}"
            res[key] = max(res[key], abs(op(psi).norm() - 1.0))
    return SymmetryReport(seed, basis.descriptor(), u.tolist(), n_states, res)


def gamma_only_basis(lattice: TriclinicLattice) -> PlaneWaveBasis:
    return build_basis(lattice, np.zeros(3), 0.5 * float(np.linalg.norm(lattice.reciprocal, axis=1).min()))
