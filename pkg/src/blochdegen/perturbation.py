"""First-order degenerate perturbation theory on the {|+-k, +-s_u>} quartet.

Quartet ordering is fixed as [|k,s>, |k,-s>, |-k,s>, |-k,-s>]. The orbital
part at -k is locked to the inversion image of the orbital at k, and the
spinors satisfy chi_- = K chi_+, so that |4> = K|1> and |3> = -K|2>. With
that convention any time-reversal-even perturbation projects onto the
secular layout

    [[a,  c,  d,  0 ],
     [c*, b,  0,  d ],
     [d*, 0,  b, -c ],
     [0,  d*, -c*, a ]]
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AccidentalDegeneracy,
    BasisMismatch,
    DegenerateSplit,
    RegimeViolation,
    SelectionRuleViolation,
)
from .hamiltonian import assemble_h0, potential_energy, scalar_coupling, so_coupling, spin_embed
from .lattice import PhysicalConstants, PlaneWaveBasis
from .potentials import FourierPotential
from .spectrum import TOL_DEG, eigensolve
from .symmetry import SpinorWave, TR_SPIN, apply_inversion, spin_eigenspinors

SELECTION_TOL = 1e-12
REGIME_FRACTION = 0.01

COMPONENTS = ("a1", "b1", "c1", "d1", "a2", "b2", "c2", "d2", "alpha", "beta", "beta_prime")


@dataclass(frozen=True, eq=False)
class Quartet:
    band: int
    states: tuple  # four SpinorWave in the fixed order
    energy: float
    axis: np.ndarray
    orbital_k: np.ndarray
    orbital_mk: np.ndarray
    gap: float

    @property
    def basis_k(self) -> PlaneWaveBasis:
        return self.states[0].basis

    @property
    def basis_mk(self) -> PlaneWaveBasis:
        return self.states[2].basis

    @property
    def kpoint(self) -> np.ndarray:
        return self.basis_k.kpoint

    def gram(self) -> np.ndarray:
        """Overlaps, with states at different k orthogonal by construction."""
        g = np.zeros((4, 4), dtype=complex)
        for i, si in enumerate(self.states):
            for j, sj in enumerate(self.states):
                if np.allclose(si.kpoint, sj.kpoint):
                    g[i, j] = si.inner(sj)
        return g

    def rephased(self, phases) -> Quartet:
        states = tuple(s.replace(coefficients=p * s.coefficients) for s, p in zip(self.states, phases))
        return Quartet(self.band, states, self.energy, self.axis, self.orbital_k, self.orbital_mk, self.gap)


def build_quartet(
    basis: PlaneWaveBasis,
    v0: FourierPotential,
    band: int,
    axis=(0, 0, 1),
    constants: PhysicalConstants | None = None,
    tol_deg: float = TOL_DEG,
) -> Quartet:
    """Zeroth-order quartet of spinless band `band` of H0 at basis.kpoint and its negative."""
    if not basis.is_negation_closed():
        raise BasisMismatch("quartet basis must be closed under G -> -G")
    sol = eigensolve(assemble_h0(basis, v0, constants))
    e = sol.energies
    if not 0 <= band < len(e):
        raise ValueError(f"band {band} outside 0..{len(e) - 1}")
    neighbours = [abs(e[band] - e[j]) for j in (band - 1, band + 1) if 0 <= j < len(e)]
    gap = min(neighbours) if neighbours else np.inf
    if gap <= 10 * tol_deg:
        raise AccidentalDegeneracy(
            f"spinless band {band} at k={basis.kpoint.tolist()} is within {gap:.3e} Ha of a neighbour"
        )
    orbital_k = sol.states[:, band]
    basis_mk = basis.with_kpoint(-basis.kpoint)
    orbital_mk = orbital_k[basis.negation_index]
    up, down = spin_eigenspinors(axis)
    states = (
        SpinorWave.product(basis, orbital_k, up, axis),
        SpinorWave.product(basis, orbital_k, down, axis),
        SpinorWave.product(basis_mk, orbital_mk, up, axis),
        SpinorWave.product(basis_mk, orbital_mk, down, axis),
    )
    return Quartet(band, states, float(e[band]), np.asarray(axis, dtype=float) / np.linalg.norm(axis),
                   orbital_k, orbital_mk, float(gap))


@dataclass(frozen=True, eq=False)
class Perturbation:
    """delta V = bulk_scale * (U1[v0] + U2[phi] - e phi) + V'.

    ``ext_so`` (the spin-orbit term of V' itself) is never part of delta V;
    its quartet elements are only evaluated for the regime guard.
    """

    constants: PhysicalConstants
    v0: FourierPotential | None = None
    phi: FourierPotential | None = None
    v_ext: FourierPotential | None = None
    include_u1: bool = True
    include_u2: bool = True
    include_phi: bool = True
    bulk_scale: float = 1.0

    def operators(self, bra: PlaneWaveBasis, ket: PlaneWaveBasis) -> dict:
        """Spinful matrices of each named piece between two plane-wave sets."""
        c = self.constants
        n, m = 2 * bra.size, 2 * ket.size
        zero = np.zeros((n, m), dtype=complex)
        ops = {"u1": zero, "u2": zero, "phi": zero, "ext": zero, "ext_so": zero}
        if self.include_u1 and self.v0 is not None:
            ops["u1"] = self.bulk_scale * so_coupling(bra, ket, self.v0, c)
        if self.phi is not None:
            energy = potential_energy(self.phi, c)
            if self.include_u2:
                ops["u2"] = self.bulk_scale * so_coupling(bra, ket, energy, c)
            if self.include_phi:
                ops["phi"] = self.bulk_scale * spin_embed(scalar_coupling(bra, ket, energy))
        if self.v_ext is not None:
            ops["ext"] = spin_embed(scalar_coupling(bra, ket, self.v_ext))
            ops["ext_so"] = so_coupling(bra, ket, self.v_ext, c)
        return ops


@dataclass(frozen=True, eq=False)
class SecularMatrix:
    a1: complex = 0j
    b1: complex = 0j
    c1: complex = 0j
    d1: complex = 0j
    a2: complex = 0j
    b2: complex = 0j
    c2: complex = 0j
    d2: complex = 0j
    alpha: complex = 0j
    beta: complex = 0j
    beta_prime: complex = 0j
    projected: np.ndarray = field(default_factory=lambda: np.zeros((4, 4), dtype=complex))
    ext_so: dict = field(default_factory=dict)
    scale: float = 0.0

    @property
    def a(self) -> complex:
        return self.a1 + self.a2 + self.alpha

    @property
    def b(self) -> complex:
        return self.b1 + self.b2 + self.alpha

    @property
    def c(self) -> complex:
        return self.c1 + self.c2

    @property
    def d(self) -> complex:
        return self.d1 + self.d2 + self.beta + self.beta_prime

    def matrix(self) -> np.ndarray:
        a, b, c, d = self.a, self.b, self.c, self.d
        m = np.array(
            [
                [a, c, d, 0],
                [np.conj(c), b, 0, d],
                [np.conj(d), 0, b, -c],
                [0, np.conj(d), -np.conj(c), a],
            ],
            dtype=complex,
        )
        herm = float(np.abs(m - m.conj().T).max())
        if herm > 1e-13 * max(1.0, float(np.abs(m).max())):
            raise SelectionRuleViolation(f"secular matrix not Hermitian ({herm:.3e}); diagonal entries must be real")
        return m

    def layout_residual(self) -> float:
        """Distance between the directly projected 4x4 and the named-component layout."""
        return float(np.abs(self.projected - self.matrix()).max())

    def components(self) -> dict:
        return {name: complex(getattr(self, name)) for name in COMPONENTS}


def secular_elements(quartet: Quartet, perturbation: Perturbation) -> SecularMatrix:
    basis_k, basis_mk = quartet.basis_k, quartet.basis_mk
    for s in quartet.states:
        if not (s.basis.same_labels(basis_k)):
            raise BasisMismatch("quartet states must share one G set")
    pairs = {}
    for bra_key, bra in (("k", basis_k), ("mk", basis_mk)):
        for ket_key, ket in (("k", basis_k), ("mk", basis_mk)):
            pairs[bra_key, ket_key] = perturbation.operators(bra, ket)
    key = {0: "k", 1: "k", 2: "mk", 3: "mk"}

    def project(name: str) -> np.ndarray:
        out = np.zeros((4, 4), dtype=complex)
        for i, si in enumerate(quartet.states):
            for j, sj in enumerate(quartet.states):
                op = pairs[key[i], key[j]][name]
                out[i, j] = np.vdot(si.vector, op @ sj.vector)
        return out

    x = {name: project(name) for name in ("u1", "u2", "phi", "ext", "ext_so")}
    scale = max(float(np.abs(op).max()) for ops in pairs.values() for name, op in ops.items() if name != "ext_so")
    ext_so = {
        "a": complex(x["ext_so"][0, 0]),
        "b": complex(x["ext_so"][1, 1]),
        "c": complex(x["ext_so"][0, 1]),
        "d": complex(x["ext_so"][0, 2]),
    }
    return SecularMatrix(
        a1=complex(x["u1"][0, 0]),
        b1=complex(x["u1"][1, 1]),
        c1=complex(x["u1"][0, 1]),
        d1=complex(x["u1"][0, 2]),
        a2=complex(x["u2"][0, 0]),
        b2=complex(x["u2"][1, 1]),
        c2=complex(x["u2"][0, 1]),
        d2=complex(x["u2"][0, 2]),
        alpha=complex(x["phi"][0, 0]),
        beta=complex(x["phi"][0, 2]),
        beta_prime=complex(x["ext"][0, 2]),
        projected=x["u1"] + x["u2"] + x["phi"] + x["ext"],
        ext_so=ext_so,
        scale=scale,
    )


def selection_residuals(sm: SecularMatrix, translation_invariant: bool, scale: float | None = None) -> dict:
    """Residuals of the inversion/time-reversal selection rules (all should vanish)."""
    res = {
        "a1_minus_b1": abs(sm.a1 - sm.b1),
        "c1": abs(sm.c1),
        "im_d1": abs(sm.d1.imag),
        "a2_plus_b2": abs(sm.a2 + sm.b2),
        "re_d2": abs(sm.d2.real),
        "alpha": abs(sm.alpha),
        "re_beta": abs(sm.beta.real),
        "im_diag": max(abs(sm.a1.imag), abs(sm.b1.imag), abs(sm.a2.imag), abs(sm.b2.imag)),
    }
    if translation_invariant:
        res.update({"d1": abs(sm.d1), "d2": abs(sm.d2), "beta": abs(sm.beta)})
    return {k: float(v) for k, v in res.items()}


def _check_applicable(sm: SecularMatrix, tol: float):
    limit = tol * max(sm.scale, 1e-300)
    checks = {
        "a1_minus_b1": abs(sm.a1 - sm.b1),
        "c1": abs(sm.c1),
        "alpha": abs(sm.alpha),
        "a2_plus_b2": abs(sm.a2 + sm.b2),
    }
    bad = {k: v for k, v in checks.items() if v > limit}
    if bad:
        name, value = max(bad.items(), key=lambda kv: kv[1])
        raise SelectionRuleViolation(f"{name} = {value:.3e} exceeds {limit:.3e}; closed form does not apply")


@dataclass
class PerturbationOutcome:
    E1_plus: float
    E1_minus: float
    splitting: float
    eigenvalues: np.ndarray
    closed_form_residual: float
    doublet_spreads: tuple
    selection: dict
    layout_residual: float
    subspace: dict = field(default_factory=dict)

    @property
    def fourfold(self) -> bool:
        return self.splitting <= TOL_DEG

    def to_dict(self, sm: SecularMatrix) -> dict:
        return {
            "components": {k: [v.real, v.imag] for k, v in sm.components().items()},
            "E1_plus": self.E1_plus,
            "E1_minus": self.E1_minus,
            "splitting": self.splitting,
            "fourfold": self.fourfold,
            "residuals": {
                "closed_form_vs_eigensolve": self.closed_form_residual,
                "doublet_spread_lower": self.doublet_spreads[0],
                "doublet_spread_upper": self.doublet_spreads[1],
                "layout": self.layout_residual,
                **{f"selection_{k}": v for k, v in self.selection.items()},
                **{f"subspace_{k}": v for k, v in self.subspace.items()},
            },
        }


def first_order(sm: SecularMatrix, tol: float = SELECTION_TOL, translation_invariant: bool = False) -> PerturbationOutcome:
    """E1(+-) = a1 +- sqrt(a2^2 + |c2|^2 + |d1 + d2 + beta + beta'|^2), checked against eigvalsh."""
    _check_applicable(sm, tol)
    a1 = sm.a1.real
    root = np.sqrt(sm.a2.real**2 + abs(sm.c2) ** 2 + abs(sm.d) ** 2)
    e_plus, e_minus = a1 + root, a1 - root
    evals = np.linalg.eigvalsh(sm.matrix())
    closed = np.array([e_minus, e_minus, e_plus, e_plus])
    return PerturbationOutcome(
        E1_plus=float(e_plus),
        E1_minus=float(e_minus),
        splitting=float(e_plus - e_minus),
        eigenvalues=evals,
        closed_form_residual=float(np.abs(evals - closed).max()),
        doublet_spreads=(float(evals[1] - evals[0]), float(evals[3] - evals[2])),
        selection=selection_residuals(sm, translation_invariant),
        layout_residual=sm.layout_residual(),
    )


def _regime_guard(sm: SecularMatrix):
    neglected = max((abs(v) for v in sm.ext_so.values()), default=0.0)
    if neglected > REGIME_FRACTION * abs(sm.beta_prime):
        raise RegimeViolation(
            f"spin-orbit elements of V' reach {neglected:.3e}, above "
            f"{REGIME_FRACTION:.0%} of |beta'| = {abs(sm.beta_prime):.3e}"
        )


def splitting_pedial(sm: SecularMatrix, guard: bool = True) -> float:
    """2 sqrt(a2^2 + |c2|^2 + |beta'|^2), the SO terms of V' neglected."""
    if guard:
        _regime_guard(sm)
    return float(2.0 * np.sqrt(sm.a2.real**2 + abs(sm.c2) ** 2 + abs(sm.beta_prime) ** 2))


def splitting_pinacoidal(sm: SecularMatrix, guard: bool = True, tol: float = SELECTION_TOL) -> float:
    """2 |beta'|; requires the odd-SO elements a2, c2 to vanish."""
    limit = tol * max(sm.scale, 1e-300)
    if abs(sm.a2) > limit or abs(sm.c2) > limit:
        raise SelectionRuleViolation(
            f"pinacoidal splitting needs a2 = c2 = 0, got |a2| = {abs(sm.a2):.3e}, |c2| = {abs(sm.c2):.3e}"
        )
    if guard:
        _regime_guard(sm)
    return float(2.0 * abs(sm.beta_prime))


# Quartet-basis inversion: swaps |k,s> with |-k,s>.
I4 = np.array([[0, 0, 1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, 1, 0, 0]], dtype=float)


def quartet_time_reversal() -> np.ndarray:
    """Unitary part U of K4 = U o conj, derived from |4> = K|1>, |3> = -K|2>."""
    u = np.zeros((4, 4))
    u[3, 0] = 1.0   # K|1> = |4>
    u[2, 1] = -1.0  # K|2> = -|3>
    u[1, 2] = 1.0   # K|3> = -K^2|2> = |2>
    u[0, 3] = -1.0  # K|4> = K^2|1> = -|1>
    return u


def subspace_maps(sm: SecularMatrix, tol_deg: float = TOL_DEG, matrix: np.ndarray | None = None) -> dict:
    """Residuals of K4 P+- K4^-1 = P+-, I4 P+- I4 = P-+, C4 P+- C4^-1 = P-+."""
    m = sm.matrix() if matrix is None else matrix
    evals, evecs = np.linalg.eigh(m)
    split = (evals[2] + evals[3] - evals[0] - evals[1]) / 2
    if split <= 10 * tol_deg:
        raise DegenerateSplit(f"first-order splitting {split:.3e} Ha cannot resolve two subspaces")
    lower = evecs[:, :2] @ evecs[:, :2].conj().T
    upper = evecs[:, 2:] @ evecs[:, 2:].conj().T
    u = quartet_time_reversal()

    def k_map(p):
        return u @ p.conj() @ u.T

    def i_map(p):
        return I4 @ p @ I4.T

    def c_map(p):
        return k_map(i_map(p))

    k2 = u @ u.conj()
    return {
        "k4_squared": float(np.abs(k2 + np.eye(4)).max()),
        "k_preserves_upper": float(np.abs(k_map(upper) - upper).max()),
        "k_preserves_lower": float(np.abs(k_map(lower) - lower).max()),
        "i_swaps_upper": float(np.abs(i_map(upper) - lower).max()),
        "i_swaps_lower": float(np.abs(i_map(lower) - upper).max()),
        "c_swaps_upper": float(np.abs(c_map(upper) - lower).max()),
        "c_swaps_lower": float(np.abs(c_map(lower) - upper).max()),
    }


def tr_spinor_check(quartet: Quartet) -> float:
    """|chi_- - (-i sigma_y) conj(chi_+)| for the quartet spinors."""
    up = quartet.states[0].coefficients
    down = quartet.states[1].coefficients
    return float(np.abs(down - up.conj() @ TR_SPIN.T).max())


def inversion_lock_residual(quartet: Quartet) -> float:
    img = apply_inversion(quartet.states[0])
    return float(np.abs(img.coefficients - quartet.states[2].coefficients).max())
