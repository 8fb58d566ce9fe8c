"""Triclinic lattice geometry, physical constants and plane-wave bases.

All quantities are in Hartree atomic units (hbar = m = e = 1). Reciprocal
vectors are stored as rows, so that a wavevector with fractional
coordinates ``f`` has Cartesian components ``f @ lattice.reciprocal``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import OutOfRange, SingularLattice

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.0
    mass: float = 1.0
    charge: float = 1.0
    c_light: float = 137.035999
    so_scale: float = 1.0

    def __post_init__(self):
        for name in ("hbar", "mass", "charge", "c_light"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.so_scale < 0:
            raise ValueError("so_scale must be non-negative")

    @property
    def so_prefactor(self) -> float:
        """Scaled hbar / (4 m^2 c^2) multiplying sigma . (grad V x p)."""
        return self.so_scale * self.hbar / (4.0 * self.mass**2 * self.c_light**2)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def reciprocal_basis(a1, a2, a3) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return b1, b2, b3 with a_i . b_j = 2 pi delta_ij."""
    direct = np.array([a1, a2, a3], dtype=float)
    if direct.shape != (3, 3):
        raise ValueError("expected three 3-vectors")
    if abs(np.linalg.det(direct)) < 1e-12:
        raise SingularLattice(f"|det| = {abs(np.linalg.det(direct)):.3e} < 1e-12")
    recip = TWO_PI * np.linalg.inv(direct).T
    return recip[0].copy(), recip[1].copy(), recip[2].copy()


@dataclass(frozen=True, eq=False)
class TriclinicLattice:
    """A general 3D Bravais lattice; ``direct`` holds a1, a2, a3 as rows."""

    direct: np.ndarray
    reciprocal: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        direct = _frozen(self.direct)
        if direct.shape != (3, 3):
            raise ValueError("direct lattice must be 3x3")
        det = np.linalg.det(direct)
        if abs(det) < 1e-12:
            raise SingularLattice(f"|det| = {abs(det):.3e} < 1e-12")
        if det < 0:
            raise SingularLattice("lattice vectors must form a right-handed set (det > 0)")
        object.__setattr__(self, "direct", direct)
        object.__setattr__(self, "reciprocal", _frozen(np.stack(reciprocal_basis(*direct))))

    @classmethod
    def from_vectors(cls, a1, a2, a3) -> TriclinicLattice:
        return cls(np.array([a1, a2, a3], dtype=float))

    @property
    def a1(self):
        return self.direct[0]

    @property
    def a2(self):
        return self.direct[1]

    @property
    def a3(self):
        return self.direct[2]

    @property
    def b1(self):
        return self.reciprocal[0]

    @property
    def b2(self):
        return self.reciprocal[1]

    @property
    def b3(self):
        return self.reciprocal[2]

    @property
    def volume(self) -> float:
        return float(np.linalg.det(self.direct))

    def cartesian_k(self, frac) -> np.ndarray:
        """Fractional reciprocal coordinates -> Cartesian wavevector(s)."""
        return np.asarray(frac, dtype=float) @ self.reciprocal

    def cartesian_r(self, frac) -> np.ndarray:
        return np.asarray(frac, dtype=float) @ self.direct

    def translation(self, n) -> np.ndarray:
        """R_n = n1 a1 + n2 a2 + n3 a3."""
        return np.asarray(n, dtype=float) @ self.direct

    def supercell(self, reps) -> TriclinicLattice:
        reps = np.asarray(reps, dtype=int)
        return TriclinicLattice(self.direct * reps[:, None])

    def descriptor(self) -> dict:
        return {"a1": self.a1.tolist(), "a2": self.a2.tolist(), "a3": self.a3.tolist()}


DEFAULT_LATTICE_VECTORS = ((1.0, 0.0, 0.0), (0.5, 1.1, 0.0), (0.2, 0.3, 1.3))


def default_lattice() -> TriclinicLattice:
    return TriclinicLattice.from_vectors(*DEFAULT_LATTICE_VECTORS)


@dataclass(frozen=True, eq=False)
class PlaneWaveBasis:
    """Plane waves e^{i(k+G)r} for an ordered set of integer G triples.

    ``gvectors`` is normally produced by :func:`build_basis`; the supercell
    oracle constructs bases with other (still negation-closed) label sets.
    """

    lattice: TriclinicLattice
    kpoint: np.ndarray
    gvectors: np.ndarray
    gmax: float

    def __post_init__(self):
        object.__setattr__(self, "kpoint", _frozen(self.kpoint))
        g = np.array(self.gvectors, dtype=np.int64).reshape(-1, 3)
        g.setflags(write=False)
        object.__setattr__(self, "gvectors", g)

    def __len__(self) -> int:
        return len(self.gvectors)

    @property
    def size(self) -> int:
        return len(self.gvectors)

    @cached_property
    def negation_index(self) -> np.ndarray:
        """perm with gvectors[perm[i]] == -gvectors[i]."""
        lookup = {tuple(g): i for i, g in enumerate(self.gvectors.tolist())}
        try:
            perm = np.array([lookup[(-g[0], -g[1], -g[2])] for g in self.gvectors.tolist()])
        except KeyError as exc:
            raise ValueError(f"basis not closed under G -> -G (missing {exc})") from None
        perm.setflags(write=False)
        return perm

    def is_negation_closed(self) -> bool:
        try:
            self.negation_index
        except ValueError:
            return False
        return True

    def with_kpoint(self, kpoint) -> PlaneWaveBasis:
        """Same G set at another wavevector (shares the label array)."""
        return PlaneWaveBasis(self.lattice, kpoint, self.gvectors, self.gmax)

    def wavevectors_frac(self) -> np.ndarray:
        return self.kpoint[None, :] + self.gvectors

    def wavevectors(self) -> np.ndarray:
        """Cartesian k + G for every basis function."""
        return self.lattice.cartesian_k(self.wavevectors_frac())

    def same_labels(self, other: PlaneWaveBasis) -> bool:
        return self.gvectors.shape == other.gvectors.shape and bool(
            np.array_equal(self.gvectors, other.gvectors)
        )

    def descriptor(self) -> dict:
        return {"kpoint": self.kpoint.tolist(), "gmax": self.gmax, "size": self.size}


def enumerate_gvectors(lattice: TriclinicLattice, gmax: float) -> np.ndarray:
    """All integer triples with |G| <= gmax, sorted by (|G|, n1, n2, n3)."""
    if not gmax > 0:
        raise ValueError("gmax must be positive")
    # |n_i| = |G . a_i| / 2pi <= gmax |a_i| / 2pi
    bounds = np.floor(gmax * np.linalg.norm(lattice.direct, axis=1) / TWO_PI).astype(int)
    axes = [np.arange(-m, m + 1) for m in bounds]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    norms = np.linalg.norm(grid @ lattice.reciprocal, axis=1)
    keep = norms <= gmax
    grid, norms = grid[keep], norms[keep]
    # rounding keeps the sort stable against last-ulp noise between +G and -G
    order = np.lexsort((grid[:, 2], grid[:, 1], grid[:, 0], np.round(norms, 10)))
    return grid[order]


def build_basis(lattice: TriclinicLattice, kpoint, gmax: float) -> PlaneWaveBasis:
    """Plane-wave basis with the cutoff |G| <= gmax (not |k+G|).

    Cutting on |G| keeps the label set closed under G -> -G, so inversion
    and time reversal act exactly on the truncated basis.
    """
    kpoint = np.asarray(kpoint, dtype=float).reshape(3)
    return PlaneWaveBasis(lattice, kpoint, enumerate_gvectors(lattice, gmax), float(gmax))


def commensurate_k(lattice: TriclinicLattice, m, n_bvk) -> np.ndarray:
    """Born-von Karman wavevector sum_i (m_i / n_i) b_i, in fractional coordinates."""
    m = np.asarray(m, dtype=int).reshape(3)
    n = np.asarray(n_bvk, dtype=int).reshape(3)
    if np.any(n < 1):
        raise OutOfRange(f"BvK repetitions must be >= 1, got {n.tolist()}")
    if np.any(m < 0) or np.any(m >= n):
        raise OutOfRange(f"need 0 <= m_i < n_i, got m={m.tolist()} n={n.tolist()}")
    return m / n
