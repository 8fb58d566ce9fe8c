"""Brute-force supercell diagonalization used as ground truth for the splittings.

The supercell a_i' = N_i a_i has reciprocal vectors b_i / N_i, so a unit-cell
label G maps to the supercell label N o G and the external potential's
labels (already on the N grid) carry over unchanged. The folded basis is
the union of the unit-cell plane-wave sets of every k-point that folds onto
the chosen supercell point, so with V' = 0 the supercell spectrum is
exactly the union of the unit-cell spectra.

Nothing here touches the secular-matrix code; only the matrix assembly
primitives are shared.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.integrate

from .errors import CrowdedWindow, IncommensurateK
from .hamiltonian import kinetic_diagonal, potential_energy, scalar_coupling, so_coupling, spin_embed
from .lattice import PhysicalConstants, PlaneWaveBasis, TriclinicLattice, enumerate_gvectors
from .potentials import ExternalPotential, FourierPotential
from .spectrum import eigensolve, eigenvalues

KRAMERS_TOL = 1e-10


def remap_potential(potential: FourierPotential, supercell_n) -> FourierPotential:
    """Re-express amplitudes on the supercell reciprocal grid (grid becomes 1,1,1)."""
    n = np.asarray(supercell_n, dtype=np.int64)
    grid = np.asarray(potential.grid, dtype=np.int64)
    if np.any(n % grid):
        raise ValueError(f"potential grid {grid.tolist()} does not divide supercell {n.tolist()}")
    factor = n // grid
    amps = {tuple(int(x) for x in np.asarray(g) * factor): v for g, v in potential.amplitudes.items()}
    return FourierPotential(amps, potential.parity, (1, 1, 1))


def _sector_offsets(n: int) -> list[int]:
    """Centred residues, e.g. n=8 -> -3..4, n=3 -> -1..1."""
    return list(range(-((n - 1) // 2), n // 2 + 1))


@dataclass(frozen=True, eq=False)
class SupercellModel:
    lattice: TriclinicLattice
    supercell_n: tuple
    basis: PlaneWaveBasis  # on the supercell lattice
    v0: FourierPotential
    phi: FourierPotential | None
    v_ext: FourierPotential | None
    constants: PhysicalConstants
    include_u1: bool = False
    include_u2: bool = False
    sectors: list = field(default_factory=list)

    @property
    def dimension(self) -> int:
        return 2 * self.basis.size

    @cached_property
    def parts(self) -> dict:
        """Spinful pieces, kept separate so strength ladders only rescale.

        ``bulk`` collects the translation-invariant perturbation
        (U1, U2 and -e phi); ``ext`` is V' and ``ext_so`` its own SO term.
        """
        b, c = self.basis, self.constants
        base = np.diag(kinetic_diagonal(b, c)).astype(complex) + scalar_coupling(b, b, self.v0)
        out = {"base": spin_embed(base)}
        bulk = so_coupling(b, b, self.v0, c) if self.include_u1 else np.zeros_like(out["base"])
        if self.phi is not None:
            energy = potential_energy(self.phi, c)
            bulk = bulk + spin_embed(scalar_coupling(b, b, energy))
            if self.include_u2:
                bulk = bulk + so_coupling(b, b, energy, c)
        out["bulk"] = bulk
        if self.v_ext is not None:
            out["ext"] = spin_embed(scalar_coupling(b, b, self.v_ext))
            out["ext_so"] = so_coupling(b, b, self.v_ext, c)
        else:
            out["ext"] = np.zeros_like(out["base"])
            out["ext_so"] = np.zeros_like(out["base"])
        return out

    def hamiltonian(self, ext_scale: float = 1.0, bulk_scale: float = 1.0, ext_so: bool = False) -> np.ndarray:
        p = self.parts
        h = p["base"] + bulk_scale * p["bulk"] + ext_scale * p["ext"]
        if ext_so:
            h = h + ext_scale * p["ext_so"]
        return h

    def spectrum(self, ext_scale: float = 1.0, bulk_scale: float = 1.0, ext_so: bool = False) -> np.ndarray:
        return eigenvalues(self.hamiltonian(ext_scale, bulk_scale, ext_so))

    def exact_splitting(self, energy0: float, window: float, ext_scale: float = 1.0,
                        bulk_scale: float = 1.0, ext_so: bool = False) -> ExactSplitting:
        h = self.hamiltonian(ext_scale, bulk_scale, ext_so)
        sol = eigensolve(h)
        return exact_splitting(sol.energies, energy0, window, matrix=h, vectors=sol.states)

    def describe(self) -> dict:
        return {
            "supercell": list(self.supercell_n),
            "n_plane_waves": self.basis.size,
            "dimension": self.dimension,
            "include_u1": self.include_u1,
            "include_u2": self.include_u2,
        }


def supercell_fold(
    lattice: TriclinicLattice,
    v0: FourierPotential,
    phi: FourierPotential | None,
    v_ext: FourierPotential | ExternalPotential | None,
    supercell_n,
    gmax: float,
    kpoint=(0.0, 0.0, 0.0),
    constants: PhysicalConstants | None = None,
    include_u1: bool = False,
    include_u2: bool = False,
    require_commensurate: bool = True,
) -> SupercellModel:
    """Fold the unit-cell problem at `kpoint` (fractional) onto the supercell.

    With require_commensurate the point must satisfy N o k in Z^3, so that
    k and -k land on the same supercell point (its Gamma point). A residue
    sector sitting exactly on the folded zone boundary (N even) keeps the
    plane waves of both of its representatives, which makes the folded
    basis closed under Q -> -Q.
    """
    constants = constants or PhysicalConstants()
    n = tuple(int(x) for x in supercell_n)
    if any(x < 1 for x in n):
        raise ValueError("supercell repetitions must be >= 1")
    k = np.asarray(kpoint, dtype=float)
    ks = k * np.asarray(n)
    commensurate = bool(np.all(np.abs(ks - np.rint(ks)) < 1e-9))
    if require_commensurate and not commensurate:
        raise IncommensurateK(f"k = {k.tolist()} is not of the form m/N for N = {list(n)}")
    if isinstance(v_ext, ExternalPotential):
        v_ext = v_ext.fourier
    unit_g = enumerate_gvectors(lattice, gmax)
    nvec = np.asarray(n, dtype=np.int64)
    # commensurate: every sector is j/N and the folded point is Gamma;
    # otherwise sectors are k + j/N around the folded point N o k
    kpoint_super = np.zeros(3) if commensurate else ks
    labels = []
    sectors = []
    for j in itertools.product(*(_sector_offsets(x) for x in n)):
        reps = [np.array(j, dtype=np.int64)]
        if commensurate:
            # a residue on the zone boundary also keeps its negative representative
            alt = np.array([-ji if 2 * ji == ni else ji for ji, ni in zip(j, n)], dtype=np.int64)
            if np.any(alt != reps[0]):
                reps.append(alt)
        for rep in reps:
            sectors.append(((kpoint_super + rep) / nvec).tolist())
            labels.append(rep[None, :] + unit_g * nvec[None, :])
    labels = np.unique(np.concatenate(labels), axis=0)
    super_lattice = lattice.supercell(n)
    norms = np.round(np.linalg.norm(super_lattice.cartesian_k(labels + kpoint_super), axis=1), 10)
    labels = labels[np.lexsort((labels[:, 2], labels[:, 1], labels[:, 0], norms))]
    basis = PlaneWaveBasis(super_lattice, kpoint_super, labels, float(gmax))
    return SupercellModel(
        lattice=lattice,
        supercell_n=n,
        basis=basis,
        v0=remap_potential(v0, n),
        phi=None if phi is None else remap_potential(phi, n),
        v_ext=None if v_ext is None else remap_potential(v_ext, n),
        constants=constants,
        include_u1=include_u1,
        include_u2=include_u2,
        sectors=sectors,
    )



@dataclass(frozen=True)
class ExactSplitting:
    splitting: float
    levels: tuple
    pair_spreads: tuple
    window: float
    nearest_foreign: float

    def to_dict(self) -> dict:
        return {
            "splitting": self.splitting,
            "levels": list(self.levels),
            "pair_spreads": list(self.pair_spreads),
            "window": self.window,
            "nearest_foreign": self.nearest_foreign,
        }


def exact_splitting(spectrum, energy0: float, window: float, matrix=None, vectors=None) -> ExactSplitting:
    """Split of the four levels nearest energy0: mean(top pair) - mean(bottom pair).

    Raises CrowdedWindow when a fifth level lies within `window` of the
    quartet's centre (which may drift from energy0 at second order). When
    the Hamiltonian and its eigenvectors are supplied, the four levels are
    re-evaluated by Rayleigh-Ritz on their eigenvectors: the quartet lives
    on low-|G| plane waves, so V^H H V carries rounding of order
    eps * |E0| instead of the eps * ||H|| left by the dense solver.
    """
    e = np.asarray(spectrum, dtype=float)
    if e.size < 4:
        raise CrowdedWindow("spectrum has fewer than four levels")
    if np.any(np.diff(e) < 0):
        raise ValueError("spectrum must be ascending")
    nearest = np.sort(np.argsort(np.abs(e - energy0), kind="stable")[:4])
    levels = e[nearest]
    centre = float(levels.mean())
    others = np.delete(e, nearest)
    foreign = float(np.abs(others - centre).min()) if others.size else np.inf
    if foreign <= window:
        raise CrowdedWindow(
            f"foreign level {foreign:.3e} Ha from the quartet centre {centre:.6f} inside window {window:.3e}; "
            "try a larger gmax or another band"
        )
    if matrix is not None and vectors is not None:
        v = vectors[:, nearest]
        ritz = v.conj().T @ (matrix @ v)
        ritz = 0.5 * (ritz + ritz.conj().T)
        shift = float(np.real(np.trace(ritz)) / 4)
        levels = np.linalg.eigvalsh(ritz - shift * np.eye(4)) + shift
    return ExactSplitting(
        splitting=float((levels[2] + levels[3] - levels[0] - levels[1]) / 2),
        levels=tuple(float(x) for x in levels),
        pair_spreads=(float(levels[1] - levels[0]), float(levels[3] - levels[2])),
        window=float(window),
        nearest_foreign=foreign,
    )


def same_k_splitting(matrix: np.ndarray, energy0: float, window: float) -> tuple[float, tuple]:
    """Gap between the two spinful levels at one k nearest energy0.

    A single k carries no Kramers partner, so with odd spin-orbit terms the
    two spin states split; levels are polished by Rayleigh-Ritz as in
    exact_splitting.
    """
    sol = eigensolve(matrix)
    e = sol.energies
    nearest = np.sort(np.argsort(np.abs(e - energy0), kind="stable")[:2])
    centre = float(e[nearest].mean())
    others = np.delete(e, nearest)
    foreign = float(np.abs(others - centre).min()) if others.size else np.inf
    if foreign <= window:
        raise CrowdedWindow(f"foreign level {foreign:.3e} Ha from the pair centre inside window {window:.3e}")
    v = sol.states[:, nearest]
    ritz = v.conj().T @ (matrix @ v)
    ritz = 0.5 * (ritz + ritz.conj().T)
    shift = float(np.real(np.trace(ritz)) / 2)
    pair = np.linalg.eigvalsh(ritz - shift * np.eye(2)) + shift
    return float(pair[1] - pair[0]), (float(pair[0]), float(pair[1]))


@dataclass
class ScanResult:
    rows: list  # (lambda, delta_pt, delta_exact, residual)
    exponent: float
    prefactor: float

    def to_dict(self) -> dict:
        return {
            "rows": [list(r) for r in self.rows],
            "exponent": self.exponent,
            "prefactor": self.prefactor,
        }


def fit_power_law(x, y) -> tuple[float, float]:
    """Least-squares fit of log y = log A + p log x over the positive entries."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        return float("nan"), float("nan")
    p, log_a = np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)
    return float(p), float(np.exp(log_a))


def linearity_scan(evaluate, lambdas, min_points: int = 4) -> ScanResult:
    """Run evaluate(lam) -> (delta_pt, delta_exact) over a geometric ladder and fit the residual."""
    lam = np.asarray(lambdas, dtype=float)
    if lam.size < min_points:
        raise ValueError(f"need at least {min_points} strengths, got {lam.size}")
    pos = lam[lam > 0]
    if pos.size >= 2:
        ratios = pos[1:] / pos[:-1]
        if np.any(ratios <= 1) or np.ptp(np.log(ratios)) > 1e-9:
            raise ValueError("positive strengths must form an increasing geometric ladder")
    rows = []
    for value in lam:
        pt, exact = evaluate(float(value))
        rows.append((float(value), float(pt), float(exact), float(abs(exact - pt))))
    p, a = fit_power_law([r[0] for r in rows], [r[3] for r in rows])
    return ScanResult(rows, p, a)


def sawtooth_fourier_integral(ext: ExternalPotential, n: int) -> complex:
    """integral_0^1 e^{-2 pi i n t} f(t) dt of the exact sawtooth profile, by adaptive quadrature.

    f(t) = s (frac(t) - 1/2) - s (frac(M t) - 1/2) / M jumps at t = j/M, so
    each piece between jumps (shifted by the origin) is integrated separately.
    """
    m = int(ext.params["unit_period"])
    s = ext.strength
    t0 = float(ext.params.get("origin", 0.0))

    def f(t):
        u = t - t0
        return s * ((u - np.floor(u)) - 0.5) - s * ((m * u - np.floor(m * u)) - 0.5) / m

    re = im = 0.0
    for j in range(m):
        lo, hi = t0 + j / m, t0 + (j + 1) / m
        r, _ = scipy.integrate.quad(lambda t: f(t) * np.cos(2 * np.pi * n * t), lo, hi,
                                    limit=400, epsabs=1e-16, epsrel=1e-13)
        i, _ = scipy.integrate.quad(lambda t: f(t) * np.sin(2 * np.pi * n * t), lo, hi,
                                    limit=400, epsabs=1e-16, epsrel=1e-13)
        re += r
        im += i
    return complex(re, -im)


def beta_prime_quadrature(orbital_k, orbital_mk, basis_k: PlaneWaveBasis, basis_mk: PlaneWaveBasis,
                          ext: ExternalPotential) -> complex:
    """<k|V'|-k> from the real-space sawtooth profile.

    The product psi_k^* psi_-k is a sum of plane waves e^{-iq.r}; V' depends
    on r only through t = h.x (x in supercell fractions, h the primitive
    harmonic), so only transfers q = n h survive the cell average, each
    weighted by the 1D integral of the profile.
    """
    if ext.kind != "sawtooth":
        raise ValueError("quadrature oracle is implemented for the sawtooth only")
    nvec = np.asarray(ext.supercell_n, dtype=float)
    h = np.asarray(ext.params["harmonic"], dtype=float)
    q = (basis_k.wavevectors_frac()[:, None, :] - basis_mk.wavevectors_frac()[None, :, :]) * nvec
    # q parallel to h with integer multiple n
    hn = h / np.dot(h, h)
    mult = q @ hn
    n_int = np.rint(mult)
    on_line = np.all(np.abs(q - n_int[..., None] * h) < 1e-8, axis=-1)
    weights = np.outer(np.conj(orbital_k), orbital_mk)
    total = 0j
    cache = {}
    for n in np.unique(n_int[on_line]).astype(int):
        if n not in cache:
            cache[n] = sawtooth_fourier_integral(ext, n)
        total += weights[on_line & (n_int == n)].sum() * cache[n]
    return complex(total)
