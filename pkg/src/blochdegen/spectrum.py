"""Dense Hermitian eigensolution, degeneracy clustering and band paths."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import EigensolverFailure, NonHermitian
from .hamiltonian import CrystalModel, HamiltonianMatrix

TOL_DEG = 1e-9


@dataclass(frozen=True, eq=False)
class EigenSolution:
    kpoint: np.ndarray
    energies: np.ndarray
    states: np.ndarray  # columns are eigenvectors

    def residual(self, matrix: np.ndarray) -> float:
        """max_n ||H v_n - E_n v_n||_2."""
        r = matrix @ self.states - self.states * self.energies[None, :]
        return float(np.linalg.norm(r, axis=0).max())

    def gram_residual(self) -> float:
        gram = self.states.conj().T @ self.states
        return float(np.abs(gram - np.eye(gram.shape[0])).max())


@dataclass(frozen=True)
class DegeneracyCluster:
    indices: tuple
    mean: float
    spread: float

    @property
    def size(self) -> int:
        return len(self.indices)


def fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of each column real and positive.

    Ties are broken by the lowest row index; magnitudes are compared after
    rounding so that last-bit noise cannot flip the choice between runs.
    """
    mags = np.round(np.abs(vectors), 12)
    pivot = np.argmax(mags, axis=0)  # argmax returns the first maximum
    values = vectors[pivot, np.arange(vectors.shape[1])]
    phases = np.where(np.abs(values) > 0, values / np.abs(values), 1.0)
    return vectors * phases.conj()[None, :]


def eigensolve(h: HamiltonianMatrix | np.ndarray, kpoint=None) -> EigenSolution:
    matrix = h.matrix if isinstance(h, HamiltonianMatrix) else np.asarray(h)
    if kpoint is None:
        kpoint = h.kpoint if isinstance(h, HamiltonianMatrix) else np.zeros(3)
    scale = max(1.0, float(np.abs(matrix).max())) if matrix.size else 1.0
    herm = float(np.abs(matrix - matrix.conj().T).max()) if matrix.size else 0.0
    if herm > 1e-10 * scale:
        raise NonHermitian(f"hermiticity residual {herm:.3e}")
    try:
        energies, vectors = scipy.linalg.eigh(matrix)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverFailure(str(exc)) from exc
    if not np.all(np.isfinite(energies)):
        raise EigensolverFailure("non-finite eigenvalues")
    return EigenSolution(np.asarray(kpoint, dtype=float), energies, fix_phases(vectors))


def eigenvalues(h: HamiltonianMatrix | np.ndarray) -> np.ndarray:
    matrix = h.matrix if isinstance(h, HamiltonianMatrix) else np.asarray(h)
    try:
        return scipy.linalg.eigvalsh(matrix)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverFailure(str(exc)) from exc


def group_degenerate(energies, tol_deg: float = TOL_DEG) -> list[DegeneracyCluster]:
    """Greedy gap clustering of an ascending list: split where a gap exceeds tol_deg."""
    e = np.asarray(energies, dtype=float)
    if e.size == 0:
        return []
    if np.any(np.diff(e) < -tol_deg):
        raise ValueError("energies must be ascending")
    clusters = []
    start = 0
    for i in range(1, e.size + 1):
        if i == e.size or e[i] - e[i - 1] > tol_deg:
            block = e[start:i]
            clusters.append(
                DegeneracyCluster(tuple(range(start, i)), float(block.mean()), float(block.max() - block.min()))
            )
            start = i
    return clusters


def merged_spectrum(model: CrystalModel, kpoint, spinful: bool = True) -> np.ndarray:
    """Sorted union of the spectra at k and -k."""
    k = np.asarray(kpoint, dtype=float)
    build = model.spinful if spinful else model.spinless
    return np.sort(np.concatenate([eigenvalues(build(k)), eigenvalues(build(-k))]))


def cluster_sizes(energies, tol_deg: float = TOL_DEG) -> list[int]:
    return [c.size for c in group_degenerate(energies, tol_deg)]


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("BLOCHDEGEN_THREADS", "1")))
    except ValueError:
        return 1


def kpath(nodes, samples_per_segment: int) -> np.ndarray:
    """Fractional k-points along straight segments; both ends included."""
    nodes = np.asarray(nodes, dtype=float)
    if len(nodes) < 2:
        raise ValueError("a band path needs at least two nodes")
    if samples_per_segment < 1:
        raise ValueError("samples_per_segment must be >= 1")
    points = [nodes[0]]
    for start, stop in zip(nodes[:-1], nodes[1:]):
        for s in range(1, samples_per_segment + 1):
            points.append(start + (stop - start) * s / samples_per_segment)
    return np.array(points)


def band_path(model: CrystalModel, kpath_nodes, samples_per_segment: int, spinful: bool = True):
    """List of (k_frac, energies) rows along the path, in path order."""
    points = kpath(kpath_nodes, samples_per_segment)
    build = model.spinful if spinful else model.spinless

    def row(k):
        return k, eigensolve(build(k)).energies

    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        return list(pool.map(row, points))
