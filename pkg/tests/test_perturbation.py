import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blochdegen.errors import (
    AccidentalDegeneracy,
    DegenerateSplit,
    RegimeViolation,
    SelectionRuleViolation,
)
from blochdegen.lattice import build_basis
from blochdegen.perturbation import (
    I4,
    Perturbation,
    SecularMatrix,
    build_quartet,
    first_order,
    inversion_lock_residual,
    quartet_time_reversal,
    secular_elements,
    splitting_pedial,
    splitting_pinacoidal,
    subspace_maps,
    tr_spinor_check,
)
from blochdegen.potentials import FourierPotential

from conftest import GENERIC_K


def test_closed_form_example():
    # sqrt(0.03^2 + 0.04^2) = 0.05
    sm = SecularMatrix(a1=0.2, b1=0.2, a2=0.03, b2=-0.03, c2=0.04j, scale=1.0)
    out = first_order(sm)
    assert out.E1_plus == pytest.approx(0.25, abs=1e-15)
    assert out.E1_minus == pytest.approx(0.15, abs=1e-15)
    assert out.closed_form_residual <= 1e-15
    assert not out.fourfold


def test_pinacoidal_example():
    sm = SecularMatrix(beta_prime=0.005j, scale=1.0)
    assert splitting_pinacoidal(sm) == pytest.approx(0.01, abs=1e-17)
    assert first_order(sm).splitting == pytest.approx(0.01, abs=1e-16)


def test_pedial_example():
    sm = SecularMatrix(a2=3e-4, b2=-3e-4, c2=4e-4j, scale=1.0)
    assert splitting_pedial(sm) == pytest.approx(1e-3, rel=1e-14)
    with pytest.raises(SelectionRuleViolation):
        splitting_pinacoidal(sm)


def test_layout_zeros():
    sm = SecularMatrix(a1=0.1, b1=0.1, a2=0.02, b2=-0.02, c2=0.01 + 0.03j, d1=0.2, d2=0.05j, beta_prime=0.01)
    m = sm.matrix()
    assert m[0, 3] == 0 and m[3, 0] == 0 and m[1, 2] == 0 and m[2, 1] == 0
    assert np.allclose(m, m.conj().T)


def test_zero_perturbation_is_fourfold():
    out = first_order(SecularMatrix())
    assert out.splitting == 0.0 and out.fourfold


def test_inapplicable_closed_form():
    with pytest.raises(SelectionRuleViolation):
        first_order(SecularMatrix(alpha=1e-3, scale=1.0))
    with pytest.raises(SelectionRuleViolation):
        SecularMatrix(a1=0.1j).matrix()


def test_regime_guard():
    sm = SecularMatrix(beta_prime=1e-3, ext_so={"a": 2e-5, "b": 0, "c": 0, "d": 0}, scale=1.0)
    with pytest.raises(RegimeViolation):
        splitting_pinacoidal(sm)
    assert splitting_pinacoidal(sm, guard=False) == pytest.approx(2e-3)


def test_degenerate_split():
    with pytest.raises(DegenerateSplit):
        subspace_maps(SecularMatrix(a1=0.3, b1=0.3))


def test_quartet_time_reversal_squares_to_minus_one():
    u = quartet_time_reversal()
    assert np.array_equal(u @ u.conj(), -np.eye(4))
    assert np.array_equal(I4 @ I4, np.eye(4))


component = st.floats(-1.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(a1=component, a2=component, c2r=component, c2i=component, dr=component, di=component)
def test_closed_form_matches_eigensolve(a1, a2, c2r, c2i, dr, di):
    sm = SecularMatrix(a1=a1, b1=a1, a2=a2, b2=-a2, c2=complex(c2r, c2i), beta_prime=complex(dr, di), scale=1.0)
    out = first_order(sm)
    assert out.closed_form_residual <= 1e-12
    assert max(out.doublet_spreads) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(a1=component, a2=component, c2r=component, c2i=component, di=component)
def test_odd_splittings_are_swapped_by_inversion(a1, a2, c2r, c2i, di):
    # odd perturbations leave d purely imaginary, so I4 M I4 = -M + const
    sm = SecularMatrix(a1=a1, b1=a1, a2=a2, b2=-a2, c2=complex(c2r, c2i), beta_prime=1j * di, scale=1.0)
    if first_order(sm).splitting > 1e-6:
        assert max(subspace_maps(sm).values()) <= 1e-10


def test_even_coupling_is_not_swapped():
    # a real beta' comes from a V' that is even about the inversion centre
    maps = subspace_maps(SecularMatrix(beta_prime=0.01, scale=1.0))
    assert maps["k_preserves_upper"] <= 1e-15
    assert maps["i_swaps_upper"] > 0.5


@pytest.fixture(scope="module")
def quartet(lattice, v0, constants):
    basis = build_basis(lattice, GENERIC_K, 16.0)
    return build_quartet(basis, v0, 0, constants=constants)


def test_quartet_structure(quartet):
    assert np.abs(quartet.gram() - np.diag(np.diag(quartet.gram()))).max() <= 1e-14
    assert np.allclose(np.diag(quartet.gram()), 1.0, atol=1e-13)
    assert tr_spinor_check(quartet) <= 1e-15
    assert inversion_lock_residual(quartet) == 0.0
    assert quartet.gap > 1e-3


def test_bulk_selection_rules(quartet, v0, phi, constants):
    sm = secular_elements(quartet, Perturbation(constants, v0, phi))
    limit = 1e-12 * sm.scale
    out = first_order(sm, translation_invariant=True)
    assert max(out.selection.values()) <= limit
    assert out.layout_residual <= limit
    assert out.closed_form_residual <= 1e-12 * max(1.0, abs(out.E1_plus))
    # pedial: the odd SO term splits the quartet
    assert out.splitting > 1e-6
    # pinacoidal: no phi, no split
    sm0 = secular_elements(quartet, Perturbation(constants, v0, None))
    assert first_order(sm0, translation_invariant=True).splitting <= 1e-12 * sm0.scale


def test_splitting_is_rephasing_invariant(quartet, v0, phi, constants):
    pert = Perturbation(constants, v0, phi, bulk_scale=0.1)
    sm = secular_elements(quartet, pert)
    base = first_order(sm).splitting
    ref = np.linalg.eigvalsh(sm.projected)
    rng = np.random.default_rng(9)
    for _ in range(3):
        q = quartet.rephased(np.exp(1j * rng.uniform(0, 2 * np.pi, 4)))
        moved = secular_elements(q, pert)
        assert first_order(moved).splitting == pytest.approx(base, rel=1e-12)
        assert np.abs(np.linalg.eigvalsh(moved.projected) - ref).max() <= 1e-12 * sm.scale


def test_accidental_degeneracy_detected(cubic):
    basis = build_basis(cubic, (0.5, 0.0, 0.0), 7.0)
    with pytest.raises(AccidentalDegeneracy):
        build_quartet(basis, FourierPotential.zero(), 0)


def test_outcome_json_round_trip(quartet, v0, phi, constants):
    sm = secular_elements(quartet, Perturbation(constants, v0, phi))
    out = first_order(sm)
    out.subspace = subspace_maps(sm)
    data = out.to_dict(sm)
    back = json.loads(json.dumps(data))
    assert back == data
    assert set(back["components"]) >= {"a1", "c2", "beta_prime"}
    assert complex(*back["components"]["c2"]) == sm.c2
