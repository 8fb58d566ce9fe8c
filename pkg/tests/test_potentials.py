import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from blochdegen.errors import NonHermitianAmplitudes, ParityViolation
from blochdegen.lattice import TWO_PI
from blochdegen.potentials import (
    FourierPotential,
    Parity,
    evaluate_real,
    gaussian_external,
    parity_residual,
    random_fourier_potential,
    sawtooth_external,
    translation_breaking,
)


def test_tagged_parity_is_enforced():
    with pytest.raises(ParityViolation):
        FourierPotential({(1, 0, 0): 0.1j, (-1, 0, 0): -0.1j}, Parity.EVEN)
    with pytest.raises(ParityViolation):
        FourierPotential({(1, 0, 0): 0.1, (-1, 0, 0): 0.1}, Parity.ODD)
    with pytest.raises(ParityViolation):
        FourierPotential({(0, 0, 0): 0.3}, Parity.ODD)


def test_real_field_is_enforced():
    with pytest.raises(NonHermitianAmplitudes):
        FourierPotential({(1, 0, 0): 0.1, (-1, 0, 0): 0.2}, Parity.NONE)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), parity=st.sampled_from(["even", "odd", "none"]))
def test_random_potentials_are_real_with_the_requested_parity(lattice, seed, parity):
    v = random_fourier_potential(lattice, seed, parity, 3, 0.5, 0.6)
    assert v.real_field_residual() == 0.0
    even_res, odd_res = parity_residual(v)
    if parity == "even":
        assert even_res == 0.0
    elif parity == "odd":
        assert odd_res == 0.0
        assert v.amp((0, 0, 0)) == 0


def test_random_potential_is_seed_deterministic(lattice):
    a = random_fourier_potential(lattice, 7, "even", 3, 0.5, 0.6)
    b = random_fourier_potential(lattice, 7, "even", 3, 0.5, 0.6)
    c = random_fourier_potential(lattice, 8, "even", 3, 0.5, 0.6)
    assert a.amplitudes == b.amplitudes
    assert a.amplitudes != c.amplitudes


def test_evaluate_real_matches_direct_sum(lattice, phi):
    rng = np.random.default_rng(3)
    r = rng.normal(size=(20, 3))
    direct = np.zeros(20, dtype=complex)
    for g, a in phi.amplitudes.items():
        direct += a * np.exp(1j * r @ lattice.cartesian_k(np.array(g, float)))
    assert np.allclose(evaluate_real(phi, lattice, r), direct.real, atol=1e-13)
    assert np.abs(direct.imag).max() < 1e-13
    # odd potential: V(-r) = -V(r)
    assert np.allclose(evaluate_real(phi, lattice, -r), -direct.real, atol=1e-13)


def test_sawtooth_first_harmonic_against_quadrature(lattice):
    strength = 0.01
    ext = sawtooth_external(lattice, (1, 0, 0), strength, (8, 1, 1), qmax=40.0)
    assert ext.params["harmonic"] == (1, 0, 0)
    assert ext.params["unit_period"] == 8
    expected = 1j * strength / TWO_PI

    # integrate the full sawtooth (before removing unit harmonics) over one period
    def part(fn):
        return integrate.quad(lambda t: fn(t) * (t - 0.5), 0.0, 1.0, limit=200)[0]

    re = part(lambda t: np.cos(TWO_PI * t))
    im = -part(lambda t: np.sin(TWO_PI * t))
    assert abs(strength * complex(re, im) - expected) < 1e-12
    assert abs(ext.fourier.amp((1, 0, 0)) - expected) < 1e-15
    assert abs(ext.fourier.amp((-1, 0, 0)) - np.conj(expected)) < 1e-15
    # unit-periodic harmonics are dropped
    assert ext.fourier.amp((8, 0, 0)) == 0


def test_sawtooth_profile_matches_its_fourier_series(lattice):
    ext = sawtooth_external(lattice, (1, 0, 0), 0.01, (4, 1, 1), qmax=2000.0)
    rng = np.random.default_rng(0)
    frac = rng.uniform(0, 4, size=(15, 3))
    r = lattice.cartesian_r(frac)
    t = (r @ ext.direction) * np.linalg.norm(lattice.b1 / 4) / TWO_PI
    # keep clear of the jumps, where the truncated series rings
    keep = np.abs(4 * t - np.rint(4 * t)) > 0.1
    series = evaluate_real(ext.fourier, lattice, r[keep])
    exact = ext.profile(lattice, r[keep])
    assert np.abs(series - exact).max() < 5e-5


def test_origin_shift_is_a_phase(lattice):
    a = sawtooth_external(lattice, (1, 0, 0), 0.01, (8, 1, 1), 40.0)
    b = sawtooth_external(lattice, (1, 0, 0), 0.01, (8, 1, 1), 40.0, origin=0.25)
    for n in (1, 2, 3):
        g = (n, 0, 0)
        assert np.isclose(b.fourier.amp(g), a.fourier.amp(g) * np.exp(-1j * TWO_PI * n * 0.25), atol=1e-15)


def test_translation_breaking(lattice):
    rng = np.random.default_rng(1)
    r = rng.normal(size=(30, 3))
    ext = sawtooth_external(lattice, (1, 0, 0), 0.01, (8, 1, 1), 40.0)
    assert translation_breaking(ext, lattice, r) > 1e-3
    bump = gaussian_external(lattice, 0.01, (4, 1, 1), 0.7, (0.3, 0.0, 0.0), 25.0)
    assert translation_breaking(bump, lattice, r) > 1e-4
    assert bump.fourier.real_field_residual() == 0.0


def test_potentials_add_and_scale():
    a = FourierPotential({(1, 0, 0): 0.2, (-1, 0, 0): 0.2}, Parity.EVEN)
    b = a.scaled(-1.0)
    assert (a + b).is_zero()
    assert (a + b).parity is Parity.EVEN
