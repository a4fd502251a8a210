import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qhf.bath import (
    FERMIONIC,
    ZERO_TEMPERATURE,
    BathSpec,
    SpectralDensity,
    bogoliubov_coefficients,
    thermal_occupation,
    thermofield_split,
)


def ohmic_bath(beta=1.0, alpha=0.1, omega_c=5.0, **kw):
    return BathSpec(SpectralDensity.ohmic(alpha, omega_c), beta, **kw)


def test_occupation_zero_temperature():
    assert thermal_occupation(1.0, ohmic_bath(ZERO_TEMPERATURE)) == 0.0


def test_occupation_bose_and_fermi():
    assert thermal_occupation(1.0, ohmic_bath(1.0)) == pytest.approx(1 / (math.e - 1), abs=1e-12)
    assert float(thermal_occupation(1.0, ohmic_bath(1.0))) == pytest.approx(0.5819767, abs=1e-7)
    fermi = ohmic_bath(1.0, statistics=FERMIONIC)
    assert float(thermal_occupation(1.0, fermi)) == pytest.approx(0.2689414, abs=1e-7)


def test_occupation_rejects_nonpositive_bosonic_frequency():
    with pytest.raises(ValueError):
        thermal_occupation(0.0, ohmic_bath(1.0))


def test_bose_requires_zero_mu():
    with pytest.raises(ValueError):
        ohmic_bath(1.0, mu=0.3)


def test_bogoliubov_values():
    u, v = bogoliubov_coefficients(3.7, ohmic_bath(ZERO_TEMPERATURE))
    assert (u, v) == (1.0, 0.0)
    u, v = bogoliubov_coefficients(1.0, ohmic_bath(1.0))
    assert float(u) == pytest.approx(1.2578, abs=1e-4)
    assert float(v) == pytest.approx(0.7629, abs=1e-4)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 50.0), st.floats(0.05, 20.0))
def test_bogoliubov_hyperbolic_identity(omega, beta):
    u, v = bogoliubov_coefficients(omega, ohmic_bath(beta))
    # cancellation: the rounding error scales with u^2 + v^2
    eps = 4 * np.finfo(float).eps * float(u * u + v * v)
    assert float(u * u - v * v) == pytest.approx(1.0, abs=eps)
    assert u >= 0


@settings(max_examples=100, deadline=None)
@given(st.floats(-10.0, 10.0), st.floats(0.05, 20.0))
def test_fermionic_identity(omega, beta):
    u, v = bogoliubov_coefficients(omega, ohmic_bath(beta, statistics=FERMIONIC))
    assert float(u * u + v * v) == pytest.approx(1.0, abs=1e-14)


def test_split_zero_temperature():
    bath = ohmic_bath(ZERO_TEMPERATURE)
    m_o, m_a = thermofield_split(bath)
    w = np.linspace(0.1, 40, 50)
    assert np.allclose(m_o(w), bath.spectral(w))
    assert m_a.is_zero and np.all(m_a(w) == 0)


def test_split_difference_is_spectral_density():
    bath = ohmic_bath(0.7)
    m_o, m_a = thermofield_split(bath)
    w = np.linspace(0.01, 50, 200)
    assert np.allclose(m_o(w) - m_a(w), bath.spectral(w), rtol=1e-12, atol=1e-15)


def test_split_ratio_is_boltzmann_factor():
    m_o, m_a = thermofield_split(ohmic_bath(1.0))
    w = np.linspace(0.01, 30, 100)
    assert np.allclose(m_a(w) / m_o(w), np.exp(-w), rtol=1e-12)


def test_split_density_regular_at_zero():
    m_o, m_a = thermofield_split(ohmic_bath(2.0, alpha=0.3, omega_c=1.0))
    # n J -> 2 alpha / beta as w -> 0
    assert float(m_a(np.array([0.0]))[0]) == pytest.approx(0.3, rel=1e-9)
    assert np.isfinite(m_o(np.array([0.0, 1e-14]))).all()


def test_tabulated_density_from_file(tmp_path):
    w = np.linspace(0, 10, 101)
    path = tmp_path / "J.txt"
    path.write_text("# w J\n" + "\n".join(f"{a} {2 * 0.1 * a * math.exp(-a)}" for a in w))
    sd = SpectralDensity.from_file(path)
    ref = SpectralDensity.ohmic(0.1, 1.0)
    x = np.linspace(0.5, 9.5, 7)
    assert np.allclose(sd(x), ref(x), rtol=5e-3)
    assert sd.domain_max == pytest.approx(10.0)


def test_invalid_spectral_parameters():
    with pytest.raises(ValueError):
        SpectralDensity.ohmic(-0.1, 1.0)
    with pytest.raises(ValueError):
        SpectralDensity.ohmic(0.1, 0.0)
    with pytest.raises(ValueError):
        BathSpec.from_temperature(SpectralDensity.ohmic(0.1, 1.0), -1.0)
