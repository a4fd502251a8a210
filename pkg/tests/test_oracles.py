import math

import numpy as np
import pytest

from qhf.model import SX, SZ
from qhf.oracles import (
    DenseBath,
    DenseModel,
    TruncationError,
    dense_characteristic_function,
    dense_heat_operator_moments,
    dense_mean_energy_change,
    dense_tpm_moments,
    evolve_density,
    ib_cumulant_fd,
    ib_log_char,
    ib_mean,
    ib_variance,
    propagator,
    thermofield_double,
)

RHO_PLUS = 0.5 * np.ones((2, 2))


def spin(eps, delta):
    return eps * SZ + delta * SX


def test_ib_mean_limits():
    assert ib_mean(0.1, 5.0, 0.0) == 0.0
    assert ib_mean(0.1, 5.0, 0.2) == pytest.approx(0.25, rel=1e-14)
    assert ib_mean(0.1, 5.0, 1e6) == pytest.approx(0.5, rel=1e-9)


def test_ib_variance_limits_and_linearity():
    assert ib_variance(0.1, 5.0, math.inf, 0.0) == 0.0
    # Riemann-Lebesgue: the oscillating part decays like 1/t^2
    assert ib_variance(0.1, 1.0, math.inf, 200.0) == pytest.approx(0.1, rel=1e-4)
    for beta in (math.inf, 1.0):
        a = ib_variance(0.1, 5.0, beta, 1.3)
        b = ib_variance(0.7, 5.0, beta, 1.3)
        assert b == pytest.approx(7 * a, rel=1e-10)
    assert ib_variance(0.1, 5.0, 1.0, 1.0) > ib_variance(0.1, 5.0, math.inf, 1.0)


def test_ib_log_char():
    assert ib_log_char(0.1, 5.0, 1.0, 0.0, 1.0) == 0
    for beta in (math.inf, 1.0):
        for t in (0.3, 2.0):
            assert ib_cumulant_fd(1, 0.1, 5.0, beta, t) == pytest.approx(ib_mean(0.1, 5.0, t), rel=1e-6)
            assert ib_cumulant_fd(2, 0.1, 5.0, beta, t) == pytest.approx(ib_variance(0.1, 5.0, beta, t),
                                                                         rel=1e-5)


def single_mode(g, beta=math.inf, d=30, eps=0.0, delta=1.0, w=1.0):
    return DenseModel(spin(eps, delta), [DenseBath.star([w], [g], beta, [d])], RHO_PLUS)


def test_zero_coupling_gives_zero_moments():
    m = DenseModel(spin(1.0, 0.5), [DenseBath.star([0.7, 1.3], [0.0, 0.0], 2.0, [18, 10])], RHO_PLUS)
    assert np.allclose(dense_tpm_moments(m, [0.5, 2.0], 3), 0.0, atol=1e-13)


def test_single_mode_independent_boson():
    # S_x = +-1/2 displaces the mode: <Q> = g^2 (1 - cos wt) / (2 w)
    g, w, t = 0.4, 1.0, np.array([0.5, 1.7, 3.0])
    m = single_mode(g, w=w)
    ref = g**2 * (1 - np.cos(w * t)) / (2 * w)
    assert np.allclose(dense_tpm_moments(m, t, 1)[:, 0], ref, atol=1e-12)
    assert np.allclose(dense_mean_energy_change(m, t), ref, atol=1e-12)


def test_tpm_mean_matches_energy_change():
    m = DenseModel(spin(0.8, 0.6), [DenseBath.star([0.9, 1.6], [0.3, 0.2], 2.0, [17, 12])], RHO_PLUS)
    t = [0.4, 1.1]
    assert np.allclose(dense_tpm_moments(m, t, 1)[:, 0], dense_mean_energy_change(m, t), atol=1e-10)


def test_characteristic_function_derivative():
    m = single_mode(0.5, beta=1.0, d=30, eps=0.5)
    h = 1e-4
    chi = [dense_characteristic_function(m, x, 1.2) for x in (-h, 0.0, h)]
    assert chi[1] == pytest.approx(1.0, abs=1e-12)
    m1 = ((chi[2] - chi[0]) / (2j * h)).real
    assert m1 == pytest.approx(dense_tpm_moments(m, [1.2], 1)[0, 0], abs=1e-8)


def test_moment_inequality_and_unitarity():
    m = single_mode(0.5, beta=2.0, d=24, eps=0.3)
    mom = dense_tpm_moments(m, [0.7, 1.9], 2)
    assert np.all(mom[:, 1] >= mom[:, 0] ** 2)
    full = np.diag(np.arange(6.0)) + 0.1
    u = propagator(full, 0.9)
    assert np.allclose(u @ u.conj().T, np.eye(6), atol=1e-13)
    assert np.trace(evolve_density(m, 0.8)).real == pytest.approx(1.0, abs=1e-12)


def test_doubled_equals_tpm_two_modes_finite_temperature():
    m = DenseModel(spin(0.4, 0.7), [DenseBath.star([0.8, 1.5], [0.3, 0.25], 2.0, [19, 12])], RHO_PLUS)
    t = [0.0, 0.6, 1.2]
    dbl = dense_heat_operator_moments(thermofield_double(m, [[7, 7]], [[6, 6]]), t, 3)
    tpm = dense_tpm_moments(m, t, 3)
    assert np.allclose(dbl[0], 0.0, atol=1e-15)
    assert np.max(np.abs(dbl - tpm)) < 1e-10


def test_zero_temperature_doubling_is_the_original_model():
    m = DenseModel(spin(1.0, 0.3), [DenseBath.star([1.2], [0.4], math.inf, [12])], RHO_PLUS)
    dbl = thermofield_double(m)
    assert dbl.baths[0].aux is None
    t = [0.5, 1.5]
    assert np.allclose(dense_heat_operator_moments(dbl, t, 3), dense_tpm_moments(m, t, 3), atol=1e-12)


def test_two_bath_current_moments():
    baths = [DenseBath.star([1.1], [0.3], 1.0, [26]), DenseBath.star([0.9], [0.4], math.inf, [10])]
    m = DenseModel(spin(1.0, 0.0), baths, np.diag([1.0, 0.0]).astype(complex))
    dbl = thermofield_double(m, [[9], [10]], [[8], None])
    t = [0.5, 1.0]
    a = dense_heat_operator_moments(dbl, t, 2, weights=(-1, 1))
    b = dense_tpm_moments(m, t, 2, weights=(-1, 1))
    assert np.max(np.abs(a - b)) < 1e-8


def test_thermal_truncation_is_checked():
    m = single_mode(0.3, beta=1.0, d=5)
    with pytest.raises(TruncationError) as err:
        dense_tpm_moments(m, [1.0], 1)
    assert err.value.required > 5


def test_required_dims_follow_mode_order():
    b = DenseBath.star([1.7, 0.5], [0.1, 0.1], 2.0)
    high, low = b.required_dims()
    assert low > high


def test_dense_cap():
    with pytest.raises(ValueError):
        DenseModel(spin(1, 0), [DenseBath.star([1, 1, 1], [0.1] * 3, math.inf, [20, 20, 20])], RHO_PLUS)
