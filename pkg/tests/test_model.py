import itertools

import numpy as np
import pytest

from qhf.bath import BathSpec, SpectralDensity
from qhf.chain import chain_coefficients
from qhf.model import (
    SX,
    SpinBosonParams,
    build_heat_operator,
    build_transformed_hamiltonian,
    initial_state_vectors,
    plan_layout,
    tapered_dims,
)
from qhf.mps import expectation, product_state


def setup(temps=(0.0,), length=2, d=3, alphas=None, params=None):
    alphas = alphas or [0.2] * len(temps)
    baths = [BathSpec.from_temperature(SpectralDensity.ohmic(a, 1.0, 10.0), t) for a, t in zip(alphas, temps)]
    chains = [chain_coefficients(b, length) for b in baths]
    layout = plan_layout(len(baths), length, [b.zero_temperature for b in baths], d)
    params = params or SpinBosonParams(1.0, 0.5, "plus_x")
    return params, baths, chains, layout


def test_layout_examples():
    assert plan_layout(1, 3, [True], 4).describe() == "S O1[0] O1[1] O1[2]"
    assert plan_layout(1, 2, [False], 4).describe() == "A1[1] A1[0] S O1[0] O1[1]"
    two = plan_layout(2, 2, [False, True], 4)
    assert len(two) == 7
    assert two.describe() == "A1[1] A1[0] O1[1] O1[0] S O2[0] O2[1]"


def test_layout_validation():
    with pytest.raises(ValueError):
        plan_layout(3, 2, [True] * 3)
    with pytest.raises(ValueError):
        plan_layout(1, 2, [True], [[4, 4, 4]])


def test_tapered_dims():
    assert tapered_dims(5, 8, 4) == [8, 7, 6, 5, 4]
    assert tapered_dims(1) == [8]


@pytest.mark.parametrize("temps", [(0.0,), (1.0,), (1.0, 0.0)])
def test_hamiltonian_hermitian_and_mpo_matches_terms(temps):
    params, baths, chains, layout = setup(temps)
    h = build_transformed_hamiltonian(params, baths, chains, layout)
    dense = h.terms.to_dense()
    assert np.allclose(dense, dense.conj().T, atol=1e-12)
    assert np.allclose(h.op.to_dense(), dense, atol=1e-12)


def test_zero_temperature_has_no_auxiliary_terms():
    params, baths, chains, layout = setup((0.0,))
    text = build_transformed_hamiltonian(params, baths, chains, layout).dump()
    assert "A1" not in text and "auxiliary" not in text
    assert "O coupling c0" in text


def test_spin_flip_symmetry_of_spectrum():
    spectra = []
    for eps in (1.0, -1.0):
        params, baths, chains, layout = setup((1.0,), params=SpinBosonParams(eps, 0.0, "up_z"))
        h = build_transformed_hamiltonian(params, baths, chains, layout)
        spectra.append(np.linalg.eigvalsh(h.terms.to_dense()))
        s = layout.system_index
        sx = np.kron(np.kron(np.eye(int(np.prod(layout.phys_dims[:s]))), SX),
                     np.eye(int(np.prod(layout.phys_dims[s + 1:]))))
        dense = h.terms.to_dense()
        assert np.linalg.norm(dense @ sx - sx @ dense) > 1e-3
    assert np.allclose(spectra[0], spectra[1], atol=1e-10)


def test_heat_operators_commute_and_are_hermitian():
    params, baths, chains, layout = setup((1.0, 0.0))
    q = build_heat_operator(baths, chains, layout)
    q1, q2 = (op.to_dense() for op in q.per_bath)
    assert np.allclose(q1, q1.conj().T) and np.allclose(q2, q2.conj().T)
    assert np.max(np.abs(q1 @ q2 - q2 @ q1)) < 1e-13
    assert np.allclose(q.delta.to_dense(), q2 - q1, atol=1e-13)


@pytest.mark.parametrize("length", [4, 16, 64])
@pytest.mark.parametrize("temp", [0.0, 1.0])
def test_heat_operator_bond_dimension(length, temp):
    bath = BathSpec.from_temperature(SpectralDensity.ohmic(0.1, 1.0), temp)
    chains = [chain_coefficients(bath, length)]
    layout = plan_layout(1, length, [bath.zero_temperature], 3)
    q = build_heat_operator([bath], chains, layout)
    assert max(q.per_bath[0].bond_dims) <= 4


def test_chain_form_spectrum_matches_star_form():
    d, length = 4, 3
    params, baths, chains, layout = setup((0.0,), length=length, d=d)
    q = build_heat_operator(baths, chains, layout).per_bath[0].to_dense()
    # Q conserves the total excitation number; sectors N <= d - 1 are untruncated
    occ = np.array(list(itertools.product(range(2), *[range(d)] * length)))[:, 1:].sum(axis=1)
    keep = occ <= d - 1
    chain_spec = np.sort(np.linalg.eigvalsh(q[np.ix_(keep, keep)]))
    freqs, _ = chains[0][0].star_modes()
    star = []
    for n in itertools.product(range(d), repeat=length):
        if sum(n) <= d - 1:
            star += [float(np.dot(n, freqs))] * 2  # spin degeneracy
    assert np.allclose(chain_spec, np.sort(star), atol=1e-10)


def test_heat_operator_annihilates_initial_state():
    params, baths, chains, layout = setup((1.0, 0.0))
    q = build_heat_operator(baths, chains, layout)
    for _, vecs in initial_state_vectors(params, layout):
        state = product_state(vecs)
        for op in q.per_bath + [q.delta]:
            assert abs(expectation(state, op)) < 1e-15


def test_heat_operator_dump_has_provenance():
    params, baths, chains, layout = setup((1.0,))
    text = build_heat_operator(baths, chains, layout).dump()
    assert "A (auxiliary, negated)" in text and "onsite w_0" in text


def test_initial_state_variants():
    assert len(SpinBosonParams(0.0, 1.0, "mixed").decomposition()) == 2
    rho = SpinBosonParams(0.0, 1.0, (0.0, 0.0, 0.6)).density_matrix()
    assert np.allclose(rho, [[0.8, 0.0], [0.0, 0.2]])
    with pytest.raises(ValueError):
        SpinBosonParams(0.0, 1.0, (1.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        SpinBosonParams(0.0, 1.0, "sideways")
