import math

import numpy as np
import pytest

from qhf.bath import BathSpec, SpectralDensity
from qhf.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from qhf.model import SpinBosonParams
from qhf.mps import TruncationPolicy, product_state
from qhf.stats import (
    MomentSeries,
    Numerics,
    build_model,
    cumulants_from_moments,
    current_statistics,
    heat_moments,
    mixed_state_combine,
    read_csv,
    run_evolution,
    simulate,
    write_csv,
)
from qhf.model import initial_state_vectors

TINY = Numerics(chain_length=4, local_dim=4, max_bond=16, dt=0.02, t_max=0.4, sample_stride=5, n_max=3)


def ohmic(alpha, temperature, wc=2.0):
    return BathSpec.from_temperature(SpectralDensity.ohmic(alpha, wc, 6 * wc), temperature)


def test_cumulant_arithmetic():
    ms = MomentSeries([0.0, 1.0], [[0.0, 0.0], [1.0, 3.0]])
    cs = cumulants_from_moments(ms)
    assert np.allclose(cs.cumulants[1], [1.0, 2.0])
    assert cs.fano[1] == 2.0 and math.isnan(cs.fano[0])
    assert np.allclose(cs.cumulants[0], 0.0)


def test_third_and_fourth_cumulants_of_poisson():
    lam = 0.7  # all cumulants of a Poisson variable equal lam
    m = [lam, lam + lam**2, lam + 3 * lam**2 + lam**3, lam + 7 * lam**2 + 6 * lam**3 + lam**4]
    cs = cumulants_from_moments(MomentSeries([1.0], [m]))
    assert np.allclose(cs.cumulants[0], lam, atol=1e-14)
    with pytest.raises(ValueError):
        cumulants_from_moments(MomentSeries([1.0], [m[:2]]), order=3)


def test_fano_floor():
    cs = cumulants_from_moments(MomentSeries([1.0, 2.0], [[1e-12, 1e-12], [1.0, 2.0]]), fano_floor=1e-9)
    assert math.isnan(cs.fano[0]) and cs.fano[1] == 1.0


def test_current_statistics():
    ms = MomentSeries([0.0, 2.0], [[0.0, 0.0], [1.0, 5.0]])
    cs = current_statistics(ms)
    assert cs.scaled and np.allclose(cs.times, [2.0])
    assert np.allclose(cs.cumulants[0], [0.5, 2.0])


def test_mixed_combine():
    a = MomentSeries([0.0, 1.0], [[0.0, 0.0], [1.0, 3.0]])
    assert np.array_equal(mixed_state_combine([(1.0, a)]).moments, a.moments)
    assert np.allclose(mixed_state_combine([(0.5, a), (0.5, a)]).moments, a.moments)
    b = MomentSeries([0.0, 1.0], [[0.0, 0.0], [3.0, 11.0]])
    assert np.allclose(mixed_state_combine([(0.25, a), (0.75, b)]).moments[1], [2.5, 9.0])
    with pytest.raises(ValueError):
        mixed_state_combine([(0.5, a), (0.6, b)])
    with pytest.raises(ValueError):
        mixed_state_combine([(0.5, a), (0.5, MomentSeries([0.0, 2.0], b.moments))])


def test_csv_round_trip(tmp_path):
    ms = MomentSeries([0.0, 0.1, 0.2], [[0.0, 0.0], [0.1, 0.3], [1 / 3, 0.5]], [0.0, 1e-12, 2e-11])
    cs = cumulants_from_moments(ms)
    path = write_csv(tmp_path / "r.csv", ms, cs)
    ms2, cs2 = read_csv(path)
    assert np.array_equal(ms2.moments, ms.moments)
    assert np.array_equal(cs2.cumulants, cs.cumulants)
    assert np.array_equal(ms2.discarded_weight, ms.discarded_weight)
    assert path.read_text().splitlines()[0] == "t,m1,m2,c1,c2,fano,discarded_weight"


def test_heat_moments_match_dense_powers():
    params = SpinBosonParams(0.7, 0.4, "plus_y")
    model = build_model(params, [ohmic(0.3, 1.0)], Numerics(chain_length=2, local_dim=4, max_bond=64, t_max=1.0))
    policy = TruncationPolicy(64, 1e-14, 4)
    (_, vecs), = initial_state_vectors(params, model.layout)
    q = model.heat.per_bath[0]
    qd = q.to_dense()
    for t, state in run_evolution(model.hamiltonian, product_state(vecs), 0.6, 0.02, 10, policy):
        got = heat_moments(state, q, 4, policy)
        psi = state.to_dense()
        ref = [np.vdot(psi, np.linalg.matrix_power(qd, n) @ psi).real for n in range(1, 5)]
        assert np.allclose(got.values, ref, atol=1e-10)
        if t == 0:
            assert np.allclose(got.values, 0.0, atol=1e-15)


def test_decoupled_bath_gives_zero_heat():
    res = simulate(SpinBosonParams(1.0, 0.0, "plus_x"), [ohmic(0.0, 1.0)], TINY)
    assert np.all(res.series.moments == 0.0)
    assert res.diagnostics["max_bond_seen"] == 1


def test_two_bath_linearity():
    res = simulate(SpinBosonParams(1.0, 0.0, "up_z"), [ohmic(0.1, 1.0), ohmic(0.3, 0.0)],
                   Numerics(chain_length=3, local_dim=4, max_bond=16, dt=0.02, t_max=0.2, sample_stride=5))
    diff = res.per_bath[1].moments[:, 0] - res.per_bath[0].moments[:, 0]
    assert np.max(np.abs(res.series.moments[:, 0] - diff)) < 1e-10
    assert res.current is not None and np.all(res.current.variance > 0)


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    vecs = [rng.normal(size=d) + 1j * rng.normal(size=d) for d in (3, 2, 4)]
    state = product_state([v / np.linalg.norm(v) for v in vecs])
    state.discarded_weight = 1.5e-9
    ck = Checkpoint(state, 0.75, TruncationPolicy(12, 1e-9, 4), ["A", "S", "O"], {"note": [1, 2]})
    back = load_checkpoint(save_checkpoint(tmp_path / "c.npz", ck))
    assert back.time == 0.75 and back.labels == ["A", "S", "O"] and back.extra == {"note": [1, 2]}
    assert back.policy == ck.policy and back.state.discarded_weight == 1.5e-9
    assert np.array_equal(back.state.to_dense(), state.to_dense())


def test_resume_reproduces_uninterrupted_run(tmp_path):
    params = SpinBosonParams(1.0, 0.5, "mixed")
    baths = [ohmic(0.2, 1.0)]
    full = simulate(params, baths, TINY)
    saved = {}

    def grab(branch, t, state, history):
        if abs(t - 0.2) < 1e-12:
            path = save_checkpoint(tmp_path / f"b{branch}.npz",
                                   Checkpoint(state, t, TINY.policy(), extra={"history": history}))
            saved[branch] = load_checkpoint(path)

    simulate(params, baths, TINY, on_sample=grab)
    resume = [(saved[b].time, saved[b].state, saved[b].extra["history"]) for b in sorted(saved)]
    resumed = simulate(params, baths, TINY, resume=resume)
    assert np.allclose(resumed.series.times, full.series.times)
    assert np.max(np.abs(resumed.series.moments - full.series.moments)) < 1e-12


def test_numerics_validation():
    with pytest.raises(ValueError):
        Numerics(n_max=5)
    with pytest.raises(ValueError):
        Numerics(dt=-0.1)
    assert Numerics().resolved_dt(SpinBosonParams(), [ohmic(0.1, 0.0, wc=5.0)]) == pytest.approx(0.002)
