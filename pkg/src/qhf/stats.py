"""Time evolution driver and heat statistics.

Moments of the heat operator are vacuum expectation values of the evolved
doubled state: ``<Q^n(t)> = <Psi(t)| Q~^n |Psi(t)>``.  Powers are evaluated
from compressed half-power states ``phi_k = Q~^k Psi`` as ``<phi_i|phi_j>``.
"""

from __future__ import annotations

import csv
import logging
import math
import time as _time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from .bath import DEFAULT_CUTOFF_FACTOR, BathSpec
from .chain import chain_coefficients, light_cone_ok
from .mps import MPO, MPS, TruncationPolicy, apply_operator, expectation, inner, product_state
from .model import (
    HamiltonianTrain,
    HeatOperatorSpec,
    SpinBosonParams,
    build_heat_operator,
    build_transformed_hamiltonian,
    initial_state_vectors,
    plan_layout,
    tapered_dims,
)
from .tdvp import TDVP, NumericalFailure

log = logging.getLogger(__name__)

MAX_ORDER = 4
FANO_FLOOR_FACTOR = 1e-8


# ---------------------------------------------------------------------------
# series containers


@dataclass
class MomentSeries:
    """``moments[i, n-1] = <Q^n(times[i])>``."""

    times: np.ndarray
    moments: np.ndarray
    discarded_weight: np.ndarray | None = None
    label: str = "Q"
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.moments = np.atleast_2d(np.asarray(self.moments, dtype=float))
        if self.moments.shape[0] != self.times.size:
            raise ValueError("one row of moments per time is required")
        if self.discarded_weight is None:
            self.discarded_weight = np.zeros(self.times.size)
        self.discarded_weight = np.asarray(self.discarded_weight, dtype=float)

    @property
    def n_max(self) -> int:
        return self.moments.shape[1]

    def at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"time {t} was not sampled")
        return self.moments[i]


@dataclass
class CumulantSeries:
    times: np.ndarray
    cumulants: np.ndarray
    fano: np.ndarray
    discarded_weight: np.ndarray
    label: str = "Q"
    scaled: bool = False  # True for current cumulants (divided by t)

    @property
    def mean(self) -> np.ndarray:
        return self.cumulants[:, 0]

    @property
    def variance(self) -> np.ndarray:
        return self.cumulants[:, 1]


def cumulants_from_moments(ms: MomentSeries, order: int | None = None, fano_floor: float = 0.0) -> CumulantSeries:
    """Moment-to-cumulant conversion per time, plus the Fano factor.

    The Fano factor is NaN wherever ``|<Q>| <= fano_floor`` or fewer than two
    orders are available.
    """
    order = ms.n_max if order is None else order
    if order > ms.n_max:
        raise ValueError(f"cumulant order {order} needs moments up to {order}, have {ms.n_max}")
    if order > MAX_ORDER:
        raise ValueError(f"orders above {MAX_ORDER} are not supported")
    m = np.zeros((ms.times.size, MAX_ORDER))
    m[:, : ms.n_max] = ms.moments[:, :MAX_ORDER]
    m1, m2, m3, m4 = m.T
    all_k = np.stack(
        [
            m1,
            m2 - m1**2,
            m3 - 3 * m2 * m1 + 2 * m1**3,
            m4 - 4 * m3 * m1 - 3 * m2**2 + 12 * m2 * m1**2 - 6 * m1**4,
        ],
        axis=1,
    )
    k = all_k[:, :order]
    fano = np.full(ms.times.size, np.nan)
    if order >= 2:
        ok = np.abs(m1) > fano_floor
        fano[ok] = k[ok, 1] / m1[ok]
    return CumulantSeries(ms.times.copy(), k, fano, ms.discarded_weight.copy(), ms.label)


def current_statistics(delta: MomentSeries, fano_floor: float = 0.0) -> CumulantSeries:
    """Scaled current cumulants ``<<J^n>> = <<Delta_Q^n>> / t`` (t = 0 dropped).

    ``delta`` must hold moments of ``Q~_2 - Q~_1`` measured as one operator,
    so the cross terms ``<Q~_1 Q~_2>`` are included.
    """
    cs = cumulants_from_moments(delta, fano_floor=fano_floor)
    keep = cs.times > 0
    t = cs.times[keep]
    return CumulantSeries(
        t,
        cs.cumulants[keep] / t[:, None],
        cs.fano[keep],
        cs.discarded_weight[keep],
        "J",
        scaled=True,
    )


def mixed_state_combine(runs: Sequence[tuple[float, MomentSeries]]) -> MomentSeries:
    """Convex combination of moments of spin branches (never of cumulants)."""
    if not runs:
        raise ValueError("nothing to combine")
    total = sum(p for p, _ in runs)
    if any(p < 0 for p, _ in runs) or abs(total - 1.0) > 1e-12:
        raise ValueError("weights must be non-negative and sum to 1")
    times = runs[0][1].times
    for _, s in runs[1:]:
        if s.times.shape != times.shape or np.any(np.abs(s.times - times) > 1e-12):
            raise ValueError("branches were sampled on different time grids")
        if s.n_max != runs[0][1].n_max:
            raise ValueError("branches carry different numbers of moments")
    moments = sum(p * s.moments for p, s in runs)
    disc = sum(p * s.discarded_weight for p, s in runs)
    warnings = [w for _, s in runs for w in s.warnings]
    return MomentSeries(times.copy(), moments, disc, runs[0][1].label, warnings)


# ---------------------------------------------------------------------------
# evolution and moments


@dataclass
class DriftLog:
    times: list[float] = field(default_factory=list)
    norm_drift: list[float] = field(default_factory=list)
    energy_drift: list[float] = field(default_factory=list)
    max_bond: list[int] = field(default_factory=list)

    def record(self, t, norm_drift, energy_drift, max_bond):
        self.times.append(t)
        self.norm_drift.append(norm_drift)
        self.energy_drift.append(energy_drift)
        self.max_bond.append(max_bond)


def run_evolution(
    hamiltonian: HamiltonianTrain | MPO,
    init: MPS,
    t_max: float,
    dt: float,
    sample_stride: int = 1,
    policy: TruncationPolicy | None = None,
    t_start: float = 0.0,
    drift: DriftLog | None = None,
) -> Iterator[tuple[float, MPS]]:
    """Yield ``(t, state)`` at ``t_start`` and every ``sample_stride`` steps.

    The yielded state is the live engine state; copy it to keep it.  Its
    ``discarded_weight`` holds the accumulated truncation weight.  On a
    numerical failure the raised :class:`NumericalFailure` carries
    ``last_good = (t, state)``.
    """
    op = hamiltonian.op if isinstance(hamiltonian, HamiltonianTrain) else hamiltonian
    if dt <= 0:
        raise ValueError("dt must be positive")
    if sample_stride < 1:
        raise ValueError("sample_stride must be >= 1")
    policy = policy or TruncationPolicy()
    engine = TDVP(init, op, policy)
    n_steps = int(round((t_max - t_start) / dt))
    e0, n0 = engine.energy(), engine.norm()
    if drift is not None:
        drift.record(t_start, 0.0, 0.0, max(engine.state.bond_dims, default=1))
    engine.state.discarded_weight = init.discarded_weight
    yield t_start, engine.state
    last_good = (t_start, engine.state.copy())
    for k in range(1, n_steps + 1):
        try:
            engine.step(dt)
        except NumericalFailure as exc:
            exc.last_good = last_good
            log.error("evolution failed after t = %.6g: %s", last_good[0], exc)
            raise
        if k % sample_stride and k != n_steps:
            continue
        t = t_start + k * dt
        nd, ed = abs(engine.norm() - n0), abs(engine.energy() - e0)
        bond = max(engine.state.bond_dims, default=1)
        log.debug("t = %.4f  norm drift %.2e  energy drift %.2e  D = %d", t, nd, ed, bond)
        if drift is not None:
            drift.record(t, nd, ed, bond)
        engine.state.discarded_weight = init.discarded_weight + engine.discarded_weight
        last_good = (t, engine.state.copy())
        yield t, engine.state


@dataclass
class MomentValues:
    values: np.ndarray
    discarded: list[float]
    warning: bool = False


def heat_moments(state: MPS, heat_op: MPO, n_max: int = 2, policy: TruncationPolicy | None = None) -> MomentValues:
    """``<Q^n>`` for ``n = 1..n_max`` from half-power states.

    ``n = 1`` is an exact contraction; higher orders use compressed
    ``phi_k = Q^k psi``, ``k <= ceil(n_max / 2)``, and ``<phi_i|phi_j>`` with
    ``i + j = n``.  ``discarded[k-1]`` is the weight dropped forming ``phi_k``.
    """
    if not 1 <= n_max <= MAX_ORDER:
        raise ValueError(f"n_max must lie in 1..{MAX_ORDER}")
    psi = state.copy()
    nrm2 = inner(psi, psi).real
    if nrm2 <= 0:
        raise ValueError("state has zero norm")
    values = np.zeros(n_max)
    values[0] = expectation(psi, heat_op).real / nrm2
    phis = [psi]
    discarded = []
    warn = False
    for _ in range((n_max + 1) // 2 if n_max > 1 else 0):
        phi = apply_operator(phis[-1], heat_op, policy)
        discarded.append(phi.discarded_weight)
        warn = warn or phi.compression_warning
        phis.append(phi)
    for n in range(2, n_max + 1):
        i = n // 2
        j = n - i
        values[n - 1] = inner(phis[i], phis[j]).real / nrm2
    return MomentValues(values, discarded, warn)


# ---------------------------------------------------------------------------
# high-level runs


@dataclass
class Numerics:
    chain_length: int = 40
    local_dim: int | None = None  # None: taper from d_near to d_far
    d_near: int = 8
    d_far: int = 4
    max_bond: int = 64
    svd_cutoff: float = 1e-10
    dt: float | None = None  # None: 0.01 / max(omega_c, epsilon0)
    t_max: float = 5.0
    sample_stride: int = 10
    n_max: int = 2
    num_nodes: int | None = None
    moment_bond_factor: int = 4

    def __post_init__(self):
        if self.chain_length < 1:
            raise ValueError("chain_length must be >= 1")
        if not 1 <= self.n_max <= MAX_ORDER:
            raise ValueError(f"n_max must lie in 1..{MAX_ORDER}")
        if self.t_max <= 0:
            raise ValueError("t_max must be positive")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")

    def resolved_dt(self, params: SpinBosonParams, baths: Sequence[BathSpec]) -> float:
        if self.dt is not None:
            return self.dt
        scales = [abs(params.epsilon0), abs(params.delta)]
        for b in baths:
            sd = b.spectral
            scales.append(sd.cutoff if sd.kind == "ohmic" else sd.domain_max / DEFAULT_CUTOFF_FACTOR)
        return 0.01 / max(max(scales), 1e-300)

    def local_dims(self) -> list[int]:
        if self.local_dim is not None:
            return [self.local_dim] * self.chain_length
        return tapered_dims(self.chain_length, self.d_near, self.d_far)

    def policy(self) -> TruncationPolicy:
        return TruncationPolicy(self.max_bond, self.svd_cutoff, max(2, self.d_near if self.local_dim is None else self.local_dim))


@dataclass
class Model:
    """Everything built from (params, baths, numerics) before evolution."""

    params: SpinBosonParams
    baths: list[BathSpec]
    chains: list
    layout: object
    hamiltonian: HamiltonianTrain
    heat: HeatOperatorSpec
    light_cone_ok: bool


def build_model(params: SpinBosonParams, baths: Sequence[BathSpec], numerics: Numerics) -> Model:
    baths = list(baths)
    if not baths:
        raise ValueError("at least one bath is required")
    chains = [chain_coefficients(b, numerics.chain_length, numerics.num_nodes) for b in baths]
    dims = [numerics.local_dims() for _ in baths]
    layout = plan_layout(len(baths), numerics.chain_length, [b.zero_temperature for b in baths], dims)
    h = build_transformed_hamiltonian(params, baths, chains, layout)
    q = build_heat_operator(baths, chains, layout)
    cone = all(light_cone_ok(c, numerics.t_max) for pair in chains for c in pair if c is not None)
    return Model(params, baths, chains, layout, h, q, cone)


@dataclass
class RunResult:
    series: MomentSeries  # primary observable: Q (one bath) or Delta_Q (two baths)
    per_bath: list[MomentSeries]
    cumulants: CumulantSeries
    current: CumulantSeries | None
    diagnostics: dict


def _observables(model: Model) -> list[tuple[str, MPO]]:
    obs = [(f"Q{j + 1}", op) for j, op in enumerate(model.heat.per_bath)]
    if model.heat.delta is not None:
        obs.append(("DQ", model.heat.delta))
    return obs


def fano_floor(baths: Sequence[BathSpec]) -> float:
    scale = max((b.spectral.alpha or 0.0) * (b.spectral.cutoff or 0.0) for b in baths)
    return FANO_FLOOR_FACTOR * scale


def simulate(
    params: SpinBosonParams,
    baths: Sequence[BathSpec],
    numerics: Numerics,
    model: Model | None = None,
    on_sample: Callable[[int, float, MPS, dict], None] | None = None,
    resume: Sequence | None = None,
) -> RunResult:
    """Evolve every spin branch, sample heat moments, combine and reduce.

    ``on_sample(branch, t, state, history)`` is called after each sample;
    ``history`` holds everything sampled so far on that branch (``times``,
    ``discarded`` and per-observable ``rows``).  ``resume`` optionally gives
    one ``(t, state, history)`` per branch, as handed to ``on_sample``;
    evolution continues from ``t`` and the earlier samples are kept.
    """
    started = _time.perf_counter()
    model = model or build_model(params, baths, numerics)
    dt = numerics.resolved_dt(params, model.baths)
    policy = numerics.policy()
    mpolicy = TruncationPolicy(numerics.moment_bond_factor * numerics.max_bond, numerics.svd_cutoff, policy.local_dim)
    obs = _observables(model)
    branches = initial_state_vectors(params, model.layout)
    if not model.light_cone_ok:
        log.warning("chain length %d is inside the light cone of t_max = %g; expect boundary reflections",
                    numerics.chain_length, numerics.t_max)
    collected = {name: [] for name, _ in obs}
    drifts, warns, max_bond = [], [], 1
    for b, (p, vectors) in enumerate(branches):
        history = {"times": [], "discarded": [], "rows": {name: [] for name, _ in obs}}
        if resume is not None:
            t0, init, prior = resume[b]
            history = {"times": list(prior["times"]), "discarded": list(prior["discarded"]),
                       "rows": {name: [list(r) for r in prior["rows"][name]] for name, _ in obs}}
        else:
            t0, init = 0.0, product_state(vectors)
        drift = DriftLog()
        rows, times, disc = history["rows"], history["times"], history["discarded"]
        for t, state in run_evolution(model.hamiltonian, init, numerics.t_max, dt, numerics.sample_stride,
                                      policy, t0, drift):
            if resume is not None and times and t <= times[-1] + 1e-12:
                continue  # the checkpointed sample itself
            times.append(t)
            dsum = state.discarded_weight
            for name, op in obs:
                mv = heat_moments(state, op, numerics.n_max, mpolicy)
                rows[name].append([float(x) for x in mv.values])
                dsum += sum(mv.discarded)
                if mv.warning:
                    warns.append(f"branch {b}: compression cap hit for {name} at t = {t:.4g}")
            disc.append(float(dsum))
            if on_sample is not None:
                on_sample(b, t, state, history)
        for name in rows:
            collected[name].append((p, MomentSeries(times, rows[name], disc, name)))
        drifts.append(drift)
        max_bond = max(max_bond, max(drift.max_bond))
    combined = {name: mixed_state_combine(runs) for name, runs in collected.items()}
    per_bath = [combined[f"Q{j + 1}"] for j in range(len(model.baths))]
    floor = fano_floor(model.baths)
    if len(model.baths) == 2:
        main = combined["DQ"]
        current = current_statistics(main, floor)
    else:
        main = per_bath[0]
        current = None
    main.warnings.extend(warns)
    diagnostics = {
        "layout": model.layout.describe(),
        "n_sites": len(model.layout),
        "dt": dt,
        "branches": len(branches),
        "max_bond_seen": max_bond,
        "max_norm_drift": max(max(d.norm_drift) for d in drifts),
        "max_energy_drift": max(max(d.energy_drift) for d in drifts),
        "discarded_weight": float(main.discarded_weight[-1]) if main.discarded_weight.size else 0.0,
        "compression_warnings": warns,
        "light_cone_ok": model.light_cone_ok,
        "runtime_s": _time.perf_counter() - started,
    }
    return RunResult(main, per_bath, cumulants_from_moments(main, fano_floor=floor), current, diagnostics)


# ---------------------------------------------------------------------------
# CSV


def csv_header(n_max: int, n_cumulants: int | None = None) -> list[str]:
    n_cumulants = n_max if n_cumulants is None else n_cumulants
    return ["t"] + [f"m{n}" for n in range(1, n_max + 1)] + [f"c{n}" for n in range(1, n_cumulants + 1)] + [
        "fano",
        "discarded_weight",
    ]


def write_csv(path: str | Path, ms: MomentSeries, cs: CumulantSeries | None = None) -> Path:
    """Columns ``t, m1..mN, c1..cN, fano, discarded_weight`` (NaN = undefined)."""
    cs = cs or cumulants_from_moments(ms)
    idx = {round(float(t), 12): i for i, t in enumerate(cs.times)}
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(csv_header(ms.n_max, cs.cumulants.shape[1]))
        for i, t in enumerate(ms.times):
            j = idx.get(round(float(t), 12))
            if j is None:
                ks = [math.nan] * cs.cumulants.shape[1]
                fano = math.nan
            else:
                ks = list(cs.cumulants[j])
                fano = cs.fano[j]
            w.writerow([repr(float(t))] + [repr(float(x)) for x in ms.moments[i]] + [repr(float(x)) for x in ks]
                       + [repr(float(fano)), repr(float(ms.discarded_weight[i]))])
    return path


def write_current_csv(path: str | Path, cs: CumulantSeries) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"j{n}" for n in range(1, cs.cumulants.shape[1] + 1)] + ["fano", "discarded_weight"])
        for i, t in enumerate(cs.times):
            w.writerow([repr(float(t))] + [repr(float(x)) for x in cs.cumulants[i]]
                       + [repr(float(cs.fano[i])), repr(float(cs.discarded_weight[i]))])
    return path


def read_csv(path: str | Path) -> tuple[MomentSeries, CumulantSeries]:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], np.array([[float(x) for x in r] for r in rows[1:]], dtype=float).reshape(-1, len(rows[0]))
    n_m = sum(1 for h in head if h.startswith("m"))
    n_c = sum(1 for h in head if h.startswith("c"))
    t = body[:, 0]
    ms = MomentSeries(t, body[:, 1:1 + n_m], body[:, -1])
    cs = CumulantSeries(t, body[:, 1 + n_m:1 + n_m + n_c], body[:, -2], body[:, -1])
    return ms, cs
