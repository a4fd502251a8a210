"""Spin-boson models on a 1D site layout: transformed Hamiltonian and heat operators."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bath import BathSpec
from .chain import ChainCoefficients
from .mps import MPO

SYSTEM = "system"
ORIG = "orig"
AUX = "aux"

# ---------------------------------------------------------------------------
# local operators


def boson_ops(d: int) -> dict[str, np.ndarray]:
    a = np.diag(np.sqrt(np.arange(1, d, dtype=float)), 1)
    return {
        "a": a,
        "adag": a.T.copy(),
        "n": np.diag(np.arange(d, dtype=float)),
        "x": a + a.T,
        "id": np.eye(d),
    }


# spin-1/2 in the basis (|up>, |down>) of S_z
SX = 0.5 * np.array([[0.0, 1.0], [1.0, 0.0]])
SY = 0.5 * np.array([[0.0, -1j], [1j, 0.0]])
SZ = 0.5 * np.array([[1.0, 0.0], [0.0, -1.0]])

_NAMED_STATES = {
    "up_z": np.array([1.0, 0.0]),
    "down_z": np.array([0.0, 1.0]),
    "plus_x": np.array([1.0, 1.0]) / np.sqrt(2),
    "minus_x": np.array([1.0, -1.0]) / np.sqrt(2),
    "plus_y": np.array([1.0, 1j]) / np.sqrt(2),
    "minus_y": np.array([1.0, -1j]) / np.sqrt(2),
}


@dataclass(frozen=True)
class SpinBosonParams:
    """``H_S = epsilon0 S_z + delta S_x``, bath coupling through ``S_x``.

    ``initial_state`` is a name (``up_z``, ``down_z``, ``plus_x``,
    ``minus_x``, ``plus_y``, ``minus_y``, ``mixed`` for the maximally mixed
    state), a Bloch vector ``(x, y, z)`` with norm <= 1, or an explicit
    spectral decomposition ``[(p_k, psi_k), ...]``.
    """

    epsilon0: float = 1.0
    delta: float = 0.0
    initial_state: object = "plus_x"
    coupling_op: str = "S_x"

    def __post_init__(self):
        if self.coupling_op != "S_x":
            raise ValueError("only S_x coupling is supported")
        self.decomposition()  # validates

    def system_hamiltonian(self) -> np.ndarray:
        return self.epsilon0 * SZ + self.delta * SX

    def decomposition(self) -> list[tuple[float, np.ndarray]]:
        """Spectral decomposition of the initial spin state, zero weights dropped."""
        s = self.initial_state
        if isinstance(s, str):
            if s == "mixed":
                return [(0.5, _NAMED_STATES["up_z"]), (0.5, _NAMED_STATES["down_z"])]
            if s not in _NAMED_STATES:
                raise ValueError(f"unknown initial state {s!r}")
            return [(1.0, _NAMED_STATES[s].astype(complex))]
        if len(s) == 3 and all(np.isscalar(x) for x in s):
            r = np.asarray(s, dtype=float)
            nr = float(np.linalg.norm(r))
            if nr > 1 + 1e-12:
                raise ValueError("Bloch vector norm exceeds 1")
            rho = 0.5 * np.eye(2) + r[0] * SX + r[1] * SY + r[2] * SZ
            return _eig_decomposition(rho)
        pairs = [(float(p), np.asarray(v, dtype=complex)) for p, v in s]
        if any(p < 0 for p, _ in pairs) or abs(sum(p for p, _ in pairs) - 1) > 1e-12:
            raise ValueError("mixture weights must be non-negative and sum to 1")
        out = []
        for p, v in pairs:
            if p > 0:
                out.append((p, v / np.linalg.norm(v)))
        return out

    def density_matrix(self) -> np.ndarray:
        return sum(p * np.outer(v, v.conj()) for p, v in self.decomposition())


def _eig_decomposition(rho):
    e, v = np.linalg.eigh(rho)
    return [(float(p), v[:, k].astype(complex)) for k, p in enumerate(e) if p > 1e-14]


# ---------------------------------------------------------------------------
# layouts


@dataclass(frozen=True)
class Site:
    role: str
    bath: int | None = None  # 0-based
    index: int | None = None

    def label(self) -> str:
        if self.role == SYSTEM:
            return "S"
        tag = "O" if self.role == ORIG else "A"
        return f"{tag}{self.bath + 1}[{self.index}]"


@dataclass(frozen=True)
class LayoutPlan:
    sites: tuple[Site, ...]
    phys_dims: tuple[int, ...]

    def __len__(self):
        return len(self.sites)

    @property
    def system_index(self) -> int:
        return next(k for k, s in enumerate(self.sites) if s.role == SYSTEM)

    def index(self, role: str, bath: int, n: int) -> int:
        for k, s in enumerate(self.sites):
            if s.role == role and s.bath == bath and s.index == n:
                return k
        raise KeyError((role, bath, n))

    def chain_sites(self, role: str, bath: int) -> list[int]:
        """Site positions of one chain, in chain order (n = 0, 1, ...)."""
        found = sorted(
            ((s.index, k) for k, s in enumerate(self.sites) if s.role == role and s.bath == bath)
        )
        return [k for _, k in found]

    def has_chain(self, role: str, bath: int) -> bool:
        return any(s.role == role and s.bath == bath for s in self.sites)

    @property
    def n_baths(self) -> int:
        return len({s.bath for s in self.sites if s.bath is not None})

    def describe(self) -> str:
        return " ".join(s.label() for s in self.sites)


def tapered_dims(length: int, d_near: int = 8, d_far: int = 4) -> list[int]:
    """Local dimensions decreasing linearly from ``d_near`` at the system to ``d_far``."""
    if length == 1:
        return [d_near]
    return [int(round(d_near + (d_far - d_near) * n / (length - 1))) for n in range(length)]


def plan_layout(
    n_baths: int,
    chain_lengths: Sequence[int] | int,
    zero_temperature: Sequence[bool],
    local_dims: Sequence[Sequence[int]] | int | None = None,
) -> LayoutPlan:
    """Site ordering.

    One bath: ``[A rev][S][O]``, every coupling nearest-neighbour.
    Two baths: ``[A1 rev][O1 rev][S][O2][A2]``; the system-to-A couplings
    become long bonds.  Zero-temperature baths have no A chain.
    ``local_dims`` is a single int, or per bath a list of per-site dims
    (defaults to :func:`tapered_dims`).
    """
    if n_baths not in (1, 2):
        raise ValueError("only one or two baths are supported")
    if isinstance(chain_lengths, int):
        chain_lengths = [chain_lengths] * n_baths
    if len(chain_lengths) != n_baths or len(zero_temperature) != n_baths:
        raise ValueError("need one chain length and temperature flag per bath")
    if any(L < 1 for L in chain_lengths):
        raise ValueError("chain lengths must be >= 1")
    dims_per_bath = []
    for j, L in enumerate(chain_lengths):
        if local_dims is None:
            dims_per_bath.append(tapered_dims(L))
        elif isinstance(local_dims, int):
            dims_per_bath.append([local_dims] * L)
        else:
            if len(local_dims[j]) != L:
                raise ValueError(f"bath {j + 1}: need {L} local dimensions")
            dims_per_bath.append(list(local_dims[j]))

    def chain(role, j, reverse):
        idx = range(chain_lengths[j])
        idx = reversed(idx) if reverse else idx
        return [(Site(role, j, n), dims_per_bath[j][n]) for n in idx]

    entries = []
    if n_baths == 1:
        if not zero_temperature[0]:
            entries += chain(AUX, 0, True)
        entries.append((Site(SYSTEM), 2))
        entries += chain(ORIG, 0, False)
    else:
        if not zero_temperature[0]:
            entries += chain(AUX, 0, True)
        entries += chain(ORIG, 0, True)
        entries.append((Site(SYSTEM), 2))
        entries += chain(ORIG, 1, False)
        if not zero_temperature[1]:
            entries += chain(AUX, 1, False)
    sites, dims = zip(*entries)
    return LayoutPlan(tuple(sites), tuple(dims))


# ---------------------------------------------------------------------------
# sums of local products -> operator trains


@dataclass
class Term:
    coef: complex
    ops: dict[int, np.ndarray]
    note: str = ""

    @property
    def span(self) -> tuple[int, int]:
        return min(self.ops), max(self.ops)


@dataclass
class OperatorSum:
    phys_dims: tuple[int, ...]
    terms: list[Term] = field(default_factory=list)

    def add(self, coef, ops: dict[int, np.ndarray], note: str = "") -> None:
        if coef == 0:
            return
        for k, op in ops.items():
            d = self.phys_dims[k]
            if op.shape != (d, d):
                raise ValueError(f"operator on site {k} has shape {op.shape}, expected {(d, d)}")
        self.terms.append(Term(coef, dict(ops), note))

    def extend(self, other: "OperatorSum", factor: float = 1.0) -> None:
        if other.phys_dims != self.phys_dims:
            raise ValueError("layout mismatch")
        for t in other.terms:
            self.terms.append(Term(factor * t.coef, t.ops, t.note))

    def to_mpo(self) -> MPO:
        """Finite-automaton construction: on each bond, channel 0 means
        "nothing placed yet", channel 1 "term finished", and every term that
        straddles the bond owns one extra channel."""
        n = len(self.phys_dims)
        bonds = []  # bonds[b + 1] describes the bond right of site b
        for b in range(-1, n):
            ch = {}
            if b < n - 1:
                ch["start"] = len(ch)
            if b >= 0:
                ch["done"] = len(ch)
            for t_id, t in enumerate(self.terms):
                lo, hi = t.span
                if lo <= b < hi:
                    ch[t_id] = len(ch)
            bonds.append(ch)
        tensors = []
        for k in range(n):
            d = self.phys_dims[k]
            eye = np.eye(d)
            lch, rch = bonds[k], bonds[k + 1]
            w = np.zeros((len(lch), d, d, len(rch)), dtype=complex)
            if "start" in lch and "start" in rch:
                w[lch["start"], :, :, rch["start"]] += eye
            if "done" in lch and "done" in rch:
                w[lch["done"], :, :, rch["done"]] += eye
            for t_id, t in enumerate(self.terms):
                lo, hi = t.span
                if not lo <= k <= hi:
                    continue
                op = t.ops.get(k, eye)
                if lo == hi:
                    w[lch["start"], :, :, rch["done"]] += t.coef * op
                elif k == lo:
                    w[lch["start"], :, :, rch[t_id]] += t.coef * op
                elif k == hi:
                    w[lch[t_id], :, :, rch["done"]] += op
                else:
                    w[lch[t_id], :, :, rch[t_id]] += op
            tensors.append(w)
        return MPO(tensors)

    def to_dense(self) -> np.ndarray:
        n = len(self.phys_dims)
        total = np.zeros((int(np.prod(self.phys_dims)),) * 2, dtype=complex)
        for t in self.terms:
            m = np.ones((1, 1))
            for k in range(n):
                m = np.kron(m, t.ops.get(k, np.eye(self.phys_dims[k])))
            total += t.coef * m
        return total

    def dump(self, layout: LayoutPlan | None = None) -> str:
        lines = []
        for t in self.terms:
            where = ", ".join(
                layout.sites[k].label() if layout is not None else str(k) for k in sorted(t.ops)
            )
            lines.append(f"{complex(t.coef).real:+.10g}  [{where}]  {t.note}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# physical operators


@dataclass
class HamiltonianTrain:
    op: MPO
    terms: OperatorSum
    layout: LayoutPlan

    def dump(self) -> str:
        return self.terms.dump(self.layout)


@dataclass
class HeatOperatorSpec:
    per_bath: list[MPO]
    per_bath_terms: list[OperatorSum]
    layout: LayoutPlan
    delta: MPO | None = None  # Q_2 - Q_1 for two-bath layouts
    delta_terms: OperatorSum | None = None

    def dump(self) -> str:
        out = []
        for j, s in enumerate(self.per_bath_terms):
            out.append(f"# heat operator, bath {j + 1}")
            out.append(s.dump(self.layout))
        return "\n".join(out)


def _chain_free_terms(acc: OperatorSum, layout: LayoutPlan, role, j, chain: ChainCoefficients, sign, note):
    sites = layout.chain_sites(role, j)
    if len(sites) != chain.length:
        raise ValueError(
            f"bath {j + 1} {role} chain has {chain.length} coefficients but {len(sites)} sites"
        )
    for n, k in enumerate(sites):
        ops = boson_ops(layout.phys_dims[k])
        acc.add(sign * chain.site_freqs[n], {k: ops["n"]}, f"{note} onsite w_{n}")
    for n in range(chain.length - 1):
        k1, k2 = sites[n], sites[n + 1]
        o1, o2 = boson_ops(layout.phys_dims[k1]), boson_ops(layout.phys_dims[k2])
        t = sign * chain.hoppings[n]
        acc.add(t, {k1: o1["a"], k2: o2["adag"]}, f"{note} hop t_{n}")
        acc.add(t, {k1: o1["adag"], k2: o2["a"]}, f"{note} hop t_{n} (h.c.)")


def _check_chains(baths, chains, layout):
    if len(baths) != len(chains):
        raise ValueError("need one (chain_O, chain_A) pair per bath")
    for j, (bath, (co, ca)) in enumerate(zip(baths, chains)):
        if bath.zero_temperature != (ca is None):
            raise ValueError(f"bath {j + 1}: auxiliary chain must be present iff T > 0")
        if layout.has_chain(AUX, j) != (ca is not None):
            raise ValueError(f"bath {j + 1}: layout and chains disagree on the auxiliary chain")


def heat_operator_terms(layout: LayoutPlan, chains, j: int) -> OperatorSum:
    """``Q_j = H_{B,O,j} - H_{B,A,j}`` in chain coordinates."""
    acc = OperatorSum(layout.phys_dims)
    co, ca = chains[j]
    _chain_free_terms(acc, layout, ORIG, j, co, 1.0, f"bath {j + 1} O")
    if ca is not None:
        _chain_free_terms(acc, layout, AUX, j, ca, -1.0, f"bath {j + 1} A (auxiliary, negated)")
    return acc


def build_transformed_hamiltonian(
    params: SpinBosonParams,
    baths: Sequence[BathSpec],
    chains: Sequence[tuple[ChainCoefficients, ChainCoefficients | None]],
    layout: LayoutPlan,
) -> HamiltonianTrain:
    """Operator train of the Bogoliubov-transformed thermofield Hamiltonian.

    The O chain carries ``+H_{B,O}`` and couples with ``c0_O`` (built from
    ``u^2 J``); the A chain carries ``-H_{B,A}`` and couples with ``c0_A``
    (built from ``v^2 J``), both through ``S_x (b_0 + b_0^dag)``.
    """
    _check_chains(baths, chains, layout)
    acc = OperatorSum(layout.phys_dims)
    s = layout.system_index
    acc.add(params.epsilon0, {s: SZ}, "system epsilon0 S_z")
    acc.add(params.delta, {s: SX}, "system delta S_x")
    for j, (co, ca) in enumerate(chains):
        acc.extend(heat_operator_terms(layout, chains, j))
        k0 = layout.chain_sites(ORIG, j)[0]
        acc.add(co.c0, {s: SX, k0: boson_ops(layout.phys_dims[k0])["x"]}, f"bath {j + 1} O coupling c0 (u g)")
        if ca is not None:
            k0 = layout.chain_sites(AUX, j)[0]
            acc.add(ca.c0, {s: SX, k0: boson_ops(layout.phys_dims[k0])["x"]}, f"bath {j + 1} A coupling c0 (v g)")
    return HamiltonianTrain(acc.to_mpo(), acc, layout)


def build_heat_operator(baths, chains, layout: LayoutPlan) -> HeatOperatorSpec:
    _check_chains(baths, chains, layout)
    sums = [heat_operator_terms(layout, chains, j) for j in range(len(chains))]
    spec = HeatOperatorSpec([s.to_mpo() for s in sums], sums, layout)
    if len(sums) == 2:
        delta = OperatorSum(layout.phys_dims)
        delta.extend(sums[1])
        delta.extend(sums[0], -1.0)
        spec.delta = delta.to_mpo()
        spec.delta_terms = delta
    return spec


def initial_state_vectors(params: SpinBosonParams, layout: LayoutPlan):
    """``[(p_k, [site vectors])]``: spin branch ``k`` times the chain vacuum."""
    out = []
    s = layout.system_index
    for p, psi in params.decomposition():
        vecs = []
        for k, d in enumerate(layout.phys_dims):
            if k == s:
                vecs.append(psi)
            else:
                v = np.zeros(d, dtype=complex)
                v[0] = 1.0
                vecs.append(v)
        out.append((p, vecs))
    return out
