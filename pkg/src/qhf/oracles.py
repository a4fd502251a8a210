"""Ground-truth engines.

* closed-form independent-boson heat statistics (Ohmic bath, ``H = Delta S_x``
  plus ``S_x`` coupling);
* a dense two-point-measurement simulator of a few-mode bath;
* a dense simulator of the thermofield-doubled, Bogoliubov-transformed model
  whose vacuum moments of the heat operator must equal the former.

All dense models live in the product space ``system (x) bath modes`` with a
hard cap of :data:`MAX_DENSE_DIM` basis states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy import integrate
from scipy.sparse.linalg import expm_multiply

from .bath import BathSpec, SpectralDensity, bogoliubov_coefficients, is_zero_temperature
from .model import SX, boson_ops

MAX_DENSE_DIM = 4096
THERMAL_TAIL_TOL = 1e-10


class QuadratureError(ArithmeticError):
    pass


class TruncationError(ValueError):
    """Local Fock truncation too small for the requested accuracy."""

    def __init__(self, message: str, required: int | None = None):
        super().__init__(message)
        self.required = required


# ---------------------------------------------------------------------------
# independent-boson closed forms


def ib_mean(alpha: float, omega_c: float, t: float) -> float:
    """Mean heat ``alpha wc^3 t^2 / (1 + wc^2 t^2)``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    x = omega_c * t
    return alpha * omega_c * x * x / (1.0 + x * x)


def _w_coth(omega, beta):
    """``w coth(beta w / 2)``, equal to ``w`` at zero temperature and ``2/beta`` at w = 0."""
    omega = np.asarray(omega, dtype=float)
    if is_zero_temperature(beta):
        return omega
    x = 0.5 * beta * omega
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 2.0 / beta + omega * x / 3.0, omega / np.tanh(safe))


def _upper(omega_c, domain_max):
    # exp(-60) is far below double precision relative to the bulk
    return min(60.0 * omega_c, domain_max if domain_max is not None else math.inf)


def _quad(f, a, b, **kw):
    with np.errstate(all="ignore"):
        val, err, *info = integrate.quad(f, a, b, full_output=1, **kw)
    if len(info) >= 2 and "roundoff" not in str(info[1]) and info[1]:
        if err > 1e-6 * max(abs(val), 1e-300):
            raise QuadratureError(f"quadrature did not converge: {info[1]}")
    return val


def ib_variance(alpha: float, omega_c: float, beta: float, t: float, domain_max: float | None = None) -> float:
    """Heat variance ``1/2 int J(w) (1 - cos wt) coth(beta w/2) dw`` for Ohmic J.

    ``domain_max`` truncates the frequency integral (for comparison with a
    hard-cutoff bath); default is the untruncated density.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0 or alpha == 0:
        return 0.0
    upper = _upper(omega_c, domain_max)

    def g(w):
        return 2.0 * alpha * math.exp(-w / omega_c) * float(_w_coth(w, beta))

    plain = _quad(g, 0.0, upper, epsabs=0.0, epsrel=1e-12, limit=500)
    osc = _quad(g, 0.0, upper, weight="cos", wvar=t, epsabs=0.0, epsrel=1e-12, limit=2000)
    return 0.5 * (plain - osc)


def _split_quad(f, upper, freq):
    width = upper if freq == 0 else min(upper, 16.0 * math.pi / freq)
    edges = np.arange(0.0, upper, width)
    edges = np.append(edges, upper)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        total += _quad(f, a, b, epsabs=1e-15, epsrel=1e-12, limit=400)
    return total


def ib_log_char(alpha: float, omega_c: float, beta: float, lam: float, t: float, domain_max: float | None = None) -> complex:
    """``ln chi(lambda, t)`` of the independent-boson heat distribution."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if lam == 0 or t == 0 or alpha == 0:
        return 0j
    upper = _upper(omega_c, domain_max)

    def re(w):
        st = math.sin(0.5 * w * t)
        sl = math.sin(0.5 * w * lam)
        jw = 2.0 * alpha * math.exp(-w / omega_c)  # J(w)/w
        return -0.5 * jw * (2 * st * st) * (2 * sl * sl) / (w * w) * float(_w_coth(w, beta))

    def im(w):
        st = math.sin(0.5 * w * t)
        jw = 2.0 * alpha * math.exp(-w / omega_c)
        return 0.5 * jw * (2 * st * st) * math.sin(w * lam) / w

    freq = abs(t) + abs(lam)
    return complex(_split_quad(re, upper, freq), _split_quad(im, upper, freq))


def ib_cumulant_fd(order: int, alpha, omega_c, beta, t, h: float = 1e-4, domain_max=None) -> float:
    """``(-i)^n d^n/dlambda^n ln chi`` at 0 by central finite differences (n = 1, 2)."""
    f = lambda lam: ib_log_char(alpha, omega_c, beta, lam, t, domain_max)
    if order == 1:
        return ((f(h) - f(-h)) / (2 * h) * -1j).real
    if order == 2:
        return (-(f(h) - 2 * f(0.0) + f(-h)) / (h * h)).real
    raise ValueError("only orders 1 and 2 are implemented")


# ---------------------------------------------------------------------------
# dense models


@dataclass
class DenseBath:
    """A bosonic bath of ``M`` modes: ``H_B = sum h_ij a_i^dag a_j`` coupled
    through ``S_x (x) sum c_i (a_i + a_i^dag)``."""

    h: np.ndarray
    couplings: np.ndarray
    beta: float = math.inf
    dims: Sequence[int] = ()

    def __post_init__(self):
        self.h = np.atleast_2d(np.asarray(self.h, dtype=float))
        self.couplings = np.asarray(self.couplings, dtype=float)
        m = self.h.shape[0]
        if self.h.shape != (m, m) or not np.allclose(self.h, self.h.T):
            raise ValueError("single-particle matrix must be real symmetric")
        if self.couplings.shape != (m,):
            raise ValueError("need one coupling per mode")
        if not self.dims:
            self.dims = [8] * m
        self.dims = [int(d) for d in self.dims]
        if len(self.dims) != m:
            raise ValueError("need one local dimension per mode")

    @classmethod
    def star(cls, freqs, couplings, beta=math.inf, dims=()):
        return cls(np.diag(np.asarray(freqs, dtype=float)), couplings, beta, dims)

    @property
    def n_modes(self) -> int:
        return self.h.shape[0]

    def mode_frequencies(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.h)

    def required_dims(self, tol: float = THERMAL_TAIL_TOL) -> list[int]:
        """Local dimension per mode so the truncated geometric tail is below ``tol``.

        Star baths (diagonal ``h``) get one entry per mode in the order of
        ``h``; otherwise every mode gets the bound of the softest eigenmode.
        """
        h = np.asarray(self.h)
        if np.allclose(h, np.diag(np.diag(h))):
            freqs = np.diag(h).real
        else:
            freqs = np.full(self.n_modes, self.mode_frequencies().min())
        out = []
        for w in freqs:
            if is_zero_temperature(self.beta):
                out.append(1)
                continue
            if w <= 0:
                raise ValueError("thermal states need positive mode frequencies")
            q = math.exp(-self.beta * w)
            out.append(max(1, math.ceil(math.log(tol) / math.log(q))))
        return out


@dataclass
class DenseModel:
    """System spin plus a list of baths on a truncated Fock space."""

    h_system: np.ndarray
    baths: list[DenseBath]
    rho_system: np.ndarray
    coupling_op: np.ndarray = field(default_factory=lambda: SX.copy())

    def __post_init__(self):
        if self.dim > MAX_DENSE_DIM:
            raise ValueError(f"dense dimension {self.dim} exceeds the cap {MAX_DENSE_DIM}")
        r = np.asarray(self.rho_system, dtype=complex)
        if not np.allclose(r, r.conj().T) or abs(np.trace(r) - 1) > 1e-12:
            raise ValueError("initial system state must be Hermitian with unit trace")
        if np.min(np.linalg.eigvalsh(r)) < -1e-12:
            raise ValueError("initial system state must be positive")

    @property
    def mode_dims(self) -> list[int]:
        return [d for b in self.baths for d in b.dims]

    @property
    def dim(self) -> int:
        return self.h_system.shape[0] * int(np.prod(self.mode_dims))

    def system_decomposition(self):
        e, v = np.linalg.eigh(self.rho_system)
        return [(float(p), v[:, k]) for k, p in enumerate(e) if p > 1e-15]

    def check_thermal_truncation(self, tol: float = THERMAL_TAIL_TOL) -> None:
        for j, b in enumerate(self.baths):
            req = b.required_dims(tol)
            for k, (d, r) in enumerate(zip(b.dims, req)):
                if d < r:
                    raise TruncationError(
                        f"bath {j + 1}: thermal tail above {tol:g}; need local dimension {r}, have {d}",
                        required=r,
                    )


def _embed(op, k, dims):
    """Sparse operator ``op`` on factor ``k`` of a tensor product with local ``dims``."""
    left = int(np.prod(dims[:k]))
    right = int(np.prod(dims[k + 1:]))
    return sp.kron(sp.kron(sp.identity(left), sp.csr_matrix(op)), sp.identity(right), format="csr")


def _bath_operators(bath: DenseBath, dims_all, offset):
    """``(H_B, X)`` with ``X = sum c_i (a_i + a_i^dag)``, embedded."""
    n = bath.n_modes
    ann = [_embed(boson_ops(dims_all[offset + i])["a"], offset + i, dims_all) for i in range(n)]
    size = int(np.prod(dims_all))
    hb = sp.csr_matrix((size, size))
    x = sp.csr_matrix((size, size))
    for i in range(n):
        x = x + bath.couplings[i] * (ann[i] + ann[i].T)
        for j in range(n):
            if bath.h[i, j] != 0:
                hb = hb + bath.h[i, j] * (ann[i].T @ ann[j])
    return hb.tocsr(), x.tocsr()


def _assemble(h_system, coupling_op, baths, signs):
    """Full Hamiltonian and per-bath free Hamiltonians on ``system (x) modes``."""
    ds = h_system.shape[0]
    mode_dims = [d for b in baths for d in b.dims]
    dims_all = [ds] + mode_dims
    total = _embed(h_system, 0, dims_all).astype(complex)
    lop = _embed(coupling_op, 0, dims_all)
    frees = []
    offset = 1
    for b, s in zip(baths, signs):
        hb, x = _bath_operators(b, dims_all, offset)
        total += s * hb + lop @ x
        frees.append(hb)
        offset += b.n_modes
    return total, frees


def propagator(h, t: float) -> np.ndarray:
    """``exp(-i h t)`` by scaling and squaring (dense)."""
    if sp.issparse(h):
        h = h.toarray()
    return scipy.linalg.expm(-1j * t * h)


def evolve_vector(h, psi: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i h t) psi`` for sparse ``h`` (truncated Taylor with scaling)."""
    if t == 0:
        return np.array(psi, dtype=complex)
    return expm_multiply(-1j * t * sp.csr_matrix(h), np.asarray(psi, dtype=complex))


def _times(t):
    return np.atleast_1d(np.asarray(t, dtype=float))


def dense_tpm_moments(model: DenseModel, t, n_max: int = 3, weights: Sequence[float] | None = None,
                      check_truncation: bool = True) -> np.ndarray:
    """Two-point-measurement heat moments ``<Q^n(t)>``, ``n = 1..n_max``.

    ``weights`` selects the measured quantity ``sum_j weights[j] * Q_j``
    (default: heat of bath 1 alone; ``(-1, 1)`` gives the integrated
    current ``Q_2 - Q_1``).  The projective double sum runs over the joint
    eigenbasis of all bath Hamiltonians, in which the initial state is
    diagonal, so every ``Pi_m rho(0) Pi_m`` splits into rank-one pieces.
    Returns an array of shape ``(len(t), n_max)``.
    """
    if check_truncation:
        model.check_thermal_truncation()
    if weights is None:
        weights = [1.0] + [0.0] * (len(model.baths) - 1)
    full, frees = _assemble(model.h_system, model.coupling_op, model.baths, [1.0] * len(model.baths))
    full = full.toarray()
    ds = model.h_system.shape[0]
    db = full.shape[0] // ds

    # joint eigenbasis of the bath Hamiltonians (they act on disjoint factors)
    energies = np.zeros(db)
    basis = np.eye(1)
    thermal = np.ones(1)
    for b in model.baths:
        hb_local, _ = _bath_operators(b, b.dims, 0)
        e, v = np.linalg.eigh(hb_local.toarray())
        basis = np.kron(basis, v)
        thermal = np.kron(thermal, _thermal_weights(e, b.beta))
    observable = np.zeros(db)
    offset_e = []
    # per-bath energies on the joint basis
    for j, b in enumerate(model.baths):
        hb_local, _ = _bath_operators(b, b.dims, 0)
        e = np.linalg.eigvalsh(hb_local.toarray())
        left = int(np.prod([int(np.prod(x.dims)) for x in model.baths[:j]]))
        right = int(np.prod([int(np.prod(x.dims)) for x in model.baths[j + 1:]]))
        ej = np.kron(np.kron(np.ones(left), e), np.ones(right))
        offset_e.append(ej)
        observable += weights[j] * ej
    big = np.kron(np.eye(ds), basis)
    h_eig = big.conj().T @ full @ big

    decomposition = model.system_decomposition()
    out = np.zeros((len(_times(t)), n_max))
    occupied = np.nonzero(thermal > 0)[0]
    for it, tau in enumerate(_times(t)):
        u = propagator(h_eig, tau).reshape(ds, db, ds, db)
        prob = np.zeros((db, occupied.size))
        for p, psi in decomposition:
            amp = np.tensordot(u[:, :, :, occupied], psi, axes=(2, 0))  # (sigma, y, x)
            prob += p * np.sum(np.abs(amp) ** 2, axis=0)
        diff = observable[:, None] - observable[occupied][None, :]
        weighted = prob * thermal[occupied][None, :]
        for n in range(1, n_max + 1):
            out[it, n - 1] = float(np.sum(weighted * diff**n))
    return out


def _thermal_weights(e, beta):
    e = np.asarray(e, dtype=float)
    if is_zero_temperature(beta):
        ground = np.isclose(e, e.min(), atol=1e-9)
        return ground / ground.sum()
    w = np.exp(-beta * (e - e.min()))
    return w / w.sum()


def dense_mean_energy_change(model: DenseModel, t, bath: int = 0) -> np.ndarray:
    """``Tr{H_B (rho(t) - rho(0))}`` by density-matrix propagation (independent
    of the projective double sum)."""
    full, frees = _assemble(model.h_system, model.coupling_op, model.baths, [1.0] * len(model.baths))
    rho0 = _initial_density(model)
    hb = frees[bath]
    e0 = np.trace(hb @ rho0).real
    out = []
    for tau in _times(t):
        u = propagator(full, tau)
        rho = u @ rho0 @ u.conj().T
        out.append(np.trace(hb @ rho).real - e0)
    return np.array(out)


def _initial_density(model: DenseModel):
    rho = model.rho_system.astype(complex)
    for b in model.baths:
        hb_local, _ = _bath_operators(b, b.dims, 0)
        e, v = np.linalg.eigh(hb_local.toarray())
        pi = (v * _thermal_weights(e, b.beta)) @ v.conj().T
        rho = np.kron(rho, pi)
    return rho


def evolve_density(model: DenseModel, t: float) -> np.ndarray:
    full, _ = _assemble(model.h_system, model.coupling_op, model.baths, [1.0] * len(model.baths))
    u = propagator(full, t)
    return u @ _initial_density(model) @ u.conj().T


def dense_characteristic_function(model: DenseModel, lam: float, t: float, bath: int = 0) -> complex:
    """``chi(lambda, t) = Tr{exp(i lam H_B) U_t[exp(-i lam H_B) rho(0)]}``."""
    full, frees = _assemble(model.h_system, model.coupling_op, model.baths, [1.0] * len(model.baths))
    rho0 = _initial_density(model)
    hb = frees[bath]
    e, v = np.linalg.eigh(hb.toarray())
    plus = (v * np.exp(1j * lam * e)) @ v.conj().T
    u = propagator(full, t)
    return complex(np.trace(plus @ u @ plus.conj().T @ rho0 @ u.conj().T))


# ---------------------------------------------------------------------------
# thermofield-doubled dense model


@dataclass
class DoubledBath:
    """Original (O) and auxiliary (A) zero-temperature parts of one bath."""

    orig: DenseBath
    aux: DenseBath | None = None


@dataclass
class DoubledModel:
    h_system: np.ndarray
    baths: list[DoubledBath]
    rho_system: np.ndarray
    coupling_op: np.ndarray = field(default_factory=lambda: SX.copy())

    def _parts(self):
        parts, signs, owner = [], [], []
        for j, b in enumerate(self.baths):
            parts.append(b.orig)
            signs.append(1.0)
            owner.append(j)
            if b.aux is not None:
                parts.append(b.aux)
                signs.append(-1.0)
                owner.append(j)
        return parts, signs, owner

    @property
    def dim(self) -> int:
        parts, _, _ = self._parts()
        return self.h_system.shape[0] * int(np.prod([d for p in parts for d in p.dims]))

    def __post_init__(self):
        if self.dim > MAX_DENSE_DIM:
            raise ValueError(f"dense dimension {self.dim} exceeds the cap {MAX_DENSE_DIM}")

    def operators(self):
        """``(H_G, [Q_j])`` as dense matrices."""
        parts, signs, owner = self._parts()
        h, frees = _assemble(self.h_system, self.coupling_op, parts, signs)
        heat = [np.zeros_like(h) for _ in self.baths]
        for f, s, j in zip(frees, signs, owner):
            heat[j] = heat[j] + s * f
        return h, heat

    def initial_vectors(self):
        parts, _, _ = self._parts()
        nb = int(np.prod([d for p in parts for d in p.dims]))
        vac = np.zeros(nb)
        vac[0] = 1.0
        e, v = np.linalg.eigh(np.asarray(self.rho_system, dtype=complex))
        return [(float(p), np.kron(v[:, k], vac)) for k, p in enumerate(e) if p > 1e-15]


def thermofield_double(model: DenseModel, dims_orig=None, dims_aux=None) -> DoubledModel:
    """Doubled model of ``model``: each bath is rotated to its eigenmodes and
    split into O (couplings ``u g``) and A (couplings ``v g``) star baths.
    Zero-temperature baths get no A part."""
    out = []
    for j, b in enumerate(model.baths):
        w, rot = np.linalg.eigh(b.h)
        g = rot.T @ b.couplings
        do = list(dims_orig[j]) if dims_orig is not None else list(b.dims)
        if is_zero_temperature(b.beta):
            out.append(DoubledBath(DenseBath.star(w, g, math.inf, do)))
            continue
        if np.any(w <= 0):
            raise ValueError("thermofield doubling needs positive mode frequencies")
        spec = BathSpec(SpectralDensity.ohmic(0.0, 1.0, max(1.0, float(w.max()) * 2)), b.beta)
        u, v = bogoliubov_coefficients(w, spec)
        da = list(dims_aux[j]) if dims_aux is not None else list(do)
        out.append(
            DoubledBath(
                DenseBath.star(w, u * g, math.inf, do),
                DenseBath.star(w, v * g, math.inf, da),
            )
        )
    return DoubledModel(model.h_system, out, model.rho_system, model.coupling_op)


def dense_heat_operator_moments(model: DoubledModel, t, n_max: int = 3,
                                weights: Sequence[float] | None = None) -> np.ndarray:
    """Vacuum moments ``<Q~^n(t)>`` under the transformed Hamiltonian,
    mixed system states by spectral decomposition.  Shape ``(len(t), n_max)``."""
    h, heat = model.operators()
    if weights is None:
        weights = [1.0] + [0.0] * (len(model.baths) - 1)
    q = sum(w * qj for w, qj in zip(weights, heat))
    out = np.zeros((len(_times(t)), n_max))
    for it, tau in enumerate(_times(t)):
        for p, psi0 in model.initial_vectors():
            psi = evolve_vector(h, psi0, tau)
            phi = psi
            powers = []
            for n in range(n_max):
                phi = q @ phi
                powers.append(phi)
            for n in range(1, n_max + 1):
                out[it, n - 1] += p * np.vdot(psi, powers[n - 1]).real
    return out


def dense_state_trajectory(model: DoubledModel, times, branch: int = 0):
    """Doubled-space state vectors of one spin branch at the given times."""
    h, _ = model.operators()
    p, psi0 = model.initial_vectors()[branch]
    return [evolve_vector(h, psi0, tau) for tau in _times(times)]


def top_level_population(model: DoubledModel, psi: np.ndarray) -> float:
    """Largest population of the highest Fock level over all modes of ``psi``."""
    parts, _, _ = model._parts()
    dims = [model.h_system.shape[0]] + [d for p in parts for d in p.dims]
    prob = (np.abs(psi) ** 2).reshape(dims)
    worst = 0.0
    for k in range(1, len(dims)):
        worst = max(worst, float(np.take(prob, dims[k] - 1, axis=k).sum()))
    return worst
