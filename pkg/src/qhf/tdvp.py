"""Two-site TDVP integration of tensor-train states against an operator train.

Symmetric second-order projector splitting: a left-to-right half sweep
(forward two-site, backward one-site updates) followed by the mirrored
right-to-left half sweep.  Long-range terms are handled transparently since
the integrator only sees the operator train.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg

from .mps import MPS, MPO, TruncationPolicy, left_env, right_env, truncated_svd

# local problems up to this dimension are exponentiated densely
DENSE_LIMIT = 40
# up to this dimension the effective matrix is formed once and Lanczos runs on it
MATRIX_LIMIT = 2048


class NumericalFailure(ArithmeticError):
    """Raised when evolution produces non-finite numbers."""


def expm_krylov(matvec, v, tau: complex, kmax: int = 40, tol: float = 1e-13):
    """``exp(tau H) v`` for Hermitian ``H`` given by ``matvec`` (Lanczos)."""
    nrm = np.linalg.norm(v)
    if nrm == 0:
        return v.copy()
    shape = v.shape
    q = [v.ravel() / nrm]
    alpha, beta = [], []
    kmax = min(kmax, v.size)
    coeffs = None
    for j in range(kmax):
        w = matvec(q[j].reshape(shape)).ravel()
        a = np.vdot(q[j], w).real
        alpha.append(a)
        w = w - a * q[j] - (beta[-1] * q[j - 1] if j > 0 else 0)
        basis = np.array(q)
        w -= basis.T @ (basis.conj() @ w)  # full reorthogonalisation
        b = np.linalg.norm(w)
        last = b < 1e-14 or j == kmax - 1
        if j >= 2 or last:
            if j == 0:
                e, u = np.array(alpha), np.ones((1, 1))
            else:
                e, u = scipy.linalg.eigh_tridiagonal(np.array(alpha), np.array(beta))
            coeffs = u @ (np.exp(tau * e) * u[0].conj())
            if last or abs(b * coeffs[-1]) < tol:
                break
        beta.append(b)
        q.append(w / b)
    out = coeffs @ np.array(q)
    return (nrm * out).reshape(shape)


def _h2_apply(lenv, w1, w2, renv, theta):
    x = np.tensordot(lenv, theta, axes=(2, 0))  # (A, w, s, t, c)
    x = np.tensordot(x, w1, axes=([1, 2], [0, 2]))  # (A, t, c, S, v)
    x = np.tensordot(x, w2, axes=([4, 1], [0, 2]))  # (A, c, S, T, u)
    x = np.tensordot(x, renv, axes=([1, 4], [2, 1]))  # (A, S, T, C)
    return x


def _h1_apply(lenv, w, renv, m):
    x = np.tensordot(lenv, m, axes=(2, 0))  # (A, w, s, c)
    x = np.tensordot(x, w, axes=([1, 2], [0, 2]))  # (A, c, S, v)
    x = np.tensordot(x, renv, axes=([1, 3], [2, 1]))  # (A, S, C)
    return x


def _h2_dense(lenv, w1, w2, renv):
    x = np.tensordot(lenv, w1, axes=(1, 0))  # (A, a, S, s, v)
    x = np.tensordot(x, w2, axes=(4, 0))  # (A, a, S, s, T, t, u)
    x = np.tensordot(x, renv, axes=(6, 1))  # (A, a, S, s, T, t, C, c)
    x = x.transpose(0, 2, 4, 6, 1, 3, 5, 7)
    n = int(np.prod(x.shape[:4]))
    return x.reshape(n, n)


def _h1_dense(lenv, w, renv):
    x = np.tensordot(lenv, w, axes=(1, 0))  # (A, a, S, s, v)
    x = np.tensordot(x, renv, axes=(4, 1))  # (A, a, S, s, C, c)
    x = x.transpose(0, 2, 4, 1, 3, 5)
    n = int(np.prod(x.shape[:3]))
    return x.reshape(n, n)


def _evolve_local(apply, dense, v, tau):
    if v.size <= DENSE_LIMIT:
        h = dense()
        h = 0.5 * (h + h.conj().T)
        e, u = np.linalg.eigh(h)
        out = u @ (np.exp(tau * e) * (u.conj().T @ v.ravel()))
        return out.reshape(v.shape)
    if v.size <= MATRIX_LIMIT:
        h = dense()
        return expm_krylov(lambda x: (h @ x.ravel()).reshape(x.shape), v, tau)
    return expm_krylov(apply, v, tau)


class TDVP:
    """Stateful two-site TDVP propagator; keeps environments between steps.

    The state is owned by the engine while it evolves; read it through
    :attr:`state` (a live reference, copy it to keep a snapshot).
    """

    def __init__(self, state: MPS, hamiltonian: MPO, policy: TruncationPolicy):
        if state.phys_dims != hamiltonian.phys_dims:
            raise ValueError("state and Hamiltonian layouts differ")
        self.state = state.copy()
        self.state.canonicalize(0)
        self.h = hamiltonian
        self.policy = policy
        self.time = 0.0
        self.discarded_weight = 0.0
        self.max_bond_seen = max(self.state.bond_dims, default=1)
        n = len(self.state)
        one = np.ones((1, 1, 1), dtype=complex)
        self.lenv = [None] * n
        self.renv = [None] * n
        self.lenv[0] = one
        self.renv[n - 1] = one
        for k in range(n - 1, 0, -1):
            self.renv[k - 1] = right_env(self.renv[k], self.state.tensors[k], self.h.tensors[k])

    def step(self, dt: float) -> None:
        if dt == 0:
            return
        n = len(self.state)
        if n == 1:
            self._single_site(dt)
        else:
            self._sweep_right(0.5 * dt)
            self._sweep_left(0.5 * dt)
        c = self.state.tensors[0]
        if not np.all(np.isfinite(c)):
            raise NumericalFailure(f"non-finite amplitudes at t = {self.time + dt:.6g}")
        self.time += dt

    def _single_site(self, dt):
        w = self.h.tensors[0][0, :, :, 0]
        a = self.state.tensors[0]
        u = scipy.linalg.expm(-1j * dt * w)
        self.state.tensors[0] = np.einsum("st,atb->asb", u, a)

    def _split(self, theta):
        a, s, t, c = theta.shape
        u, sv, vh, disc, _ = truncated_svd(theta.reshape(a * s, t * c), self.policy)
        self.discarded_weight += disc
        self.max_bond_seen = max(self.max_bond_seen, len(sv))
        return u.reshape(a, s, -1), sv, vh.reshape(-1, t, c)

    def _sweep_right(self, tau):
        st, h = self.state.tensors, self.h.tensors
        n = len(st)
        for i in range(n - 1):
            theta = np.tensordot(st[i], st[i + 1], axes=(2, 0))
            le, re = self.lenv[i], self.renv[i + 1]
            theta = _evolve_local(
                lambda x: _h2_apply(le, h[i], h[i + 1], re, x),
                lambda: _h2_dense(le, h[i], h[i + 1], re),
                theta,
                -1j * tau,
            )
            u, sv, vh = self._split(theta)
            st[i] = u
            st[i + 1] = sv[:, None, None] * vh
            self.lenv[i + 1] = left_env(self.lenv[i], st[i], h[i])
            if i < n - 2:
                le2, re2 = self.lenv[i + 1], self.renv[i + 1]
                st[i + 1] = _evolve_local(
                    lambda x: _h1_apply(le2, h[i + 1], re2, x),
                    lambda: _h1_dense(le2, h[i + 1], re2),
                    st[i + 1],
                    1j * tau,
                )
        self.state.ortho_center = n - 1

    def _sweep_left(self, tau):
        st, h = self.state.tensors, self.h.tensors
        n = len(st)
        for i in range(n - 2, -1, -1):
            theta = np.tensordot(st[i], st[i + 1], axes=(2, 0))
            le, re = self.lenv[i], self.renv[i + 1]
            theta = _evolve_local(
                lambda x: _h2_apply(le, h[i], h[i + 1], re, x),
                lambda: _h2_dense(le, h[i], h[i + 1], re),
                theta,
                -1j * tau,
            )
            u, sv, vh = self._split(theta)
            st[i + 1] = vh
            st[i] = u * sv[None, None, :]
            self.renv[i] = right_env(self.renv[i + 1], st[i + 1], h[i + 1])
            if i > 0:
                le2, re2 = self.lenv[i], self.renv[i]
                st[i] = _evolve_local(
                    lambda x: _h1_apply(le2, h[i], re2, x),
                    lambda: _h1_dense(le2, h[i], re2),
                    st[i],
                    1j * tau,
                )
        self.state.ortho_center = 0

    def energy(self) -> float:
        """``<H>`` of the current (normalised) state, from cached environments."""
        c = self.state.tensors[0]
        hc = _h1_apply(self.lenv[0], self.h.tensors[0], self.renv[0], c)
        return float(np.vdot(c, hc).real / np.vdot(c, c).real)

    def norm(self) -> float:
        return math.exp(self.state.norm_log) * float(np.linalg.norm(self.state.tensors[0]))


def evolve_step(state: MPS, hamiltonian: MPO, dt: float, policy: TruncationPolicy) -> MPS:
    """One TDVP step of length ``dt``; returns a new state."""
    if dt == 0:
        return state.copy()
    engine = TDVP(state, hamiltonian, policy)
    engine.step(dt)
    out = engine.state
    out.discarded_weight = engine.discarded_weight
    return out
