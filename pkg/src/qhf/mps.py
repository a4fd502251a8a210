"""Tensor-train states and operator trains.

Index conventions
-----------------
* state site tensor ``A[k]``: ``(left bond, physical, right bond)``
* operator site tensor ``W[k]``: ``(left bond, out, in, right bond)``
* environments: ``(bra bond, operator bond, ket bond)``

A state represents ``exp(norm_log) * contraction(tensors)``; compression and
canonicalisation move the scale of the centre tensor into ``norm_log``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TruncationPolicy:
    max_bond: int = 64
    svd_cutoff: float = 1e-10
    local_dim: int = 8

    def __post_init__(self):
        if self.max_bond < 1:
            raise ValueError("max_bond must be >= 1")
        if not 0 <= self.svd_cutoff < 1:
            raise ValueError("svd_cutoff must lie in [0, 1)")
        if self.local_dim < 2:
            raise ValueError("local_dim must be >= 2")


class CompressionWarning(UserWarning):
    pass


def truncated_svd(mat: np.ndarray, policy: TruncationPolicy | None):
    """SVD keeping the fewest singular values whose discarded relative weight
    stays below ``policy.svd_cutoff`` (and at most ``policy.max_bond``).

    Returns ``(u, s, vh, discarded, capped)`` where ``discarded`` is the
    relative squared weight thrown away and ``capped`` flags truncation forced
    by ``max_bond``.
    """
    try:
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError:
        u, s, vh = _svd_fallback(mat)
    total = float(np.sum(s * s))
    if policy is None or total == 0.0:
        keep = max(1, int(np.count_nonzero(s > 0))) if total > 0 else 1
        return u[:, :keep], s[:keep], vh[:keep], 0.0, False
    tail = np.cumsum((s * s)[::-1])[::-1] / total  # tail[k] = weight of s[k:]
    keep = int(np.count_nonzero(tail > policy.svd_cutoff))
    keep = max(keep, 1)
    capped = keep > policy.max_bond
    keep = min(keep, policy.max_bond)
    discarded = float(tail[keep]) if keep < len(s) else 0.0
    return u[:, :keep], s[:keep], vh[:keep], discarded, capped


def _svd_fallback(mat):
    import scipy.linalg

    return scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")


class MPS:
    def __init__(self, tensors, ortho_center: int | None = None, norm_log: float = 0.0):
        self.tensors = [np.asarray(t, dtype=complex) for t in tensors]
        self.ortho_center = ortho_center
        self.norm_log = float(norm_log)
        self.discarded_weight = 0.0
        self.compression_warning = False
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise ValueError("boundary bonds must have dimension 1")
        for a, b in zip(self.tensors[:-1], self.tensors[1:]):
            if a.shape[2] != b.shape[0]:
                raise ValueError(f"bond mismatch {a.shape} / {b.shape}")

    def __len__(self):
        return len(self.tensors)

    @property
    def phys_dims(self) -> list[int]:
        return [t.shape[1] for t in self.tensors]

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def copy(self) -> "MPS":
        out = MPS([t.copy() for t in self.tensors], self.ortho_center, self.norm_log)
        out.discarded_weight = self.discarded_weight
        out.compression_warning = self.compression_warning
        return out

    def to_dense(self) -> np.ndarray:
        vec = self.tensors[0].reshape(-1, self.tensors[0].shape[2])
        for t in self.tensors[1:]:
            vec = (vec @ t.reshape(t.shape[0], -1)).reshape(-1, t.shape[2])
        return vec.ravel() * math.exp(self.norm_log) if np.isfinite(self.norm_log) else 0 * vec.ravel()

    @classmethod
    def from_dense(cls, vec, phys_dims, policy: TruncationPolicy | None = None) -> "MPS":
        vec = np.asarray(vec, dtype=complex)
        if vec.size != int(np.prod(phys_dims)):
            raise ValueError("vector size does not match layout")
        tensors = []
        rest = vec.reshape(1, -1)
        left = 1
        for d in phys_dims[:-1]:
            rest = rest.reshape(left * d, -1)
            u, s, vh, _, _ = truncated_svd(rest, policy)
            tensors.append(u.reshape(left, d, -1))
            rest = s[:, None] * vh
            left = u.shape[1]
        tensors.append(rest.reshape(left, phys_dims[-1], 1))
        out = cls(tensors, len(phys_dims) - 1)
        out._normalize_center()
        return out

    # canonical forms ------------------------------------------------------

    def canonicalize(self, center: int = 0) -> "MPS":
        """Bring into mixed-canonical form around ``center`` (in place)."""
        n = len(self)
        for k in range(0, center):
            self._shift_right(k)
        for k in range(n - 1, center, -1):
            self._shift_left(k)
        self.ortho_center = center
        self._normalize_center()
        return self

    def move_center(self, center: int) -> "MPS":
        if self.ortho_center is None:
            return self.canonicalize(center)
        while self.ortho_center < center:
            self._shift_right(self.ortho_center)
            self.ortho_center += 1
        while self.ortho_center > center:
            self._shift_left(self.ortho_center)
            self.ortho_center -= 1
        return self

    def _shift_right(self, k):
        t = self.tensors[k]
        dl, d, dr = t.shape
        q, r = np.linalg.qr(t.reshape(dl * d, dr))
        self.tensors[k] = q.reshape(dl, d, -1)
        self.tensors[k + 1] = np.tensordot(r, self.tensors[k + 1], axes=(1, 0))

    def _shift_left(self, k):
        t = self.tensors[k]
        dl, d, dr = t.shape
        q, r = np.linalg.qr(t.reshape(dl, d * dr).T)
        self.tensors[k] = q.T.reshape(-1, d, dr)
        self.tensors[k - 1] = np.tensordot(self.tensors[k - 1], r.T, axes=(2, 0))

    def _normalize_center(self):
        c = self.ortho_center
        nrm = float(np.linalg.norm(self.tensors[c]))
        if nrm > 0 and np.isfinite(nrm):
            self.tensors[c] = self.tensors[c] / nrm
            self.norm_log += math.log(nrm)
        elif nrm == 0:
            self.norm_log = -math.inf

    def is_canonical(self, tol: float = 1e-12) -> bool:
        if self.ortho_center is None:
            return False
        for k, t in enumerate(self.tensors):
            dl, d, dr = t.shape
            if k < self.ortho_center:
                m = t.reshape(dl * d, dr)
                if not np.allclose(m.conj().T @ m, np.eye(dr), atol=tol):
                    return False
            elif k > self.ortho_center:
                m = t.reshape(dl, d * dr)
                if not np.allclose(m @ m.conj().T, np.eye(dl), atol=tol):
                    return False
        return True

    # scalars -------------------------------------------------------------

    def norm(self) -> float:
        return math.sqrt(max(inner(self, self).real, 0.0))

    def normalize(self) -> "MPS":
        self.norm_log = 0.0 if np.isfinite(self.norm_log) else self.norm_log
        nrm = self.norm()
        if nrm > 0:
            self.norm_log -= math.log(nrm)
        return self


class MPO:
    def __init__(self, tensors):
        self.tensors = [np.asarray(w, dtype=complex) for w in tensors]
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[3] != 1:
            raise ValueError("boundary bonds must have dimension 1")
        for a, b in zip(self.tensors[:-1], self.tensors[1:]):
            if a.shape[3] != b.shape[0]:
                raise ValueError(f"operator bond mismatch {a.shape} / {b.shape}")

    def __len__(self):
        return len(self.tensors)

    @property
    def phys_dims(self) -> list[int]:
        return [w.shape[1] for w in self.tensors]

    @property
    def bond_dims(self) -> list[int]:
        return [w.shape[3] for w in self.tensors[:-1]]

    def dagger(self) -> "MPO":
        return MPO([w.transpose(0, 2, 1, 3).conj() for w in self.tensors])

    def to_dense(self) -> np.ndarray:
        w0 = self.tensors[0]
        op = w0[0]  # (out, in, right)
        for w in self.tensors[1:]:
            op = np.tensordot(op, w, axes=(2, 0))  # (O, I, o, i, r)
            o1, i1, o2, i2, r = op.shape
            op = op.transpose(0, 2, 1, 3, 4).reshape(o1 * o2, i1 * i2, r)
        return op[:, :, 0]

    def __add__(self, other: "MPO") -> "MPO":
        if self.phys_dims != other.phys_dims:
            raise ValueError("layout mismatch")
        n = len(self)
        out = []
        for k, (a, b) in enumerate(zip(self.tensors, other.tensors)):
            if n == 1:
                out.append(a + b)
            elif k == 0:
                out.append(np.concatenate([a, b], axis=3))
            elif k == n - 1:
                out.append(np.concatenate([a, b], axis=0))
            else:
                wl = a.shape[0] + b.shape[0]
                wr = a.shape[3] + b.shape[3]
                d = a.shape[1]
                w = np.zeros((wl, d, d, wr), dtype=complex)
                w[: a.shape[0], :, :, : a.shape[3]] = a
                w[a.shape[0]:, :, :, a.shape[3]:] = b
                out.append(w)
        return MPO(out)

    def scaled(self, factor: complex) -> "MPO":
        ts = [w.copy() for w in self.tensors]
        ts[0] = ts[0] * factor
        return MPO(ts)

    def __sub__(self, other: "MPO") -> "MPO":
        return self + other.scaled(-1.0)


def identity_mpo(phys_dims) -> MPO:
    return MPO([np.eye(d, dtype=complex)[None, :, :, None] for d in phys_dims])


def mpo_from_dense(matrix, phys_dims, tol: float = 1e-14) -> MPO:
    """Exact operator train of a dense matrix by successive SVDs."""
    matrix = np.asarray(matrix, dtype=complex)
    n = len(phys_dims)
    t = matrix.reshape(list(phys_dims) + list(phys_dims))
    # interleave (o1, i1, o2, i2, ...)
    order = [x for k in range(n) for x in (k, n + k)]
    t = t.transpose(order)
    tensors = []
    left = 1
    rest = t.reshape(1, -1)
    for d in phys_dims[:-1]:
        rest = rest.reshape(left * d * d, -1)
        u, s, vh = np.linalg.svd(rest, full_matrices=False)
        keep = max(1, int(np.count_nonzero(s > tol * (s[0] if s.size else 1))))
        tensors.append(u[:, :keep].reshape(left, d, d, keep))
        rest = s[:keep, None] * vh[:keep]
        left = keep
    tensors.append(rest.reshape(left, phys_dims[-1], phys_dims[-1], 1))
    return MPO(tensors)


# environments ---------------------------------------------------------------


def left_env(env, a, w, b=None):
    """Absorb one site into a left environment ``(bra, op, ket)``."""
    if b is None:
        b = a
    x = np.tensordot(env, a, axes=(2, 0))  # (B, w, s, k)
    x = np.tensordot(x, w, axes=([1, 2], [0, 2]))  # (B, k, S, v)
    x = np.tensordot(b.conj(), x, axes=([0, 1], [0, 2]))  # (B', k, v)
    return x.transpose(0, 2, 1)


def right_env(env, a, w, b=None):
    """Absorb one site into a right environment ``(bra, op, ket)``."""
    if b is None:
        b = a
    x = np.tensordot(a, env, axes=(2, 2))  # (k, s, B', v)
    x = np.tensordot(w, x, axes=([2, 3], [1, 3]))  # (w, S, k, B')
    x = np.tensordot(b.conj(), x, axes=([1, 2], [1, 3]))  # (B, w, k)
    return x


def _check_layout(state: MPS, op: MPO):
    if state.phys_dims != op.phys_dims:
        raise ValueError(f"layout mismatch: state {state.phys_dims} vs operator {op.phys_dims}")


def sandwich(bra: MPS, op: MPO, ket: MPS) -> complex:
    """``<bra| op |ket>``, one left-to-right environment sweep."""
    _check_layout(ket, op)
    if bra.phys_dims != ket.phys_dims:
        raise ValueError("bra/ket layout mismatch")
    env = np.ones((1, 1, 1), dtype=complex)
    for a, w, b in zip(ket.tensors, op.tensors, bra.tensors):
        env = left_env(env, a, w, b)
    scale = bra.norm_log + ket.norm_log
    if not np.isfinite(scale):
        return 0j
    return complex(env[0, 0, 0]) * math.exp(scale)


def expectation(state: MPS, op: MPO) -> complex:
    """``<state| op |state>`` (not divided by the norm)."""
    return sandwich(state, op, state)


def inner(bra: MPS, ket: MPS) -> complex:
    if bra.phys_dims != ket.phys_dims:
        raise ValueError("layout mismatch")
    env = np.ones((1, 1), dtype=complex)
    for a, b in zip(ket.tensors, bra.tensors):
        x = np.tensordot(env, a, axes=(1, 0))  # (B, s, k)
        env = np.tensordot(b.conj(), x, axes=([0, 1], [0, 1]))
    scale = bra.norm_log + ket.norm_log
    if not np.isfinite(scale):
        return 0j
    return complex(env[0, 0]) * math.exp(scale)


def vacuum_state(phys_dims) -> MPS:
    """Product state with every site in basis state 0."""
    if any(d < 1 for d in phys_dims):
        raise ValueError("physical dimensions must be >= 1")
    tensors = []
    for d in phys_dims:
        t = np.zeros((1, d, 1), dtype=complex)
        t[0, 0, 0] = 1.0
        tensors.append(t)
    return MPS(tensors, ortho_center=0)


def product_state(vectors) -> MPS:
    tensors = [np.asarray(v, dtype=complex).reshape(1, -1, 1) for v in vectors]
    out = MPS(tensors, ortho_center=None)
    return out.canonicalize(0)


def apply_operator(state: MPS, op: MPO, policy: TruncationPolicy | None = None) -> MPS:
    """Compressed ``op |state>``.

    The exact product (bond ``D * w``) is brought to left-canonical form by
    QR and then truncated right-to-left by SVD.  The result carries
    ``discarded_weight`` (sum over bonds of the relative discarded weight)
    and ``compression_warning`` (bond cap hit with discarded weight above
    100x the cutoff).
    """
    _check_layout(state, op)
    tensors = []
    for a, w in zip(state.tensors, op.tensors):
        x = np.tensordot(w, a, axes=(2, 1))  # (wl, S, wr, al, ar)
        wl, d, wr, al, ar = x.shape
        tensors.append(x.transpose(3, 0, 1, 4, 2).reshape(al * wl, d, ar * wr))
    out = MPS(tensors, ortho_center=None, norm_log=state.norm_log)
    n = len(out)
    out.canonicalize(n - 1)
    if not np.isfinite(out.norm_log):
        out.canonicalize(0)
        return out
    discarded = 0.0
    capped_bad = False
    for k in range(n - 1, 0, -1):
        t = out.tensors[k]
        dl, d, dr = t.shape
        u, s, vh, disc, capped = truncated_svd(t.reshape(dl, d * dr), policy)
        discarded += disc
        if capped and policy is not None and disc > 100 * policy.svd_cutoff:
            capped_bad = True
        out.tensors[k] = vh.reshape(-1, d, dr)
        out.tensors[k - 1] = np.tensordot(out.tensors[k - 1], u * s, axes=(2, 0))
    out.ortho_center = 0
    out._normalize_center()
    out.discarded_weight = discarded
    out.compression_warning = capped_bad
    if capped_bad:
        warnings.warn(
            f"bond cap {policy.max_bond} reached with discarded weight {discarded:.2e}",
            CompressionWarning,
            stacklevel=2,
        )
    return out
