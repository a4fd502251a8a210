"""Orthogonal-polynomial chain mapping of a bath measure.

The measure is discretised by composite Gauss-Legendre quadrature and the
three-term recurrence of its orthonormal polynomials is obtained with the
discretised Stieltjes procedure.  Running sums are carried in ``np.longdouble``
(80-bit on x86-64).
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bath import BathSpec, Measure, thermofield_split, MEASURE_SCALE

log = logging.getLogger(__name__)

GAUSS_ORDER = 16
DEFAULT_NUM_NODES = 4096


class EmptyMeasureError(ValueError):
    """Raised when a chain is requested for an identically zero measure."""


class MeasureResolutionError(ArithmeticError):
    """Raised when the Stieltjes procedure loses positivity of a b_n."""

    def __init__(self, index: int, value: float):
        super().__init__(
            f"measure resolution exhausted: b_{index} = {value:.3e} is not positive; "
            "increase the number of quadrature nodes or shorten the chain"
        )
        self.index = index


@dataclass(frozen=True)
class DiscretizedMeasure:
    nodes: np.ndarray
    weights: np.ndarray
    source: str = ""

    @property
    def empty(self) -> bool:
        return self.nodes.size == 0

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights.astype(np.longdouble)))


@dataclass(frozen=True)
class ChainCoefficients:
    """Nearest-neighbour chain: ``c0 A (b0 + b0^dag) + sum w_n n_n + t_n (b_{n+1}^dag b_n + h.c.)``."""

    site_freqs: np.ndarray
    hoppings: np.ndarray
    c0: float

    @property
    def length(self) -> int:
        return len(self.site_freqs)

    def truncated(self, length: int) -> "ChainCoefficients":
        if length > self.length:
            raise ValueError(f"chain has only {self.length} sites")
        return ChainCoefficients(self.site_freqs[:length], self.hoppings[: length - 1], self.c0)

    def jacobi_matrix(self) -> np.ndarray:
        return (
            np.diag(self.site_freqs)
            + np.diag(self.hoppings, 1)
            + np.diag(self.hoppings, -1)
        )

    def star_modes(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenfrequencies and system couplings of the equivalent star bath."""
        e, v = np.linalg.eigh(self.jacobi_matrix())
        return e, self.c0 * v[0]

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# c0 = {self.c0!r}\n# L = {self.length}\n")
        buf.write("# n omega_n t_n\n")
        for n, w in enumerate(self.site_freqs):
            t = repr(float(self.hoppings[n])) if n < self.length - 1 else "nan"
            buf.write(f"{n} {float(w)!r} {t}\n")
        return buf.getvalue()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "ChainCoefficients":
        c0 = None
        freqs, hops = [], []
        for line in text.splitlines():
            line = line.strip()
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("c0"):
                    c0 = float(body.split("=", 1)[1])
                continue
            if not line:
                continue
            _, w, t = line.split()
            freqs.append(float(w))
            hops.append(float(t))
        if c0 is None:
            raise ValueError("missing c0 header line")
        return cls(np.array(freqs), np.array(hops[:-1]), c0)

    @classmethod
    def load(cls, path: str | Path) -> "ChainCoefficients":
        return cls.from_text(Path(path).read_text())


def _panel_edges(domain_max: float, panels: int, grade_near_zero: bool) -> np.ndarray:
    if not grade_near_zero:
        return np.linspace(0.0, domain_max, panels + 1)
    # a few geometrically shrinking panels resolve the steep n(w) J(w) shoulder
    n_graded = min(12, panels // 4)
    uniform = np.linspace(0.0, domain_max, panels - n_graded + 1)
    first = uniform[1]
    graded = first * 0.5 ** np.arange(n_graded, 0, -1)
    return np.concatenate([[0.0], graded, uniform[1:]])


def discretize_measure(
    measure: Measure,
    num_nodes: int = DEFAULT_NUM_NODES,
    order: int = GAUSS_ORDER,
) -> DiscretizedMeasure:
    """Composite Gauss-Legendre discretisation of ``measure`` on its support."""
    if measure.is_zero:
        return DiscretizedMeasure(np.empty(0), np.empty(0), f"{measure.label} (empty)")
    panels = max(1, num_nodes // order)
    x, w = np.polynomial.legendre.leggauss(order)
    edges = _panel_edges(measure.domain_max, panels, measure.steep_near_zero)
    left, right = edges[:-1, None], edges[1:, None]
    half = 0.5 * (right - left)
    nodes = (half * x + 0.5 * (right + left)).ravel()
    weights = (half * w).ravel() * measure(nodes)
    if np.any(weights < 0):
        raise ValueError("measure density is negative somewhere on its support")
    keep = weights > 0
    if not np.any(keep):
        return DiscretizedMeasure(np.empty(0), np.empty(0), f"{measure.label} (empty)")
    return DiscretizedMeasure(
        nodes[keep], weights[keep], f"{measure.label}: {panels}x{order} Gauss-Legendre"
    )


def stieltjes_recurrence(dm: DiscretizedMeasure, length: int) -> ChainCoefficients:
    """Recurrence coefficients of the orthonormal polynomials of ``dm``.

    ``site_freqs[n] = a_n`` and ``hoppings[n] = sqrt(b_{n+1})`` where
    ``x p_n = sqrt(b_{n+1}) p_{n+1} + a_n p_n + sqrt(b_n) p_{n-1}``;
    ``c0 = sqrt(sum of weights)``.
    """
    if dm.empty:
        raise EmptyMeasureError("cannot chain-map an empty measure")
    if length < 1:
        raise ValueError("chain length must be at least 1")
    if length > dm.nodes.size // 4:
        raise ValueError(
            f"chain length {length} needs at least {4 * length} quadrature nodes, got {dm.nodes.size}"
        )
    x = dm.nodes.astype(np.longdouble)
    w = dm.weights.astype(np.longdouble)
    mass = np.sum(w)
    a = np.zeros(length, dtype=np.longdouble)
    sqb = np.zeros(length, dtype=np.longdouble)  # sqb[n] = sqrt(b_n), sqb[0] unused
    p_prev = np.zeros_like(x)
    p = np.full_like(x, 1.0 / np.sqrt(mass))
    for n in range(length):
        wp2 = w * p * p
        a[n] = np.sum(x * wp2)
        if n == length - 1:
            break
        q = (x - a[n]) * p - sqb[n] * p_prev
        b_next = np.sum(w * q * q)
        if not b_next > 0:
            raise MeasureResolutionError(n + 1, float(b_next))
        sqb[n + 1] = np.sqrt(b_next)
        p_prev, p = p, q / sqb[n + 1]
    return ChainCoefficients(
        a.astype(float), sqb[1:].astype(float), float(np.sqrt(mass))
    )


def chain_from_measure(measure: Measure, length: int, num_nodes: int | None = None) -> ChainCoefficients:
    if num_nodes is None:
        num_nodes = max(DEFAULT_NUM_NODES, 8 * length * GAUSS_ORDER)
    dm = discretize_measure(measure, num_nodes)
    return stieltjes_recurrence(dm, length)


def chain_coefficients(
    bath: BathSpec,
    length: int,
    num_nodes: int | None = None,
    scale: float = MEASURE_SCALE,
) -> tuple[ChainCoefficients, ChainCoefficients | None]:
    """Chains for the original (O) and auxiliary (A) parts of a thermal bath.

    The auxiliary chain is ``None`` at zero temperature.  A bath with zero
    coupling still yields an O chain with ``c0 = 0`` built from ``J`` shape
    alone so that the layout does not depend on the coupling strength.
    """
    if length < 1:
        raise ValueError("chain length must be at least 1")
    m_o, m_a = thermofield_split(bath, scale)
    chain_o = _chain_or_decoupled(m_o, length, num_nodes, bath)
    if bath.zero_temperature:
        return chain_o, None
    chain_a = _chain_or_decoupled(m_a, length, num_nodes, bath)
    return chain_o, chain_a


def _chain_or_decoupled(measure, length, num_nodes, bath):
    if not measure.is_zero:
        return chain_from_measure(measure, length, num_nodes)
    # shape-only chain for a decoupled bath; its coupling is exactly zero
    spec = bath.spectral
    if spec.kind == "ohmic":
        from .bath import SpectralDensity

        spec = SpectralDensity.ohmic(1.0, spec.cutoff, spec.domain_max)
    shape = Measure(spec, spec.domain_max, measure.label)
    try:
        chain = chain_from_measure(shape, length, num_nodes)
    except EmptyMeasureError:
        return ChainCoefficients(np.zeros(length), np.ones(max(length - 1, 0)), 0.0)
    return ChainCoefficients(chain.site_freqs, chain.hoppings, 0.0)


def light_cone_ok(chain: ChainCoefficients, t_max: float) -> bool:
    """Whether ``2 max(t_n) t_max < L``."""
    if chain.length < 2:
        return False
    return 2.0 * float(np.max(chain.hoppings)) * t_max < chain.length
