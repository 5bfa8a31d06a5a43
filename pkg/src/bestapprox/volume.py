"""Metric tensor, image volume, covering-radius scaling laws and the spiral family."""
from __future__ import annotations

from dataclasses import dataclass
from math import gamma, pi, sqrt

import numpy as np
from scipy.special import ellipe

from .circuit import ParametricCircuit, evaluate, ry, rz, tangents
from .dea import GramMatrix
from .geometry import sobol_unit

_PAULI = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)


def _metric_batch(circuit: ParametricCircuit, thetas: np.ndarray, gauge: str) -> np.ndarray:
    T = tangents(circuit, thetas)                       # (B, N, dim)
    if gauge == "hilbert":
        return np.real(np.einsum("bjk,bik->bji", T.conj(), T))
    if gauge == "bloch":
        if circuit.num_qubits != 1:
            raise ValueError("the Bloch gauge needs a single-qubit circuit")
        psi = evaluate(circuit, thetas)                 # (B, 2)
        # d<sigma_k> / d theta_j = 2 Re <psi| sigma_k |d_j psi>
        J = 2 * np.real(np.einsum("ba,kac,bjc->bkj", psi.conj(), _PAULI, T))
        return np.einsum("bkj,bki->bji", J, J)
    raise ValueError(f"unknown gauge {gauge!r}")


def metric(circuit: ParametricCircuit, theta, gauge: str = "hilbert") -> GramMatrix:
    """Pull-back metric ``g_jk = Re<d_j C, d_k C>`` (``hilbert``) or of the Bloch vector (``bloch``)."""
    theta = np.asarray(theta, dtype=float)
    return GramMatrix(_metric_batch(circuit, theta[None, :], gauge)[0], kind="metric")


def sqrt_det_g(circuit: ParametricCircuit, thetas, gauge: str = "hilbert") -> np.ndarray:
    g = _metric_batch(circuit, np.atleast_2d(thetas), gauge)
    return np.sqrt(np.maximum(0.0, np.linalg.det(g)))


@dataclass(frozen=True)
class TensorTrapezoid:
    points_per_dim: int

    def describe(self) -> str:
        return f"trap:{self.points_per_dim}"


@dataclass(frozen=True)
class QmcRule:
    n: int
    seed: int = 0

    def describe(self) -> str:
        return f"qmc:{self.n}:{self.seed}"


def parse_quadrature(text: str):
    parts = text.split(":")
    if parts[0] == "trap" and len(parts) == 2:
        return TensorTrapezoid(int(parts[1]))
    if parts[0] == "qmc" and len(parts) in (2, 3):
        return QmcRule(int(parts[1]), int(parts[2]) if len(parts) == 3 else 0)
    raise ValueError(f"bad quadrature spec {text!r}; use trap:K or qmc:N[:seed]")


@dataclass(frozen=True)
class VolumeReport:
    volume: float
    quadrature: str
    dim_M: int
    alpha_lower_bound: float
    gauge: str

    def as_dict(self) -> dict:
        return dict(volume=self.volume, quadrature=self.quadrature, dim_M=self.dim_M,
                    alpha_lower_bound=self.alpha_lower_bound, gauge=self.gauge)


def _nodes(circuit, quad):
    periods = np.array(circuit.param_periods)
    P = len(periods)
    if isinstance(quad, TensorTrapezoid):
        K = quad.points_per_dim
        if K < 2:
            raise ValueError("need at least 2 points per dimension")
        axes = [np.arange(K) * (p / K) for p in periods]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, P)
        return grid, np.prod(periods) / K ** P
    if isinstance(quad, QmcRule):
        u = sobol_unit(quad.n, P, quad.seed)
        return u * periods, np.prod(periods) / quad.n
    raise TypeError("unknown quadrature rule")


def volume(circuit: ParametricCircuit, quad=None, gauge: str = "hilbert",
           batch: int = 4096) -> VolumeReport:
    """``int sqrt(det g)`` over the periodic parameter box.

    Defaults to a tensor trapezoid rule (spectrally accurate for smooth
    periodic integrands) and to Sobol' quasi-Monte Carlo above three slots.
    """
    if quad is None:
        quad = TensorTrapezoid(64) if circuit.num_params <= 3 else QmcRule(2 ** 14)
    nodes, w = _nodes(circuit, quad)
    vals = np.concatenate([sqrt_det_g(circuit, nodes[i:i + batch], gauge)
                           for i in range(0, len(nodes), batch)])
    vol = float(w * np.sum(np.sort(vals)))
    probe = nodes[int(np.argmax(vals))] if vals.size else nodes[0]
    dim_M = int(np.linalg.matrix_rank(metric(circuit, probe, gauge).entries, tol=1e-10))
    bound = alpha_lower_bound_from_volume(vol, dim_M) if vol > 0 and dim_M > 0 else pi
    return VolumeReport(vol, quad.describe(), dim_M, bound, gauge)


# scaling laws --------------------------------------------------------------------

def sphere_area(D: int) -> float:
    """Surface measure of S^{D-1}."""
    return 2 * pi ** (D / 2) / gamma(D / 2)


def alpha_opt(N: int, D: int) -> float:
    """Covering radius of ``N`` ideally spread points on S^{D-1} (cube-cell model)."""
    if N < 1 or D < 2:
        raise ValueError("need N >= 1 and D >= 2")
    return (sphere_area(D) / N) ** (1 / (D - 1)) * sqrt(D) / 2


def elliptic_E(m: float) -> float:
    """Complete elliptic integral of the second kind, parameter convention."""
    if m > 1:
        raise ValueError("E(m) needs m <= 1")
    return float(ellipe(m))


def greedy_band_count(alpha: float) -> int:
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return max(1, round(pi / (2 * alpha)))


def greedy_path_bounds(alpha: float, dim_M: int) -> tuple[float, float]:
    """Volumes swept by a band path (``V1``) and a spiral path (``V2``) of covering radius ``alpha``.

    ``V1`` uses the nearest band count ``n`` with ``2 alpha ~ pi / n``
    (see :func:`greedy_band_count`).
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if dim_M < 1:
        raise ValueError("dim_M must be >= 1")
    n = greedy_band_count(alpha)
    ell1 = pi / n + 2 * pi / np.tan(pi / (2 * n))
    area = sphere_area(dim_M)
    V1 = ell1 * area
    V2 = pi * area * sqrt(1 + pi ** 2 / alpha ** 2)
    return float(V1), float(V2)


def alpha_lower_bound_from_volume(vol_M: float, dim_M: int) -> float:
    """Heuristic covering-radius floor ``4 pi^{d/2+1} / (Gamma(d/2) vol)``, capped at pi."""
    if vol_M <= 0:
        raise ValueError("volume must be positive")
    return min(pi, 4 * pi ** (dim_M / 2 + 1) / (gamma(dim_M / 2) * vol_M))


# spiral family ------------------------------------------------------------------

def spiral_circuit(n: int) -> ParametricCircuit:
    """``R_Z(2 n theta) R_Y(theta)|0>``: a curve winding ``n`` times from pole to pole.

    The Bloch vector is ``(sin t cos 2nt, sin t sin 2nt, cos t)``.  The slot
    period is ``2 pi`` (for volumes) while samples are drawn from ``[0, pi]``,
    the part of the period that traces the curve once.
    """
    if n < 0 or int(n) != n:
        raise ValueError("n must be a non-negative integer")
    gates = [ry(1, 0, 0)]
    if n:
        gates.append(rz(1, 0, 0, mult=2.0 * n))
    return ParametricCircuit(1, gates, 1, param_periods=(2 * pi,), sample_ranges=((0.0, pi),),
                             name=f"spiral-{n}")


def spiral_det_g(n: int, theta) -> np.ndarray:
    return 1 + 4 * n ** 2 * np.sin(np.mod(theta, pi)) ** 2


def spiral_volume(n: int) -> float:
    return 4 * elliptic_E(-4.0 * n ** 2)
