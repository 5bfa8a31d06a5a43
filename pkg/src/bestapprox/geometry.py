"""Parameter sampling, state embeddings on real spheres and the rank gate."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from math import gamma, pi

import numpy as np
from scipy.stats import qmc

from .circuit import ParametricCircuit, evaluate

SOBOL_BITS = 30
MAX_SOBOL_DIM = 21201  # size of the Joe-Kuo direction-number table shipped with scipy


@dataclass(eq=False)
class SampleSet:
    thetas: np.ndarray
    source: str = "explicit"
    circuit_ref: str = ""

    def __post_init__(self):
        self.thetas = np.atleast_2d(np.asarray(self.thetas, dtype=float))

    def __len__(self):
        return self.thetas.shape[0]

    def check_ranges(self, ranges) -> None:
        lo = np.array([r[0] for r in ranges])
        hi = np.array([r[1] for r in ranges])
        if np.any(self.thetas < lo) or np.any(self.thetas > hi):
            raise ValueError("sample outside the declared parameter ranges")


@dataclass(eq=False)
class EmbeddedSet:
    points: np.ndarray
    basis_rank: int
    embedding: str
    required_D: int | None = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))

    @property
    def D(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]


# Sobol' points -------------------------------------------------------------------

_M64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def _splitmix(z: np.ndarray) -> np.ndarray:
    z = z + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def owen_scramble(y: np.ndarray, seed: int, dim: int, bits: int = SOBOL_BITS) -> np.ndarray:
    """Nested uniform scrambling of ``bits``-bit integers (one coordinate).

    Bit ``j`` (counted from the most significant) is flipped by a hash of the
    seed, the coordinate and the ``j`` leading input bits, so every node of the
    binary tree gets its own random flip.
    """
    y = np.asarray(y, dtype=np.uint64)
    with np.errstate(over="ignore"):
        base = _splitmix(_splitmix(np.uint64(seed) & _M64) ^ np.uint64(dim))
        out = np.zeros_like(y)
        for j in range(bits):
            shift = np.uint64(bits - j)
            node = (y >> shift) | (np.uint64(1) << np.uint64(j))  # prefix with depth marker
            flip = _splitmix(base ^ _splitmix(node)) >> np.uint64(63)
            bit = (y >> (shift - np.uint64(1))) & np.uint64(1)
            out |= (bit ^ flip) << (shift - np.uint64(1))
    return out


def sobol_unit(n_points: int, dim: int, seed: int | None = 0) -> np.ndarray:
    """First ``n_points`` Sobol' points in ``[0, 1)^dim``; ``seed=None`` leaves them unscrambled."""
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    if not 1 <= dim <= MAX_SOBOL_DIM:
        raise ValueError(f"Sobol' dimension must be in [1, {MAX_SOBOL_DIM}]")
    eng = qmc.Sobol(dim, scramble=False, bits=SOBOL_BITS)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # balance warning for n != 2^m
        raw = eng.random(n_points)
    scale = float(1 << SOBOL_BITS)
    if seed is None:
        return raw
    ints = np.rint(raw * scale).astype(np.uint64)
    cols = [owen_scramble(ints[:, d], seed, d) for d in range(dim)]
    return (np.stack(cols, axis=1).astype(float) + 0.5) / scale


def sobol_torus(n_points: int, slot_ranges, seed: int | None = 0, circuit_ref: str = "") -> SampleSet:
    ranges = np.asarray(slot_ranges, dtype=float)
    if ranges.ndim != 2 or ranges.shape[1] != 2 or not np.all(np.isfinite(ranges)):
        raise ValueError("slot ranges must be finite (lo, hi) pairs")
    u = sobol_unit(n_points, ranges.shape[0], seed)
    thetas = ranges[:, 0] + u * (ranges[:, 1] - ranges[:, 0])
    src = "sobol(unscrambled)" if seed is None else f"sobol(seed={seed},owen)"
    return SampleSet(thetas, src, circuit_ref)


def sample_circuit(circuit: ParametricCircuit, n_points: int, seed: int | None = 0) -> SampleSet:
    return sobol_torus(n_points, circuit.sample_ranges, seed, circuit.name)


# embeddings ----------------------------------------------------------------------

def real_embed(state) -> np.ndarray:
    s = np.asarray(state)
    return np.concatenate([s.real, s.imag], axis=-1)


def bloch_project(state) -> np.ndarray:
    """``(<X>, <Y>, <Z>)`` of one or many single-qubit states."""
    s = np.asarray(state)
    if s.shape[-1] != 2:
        raise ValueError("Bloch projection needs single-qubit states")
    a, b = s[..., 0], s[..., 1]
    ab = np.conj(a) * b
    return np.stack([2 * ab.real, 2 * ab.imag, abs(a) ** 2 - abs(b) ** 2], axis=-1)


def orthodromic(x, y, atol: float = 1e-8):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    for v in (x, y):
        if np.any(np.abs(np.linalg.norm(v, axis=-1) - 1) > atol):
            raise ValueError("orthodromic distance needs unit vectors")
    return np.arccos(np.clip(np.sum(x * y, axis=-1), -1.0, 1.0))


def gram_schmidt_embed(inner_oracle, k: int, tol: float = 1e-7) -> EmbeddedSet:
    """Coordinates of ``k`` unit vectors from their pairwise real inner products only.

    Each new vector is expanded in the basis built so far; when the leftover
    squared norm ``1 - sum v^2`` exceeds ``tol`` it becomes a new basis vector.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    basis: list[int] = []
    rows: list[np.ndarray] = []
    lead: list[float] = []
    for i in range(k):
        v = np.zeros(len(basis) + 1)
        for j, b in enumerate(basis):
            ip = float(inner_oracle(i, b))
            if abs(ip) > 1 + tol:
                raise ValueError(f"inner product {ip} outside [-1, 1]")
            v[j] = (ip - rows[b][:j] @ v[:j]) / lead[j]
        res = 1.0 - v[:-1] @ v[:-1]
        if res < -tol:
            raise ValueError(f"negative residual {res}; oracle is not a Gram matrix")
        if res > tol:
            v[-1] = np.sqrt(res)
            basis.append(i)
            lead.append(v[-1])
        rows.append(v)
    r = len(basis)
    pts = np.zeros((k, r))
    for i, v in enumerate(rows):
        m = min(len(v), r)
        pts[i, :m] = v[:m]
    norms = np.linalg.norm(pts, axis=1)
    pts /= np.where(norms > 0, norms, 1.0)[:, None]
    return EmbeddedSet(pts, r, "gram_schmidt")


def _dot_oracle(vectors: np.ndarray):
    return lambda i, j: float(vectors[i] @ vectors[j])


def embed_states(states: np.ndarray, embedding: str = "auto", tol: float = 1e-7) -> EmbeddedSet:
    """Embed statevectors on a real unit sphere.

    ``bloch`` (single qubit only) maps to S^2 and quotients the global phase.
    ``real`` stacks real and imaginary parts, then reduces the points to their
    span with :func:`gram_schmidt_embed`.  ``auto`` picks ``bloch`` for one
    qubit and ``real`` otherwise.
    """
    states = np.atleast_2d(states)
    dim = states.shape[1]
    Q = int(round(np.log2(dim)))
    if embedding == "auto":
        embedding = "bloch" if Q == 1 else "real"
    if embedding == "bloch":
        pts = bloch_project(states)
        r = gram_schmidt_embed(_dot_oracle(pts), len(pts), tol).basis_rank
        return EmbeddedSet(pts, r, "bloch", required_D=3)
    if embedding == "real":
        gs = gram_schmidt_embed(_dot_oracle(real_embed(states)), len(states), tol)
        return EmbeddedSet(gs.points, gs.basis_rank, "real_doubling+gram_schmidt", 2 * dim)
    raise ValueError(f"unknown embedding {embedding!r}")


def embed_samples(circuit: ParametricCircuit, samples: SampleSet, embedding="auto",
                  tol: float = 1e-7) -> EmbeddedSet:
    return embed_states(evaluate(circuit, samples.thetas), embedding, tol)


@dataclass(frozen=True)
class GateResult:
    passed: bool
    basis_rank: int
    required_D: int
    alpha_lower_bound: float | None = None


def rank_gate(embedded: EmbeddedSet, required_D: int | None = None) -> GateResult:
    """Samples confined to a proper linear subspace leave a state at distance pi/2."""
    req = embedded.required_D if required_D is None else required_D
    if req is None or req < 1:
        raise ValueError("required_D must be >= 1")
    if embedded.basis_rank == req:
        return GateResult(True, embedded.basis_rank, req)
    return GateResult(False, embedded.basis_rank, req, pi / 2)


# quasi-uniform reference points --------------------------------------------------

def band_spacing(n_target: int, D: int) -> float:
    area = 2 * pi ** (D / 2) / gamma(D / 2)
    return (area / n_target) ** (1 / (D - 1))


def latitude_band_points(n_target: int, D: int) -> np.ndarray:
    """Roughly ``n_target`` evenly spread points on S^{D-1}, D in {2, 3}."""
    if D not in (2, 3):
        raise ValueError("latitude bands are implemented for D = 2 and D = 3 only")
    if n_target < 2:
        raise ValueError("n_target must be >= 2")
    if D == 2:
        t = 2 * pi * np.arange(n_target) / n_target
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    k = max(1, round(pi / band_spacing(n_target, 3)))
    d1 = pi / k
    pts = []
    for j in range(k + 1):
        phi = j * d1
        m = max(1, round(2 * pi * np.sin(phi) / d1))
        t = 2 * pi * (np.arange(m) + 0.5 * (j % 2)) / m
        s = np.sin(phi)
        pts += [(s * np.cos(a), s * np.sin(a), np.cos(phi)) for a in t]
    return np.array(pts)


# CSV -----------------------------------------------------------------------------

def save_samples_csv(samples: SampleSet, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"theta{i}" for i in range(samples.thetas.shape[1])])
        for row in samples.thetas:
            w.writerow([f"{v:.12g}" for v in row])


def load_samples_csv(path) -> SampleSet:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return SampleSet(np.array(rows[1:], dtype=float), "explicit")


def save_embedded_csv(emb: EmbeddedSet, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["D", emb.D, "r", emb.basis_rank, "embedding", emb.embedding])
        for row in emb.points:
            w.writerow([f"{v:.12g}" for v in row])
