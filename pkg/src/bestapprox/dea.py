"""Dimensional expressivity analysis: Jacobian Gram matrices and redundancy scans."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import CircuitError, Gate, ParametricCircuit, tangents
from .interference import DerivativePair, InterferenceJob, estimate_real_inner


@dataclass(frozen=True)
class ExactMode:
    pass


@dataclass(frozen=True)
class ShotMode:
    shots: int
    seed: int = 0


@dataclass(eq=False)
class GramMatrix:
    entries: np.ndarray
    kind: str = "jacobian"
    std_error: np.ndarray | None = None

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        if self.entries.ndim != 2 or self.entries.shape[0] != self.entries.shape[1]:
            raise ValueError("Gram matrix must be square")

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def smallest_eigenvalue(self) -> float:
        if self.size == 0:
            return np.inf
        return float(np.linalg.eigvalsh(self.entries)[0])


@dataclass
class DeaReport:
    independent_slots: list[int]
    redundant_slots: dict[int, float]
    probe_theta: list[float]
    tolerance: float
    mode: str
    smallest_eigenvalues: list[float] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "independent_slots": self.independent_slots,
            "redundant_slots": {str(k): v for k, v in self.redundant_slots.items()},
            "probe_theta": self.probe_theta,
            "tolerance": self.tolerance,
            "mode": self.mode,
            "smallest_eigenvalues": self.smallest_eigenvalues,
        }


def _entry_exact(tan, a, b):
    return float(np.real(np.vdot(tan[a], tan[b])))


def _entry_shots(circuit, theta, a, b, mode):
    # seed mixed with the slot pair so entries are independent but reproducible
    job = InterferenceJob(circuit, theta, DerivativePair(a, b), mode.shots,
                          [mode.seed, min(a, b), max(a, b)])
    est, se = estimate_real_inner(job)
    return 0.25 * est, 0.25 * se


def jacobian_gram(circuit: ParametricCircuit, theta, slots=None, mode=ExactMode()) -> GramMatrix:
    """``S[a, b] = Re<d_a C, d_b C> = 1/4 Re<gamma_a, gamma_b>`` over ``slots``."""
    theta = np.asarray(theta, dtype=float)
    slots = list(range(circuit.num_params)) if slots is None else list(slots)
    if len(set(slots)) != len(slots):
        raise CircuitError("slots must be distinct")
    k = len(slots)
    S = np.zeros((k, k))
    if isinstance(mode, ExactMode):
        tan = tangents(circuit, theta)
        for i, a in enumerate(slots):
            for j in range(i, k):
                S[i, j] = S[j, i] = _entry_exact(tan, a, slots[j])
        return GramMatrix(S)
    err = np.zeros((k, k))
    for i, a in enumerate(slots):
        for j in range(i, k):
            S[i, j], err[i, j] = _entry_shots(circuit, theta, a, slots[j], mode)
            S[j, i], err[j, i] = S[i, j], err[i, j]
    return GramMatrix(S, std_error=err)


def is_independent(S: GramMatrix | np.ndarray, tol: float) -> bool:
    """True iff the smallest singular value of ``S`` exceeds ``tol``."""
    M = S.entries if isinstance(S, GramMatrix) else np.asarray(S, dtype=float)
    if M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if M.size == 0:
        return True
    return bool(np.linalg.svd(M, compute_uv=False)[-1] > tol)


def default_tolerance(mode, k: int, std_error: float | None = None) -> float:
    if isinstance(mode, ExactMode):
        return 1e-8
    se = 0.25 / np.sqrt(mode.shots) if std_error is None else std_error
    # p-hat of 0 or 1 reports a zero error; never go below one-count resolution
    return 5 * max(se, 0.25 / mode.shots) * k


def scan(circuit: ParametricCircuit, probe_theta=None, tol=None, mode=ExactMode(),
         seed: int = 0) -> DeaReport:
    """Inductive redundancy scan at one probe point.

    Slots are visited in order; a slot is kept iff the Gram matrix of the kept
    slots plus the candidate passes :func:`is_independent`.  Each candidate only
    adds one measured row/column; previously measured entries are reused.
    """
    N = circuit.num_params
    if N < 1:
        raise CircuitError("circuit has no parameters")
    if probe_theta is None:
        rng = np.random.default_rng(seed)
        probe_theta = np.array([rng.uniform(0, p) for p in circuit.param_periods])
    theta = np.asarray(probe_theta, dtype=float)
    if theta.shape != (N,):
        raise CircuitError("probe theta has wrong length")

    exact = isinstance(mode, ExactMode)
    tan = tangents(circuit, theta) if exact else None
    cache: dict[tuple[int, int], tuple[float, float]] = {}

    def entry(a, b):
        key = (min(a, b), max(a, b))
        if key not in cache:
            cache[key] = (_entry_exact(tan, a, b), 0.0) if exact else _entry_shots(
                circuit, theta, a, b, mode)
        return cache[key]

    kept: list[int] = []
    redundant: dict[int, float] = {}
    eigs = []
    S = np.zeros((0, 0))
    for cand in range(N):
        k = len(kept) + 1
        row = np.array([entry(cand, a)[0] for a in kept] + [entry(cand, cand)[0]])
        trial = np.zeros((k, k))
        trial[:-1, :-1] = S
        trial[-1, :] = trial[:, -1] = row
        if tol is None:
            errs = [entry(a, b)[1] for a in kept + [cand] for b in kept + [cand]]
            t = default_tolerance(mode, k, max(errs) if not exact else None)
        else:
            t = tol
        eigs.append(float(np.linalg.eigvalsh(trial)[0]))
        if is_independent(trial, t):
            kept.append(cand)
            S = trial
        else:
            redundant[cand] = float(theta[cand])
    used_tol = tol if tol is not None else default_tolerance(mode, max(len(kept), 1))
    mode_s = "exact" if exact else f"shots:{mode.shots}:{mode.seed}"
    return DeaReport(kept, redundant, theta.tolist(), float(used_tol), mode_s, eigs)


def minimality_certificate(circuit: ParametricCircuit, probe_thetas) -> tuple[float, list[float]]:
    """Worst smallest eigenvalue of the full Jacobian Gram matrix over the probes."""
    probes = list(probe_thetas)
    if not probes:
        raise ValueError("need at least one probe")
    vals = [jacobian_gram(circuit, p).smallest_eigenvalue() for p in probes]
    return min(vals), vals


def restrict(circuit: ParametricCircuit, report: DeaReport) -> ParametricCircuit:
    """Circuit with redundant slots frozen at their probe values and the rest relabelled."""
    relabel = {s: i for i, s in enumerate(report.independent_slots)}
    gates = []
    for g in circuit.gates:
        if g.kind == "rot" and g.slot in report.redundant_slots:
            gates.append(Gate("rot", g.generator, angle=g.mult * report.redundant_slots[g.slot]))
        elif g.kind == "rot" and g.slot is not None:
            gates.append(Gate("rot", g.generator, slot=relabel[g.slot], mult=g.mult))
        else:
            gates.append(g)
    keep = report.independent_slots
    return ParametricCircuit(
        circuit.num_qubits,
        gates,
        len(keep),
        param_periods=tuple(circuit.param_periods[s] for s in keep),
        sample_ranges=tuple(circuit.sample_ranges[s] for s in keep),
        initial_state=circuit.initial_state,
        name=circuit.name,
    )
