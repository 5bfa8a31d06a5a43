"""Expressivity and best-approximation analysis of parametric quantum circuits."""

__version__ = "0.1.0"

from .circuit import (  # noqa: E402
    CircuitError,
    Gate,
    Generator,
    ParametricCircuit,
    bloch_circuit,
    derivative_state,
    evaluate,
    great_circle_circuit,
    load_circuit,
    real_inner,
    save_circuit,
    tangents,
)

__all__ = [
    "CircuitError", "Gate", "Generator", "ParametricCircuit", "bloch_circuit", "derivative_state",
    "evaluate", "great_circle_circuit", "load_circuit", "real_inner", "save_circuit", "tangents",
]
