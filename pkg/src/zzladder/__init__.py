"""Numerical laboratory for the frustrated spin-S zig-zag Heisenberg ladder."""

from .model import (
    CouplingPattern,
    LadderSpec,
    SpinValue,
    StateVector,
    build_spec,
    uniform_spec,
    dimer_state,
    singlet_state,
)

__all__ = [
    "CouplingPattern",
    "LadderSpec",
    "SpinValue",
    "StateVector",
    "build_spec",
    "uniform_spec",
    "dimer_state",
    "singlet_state",
]

__version__ = "0.1.0"
