"""Finite element gradient flows for harmonic maps into the unit sphere."""

from ._core import (
    ConfigError,
    Mesh,
    MeshError,
    constraint_violation,
    dirichlet_energy,
    eoc,
    initial_value,
    load_mesh,
    parse_mesh,
    problem_names,
    reference_energy_stereographic,
    run_experiment,
    run_flow,
    structured_mesh,
)

__all__ = [
    "ConfigError",
    "Mesh",
    "MeshError",
    "constraint_violation",
    "dirichlet_energy",
    "eoc",
    "initial_value",
    "load_mesh",
    "parse_mesh",
    "problem_names",
    "reference_energy_stereographic",
    "run_experiment",
    "run_flow",
    "structured_mesh",
]
