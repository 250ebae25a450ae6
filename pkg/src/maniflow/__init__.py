"""Spin lattices, decoder-manifold flows, control, and planning toys."""

from . import control, experiments, infophase, manifold, planner, spins, workspace

__version__ = "0.1.0"

__all__ = [
    "control",
    "experiments",
    "infophase",
    "manifold",
    "planner",
    "spins",
    "workspace",
    "__version__",
]
