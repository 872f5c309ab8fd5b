"""Collatz total stopping times: exact tables, NB2 regression, odd-block generators."""

from ._accel import backend
from .core import (
    NonConvergence,
    OddBlockTrace,
    TauTable,
    Trajectory,
    build_tau_table,
    collect_block_lengths,
    load_tau_table,
    odd_block_trace,
    save_tau_table,
    tau_direct,
    trajectory,
    v2,
)

__version__ = "0.1.0"

__all__ = [
    "NonConvergence",
    "OddBlockTrace",
    "TauTable",
    "Trajectory",
    "backend",
    "build_tau_table",
    "collect_block_lengths",
    "load_tau_table",
    "odd_block_trace",
    "save_tau_table",
    "tau_direct",
    "trajectory",
    "v2",
]
