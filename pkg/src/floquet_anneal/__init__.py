"""Quantum annealing of honeycomb lattices under circularly polarized driving.

Desk-scale simulator for adiabatically ramped Floquet Chern insulators:
zig-zag strips and rectangular flakes, Peierls-coupled drives, Runge-Kutta
Slater-determinant evolution, Floquet spectra and occupations, edge currents,
residual-energy scaling, and the local Chern marker.
"""

from .config import (ExperimentConfig, config_hash, load_config, parse_config,
                     preset, save_config, validate_config)
from .drive import (DriveParams, HaldaneSchedule, Schedule, critical_lambda,
                    effective_haldane_params)
from .evolution import (EvolutionMonitor, NumericalAbort, ground_state,
                        one_period_propagator, rk4_evolve, strip_ground_state)
from .experiments import RunManifest, load_manifest, resume_run, run_experiment
from .floquet import (floquet_gap, floquet_spectrum, floquet_spectrum_batch,
                      fold_energy, occupations)
from .hamiltonian import (FlakeAssembler, StripAssembler,
                          driven_flake_assembler, driven_strip_assembler,
                          haldane_flake_assembler, haldane_strip_assembler)
from .lattice import LatticeParams, build_flake, build_ribbon

__version__ = "0.1.0"

__all__ = [
    "DriveParams", "EvolutionMonitor", "ExperimentConfig", "FlakeAssembler",
    "HaldaneSchedule", "LatticeParams", "NumericalAbort", "RunManifest",
    "Schedule", "StripAssembler", "build_flake", "build_ribbon",
    "config_hash", "critical_lambda", "driven_flake_assembler",
    "driven_strip_assembler", "effective_haldane_params", "floquet_gap",
    "floquet_spectrum", "floquet_spectrum_batch", "fold_energy",
    "ground_state", "haldane_flake_assembler", "haldane_strip_assembler",
    "load_config", "load_manifest", "occupations", "one_period_propagator",
    "parse_config", "preset", "resume_run", "rk4_evolve", "run_experiment",
    "save_config", "strip_ground_state", "validate_config",
]
