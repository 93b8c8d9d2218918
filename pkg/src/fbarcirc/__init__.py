"""Simulator and design toolkit for mechanically modulated FBAR circulators."""

from .bvd import (BvdParams, LorentzianFit, MotionalBranch, ResonatorSpecs,
                  admittance, bvd_from_specs, fit_lorentzian, parallel_resonance,
                  specs_from_bvd)
from .htm import HarmonicBasis, SParamGrid, assemble, convergence_check, solve, sparams
from .metrics import (CirculatorMetrics, Direction, bandwidth_at, metrics_at,
                      sideband_scan, summarize)
from .netlist import (CirculatorDesign, ModulationSpec, Netlist, PhaseSequence,
                      Topology, build_circulator, build_differential,
                      build_single_ended, elastance_fourier, read_netlist,
                      scale_frequency, write_netlist)
from .transient import PhasorSet, TransientResult, cross_validate, extract_phasors, simulate
from .tuner import TuneProblem, TuneResult, objective, tune

__version__ = "0.1.0"

__all__ = [
    "BvdParams", "LorentzianFit", "MotionalBranch", "ResonatorSpecs",
    "admittance", "bvd_from_specs", "fit_lorentzian", "parallel_resonance",
    "specs_from_bvd",
    "HarmonicBasis", "SParamGrid", "assemble", "convergence_check", "solve", "sparams",
    "CirculatorMetrics", "Direction", "bandwidth_at", "metrics_at",
    "sideband_scan", "summarize",
    "CirculatorDesign", "ModulationSpec", "Netlist", "PhaseSequence", "Topology",
    "build_circulator", "build_differential", "build_single_ended",
    "elastance_fourier", "read_netlist", "scale_frequency", "write_netlist",
    "PhasorSet", "TransientResult", "cross_validate", "extract_phasors", "simulate",
    "TuneProblem", "TuneResult", "objective", "tune",
    "__version__",
]
