import math

import pytest

from fbarcirc.bvd import ResonatorSpecs
from fbarcirc.netlist import (Capacitor, CirculatorDesign, ModulatedSeriesRlc,
                              ModulationSpec, Netlist, Port, Topology, bvd_from_specs)

GHZ_SPECS = ResonatorSpecs(f_s=2.65e9, q=700.0, k_sq=0.09, c0=1.0e-12)
DESK_SPECS = ResonatorSpecs(f_s=2.65e6, q=100.0, k_sq=0.09, c0=1.0e-9)
F_MOD_GHZ = 23.2e6
F_MOD_DESK = 23.2e3


@pytest.fixture
def ghz_specs():
    return GHZ_SPECS


@pytest.fixture
def desk_specs():
    return DESK_SPECS


@pytest.fixture
def differential_design():
    return CirculatorDesign(Topology.DIFFERENTIAL, GHZ_SPECS, delta=0.01, f_mod=F_MOD_GHZ)


@pytest.fixture
def single_ended_design():
    return CirculatorDesign(Topology.SINGLE_ENDED, GHZ_SPECS, delta=0.01, f_mod=F_MOD_GHZ)


def one_port_net(specs: ResonatorSpecs, delta: float, f_mod: float,
                 phase: float = 0.0, z0: float = 50.0) -> Netlist:
    """Single resonator to ground behind one port: c0 in parallel with the branch."""
    branch = bvd_from_specs(specs).branches[0]
    net = Netlist((
        ModulatedSeriesRlc("x1", "p1", "0", branch, ModulationSpec(delta, f_mod, phase)),
        Capacitor("c1", "p1", "0", specs.c0),
        Port(1, "p1", z0),
    ))
    net.validate()
    return net


def toy_wye_net(specs: ResonatorSpecs, delta: float, f_mod: float,
                phases=(0.0, math.pi / 2.0), z0: float = 50.0) -> Netlist:
    """Two modulated resonators joined at a floating common node, two ports."""
    branch = bvd_from_specs(specs).branches[0]
    net = Netlist((
        ModulatedSeriesRlc("x1", "p1", "cm", branch, ModulationSpec(delta, f_mod, phases[0])),
        ModulatedSeriesRlc("x2", "p2", "cm", branch, ModulationSpec(delta, f_mod, phases[1])),
        Capacitor("c1", "p1", "0", specs.c0),
        Capacitor("c2", "p2", "0", specs.c0),
        Port(1, "p1", z0),
        Port(2, "p2", z0),
    ))
    net.validate()
    return net
