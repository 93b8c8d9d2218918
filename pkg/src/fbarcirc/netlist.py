"""Circuit netlists for periodically modulated resonator networks.

Elements are two-terminal R/L/C devices, series R-L-C branches whose
elastance (1/C) may be sinusoidally modulated, and port terminations.
Builders generate the single-ended (one chip, three resonators in wye) and
differential (two anti-phase chips in parallel) circulator topologies.

Text format, one element per line (``*`` starts a comment):

    R name nodeA nodeB ohms
    L name nodeA nodeB henries
    C name nodeA nodeB farads
    X name nodeA nodeB r l c [delta f_mod phase]
    P index node z0

Ports are referenced to ground.  Writing a parsed netlist reproduces the
file byte for byte.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from .bvd import MotionalBranch, ResonatorSpecs, bvd_from_specs

GROUND = "0"


class NetlistError(ValueError):
    """Structurally invalid netlist or malformed netlist text."""


class Topology(enum.Enum):
    SINGLE_ENDED = "single_ended"
    DIFFERENTIAL = "differential"


class PhaseSequence(enum.Enum):
    FORWARD = "forward"
    REVERSE = "reverse"


@dataclass(frozen=True)
class ModulationSpec:
    """Sinusoidal elastance modulation: 1/C(t) = (1/c_m)*(1 + depth*cos(2*pi*f_mod*t + phase))."""

    depth: float
    f_mod: float
    phase: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.depth) and 0.0 <= self.depth < 1.0):
            raise NetlistError(f"modulation depth must lie in [0, 1), got {self.depth}")
        if not (math.isfinite(self.f_mod) and self.f_mod > 0.0):
            raise NetlistError(f"modulation frequency must be positive, got {self.f_mod}")


@dataclass(frozen=True)
class Resistor:
    name: str
    node_a: str
    node_b: str
    ohms: float


@dataclass(frozen=True)
class Inductor:
    name: str
    node_a: str
    node_b: str
    henries: float


@dataclass(frozen=True)
class Capacitor:
    name: str
    node_a: str
    node_b: str
    farads: float


@dataclass(frozen=True)
class ModulatedSeriesRlc:
    """Series r-l-c branch between two nodes; elastance optionally modulated."""

    name: str
    node_a: str
    node_b: str
    branch: MotionalBranch
    modulation: ModulationSpec | None = None


@dataclass(frozen=True)
class Port:
    """Port termination: reference impedance z0 from ``node`` to ground."""

    index: int
    node: str
    z0: float


Element = Union[Resistor, Inductor, Capacitor, ModulatedSeriesRlc, Port]


@dataclass(frozen=True)
class CirculatorDesign:
    """Parameters of one circulator build: topology, resonator, drive and ports."""

    topology: Topology
    resonator: ResonatorSpecs
    delta: float
    f_mod: float
    z0: float = 50.0
    phase_sequence: PhaseSequence = PhaseSequence.FORWARD
    c0_to_ground: bool = True

    def __post_init__(self) -> None:
        if not (math.isfinite(self.z0) and self.z0 > 0.0):
            raise NetlistError(f"port impedance must be positive, got {self.z0}")


@dataclass(frozen=True)
class Netlist:
    """Ordered element list over named nodes with a distinguished ground."""

    elements: tuple[Element, ...]
    ground: str = GROUND

    def __post_init__(self) -> None:
        object.__setattr__(self, "elements", tuple(self.elements))

    @property
    def nodes(self) -> set[str]:
        out = {self.ground}
        for el in self.elements:
            if isinstance(el, Port):
                out.add(el.node)
            else:
                out.add(el.node_a)
                out.add(el.node_b)
        return out

    @property
    def ports(self) -> tuple[Port, ...]:
        return tuple(sorted((el for el in self.elements if isinstance(el, Port)),
                            key=lambda p: p.index))

    @property
    def modulated(self) -> tuple[ModulatedSeriesRlc, ...]:
        return tuple(el for el in self.elements if isinstance(el, ModulatedSeriesRlc))

    @property
    def f_mod(self) -> float | None:
        """Common modulation frequency, or None for a static netlist."""
        for el in self.modulated:
            if el.modulation is not None:
                return el.modulation.f_mod
        return None

    def validate(self) -> None:
        """Raise :class:`NetlistError` on any structural invariant violation."""
        names = [el.name for el in self.elements if not isinstance(el, Port)]
        if len(names) != len(set(names)):
            raise NetlistError("element names must be unique")
        indices = sorted(p.index for p in self.ports)
        if indices != list(range(1, len(indices) + 1)):
            raise NetlistError(f"port indices must be contiguous from 1, got {indices}")
        for p in self.ports:
            if not (math.isfinite(p.z0) and p.z0 > 0.0):
                raise NetlistError(f"port {p.index}: z0 must be positive")
        f_mods = {el.modulation.f_mod for el in self.modulated if el.modulation is not None}
        if len(f_mods) > 1:
            raise NetlistError(f"modulated branches must share one f_mod, got {sorted(f_mods)}")
        floating = floating_nodes(self)
        if floating:
            raise NetlistError(f"nodes not reachable from ground: {sorted(floating)}")


def floating_nodes(net: Netlist) -> set[str]:
    """Nodes with no element path to ground."""
    adj: dict[str, set[str]] = {n: set() for n in net.nodes}
    for el in net.elements:
        if isinstance(el, Port):
            a, b = el.node, net.ground
        else:
            a, b = el.node_a, el.node_b
        adj[a].add(b)
        adj[b].add(a)
    seen = {net.ground}
    stack = [net.ground]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return net.nodes - seen


def _wye_chip(design: CirculatorDesign, suffix: str, common: str,
              phase_offset: float) -> list[Element]:
    """Three modulated resonators from the port nodes to one common node."""
    branch = bvd_from_specs(design.resonator).branches[0]
    sign = 1.0 if design.phase_sequence is PhaseSequence.FORWARD else -1.0
    c0 = design.resonator.c0
    out: list[Element] = []
    for k in range(3):
        port_node = f"p{k + 1}"
        phase = phase_offset + sign * k * 2.0 * math.pi / 3.0
        mod = ModulationSpec(depth=design.delta, f_mod=design.f_mod, phase=phase)
        out.append(ModulatedSeriesRlc(f"x{suffix}{k + 1}", port_node, common, branch, mod))
        cap_node = GROUND if design.c0_to_ground else common
        out.append(Capacitor(f"c{suffix}{k + 1}", port_node, cap_node, c0))
    return out


def _port_elements(z0: float) -> list[Element]:
    return [Port(k + 1, f"p{k + 1}", z0) for k in range(3)]


def build_single_ended(design: CirculatorDesign) -> Netlist:
    """One chip: three modulated resonators in wye on a floating common node.

    Resonator k (k = 0, 1, 2) runs from port node k+1 to the common node with
    modulation phase s*k*2*pi/3 (s = +1 forward, -1 reverse); each plate
    capacitance shunts its port node.
    """
    if design.topology is not Topology.SINGLE_ENDED:
        raise NetlistError(f"expected single-ended design, got {design.topology}")
    elements = _wye_chip(design, "a", "ca", 0.0) + _port_elements(design.z0)
    net = Netlist(tuple(elements))
    net.validate()
    return net


def build_differential(design: CirculatorDesign) -> Netlist:
    """Two chips in parallel on shared port nodes, chip B driven in anti-phase.

    The six resonators carry the six distinct modulation phases
    {0, 2pi/3, 4pi/3} for chip A and {pi, pi+2pi/3, pi+4pi/3} for chip B
    (signs flipped for the reverse sequence).  Each chip keeps its own
    floating common node.
    """
    if design.topology is not Topology.DIFFERENTIAL:
        raise NetlistError(f"expected differential design, got {design.topology}")
    elements = (_wye_chip(design, "a", "ca", 0.0)
                + _wye_chip(design, "b", "cb", math.pi)
                + _port_elements(design.z0))
    net = Netlist(tuple(elements))
    net.validate()
    return net


def build_circulator(design: CirculatorDesign) -> Netlist:
    if design.topology is Topology.SINGLE_ENDED:
        return build_single_ended(design)
    return build_differential(design)


def elastance_fourier(branch: MotionalBranch, mod: ModulationSpec | None,
                      order: int) -> np.ndarray:
    """Fourier coefficients of the branch elastance 1/C(t), indices -order..order.

    The returned array has length 2*order+1 with index n stored at n+order:
    G_0 = 1/c_m, G_{+-1} = (depth/2)*exp(+-j*phase)/c_m, all others zero.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    out = np.zeros(2 * order + 1, dtype=complex)
    g0 = 1.0 / branch.c_m
    out[order] = g0
    if mod is not None and mod.depth != 0.0:
        g1 = 0.5 * mod.depth * g0 * cmath.exp(1j * mod.phase)
        out[order + 1] = g1
        out[order - 1] = g1.conjugate()
    return out


def scale_frequency(net: Netlist, factor: float) -> Netlist:
    """Frequency-scaled replica: every natural frequency divided by ``factor``.

    All inductances and capacitances are multiplied by ``factor`` and every
    modulation frequency divided by it; resistances, impedances, depths and
    phases are untouched, so Q, coupling ratios and modulation depth are
    preserved and S(f) of the original equals S(f/factor) of the replica.
    """
    if not (math.isfinite(factor) and factor > 0.0):
        raise ValueError(f"scale factor must be positive, got {factor}")
    out: list[Element] = []
    for el in net.elements:
        if isinstance(el, Inductor):
            out.append(replace(el, henries=el.henries * factor))
        elif isinstance(el, Capacitor):
            out.append(replace(el, farads=el.farads * factor))
        elif isinstance(el, ModulatedSeriesRlc):
            branch = MotionalBranch(r_m=el.branch.r_m, l_m=el.branch.l_m * factor,
                                    c_m=el.branch.c_m * factor, label=el.branch.label)
            mod = el.modulation
            if mod is not None:
                mod = ModulationSpec(depth=mod.depth, f_mod=mod.f_mod / factor,
                                     phase=mod.phase)
            out.append(replace(el, branch=branch, modulation=mod))
        else:
            out.append(el)
    return Netlist(tuple(out), ground=net.ground)


def write_netlist(net: Netlist) -> str:
    """Serialize to the plain-text element format (bit-exact round trip)."""
    lines = []
    for el in net.elements:
        if isinstance(el, Resistor):
            lines.append(f"R {el.name} {el.node_a} {el.node_b} {el.ohms!r}")
        elif isinstance(el, Inductor):
            lines.append(f"L {el.name} {el.node_a} {el.node_b} {el.henries!r}")
        elif isinstance(el, Capacitor):
            lines.append(f"C {el.name} {el.node_a} {el.node_b} {el.farads!r}")
        elif isinstance(el, ModulatedSeriesRlc):
            b = el.branch
            line = (f"X {el.name} {el.node_a} {el.node_b} "
                    f"{b.r_m!r} {b.l_m!r} {b.c_m!r}")
            if el.modulation is not None:
                m = el.modulation
                line += f" {m.depth!r} {m.f_mod!r} {m.phase!r}"
            lines.append(line)
        elif isinstance(el, Port):
            lines.append(f"P {el.index} {el.node} {el.z0!r}")
        else:
            raise NetlistError(f"unknown element type {type(el).__name__}")
    return "\n".join(lines) + "\n"


def read_netlist(text: str) -> Netlist:
    """Parse the plain-text element format; validates the result."""
    elements: list[Element] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("*"):
            continue
        tok = line.split()
        kind = tok[0]
        try:
            if kind == "R" and len(tok) == 5:
                elements.append(Resistor(tok[1], tok[2], tok[3], float(tok[4])))
            elif kind == "L" and len(tok) == 5:
                elements.append(Inductor(tok[1], tok[2], tok[3], float(tok[4])))
            elif kind == "C" and len(tok) == 5:
                elements.append(Capacitor(tok[1], tok[2], tok[3], float(tok[4])))
            elif kind == "X" and len(tok) in (7, 10):
                branch = MotionalBranch(r_m=float(tok[4]), l_m=float(tok[5]),
                                        c_m=float(tok[6]))
                mod = None
                if len(tok) == 10:
                    mod = ModulationSpec(depth=float(tok[7]), f_mod=float(tok[8]),
                                         phase=float(tok[9]))
                elements.append(ModulatedSeriesRlc(tok[1], tok[2], tok[3], branch, mod))
            elif kind == "P" and len(tok) == 4:
                elements.append(Port(int(tok[1]), tok[2], float(tok[3])))
            else:
                raise NetlistError(f"line {lineno}: unrecognized element line {line!r}")
        except NetlistError:
            raise
        except ValueError as exc:
            raise NetlistError(f"line {lineno}: {exc}") from exc
    net = Netlist(tuple(elements))
    net.validate()
    return net
