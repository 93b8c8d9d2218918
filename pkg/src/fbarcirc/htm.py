"""Harmonic transfer matrix engine for periodically modulated netlists.

A modulated netlist driven at stimulus frequency f responds at the mixing
frequencies f + n*f_mod, n in [-N, N].  This module assembles the modified
nodal analysis system lifted to that harmonic basis, solves it with a dense
LU factorization, and extracts multi-harmonic scattering parameters
S^(n)_qp: the wave leaving port q at harmonic n per unit incident wave at
port p, harmonic 0.

Unknowns per harmonic are the non-ground node voltages plus one current and
one charge variable for every modulated series branch.  Static R/L/C/port
elements stamp block-diagonally; only the elastance Fourier coefficients of
modulated branches couple adjacent harmonics.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .netlist import (Capacitor, Inductor, ModulatedSeriesRlc, Netlist, Port,
                      Resistor, elastance_fourier, floating_nodes)

TWO_PI = 2.0 * math.pi

# Pivot smaller than this fraction of its row scale counts as singular.
PIVOT_RTOL = 1e-14
# Target relative residual for the linear solve.
RESIDUAL_RTOL = 1e-10


class SingularStructure(ValueError):
    """The netlist graph leaves nodes without a path to ground."""


class NumericallySingular(ArithmeticError):
    """LU factorization hit a pivot below the row-scale threshold."""


class DegenerateStimulus(ValueError):
    """Stimulus frequency coincides with a multiple of the modulation frequency."""


@dataclass(frozen=True)
class HarmonicBasis:
    """Mixing basis: frequencies f + n*f_mod for n in [-n_harm, n_harm]."""

    f_mod: float
    n_harm: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.f_mod) and self.f_mod > 0.0):
            raise ValueError(f"f_mod must be positive, got {self.f_mod}")
        if self.n_harm < 1:
            raise ValueError(f"n_harm must be >= 1, got {self.n_harm}")

    @property
    def size(self) -> int:
        return 2 * self.n_harm + 1

    def harmonics(self) -> range:
        return range(-self.n_harm, self.n_harm + 1)

    def mixing_freqs(self, f: float) -> np.ndarray:
        return f + self.f_mod * np.arange(-self.n_harm, self.n_harm + 1)


@dataclass
class HarmonicSystem:
    """Assembled linear system A x = b over (variable, harmonic) unknowns."""

    matrix: np.ndarray
    rhs: np.ndarray
    variables: tuple[str, ...]  # per-block variable tags, e.g. "v:p1", "i:xa1"
    basis: HarmonicBasis
    f: float

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def row(self, variable: str, n: int) -> int:
        block = n + self.basis.n_harm
        return block * len(self.variables) + self.variables.index(variable)


@dataclass
class HarmonicSolution:
    """Solved unknowns with lookup by variable tag and harmonic index."""

    x: np.ndarray
    variables: tuple[str, ...]
    basis: HarmonicBasis
    f: float

    def _get(self, tag: str, n: int) -> complex:
        block = n + self.basis.n_harm
        return complex(self.x[block * len(self.variables) + self.variables.index(tag)])

    def voltage(self, node: str, n: int = 0) -> complex:
        return self._get(f"v:{node}", n)

    def current(self, name: str, n: int = 0) -> complex:
        return self._get(f"i:{name}", n)

    def charge(self, name: str, n: int = 0) -> complex:
        return self._get(f"q:{name}", n)


@dataclass(frozen=True)
class SParamGrid:
    """S^(n)_qp over a stimulus frequency grid.

    ``data[fi, n + n_harm, q - 1, p - 1]`` is the wave leaving port q at
    harmonic n for unit incident wave at port p, harmonic 0.
    """

    frequencies: np.ndarray
    n_harm: int
    z0: np.ndarray
    data: np.ndarray

    @property
    def ports(self) -> int:
        return self.data.shape[2]

    @property
    def s0(self) -> np.ndarray:
        """Harmonic-0 block, shape (F, P, P)."""
        return self.data[:, self.n_harm]

    def harmonic(self, n: int) -> np.ndarray:
        return self.data[:, n + self.n_harm]


def _check_stimulus(f: float, f_mod: float, n_harm: int) -> None:
    if f == 0.0:
        raise DegenerateStimulus("stimulus frequency must be nonzero")
    # A mixing frequency f + n*f_mod vanishes only when f sits on a multiple
    # k*f_mod with |k| <= n_harm; only those stimuli are rejected.
    k = round(f / f_mod)
    if k != 0 and abs(k) <= n_harm and abs(f - k * f_mod) <= 1e-6 * abs(f):
        raise DegenerateStimulus(
            f"stimulus {f} Hz is within 1e-6 of {k} x f_mod; mixing frequency would vanish")


def _block_variables(net: Netlist) -> tuple[str, ...]:
    tags: list[str] = []
    seen: set[str] = set()
    for el in net.elements:
        nodes = (el.node,) if isinstance(el, Port) else (el.node_a, el.node_b)
        for n in nodes:
            if n != net.ground and n not in seen:
                seen.add(n)
                tags.append(f"v:{n}")
    for el in net.elements:
        if isinstance(el, ModulatedSeriesRlc):
            tags.append(f"i:{el.name}")
            tags.append(f"q:{el.name}")
    return tuple(tags)


def _assemble_matrix(net: Netlist, basis: HarmonicBasis, f: float):
    """Build the system matrix and the per-block variable tags."""
    bad = floating_nodes(net)
    if bad:
        raise SingularStructure(f"nodes not reachable from ground: {sorted(bad)}")
    _check_stimulus(f, basis.f_mod, basis.n_harm)

    variables = _block_variables(net)
    nu = len(variables)
    vidx = {tag: i for i, tag in enumerate(variables)}
    size = basis.size * nu
    a = np.zeros((size, size), dtype=complex)
    omega = TWO_PI * basis.mixing_freqs(f)

    def node_row(node: str, block: int) -> int:
        return block * nu + vidx[f"v:{node}"]

    def stamp_admittance(node_a: str, node_b: str, y: complex, block: int) -> None:
        if node_a != net.ground:
            ra = node_row(node_a, block)
            a[ra, ra] += y
        if node_b != net.ground:
            rb = node_row(node_b, block)
            a[rb, rb] += y
        if node_a != net.ground and node_b != net.ground:
            a[ra, rb] -= y
            a[rb, ra] -= y

    for el in net.elements:
        if isinstance(el, Resistor):
            for h in range(basis.size):
                stamp_admittance(el.node_a, el.node_b, 1.0 / el.ohms, h)
        elif isinstance(el, Capacitor):
            for h in range(basis.size):
                stamp_admittance(el.node_a, el.node_b, 1j * omega[h] * el.farads, h)
        elif isinstance(el, Inductor):
            for h in range(basis.size):
                stamp_admittance(el.node_a, el.node_b, 1.0 / (1j * omega[h] * el.henries), h)
        elif isinstance(el, Port):
            for h in range(basis.size):
                stamp_admittance(el.node, net.ground, 1.0 / el.z0, h)
        elif isinstance(el, ModulatedSeriesRlc):
            gamma = elastance_fourier(el.branch, el.modulation, 1)
            ci = vidx[f"i:{el.name}"]
            cq = vidx[f"q:{el.name}"]
            b = el.branch
            for h in range(basis.size):
                row_i = h * nu + ci
                row_q = h * nu + cq
                # KCL: branch current leaves node_a, enters node_b.
                if el.node_a != net.ground:
                    a[node_row(el.node_a, h), row_i] += 1.0
                if el.node_b != net.ground:
                    a[node_row(el.node_b, h), row_i] -= 1.0
                # KVL: V_a - V_b - (r + j*w*l)*I - sum_n G_{m-n}*Q_n = 0.
                if el.node_a != net.ground:
                    a[row_i, node_row(el.node_a, h)] += 1.0
                if el.node_b != net.ground:
                    a[row_i, node_row(el.node_b, h)] -= 1.0
                a[row_i, row_i] -= b.r_m + 1j * omega[h] * b.l_m
                for dm in (-1, 0, 1):
                    hn = h - dm
                    if 0 <= hn < basis.size:
                        a[row_i, hn * nu + cq] -= gamma[dm + 1]
                # Charge: j*w*Q - I = 0.
                a[row_q, row_q] += 1j * omega[h]
                a[row_q, row_i] -= 1.0
        else:
            raise SingularStructure(f"unknown element type {type(el).__name__}")
    return a, variables


def _excitation_rhs(net: Netlist, basis: HarmonicBasis, variables: tuple[str, ...],
                    excited_port: int) -> np.ndarray:
    ports = {p.index: p for p in net.ports}
    if excited_port not in ports:
        raise ValueError(f"no port with index {excited_port}")
    port = ports[excited_port]
    nu = len(variables)
    rhs = np.zeros(basis.size * nu, dtype=complex)
    # Unit incident wave a = 1 at harmonic 0: Thevenin source 2*sqrt(z0),
    # Norton current 2/sqrt(z0) into the port node.
    block = basis.n_harm
    rhs[block * nu + variables.index(f"v:{port.node}")] = 2.0 / math.sqrt(port.z0)
    return rhs


def assemble(net: Netlist, basis: HarmonicBasis, f: float,
             excited_port: int = 1) -> HarmonicSystem:
    """Assemble the harmonic MNA system for one stimulus frequency.

    The excited port carries a unit incident wave at harmonic 0; every port
    is terminated in its reference impedance.  Raises
    :class:`SingularStructure` for floating nodes and
    :class:`DegenerateStimulus` when f collides with a multiple of f_mod.
    """
    a, variables = _assemble_matrix(net, basis, f)
    rhs = _excitation_rhs(net, basis, variables, excited_port)
    return HarmonicSystem(matrix=a, rhs=rhs, variables=variables, basis=basis, f=f)


def _pow2_inverse_scale(v: np.ndarray) -> np.ndarray:
    """Per-entry power of two close to 1/v (exact scaling factors)."""
    out = np.ones_like(v)
    nz = v > 0.0
    _, exp = np.frexp(v[nz])
    out[nz] = np.ldexp(1.0, -exp)
    return out


class _LuFactors:
    """Equilibrated dense LU with partial pivoting."""

    __slots__ = ("lu", "piv", "dr", "dc")

    def __init__(self, a: np.ndarray):
        n = a.shape[0]
        dr = _pow2_inverse_scale(np.max(np.abs(a), axis=1))
        a1 = a * dr[:, None]
        dc = _pow2_inverse_scale(np.max(np.abs(a1), axis=0))
        lu = a1 * dc[None, :]
        scale = np.max(np.abs(lu), axis=1)
        piv = np.empty(n, dtype=np.int64)
        for k in range(n):
            p = k + int(np.argmax(np.abs(lu[k:, k])))
            pivot = abs(lu[p, k])
            if not (pivot >= PIVOT_RTOL * scale[p]) or scale[p] == 0.0:
                raise NumericallySingular(
                    f"pivot {pivot:.3e} below {PIVOT_RTOL} of row scale at column {k}")
            if p != k:
                lu[[k, p]] = lu[[p, k]]
                scale[[k, p]] = scale[[p, k]]
            piv[k] = p
            if k < n - 1:
                lu[k + 1:, k] /= lu[k, k]
                lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
        self.lu = lu
        self.piv = piv
        self.dr = dr
        self.dc = dc

    def solve(self, b: np.ndarray) -> np.ndarray:
        n = self.lu.shape[0]
        y = b * self.dr
        for k in range(n):       # apply row interchanges: y <- P y
            p = self.piv[k]
            if p != k:
                y[k], y[p] = y[p], y[k]
        for k in range(n - 1):   # unit lower triangular solve
            y[k + 1:] -= self.lu[k + 1:, k] * y[k]
        for k in range(n - 1, -1, -1):
            y[k] = (y[k] - self.lu[k, k + 1:] @ y[k + 1:]) / self.lu[k, k]
        return y * self.dc


def _solve_system(a: np.ndarray, b: np.ndarray, factors: _LuFactors | None = None) -> np.ndarray:
    if factors is None:
        factors = _LuFactors(a)
    x = factors.solve(b.copy())
    bnorm = float(np.max(np.abs(b)))
    if bnorm > 0.0:
        # One or two refinement passes buy headroom on stiff resonant systems.
        for _ in range(2):
            r = b - a @ x
            if float(np.max(np.abs(r))) <= RESIDUAL_RTOL * bnorm:
                break
            x = x + factors.solve(r)
    return x


def solve(sys: HarmonicSystem) -> HarmonicSolution:
    """Solve the assembled system; deterministic for identical inputs.

    Raises :class:`NumericallySingular` when a pivot falls below 1e-14 of
    its row scale.
    """
    x = _solve_system(sys.matrix, sys.rhs)
    return HarmonicSolution(x=x, variables=sys.variables, basis=sys.basis, f=sys.f)


def _sparams_at(net: Netlist, basis: HarmonicBasis, f: float) -> np.ndarray:
    """S^(n)_qp for one stimulus frequency, shape (2N+1, P, P)."""
    a, variables = _assemble_matrix(net, basis, f)
    factors = _LuFactors(a)
    ports = net.ports
    nu = len(variables)
    vrows = np.array([variables.index(f"v:{p.node}") for p in ports])
    sqrt_z0 = np.array([math.sqrt(p.z0) for p in ports])
    out = np.empty((basis.size, len(ports), len(ports)), dtype=complex)
    for pi, port in enumerate(ports):
        rhs = _excitation_rhs(net, basis, variables, port.index)
        x = _solve_system(a, rhs, factors)
        volts = x.reshape(basis.size, nu)[:, vrows]          # (harmonics, ports)
        waves = volts / sqrt_z0[None, :]
        waves[basis.n_harm, pi] -= 1.0                       # remove the incident wave
        out[:, :, pi] = waves
    return out


def sparams(net: Netlist, basis: HarmonicBasis, freqs, threads: int = 1) -> SParamGrid:
    """Multi-harmonic S-parameters over a stimulus frequency grid.

    Each frequency point is an independent solve; with ``threads`` > 1 the
    sweep runs on a thread pool and results are merged by frequency index,
    so the grid is identical regardless of completion order.  ``threads=0``
    picks a worker count automatically.
    """
    net_f_mod = net.f_mod
    if net_f_mod is not None and net_f_mod != basis.f_mod:
        raise ValueError(
            f"netlist modulation {net_f_mod} Hz does not match basis {basis.f_mod} Hz")
    freqs = np.asarray(list(freqs), dtype=float)
    if freqs.size == 0:
        raise ValueError("need at least one stimulus frequency")
    if np.any(freqs <= 0.0):
        raise ValueError("stimulus frequencies must be positive")
    ports = net.ports
    if not ports:
        raise ValueError("netlist has no ports")
    data = np.empty((freqs.size, basis.size, len(ports), len(ports)), dtype=complex)

    def work(fi: int) -> None:
        data[fi] = _sparams_at(net, basis, float(freqs[fi]))

    if threads == 0:
        threads = min(8, os.cpu_count() or 1)
    if threads > 1 and freqs.size > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, range(freqs.size)))
    else:
        for fi in range(freqs.size):
            work(fi)
    z0 = np.array([p.z0 for p in ports])
    return SParamGrid(frequencies=freqs, n_harm=basis.n_harm, z0=z0, data=data)


def convergence_check(net: Netlist, f: float, n_small: int, n_large: int) -> float:
    """Max |change of S^(0)| between two truncation orders at one frequency.

    Returns exactly 0.0 for unmodulated netlists.  The value is reported,
    not asserted monotone.
    """
    if n_small < 1 or n_large < n_small:
        raise ValueError("need 1 <= n_small <= n_large")
    active = [el for el in net.modulated
              if el.modulation is not None and el.modulation.depth > 0.0]
    if not active:
        return 0.0
    f_mod = net.f_mod
    s_small = sparams(net, HarmonicBasis(f_mod, n_small), [f]).s0[0]
    s_large = sparams(net, HarmonicBasis(f_mod, n_large), [f]).s0[0]
    return float(np.max(np.abs(s_large - s_small)))
