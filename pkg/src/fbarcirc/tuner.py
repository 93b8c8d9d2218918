"""Derivative-free tuning of modulation depth, modulation frequency and
stimulus frequency to maximize isolation under an insertion-loss cap.

The search is a deterministic Nelder-Mead simplex with bound clipping and a
hard evaluation budget, optionally restarted from a seeded low-discrepancy
sequence.  Every evaluation lands in the trace, so a run is reproducible
from (problem, seed) alone.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .htm import DegenerateStimulus, HarmonicBasis, NumericallySingular, sparams
from .metrics import CirculatorMetrics, Direction, metrics_at, summarize
from .netlist import CirculatorDesign, build_circulator

log = logging.getLogger(__name__)

PENALTY_PER_DB = 100.0


@dataclass(frozen=True)
class TuneProblem:
    """Search space and constraints for one tuning run."""

    design: CirculatorDesign
    delta_bounds: tuple[float, float]
    f_mod_bounds: tuple[float, float]
    f_op_bounds: tuple[float, float]
    il_cap_db: float = 3.0
    budget: int = 300
    n_harm: int = 5
    direction: Direction = Direction()
    starts: int = 4
    metrics_span: float = 25e6
    metrics_points: int = 251

    def __post_init__(self) -> None:
        for name, (lo, hi) in (("delta", self.delta_bounds),
                               ("f_mod", self.f_mod_bounds),
                               ("f_op", self.f_op_bounds)):
            if not lo < hi:
                raise ValueError(f"{name} bounds must be non-degenerate, got ({lo}, {hi})")
        if self.budget < 10:
            raise ValueError("budget must be at least 10")
        if self.starts < 1:
            raise ValueError("starts must be at least 1")

    @staticmethod
    def default(design: CirculatorDesign, budget: int = 300,
                il_cap_db: float = 2.85, n_harm: int = 5,
                delta_max: float = 0.1, f_mod_window: float = 0.4,
                f_op_window: float = 0.02, starts: int = 4) -> "TuneProblem":
        """Stock search space: delta in [0, 0.1], f_mod within +-40% of the
        design's modulation frequency, stimulus within +-2% of f_s.

        The default insertion-loss cap sits 0.15 dB under a 3 dB budget:
        with the capped isolation term a perfect null can otherwise buy a
        small cap violation more cheaply than staying feasible."""
        f_s = design.resonator.f_s
        return TuneProblem(
            design=design,
            delta_bounds=(0.0, delta_max),
            f_mod_bounds=(design.f_mod * (1.0 - f_mod_window),
                          design.f_mod * (1.0 + f_mod_window)),
            f_op_bounds=(f_s * (1.0 - f_op_window), f_s * (1.0 + f_op_window)),
            il_cap_db=il_cap_db, budget=budget, n_harm=n_harm, starts=starts)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([self.delta_bounds[0], self.f_mod_bounds[0], self.f_op_bounds[0]])
        hi = np.array([self.delta_bounds[1], self.f_mod_bounds[1], self.f_op_bounds[1]])
        return lo, hi


@dataclass
class TuneResult:
    """Best parameters found, achieved metrics, and the evaluation trace."""

    delta: float
    f_mod: float
    f_op: float
    achieved: CirculatorMetrics
    trace: list[tuple[np.ndarray, float]]
    evaluations: int
    budget_exhausted: bool


def penalized_objective(ix_db: float, il_db: float, il_cap_db: float) -> float:
    """-ix + 100 per dB of insertion loss above the cap (lower is better)."""
    return -ix_db + PENALTY_PER_DB * max(0.0, il_db - il_cap_db)


def objective(params, problem: TuneProblem) -> float:
    """Scalar cost of one (delta, f_mod, f_op) triple; +inf on solver failure."""
    delta, f_mod, f_op = (float(v) for v in params)
    design = replace(problem.design, delta=delta, f_mod=f_mod)
    try:
        net = build_circulator(design)
        grid = sparams(net, HarmonicBasis(f_mod, problem.n_harm), [f_op])
        ix, il, _ = metrics_at(grid, f_op, problem.direction)
    except (NumericallySingular, DegenerateStimulus, ValueError) as exc:
        log.warning("objective failed at delta=%g f_mod=%g f_op=%g: %s",
                    delta, f_mod, f_op, exc)
        return math.inf
    return penalized_objective(ix, il, problem.il_cap_db)


class _BudgetExhausted(Exception):
    pass


def _nelder_mead(ev, x0: np.ndarray, steps: np.ndarray, lo: np.ndarray,
                 hi: np.ndarray, max_iter: int) -> None:
    """Minimize via reflect/expand/contract/shrink; points clipped to bounds.

    Evaluation, bookkeeping and stopping-by-budget live in ``ev``.
    """
    dim = x0.size

    def clip(x):
        return np.minimum(np.maximum(x, lo), hi)

    simplex = [clip(x0)]
    for i in range(dim):
        p = x0.copy()
        p[i] += steps[i]
        simplex.append(clip(p))
    values = [ev(p) for p in simplex]

    for _ in range(max_iter):
        order = np.argsort(values, kind="stable")
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        spread = max(np.max(np.abs(simplex[-1] - simplex[0])), 0.0)
        scale = np.max(np.abs(simplex[0])) + 1e-30
        if spread <= 1e-9 * scale and abs(values[-1] - values[0]) <= 1e-12 * (1.0 + abs(values[0])):
            return
        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]
        xr = clip(centroid + (centroid - worst))
        fr = ev(xr)
        if fr < values[0]:
            xe = clip(centroid + 2.0 * (centroid - worst))
            fe = ev(xe)
            if fe < fr:
                simplex[-1], values[-1] = xe, fe
            else:
                simplex[-1], values[-1] = xr, fr
        elif fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
        else:
            xc = clip(centroid + 0.5 * (worst - centroid))
            fc = ev(xc)
            if fc < values[-1]:
                simplex[-1], values[-1] = xc, fc
            else:
                best = simplex[0]
                for i in range(1, dim + 1):
                    simplex[i] = clip(best + 0.5 * (simplex[i] - best))
                    values[i] = ev(simplex[i])


_LOW_DISCREPANCY_ALPHA = np.array([0.6180339887498949,   # 1/phi
                                   0.7548776662466927,   # 1/rho (plastic)
                                   0.5698402909980532])  # 1/rho^2


def tune(problem: TuneProblem, seed: int = 0, objective_fn=None) -> TuneResult:
    """Run the bounded simplex search; deterministic given (problem, seed).

    ``objective_fn(params) -> float`` overrides the simulator-backed
    objective (test hook).  Returns the best point seen, never worse than
    the first evaluation; ``budget_exhausted`` flags a stop on budget rather
    than convergence.
    """
    lo, hi = problem.bounds
    span = hi - lo
    fn = objective_fn if objective_fn is not None else (lambda x: objective(x, problem))
    rng = np.random.default_rng(seed)

    trace: list[tuple[np.ndarray, float]] = []
    state = {"best_x": None, "best_v": math.inf, "used": 0}

    def ev(x: np.ndarray) -> float:
        if state["used"] >= problem.budget:
            raise _BudgetExhausted
        v = float(fn(x))
        state["used"] += 1
        trace.append((x.copy(), v))
        if v < state["best_v"]:
            state["best_v"] = v
            state["best_x"] = x.copy()
        return v

    u0 = rng.random(3)
    exhausted = False
    try:
        for s in range(problem.starts):
            if s == 0:
                x0 = lo + 0.5 * span
            else:
                x0 = lo + ((u0 + s * _LOW_DISCREPANCY_ALPHA) % 1.0) * span
            _nelder_mead(ev, x0, 0.25 * span, lo, hi, max_iter=10 * problem.budget)
    except _BudgetExhausted:
        exhausted = True

    best = state["best_x"]
    delta, f_mod, f_op = (float(v) for v in best)
    achieved = achieved_metrics(problem, delta, f_mod, f_op)
    return TuneResult(delta=delta, f_mod=f_mod, f_op=f_op, achieved=achieved,
                      trace=trace, evaluations=state["used"],
                      budget_exhausted=exhausted)


def metrics_grid_freqs(problem: TuneProblem, f_op: float) -> np.ndarray:
    """Frequency grid for post-tune metrics: a symmetric sweep around f_op
    with the exact operating point unioned in."""
    sweep = np.linspace(f_op - problem.metrics_span, f_op + problem.metrics_span,
                        problem.metrics_points)
    return np.union1d(sweep, [f_op])


def achieved_metrics(problem: TuneProblem, delta: float, f_mod: float,
                     f_op: float) -> CirculatorMetrics:
    """Reproducible metrics recipe at a parameter triple (pure re-run)."""
    design = replace(problem.design, delta=delta, f_mod=f_mod)
    net = build_circulator(design)
    grid = sparams(net, HarmonicBasis(f_mod, problem.n_harm),
                   metrics_grid_freqs(problem, f_op))
    return summarize(grid, problem.direction)


def write_trace_csv(result: TuneResult, path) -> None:
    """eval_index, delta, f_mod_Hz, f_op_Hz, objective per evaluation."""
    from .fileio import atomic_write_text

    lines = ["eval_index,delta,f_mod_hz,f_op_hz,objective"]
    for i, (x, v) in enumerate(result.trace):
        lines.append(f"{i},{float(x[0])!r},{float(x[1])!r},{float(x[2])!r},{float(v)!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")
