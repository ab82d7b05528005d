"""Variational optimization drivers.

Two protocols over the same simulator:

* CVaR-VQE: derivative-free minimization (linear-approximation trust region)
  of the conditional value at risk of the exact energy distribution, with
  multistart initialization from a configurable angle window.
* Primal-dual perturbation for the constrained encoding: each iteration
  evaluates the constraint expectations and one parameter-shift Jacobian at
  the current angles, perturbs primal and dual variables, then applies the
  update step with the perturbed weights.  Gradient cost per iteration is
  exactly 2P + 2 circuit evaluations.

Expectations never materialize the full 2^n objective diagonal unless the
CVaR path demands it: the objective splits into a configuration-bit base
table plus one linear table per ancilla, so constraint and objective
expectations need only configuration-space marginals.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .exceptions import (
    BudgetExceededError,
    DivergenceError,
    EncodingError,
)
from .hamiltonian import MODE_POLYFIT, MODE_VQEC, InstanceTables, ProblemInstance
from .sim import Ansatz, evolve, probabilities

TWO_PI = 2.0 * math.pi
DEFAULT_NU_GRID = (0.01, 0.05, 0.1, 0.2, 0.5)
DEFAULT_MU_GRID = (0.1, 0.5, 1.0, 2.0, 5.0)
QUADRANTS = (
    (0.0, math.pi / 2.0),
    (math.pi / 2.0, math.pi),
    (math.pi, 3.0 * math.pi / 2.0),
    (3.0 * math.pi / 2.0, TWO_PI),
)


# ---------------------------------------------------------------------------
# expectation engine
# ---------------------------------------------------------------------------


class ExpectationEngine:
    """Exact diagonal expectations over configuration-space marginals."""

    def __init__(self, instance: ProblemInstance):
        self.instance = instance
        self.tables = InstanceTables(instance)
        self.n_vars = instance.n_qubits
        self.n_config = instance.layout.n_config_bits
        self.n_ancillas = self.n_vars - self.n_config
        rows = np.arange(1 << self.n_ancillas)
        self._row_masks = {
            idx: ((rows >> (idx - self.n_config)) & 1).astype(bool)
            for idx in self.tables.pair_tables
        }
        optimal = self.tables.ancilla_optimal_energies()
        feasible = np.ones(optimal.shape[0], dtype=bool)
        for table in self.tables.constraint_tables:
            feasible &= table <= 1e-9
        if not feasible.any():
            raise EncodingError("no configuration satisfies every constraint")
        self.ground_energy = float(optimal[feasible].min())
        self.ground_configs = np.flatnonzero(
            feasible & (optimal <= self.ground_energy + 1e-9)
        )
        self._sorted_diag = None
        self._sort_order = None

    @property
    def n_constraints(self) -> int:
        return len(self.tables.constraint_tables)

    def config_marginal(self, probs: np.ndarray) -> np.ndarray:
        return probs.reshape(1 << self.n_ancillas, 1 << self.n_config).sum(axis=0)

    def objective_expectation(self, probs: np.ndarray) -> float:
        grid = probs.reshape(1 << self.n_ancillas, 1 << self.n_config)
        total = float(grid.sum(axis=0) @ self.tables.base_table)
        for idx, table in self.tables.pair_tables.items():
            total += float(grid[self._row_masks[idx]].sum(axis=0) @ table)
        return total

    def f_vector(self, probs: np.ndarray) -> np.ndarray:
        """[objective expectation, constraint expectations...]."""
        grid = probs.reshape(1 << self.n_ancillas, 1 << self.n_config)
        marginal = grid.sum(axis=0)
        total = float(marginal @ self.tables.base_table)
        for idx, table in self.tables.pair_tables.items():
            total += float(grid[self._row_masks[idx]].sum(axis=0) @ table)
        out = np.empty(1 + self.n_constraints)
        out[0] = total
        for m, table in enumerate(self.tables.constraint_tables, start=1):
            out[m] = float(marginal @ table)
        return out

    def cvar_objective(self, probs: np.ndarray, alpha: float) -> float:
        """Tail mean over the exact full-basis energy distribution."""
        if self._sorted_diag is None:
            diag = self.tables.full_diagonal()
            self._sort_order = np.argsort(diag, kind="stable")
            self._sorted_diag = diag[self._sort_order]
        p = probs[self._sort_order]
        cum = np.cumsum(p)
        mass = min(alpha, float(cum[-1]))
        boundary = int(np.searchsorted(cum, mass, side="left"))
        total = float(self._sorted_diag[:boundary] @ p[:boundary])
        used = float(cum[boundary - 1]) if boundary else 0.0
        if boundary < p.size and mass > used:
            total += float(self._sorted_diag[boundary]) * (mass - used)
        return total / mass

    def ground_probability(self, probs: np.ndarray) -> float:
        return float(self.config_marginal(probs)[self.ground_configs].sum())

    def modal_config(self, probs: np.ndarray) -> int:
        return int(np.argmax(self.config_marginal(probs)))


# ---------------------------------------------------------------------------
# configs and traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CvarVqeConfig:
    alpha: float = 0.1
    max_iterations: int = 200
    restarts: int = 20
    init_window: tuple = (3.0 * math.pi / 2.0, TWO_PI)
    full_window_sweep: bool = False
    seed: int = 0
    snapshot_every: int = 50
    max_seconds: float | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise EncodingError("alpha must lie in (0, 1]")
        lo, hi = self.init_window
        if not (0.0 <= lo < hi <= TWO_PI + 1e-12):
            raise EncodingError("init_window must be an interval inside [0, 2*pi]")
        if self.restarts < 1 or self.max_iterations < 1:
            raise EncodingError("restarts and max_iterations must be >= 1")


@dataclass(frozen=True)
class VqecConfig:
    nu: float = 0.1
    mu: float = 1.0
    nu_grid: tuple = DEFAULT_NU_GRID
    mu_grid: tuple = DEFAULT_MU_GRID
    restarts: int = 20
    max_iterations: int = 50
    seed: int = 0
    snapshot_every: int = 10
    divergence_ceiling: float = 1.0e5
    max_seconds: float | None = None

    def __post_init__(self):
        if self.nu <= 0.0 or self.mu <= 0.0:
            raise EncodingError("step sizes must be positive")
        if not self.nu_grid or not self.mu_grid:
            raise EncodingError("step-size grids must be non-empty")
        if any(v <= 0.0 for v in self.nu_grid) or any(v <= 0.0 for v in self.mu_grid):
            raise EncodingError("grid step sizes must be positive")
        if self.restarts < 1 or self.max_iterations < 1:
            raise EncodingError("restarts and max_iterations must be >= 1")
        if self.divergence_ceiling <= 0.0:
            raise EncodingError("divergence ceiling must be positive")


@dataclass
class OptTrace:
    """Evaluation-by-evaluation record of one optimization run."""

    objectives: list = field(default_factory=list)
    best_so_far: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    lagrangians: list = field(default_factory=list)
    duals: list = field(default_factory=list)

    def record(self, objective, params=None, every=0, lagrangian=None, dual=None):
        index = len(self.objectives)
        self.objectives.append(float(objective))
        best = self.best_so_far[-1] if self.best_so_far else math.inf
        self.best_so_far.append(min(best, float(objective)))
        if lagrangian is not None:
            self.lagrangians.append(float(lagrangian))
        if dual is not None:
            self.duals.append(tuple(float(v) for v in dual))
        if params is not None and every and index % every == 0:
            self.snapshots.append((index, tuple(float(v) for v in params)))

    def to_json_lines(self) -> str:
        snapshot_at = dict(self.snapshots)
        lines = []
        for i, objective in enumerate(self.objectives):
            row = {"i": i, "objective": objective, "best": self.best_so_far[i]}
            if i < len(self.lagrangians):
                row["lagrangian"] = self.lagrangians[i]
            if i < len(self.duals):
                row["duals"] = list(self.duals[i])
            if i in snapshot_at:
                row["params"] = list(snapshot_at[i])
            lines.append(json.dumps(row))
        return "\n".join(lines) + "\n"


class _Budget:
    def __init__(self, max_seconds):
        self.deadline = None
        if max_seconds is not None:
            self.deadline = time.monotonic() + max_seconds

    def check(self):
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise BudgetExceededError("optimization exceeded its wall budget")


# ---------------------------------------------------------------------------
# CVaR-VQE
# ---------------------------------------------------------------------------


def run_cvar_vqe(instance: ProblemInstance, ansatz: Ansatz, cfg: CvarVqeConfig):
    """Multistart CVaR minimization; returns (best params, trace)."""
    if instance.mode != MODE_POLYFIT:
        raise EncodingError("CVaR-VQE drives the fused-penalty objective only")
    if ansatz.n_qubits != instance.n_qubits:
        raise EncodingError("ansatz width does not match the instance")
    engine = ExpectationEngine(instance)
    rng = np.random.default_rng(cfg.seed)
    budget = _Budget(cfg.max_seconds)
    trace = OptTrace()

    def objective(params):
        budget.check()
        probs = probabilities(evolve(ansatz, params))
        value = engine.cvar_objective(probs, cfg.alpha)
        trace.record(value, params=params, every=cfg.snapshot_every)
        return value

    best_params = None
    best_value = math.inf
    for restart in range(cfg.restarts):
        budget.check()
        if cfg.full_window_sweep:
            lo, hi = QUADRANTS[restart % 4]
        else:
            lo, hi = cfg.init_window
        x0 = rng.uniform(lo, hi, ansatz.n_params)
        result = minimize(
            objective,
            x0,
            method="COBYLA",
            options={"maxiter": cfg.max_iterations},
        )
        if result.fun < best_value:
            best_value = float(result.fun)
            best_params = np.asarray(result.x, dtype=float)
    trace.snapshots.append((len(trace.objectives), tuple(map(float, best_params))))
    return best_params, trace


# ---------------------------------------------------------------------------
# VQEC primal-dual perturbation
# ---------------------------------------------------------------------------


def _pdp_run(engine, ansatz, theta0, nu, mu, cfg, trace, budget=None):
    """One seeded run; returns (theta, duals, final F vector)."""
    theta = np.asarray(theta0, dtype=float).copy()
    duals = np.zeros(engine.n_constraints)
    n_params = ansatz.n_params
    jac = np.empty((n_params, 1 + engine.n_constraints))
    for _ in range(cfg.max_iterations):
        if budget is not None:
            budget.check()
        f_here = engine.f_vector(probabilities(evolve(ansatz, theta)))
        lagrangian = float(f_here[0] + duals @ f_here[1:])
        if not np.isfinite(lagrangian) or abs(lagrangian) > cfg.divergence_ceiling:
            raise DivergenceError(
                f"lagrangian {lagrangian!r} exceeded ceiling {cfg.divergence_ceiling}"
            )

        shifted = theta.copy()
        for p in range(n_params):
            shifted[p] = theta[p] + math.pi / 2.0
            f_plus = engine.f_vector(probabilities(evolve(ansatz, shifted)))
            shifted[p] = theta[p] - math.pi / 2.0
            f_minus = engine.f_vector(probabilities(evolve(ansatz, shifted)))
            shifted[p] = theta[p]
            jac[p, :] = 0.5 * (f_plus - f_minus)

        weights = np.concatenate(([1.0], duals))
        theta_pert = np.clip(theta - nu * (jac @ weights), 0.0, TWO_PI)
        duals_pert = np.maximum(duals + nu * f_here[1:], 0.0)

        weights_pert = np.concatenate(([1.0], duals_pert))
        theta_next = np.clip(theta - mu * (jac @ weights_pert), 0.0, TWO_PI)
        f_pert = engine.f_vector(probabilities(evolve(ansatz, theta_pert)))
        duals = np.maximum(duals + mu * f_pert[1:], 0.0)
        theta = theta_next

        trace.record(
            f_here[0],
            params=theta,
            every=cfg.snapshot_every,
            lagrangian=lagrangian,
            dual=duals,
        )
    f_final = engine.f_vector(probabilities(evolve(ansatz, theta)))
    return theta, duals, f_final


def run_vqec_pdp(instance: ProblemInstance, ansatz: Ansatz, cfg: VqecConfig):
    """Multistart primal-dual runs at (cfg.nu, cfg.mu).

    Returns (best params, final duals, trace); best means lowest final
    Lagrangian objective across restarts.
    """
    if instance.mode != MODE_VQEC:
        raise EncodingError("the primal-dual loop drives the constrained mode only")
    if ansatz.n_qubits != instance.n_qubits:
        raise EncodingError("ansatz width does not match the instance")
    engine = ExpectationEngine(instance)
    rng = np.random.default_rng(cfg.seed)
    starts = rng.uniform(0.0, TWO_PI, (cfg.restarts, ansatz.n_params))
    budget = _Budget(cfg.max_seconds)
    trace = OptTrace()
    best = None
    for restart in range(cfg.restarts):
        theta, duals, f_final = _pdp_run(
            engine, ansatz, starts[restart], cfg.nu, cfg.mu, cfg, trace, budget
        )
        lagrangian = float(f_final[0] + duals @ f_final[1:])
        if best is None or lagrangian < best[0]:
            best = (lagrangian, theta, duals)
    trace.snapshots.append((len(trace.objectives), tuple(map(float, best[1]))))
    return best[1], best[2], trace


# ---------------------------------------------------------------------------
# hyperparameter grid search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridEntry:
    nu: float
    mu: float
    restart: int
    objective: float
    lagrangian: float
    violation: float
    ground_probability: float
    diverged: bool
    params: tuple = ()
    duals: tuple = ()

    def sort_key(self):
        return (
            self.diverged,
            self.lagrangian,
            self.violation,
            -self.ground_probability,
            self.nu,
            self.mu,
            self.restart,
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "nu": self.nu,
                "mu": self.mu,
                "restart": self.restart,
                "objective": self.objective,
                "lagrangian": self.lagrangian,
                "violation": self.violation,
                "ground_probability": self.ground_probability,
                "diverged": self.diverged,
                "params": list(self.params),
                "duals": list(self.duals),
            }
        )


@dataclass(frozen=True)
class GridReport:
    entries: tuple

    @property
    def best(self) -> GridEntry:
        return self.entries[0]

    def to_json_lines(self) -> str:
        return "\n".join(e.to_json() for e in self.entries) + "\n"


def grid_search(instance: ProblemInstance, ansatz: Ansatz, cfg: VqecConfig) -> GridReport:
    """Sweep (nu, mu) over the configured grids with shared restarts.

    Every grid point sees the same seeded initial angles, so rows are
    comparable and the ranking is independent of execution order.  Runs
    that trip the divergence ceiling are kept, flagged, and ranked last.
    """
    if instance.mode != MODE_VQEC:
        raise EncodingError("grid search drives the constrained mode only")
    engine = ExpectationEngine(instance)
    rng = np.random.default_rng(cfg.seed)
    starts = rng.uniform(0.0, TWO_PI, (cfg.restarts, ansatz.n_params))
    entries = []
    for nu, mu in itertools.product(cfg.nu_grid, cfg.mu_grid):
        for restart in range(cfg.restarts):
            trace = OptTrace()
            try:
                theta, duals, f_final = _pdp_run(
                    engine, ansatz, starts[restart], nu, mu, cfg, trace
                )
            except DivergenceError:
                entries.append(
                    GridEntry(
                        nu=nu,
                        mu=mu,
                        restart=restart,
                        objective=math.inf,
                        lagrangian=math.inf,
                        violation=math.inf,
                        ground_probability=0.0,
                        diverged=True,
                    )
                )
                continue
            probs = probabilities(evolve(ansatz, theta))
            entries.append(
                GridEntry(
                    nu=float(nu),
                    mu=float(mu),
                    restart=restart,
                    objective=float(f_final[0]),
                    lagrangian=float(f_final[0] + duals @ f_final[1:]),
                    violation=float(np.maximum(f_final[1:], 0.0).sum()),
                    ground_probability=engine.ground_probability(probs),
                    diverged=False,
                    params=tuple(map(float, theta)),
                    duals=tuple(map(float, duals)),
                )
            )
    entries.sort(key=GridEntry.sort_key)
    return GridReport(entries=tuple(entries))
