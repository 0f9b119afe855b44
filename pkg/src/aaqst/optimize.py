"""Delay optimisation by condition number: a genetic algorithm and a grid oracle."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constraint import ConditioningReport, build_probe, conditioning
from .model import RegisterLayout, SpinSystem
from .pulseseq import experiment_sequences, get_template

# Finite fitness for rank-deficient candidates keeps them orderable in selection.
RANK_DEFICIENT_FITNESS = 1e12

DEFAULT_BOUNDS = (1e-4, 20e-3)


class OptimizationFailed(RuntimeError):
    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = history or []


@dataclass
class OptimizerConfig:
    """Genetic algorithm settings.

    ``bounds`` holds one ``(min, max)`` pair in seconds per template delay, or
    a single pair applied to every delay.  ``mutation_sigma`` is a fraction of
    each parameter range and shrinks by ``mutation_decay`` every generation.
    """

    population: int = 40
    generations: int = 60
    mutation_sigma: float = 0.05
    mutation_decay: float = 1.0
    crossover_rate: float = 0.7
    elitism: int = 2
    tournament: int = 3
    bounds: tuple = DEFAULT_BOUNDS
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        if not 0 <= self.crossover_rate <= 1:
            raise ValueError("crossover_rate must lie in [0, 1]")
        if not 0 <= self.elitism <= self.population:
            raise ValueError("elitism must lie in [0, population]")
        if self.tournament < 1:
            raise ValueError("tournament size must be positive")
        if self.mutation_sigma < 0 or not 0 < self.mutation_decay <= 1:
            raise ValueError("mutation_sigma must be >= 0 and mutation_decay in (0, 1]")
        b = np.asarray(self.bounds, dtype=float)
        if b.ndim == 1:
            b = b.reshape(1, 2)
        if b.ndim != 2 or b.shape[1] != 2 or np.any(b[:, 0] > b[:, 1]) or np.any(b[:, 0] < 0):
            raise ValueError(f"bounds must be (min, max) pairs with 0 <= min <= max, got {self.bounds!r}")
        self.bounds = tuple(tuple(float(x) for x in row) for row in b)

    def bounds_array(self, n_params: int) -> np.ndarray:
        b = np.asarray(self.bounds, dtype=float)
        if b.shape[0] == 1:
            return np.repeat(b, n_params, axis=0)
        if b.shape[0] != n_params:
            raise ValueError(f"{b.shape[0]} bound pairs given for {n_params} parameters")
        return b

    @classmethod
    def from_dict(cls, d: dict | None) -> "OptimizerConfig":
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown optimizer settings {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    params: np.ndarray
    report: ConditioningReport
    history: list = field(default_factory=list)  # (generation, best C, mean C)

    @property
    def condition(self) -> float:
        return self.report.condition


def evaluate(sys: SpinSystem, layout: RegisterLayout, template_id: str, K: int, params) -> ConditioningReport:
    return conditioning(build_probe(sys, layout, experiment_sequences(template_id, params, K)))


def fitness(report: ConditioningReport) -> float:
    return report.condition if report.full_rank else RANK_DEFICIENT_FITNESS


def _param_bounds(template_id: str, K: int, config: OptimizerConfig) -> np.ndarray:
    tpl = get_template(template_id)
    if tpl.n_params < 1:
        raise ValueError(f"template {template_id} has no free delays")
    return np.tile(config.bounds_array(tpl.n_params), (K, 1))


def optimize_delays(sys: SpinSystem, layout: RegisterLayout, template_id: str, K: int = 1,
                    config: OptimizerConfig | None = None) -> OptimizationResult:
    """Minimise C(M) over the delays of K independent template instances."""
    config = config or OptimizerConfig()
    bounds = _param_bounds(template_id, K, config)
    lo, hi = bounds[:, 0], bounds[:, 1]
    span = hi - lo
    rng = np.random.default_rng(config.seed)

    def score(pop):
        return np.array([fitness(evaluate(sys, layout, template_id, K, p)) for p in pop])

    pop = lo + rng.random((config.population, lo.size)) * span
    fit = score(pop)
    history = []
    best_i = int(np.argmin(fit))
    best, best_fit = pop[best_i].copy(), fit[best_i]

    def record(gen):
        ok = fit[fit < RANK_DEFICIENT_FITNESS]
        history.append((gen, float(best_fit), float(ok.mean()) if ok.size else float("inf")))

    record(0)
    sigma = config.mutation_sigma
    for gen in range(1, config.generations + 1):
        order = np.argsort(fit, kind="stable")
        children = [pop[i].copy() for i in order[: config.elitism]]
        while len(children) < config.population:
            p1 = pop[_tournament(fit, config.tournament, rng)]
            p2 = pop[_tournament(fit, config.tournament, rng)]
            if rng.random() < config.crossover_rate:
                w = rng.random(lo.size)
                child = w * p1 + (1 - w) * p2
            else:
                child = p1.copy()
            child = child + rng.normal(size=lo.size) * sigma * span
            children.append(_reflect(child, lo, hi))
        pop = np.array(children)
        fit = score(pop)
        i = int(np.argmin(fit))
        if fit[i] < best_fit:
            best, best_fit = pop[i].copy(), fit[i]
        record(gen)
        sigma *= config.mutation_decay

    report = evaluate(sys, layout, template_id, K, best)
    if not report.full_rank:
        raise OptimizationFailed(
            f"no full-rank constraint matrix found for {template_id} with K={K} "
            f"(best rank {report.rank} of {report.n_unknowns})",
            history,
        )
    return OptimizationResult(best, report, history)


def _tournament(fit: np.ndarray, size: int, rng) -> int:
    picks = rng.integers(0, fit.size, size=size)
    return int(picks[np.argmin(fit[picks])])


def _reflect(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    span = hi - lo
    out = x.copy()
    moving = span > 0
    y = np.mod(x[moving] - lo[moving], 2 * span[moving])
    out[moving] = lo[moving] + np.where(y > span[moving], 2 * span[moving] - y, y)
    out[~moving] = lo[~moving]
    return out


def grid_search(sys: SpinSystem, layout: RegisterLayout, template_id: str, K: int = 1,
                grid_points: int = 50, bounds=DEFAULT_BOUNDS) -> OptimizationResult:
    """Exhaustive evaluation on a regular grid (at most 3 parameters)."""
    if grid_points < 1:
        raise ValueError("grid_points must be positive")
    cfg = OptimizerConfig(bounds=bounds)
    b = _param_bounds(template_id, K, cfg)
    if b.shape[0] > 3:
        raise ValueError(f"grid search is limited to 3 parameters, got {b.shape[0]}")
    axes = [np.linspace(lo, hi, grid_points) for lo, hi in b]
    best, best_fit = None, np.inf
    for point in itertools.product(*axes):
        f = fitness(evaluate(sys, layout, template_id, K, point))
        if f < best_fit:
            best, best_fit = np.array(point), f
    report = evaluate(sys, layout, template_id, K, best)
    return OptimizationResult(best, report, [])
