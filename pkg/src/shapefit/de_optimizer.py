"""Bounded Differential Evolution minimizer with iteration tracing.

Implements the classic strategies rand/1/bin (default), rand/1/exp, and
best/1/bin with greedy selection. All randomness comes from one seeded
generator consumed in a fixed order, and trial costs are collected for the
whole population before selection, so runs are reproducible regardless of
how the cost evaluations are carried out.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, TrainingError
from .prob_map import shape_cost_batch
from .shape_model import ShapeModel, ShapeParams, parameter_bounds

logger = logging.getLogger(__name__)

STRATEGIES = ("rand/1/bin", "rand/1/exp", "best/1/bin")
BOUND_MODES = ("clamp", "reflect")


@dataclass
class DEConfig:
    """Optimizer settings.

    F is the difference weight, CR the crossover probability. pop_size
    defaults to 10 times the problem dimension. The search stops when the
    best cost reaches target_cost or after max_generations update cycles.
    """

    strategy: str = "rand/1/bin"
    F: float = 0.5
    CR: float = 0.75
    pop_size: int | None = None
    max_generations: int = 1500
    target_cost: float = 0.05
    seed: int = 0
    bound_handling: str = "clamp"

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if not (0.0 < self.F <= 2.0):
            raise ConfigError(f"F must be in (0, 2], got {self.F}")
        if not (0.0 <= self.CR <= 1.0):
            raise ConfigError(f"CR must be in [0, 1], got {self.CR}")
        if self.pop_size is not None and self.pop_size < 4:
            raise ConfigError(f"pop_size must be at least 4, got {self.pop_size}")
        if self.max_generations < 1:
            raise ConfigError(f"max_generations must be positive, got {self.max_generations}")
        if not math.isfinite(self.target_cost):
            raise ConfigError(f"target_cost must be finite, got {self.target_cost}")
        if self.bound_handling not in BOUND_MODES:
            raise ConfigError(f"unknown bound handling {self.bound_handling!r}")


@dataclass
class DETrace:
    """Per-generation record: best cost, population mean cost, best member.

    Row 0 describes the initial population (generation 0); row g the state
    after g update cycles. Greedy selection makes best_cost non-increasing.
    """

    generation: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    best_cost: np.ndarray = field(default_factory=lambda: np.empty(0))
    mean_cost: np.ndarray = field(default_factory=lambda: np.empty(0))
    best_member: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))

    def save_csv(self, path) -> None:
        dim = self.best_member.shape[1]
        header = "generation,best_cost,mean_cost," + ",".join(f"x{i}" for i in range(dim))
        with open(path, "w", encoding="ascii") as fh:
            fh.write(header + "\n")
            for g, b, m, member in zip(self.generation, self.best_cost,
                                       self.mean_cost, self.best_member):
                coords = ",".join(f"{float(v)!r}" for v in member)
                fh.write(f"{int(g)},{float(b)!r},{float(m)!r},{coords}\n")


def _draw_distinct(rng, pool_size: int, exclude: int, count: int) -> list:
    """`count` distinct indices in [0, pool_size), all different from `exclude`."""
    picked = []
    while len(picked) < count:
        j = int(rng.integers(pool_size))
        if j != exclude and j not in picked:
            picked.append(j)
    return picked


def _reflect(trials, lo, hi):
    span = hi - lo
    y = np.mod(trials - lo, 2.0 * span)
    y = np.where(y > span, 2.0 * span - y, y)
    return lo + y


def de_minimize(cost_fn, bounds, config: DEConfig | None = None, vectorized: bool = False):
    """Minimize a cost function over a box with Differential Evolution.

    cost_fn maps a D-vector to a scalar cost; pass vectorized=True when it
    instead maps an (n, D) array to n costs. Returns (best vector, best cost,
    DETrace).
    """
    config = config or DEConfig()
    config.validate()
    B = np.asarray(bounds, dtype=float)
    if B.ndim != 2 or B.shape[1] != 2 or B.shape[0] < 1:
        raise ConfigError(f"bounds must be a (D, 2) list of (lo, hi) pairs, got shape {B.shape}")
    if not np.all(np.isfinite(B)) or not np.all(B[:, 0] < B[:, 1]):
        raise ConfigError("every bound must satisfy lo < hi with finite endpoints")
    lo, hi = B[:, 0], B[:, 1]
    dim = B.shape[0]
    np_size = config.pop_size if config.pop_size is not None else 10 * dim

    if vectorized:
        evaluate = lambda M: np.asarray(cost_fn(M), dtype=float)
    else:
        evaluate = lambda M: np.asarray([float(cost_fn(m)) for m in M], dtype=float)

    def checked(M):
        c = evaluate(M)
        if c.shape != (M.shape[0],) or not np.all(np.isfinite(c)):
            raise TrainingError("cost function must return one finite cost per member")
        return c

    rng = np.random.default_rng(config.seed)
    pop = lo + rng.random((np_size, dim)) * (hi - lo)
    costs = checked(pop)
    best_i = int(np.argmin(costs))

    gens = [0]
    best_hist = [float(costs[best_i])]
    mean_hist = [float(costs.mean())]
    member_hist = [pop[best_i].copy()]

    use_exp = config.strategy.endswith("/exp")
    use_best = config.strategy.startswith("best/")
    gen = 0
    while costs[best_i] > config.target_cost and gen < config.max_generations:
        gen += 1
        trials = np.empty_like(pop)
        for i in range(np_size):
            if use_best:
                r1, r2 = _draw_distinct(rng, np_size, i, 2)
                mutant = pop[best_i] + config.F * (pop[r1] - pop[r2])
            else:
                r1, r2, r3 = _draw_distinct(rng, np_size, i, 3)
                mutant = pop[r1] + config.F * (pop[r2] - pop[r3])
            if use_exp:
                # Exponential crossover: a contiguous block starting at a
                # random coordinate, extended while draws stay below CR.
                start = int(rng.integers(dim))
                length = 1
                while length < dim and rng.random() < config.CR:
                    length += 1
                mask = np.zeros(dim, dtype=bool)
                mask[(start + np.arange(length)) % dim] = True
            else:
                mask = rng.random(dim) < config.CR
                mask[int(rng.integers(dim))] = True  # at least one mutant coordinate
            trials[i] = np.where(mask, mutant, pop[i])

        if config.bound_handling == "clamp":
            np.clip(trials, lo, hi, out=trials)
        else:
            trials = _reflect(trials, lo, hi)

        trial_costs = checked(trials)
        accept = trial_costs <= costs
        pop[accept] = trials[accept]
        costs[accept] = trial_costs[accept]
        best_i = int(np.argmin(costs))

        gens.append(gen)
        best_hist.append(float(costs[best_i]))
        mean_hist.append(float(costs.mean()))
        member_hist.append(pop[best_i].copy())

    trace = DETrace(generation=np.asarray(gens, dtype=int),
                    best_cost=np.asarray(best_hist),
                    mean_cost=np.asarray(mean_hist),
                    best_member=np.asarray(member_hist))
    logger.debug("de finished at generation %d with best cost %.6g", gen, best_hist[-1])
    return pop[best_i].copy(), float(costs[best_i]), trace


def fit_shape(pmap: np.ndarray, model: ShapeModel, config: DEConfig | None = None):
    """Fit a shape model to a probability map.

    Minimizes the shape cost over the model's fit box and returns
    (ShapeParams, final likelihood, DETrace).
    """
    h, w = pmap.shape
    bounds = parameter_bounds(model, w, h)
    cost = lambda vectors: shape_cost_batch(pmap, model, vectors)
    best, best_cost, trace = de_minimize(cost, bounds, config, vectorized=True)
    return ShapeParams.from_vector(best), 1.0 - best_cost, trace
