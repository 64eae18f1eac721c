"""Genetic algorithm over lighting schedules.

A chromosome is an (H, 2) integer array of hourly (red, blue) levels in
1..10 (the GA alphabet excludes "off").  Fitness is revenue from the
simulated final leaf area minus electricity cost, with a linear penalty
when the final area falls short of the contract minimum.  Selection is
truncation (top half survives), children come from k-point crossover of
random parent pairs followed by a fixed number of gene mutations.

All random draws happen in the serial generation loop, so traces are
reproducible regardless of how fitness evaluation is batched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import economics
from .growth import forward_raw

GENE_MIN = 1
GENE_MAX = 10


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class GaParams:
    population_size: int = 100
    parent_count: int = 50
    crossover_points: int = 6
    mutations_per_child: int = 20
    generations: int = 300
    seed: int = 0

    def __post_init__(self):
        if self.parent_count > self.population_size:
            raise ValueError("parent_count exceeds population_size")
        if self.parent_count < 2:
            raise ValueError("need at least 2 parents")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if min(self.crossover_points, self.mutations_per_child) < 0:
            raise ValueError("negative GA parameter")


@dataclass
class FitnessContext:
    growth_model: object
    power_model: object
    tariff_plan: object
    price_per_area: float = 0.0  # cents per cm^2 per plant
    plants_per_panel: int = 20
    min_final_area: float = 400.0
    initial_leaf_area: float = 5.0
    ec: float = 1800.0
    ph: float = 6.5
    horizon: int = economics.HORIZON_HOURS
    shortfall_penalty: float = 10.0  # cents per cm^2 below the minimum

    def __post_init__(self):
        if self.price_per_area < 0:
            raise ValueError("price_per_area must be >= 0")
        if self.plants_per_panel < 1:
            raise ValueError("plants_per_panel must be >= 1")
        if self.min_final_area <= 0:
            raise ValueError("min_final_area must be positive")


def validate_chromosome(genes):
    genes = np.asarray(genes)
    if genes.ndim != 2 or genes.shape[1] != 2:
        raise EncodingError(f"expected (H, 2) genes, got shape {genes.shape}")
    if genes.min() < GENE_MIN or genes.max() > GENE_MAX:
        raise EncodingError(f"gene outside {GENE_MIN}..{GENE_MAX}")
    return genes.astype(np.int64)


def decode_chromosome(genes):
    """Per-hour (red, blue) PPFD in umol/m2s for a 1..10 level chromosome."""
    genes = validate_chromosome(genes)
    return genes * np.array(
        [economics.RED_PPFD_PER_LEVEL, economics.BLUE_PPFD_PER_LEVEL]
    )


def chromosome_to_schedule(genes):
    return economics.LightSchedule(levels=tuple(map(tuple, validate_chromosome(genes))))


def fitness_batch(population, ctx):
    """Fitness for a (B, H, 2) stack of chromosomes, vectorized."""
    pop = np.asarray(population, dtype=float)
    b, h, _ = pop.shape
    ppfd = pop * np.array([economics.RED_PPFD_PER_LEVEL, economics.BLUE_PPFD_PER_LEVEL])
    hours = np.arange(h)
    x = np.column_stack(
        [
            ppfd[:, :, 0].ravel(),
            ppfd[:, :, 1].ravel(),
            np.full(b * h, ctx.ec),
            np.full(b * h, ctx.ph),
            np.tile(hours / 24.0, b),
        ]
    )
    f = forward_raw(ctx.growth_model, x).reshape(b, h)
    final_area = ctx.initial_leaf_area + np.exp(f).sum(axis=1)

    pm = ctx.power_model
    watts = pm.standby_watts + pop[:, :, 0] * pm.red_watts_per_unit + pop[:, :, 1] * pm.blue_watts_per_unit
    rates = np.array(ctx.tariff_plan.hourly_rates())[hours % 24]
    cost = (watts / 1000.0 * rates).sum(axis=1)

    revenue = ctx.price_per_area * final_area * ctx.plants_per_panel
    shortfall = np.maximum(ctx.min_final_area - final_area, 0.0)
    fit = revenue - cost - ctx.shortfall_penalty * shortfall
    return np.where(np.isfinite(fit), fit, -np.inf)


def fitness(genes, ctx):
    """Fitness of one chromosome (cents); non-finite roll-outs score -inf."""
    genes = validate_chromosome(genes)
    return float(fitness_batch(genes[None, :, :], ctx)[0])


def crossover(a, b, points, rng):
    """k-point crossover: alternate segments of a and b at distinct cuts."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise EncodingError("parent length mismatch")
    h = a.shape[0]
    if points >= h:
        raise EncodingError("crossover points must be < chromosome length")
    if points == 0:
        return a.copy()
    cuts = np.sort(rng.choice(np.arange(1, h), size=points, replace=False))
    child = a.copy()
    take_b = False
    bounds = np.concatenate([[0], cuts, [h]])
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if take_b:
            child[lo:hi] = b[lo:hi]
        take_b = not take_b
    return child


def mutate(genes, count, rng):
    """Resample exactly `count` gene components uniformly from the alphabet."""
    genes = np.asarray(genes)
    flat = genes.copy().ravel()
    if count > flat.size:
        raise ValueError("mutation count exceeds component count")
    if count == 0:
        return genes.copy()
    idx = rng.choice(flat.size, size=count, replace=False)
    flat[idx] = rng.integers(GENE_MIN, GENE_MAX + 1, size=count)
    return flat.reshape(genes.shape)


@dataclass
class GaTrace:
    best_fitness: list = field(default_factory=list)
    mean_fitness: list = field(default_factory=list)
    best_chromosomes: list = field(default_factory=list)


def evolve(ctx, params=None, initial_population=None):
    """Run the GA; returns (best chromosome, per-generation trace).

    The best-ever individual is never lost: survivors are the top-ranked
    half of each generation, which always includes it.
    """
    params = params or GaParams()
    h = ctx.horizon
    rng = np.random.default_rng(params.seed)
    # tiny horizons cap the operators rather than reject Table-style defaults
    eff_points = min(params.crossover_points, h - 1)
    # keep inheritance meaningful on short chromosomes: never resample more
    # than a tenth of the components per child
    eff_mutations = min(params.mutations_per_child, max(1, (2 * h) // 10))

    if initial_population is not None:
        pop = np.asarray(initial_population, dtype=np.int64)
        if pop.shape != (params.population_size, h, 2):
            raise EncodingError(f"initial population shape {pop.shape} mismatch")
    else:
        pop = rng.integers(GENE_MIN, GENE_MAX + 1, size=(params.population_size, h, 2))
    fit = fitness_batch(pop, ctx)
    trace = GaTrace()
    n_children = params.population_size - params.parent_count

    for _ in range(params.generations):
        order = np.argsort(-fit, kind="stable")
        parents = pop[order[: params.parent_count]]
        parent_fit = fit[order[: params.parent_count]]

        children = np.empty((n_children, h, 2), dtype=np.int64)
        for c in range(n_children):
            i = int(rng.integers(params.parent_count))
            j = int(rng.integers(params.parent_count - 1))
            if j >= i:
                j += 1
            child = crossover(parents[i], parents[j], eff_points, rng)
            children[c] = mutate(child, eff_mutations, rng)

        child_fit = fitness_batch(children, ctx) if n_children else np.empty(0)
        pop = np.concatenate([parents, children])
        fit = np.concatenate([parent_fit, child_fit])

        best_idx = int(np.argmax(fit))
        trace.best_fitness.append(float(fit[best_idx]))
        trace.mean_fitness.append(float(fit.mean()))
        trace.best_chromosomes.append(pop[best_idx].copy())

    return trace.best_chromosomes[-1], trace


def enumerate_optimum(ctx, batch=2000):
    """Exhaustive search over every chromosome; only viable for tiny horizons."""
    h = ctx.horizon
    n_genes = 10 ** (2 * h)
    best_fit = -np.inf
    best = None
    buf = []
    def flush():
        nonlocal best_fit, best
        if not buf:
            return
        arr = np.array(buf)
        fits = fitness_batch(arr, ctx)
        i = int(np.argmax(fits))
        if fits[i] > best_fit:
            best_fit = float(fits[i])
            best = arr[i]
        buf.clear()

    for code in range(n_genes):
        digits = []
        c = code
        for _ in range(2 * h):
            digits.append(c % 10 + 1)
            c //= 10
        buf.append(np.array(digits).reshape(h, 2))
        if len(buf) >= batch:
            flush()
    flush()
    return best, best_fit
