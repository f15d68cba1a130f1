"""Genetic algorithm over update-rule genomes.

A genome is a flat real vector over a bounded search space: the global
radius scale R, then per kernel (r, h, mu, sigma), then per kernel the
three ring triples (a, b, w) - 157 genes for the default 12 kernels.
Channel wiring (src, dst per kernel) is sampled once per run from the run
seed, shared by the whole population, and not evolved.

The loop is rank-select / uniform-crossover / point-mutate with elitism.
Evaluation seeds derive from (run seed, generation, slot), so fitness is a
pure function of those plus the genome, and runs reproduce bit-for-bit for
a fixed seed. Elites keep their cached fitness. All selection randomness
is drawn from a single stream in slot order, so parallel evaluation cannot
perturb it.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import complexity, sim

SPACE_VERSION = 1

DEFAULT_BOUNDS = {
    "R": (2.0, 25.0),
    "r": (0.2, 1.0),
    "h": (0.0, 1.0),
    "mu": (0.05, 0.5),
    "sigma": (0.001, 0.18),
    "a": (0.0, 1.0),
    "b": (0.0, 1.0),
    "w": (0.01, 0.5),
}


class InvalidSpace(ValueError):
    """A gene's bounds are empty or inverted."""


class EmptyPopulation(ValueError):
    """Selection from an empty population."""


@dataclass(frozen=True)
class SearchSpace:
    """Named, bounded genes in a fixed layout."""

    names: tuple[str, ...]
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        if len(self.names) != len(self.lower) or len(self.names) != len(self.upper):
            raise InvalidSpace("names and bounds disagree in length")
        if not (self.lower < self.upper).all():
            bad = [self.names[i] for i in np.nonzero(~(self.lower < self.upper))[0]]
            raise InvalidSpace(f"empty bounds for genes {bad}")

    @property
    def size(self) -> int:
        return len(self.names)

    @classmethod
    def default(cls, n_kernels: int = 12, bounds: dict | None = None) -> "SearchSpace":
        b = dict(DEFAULT_BOUNDS)
        if bounds:
            unknown = set(bounds) - set(b)
            if unknown:
                raise InvalidSpace(f"unknown bound names {sorted(unknown)}")
            b.update({k: (float(lo), float(hi)) for k, (lo, hi) in bounds.items()})
        names: list[str] = ["R"]
        lower: list[float] = [b["R"][0]]
        upper: list[float] = [b["R"][1]]
        for k in range(n_kernels):
            for g in ("r", "h", "mu", "sigma"):
                names.append(f"k{k:02d}.{g}")
                lower.append(b[g][0])
                upper.append(b[g][1])
        for k in range(n_kernels):
            for j in range(3):
                for g in ("a", "b", "w"):
                    names.append(f"k{k:02d}.ring{j}.{g}")
                    lower.append(b[g][0])
                    upper.append(b[g][1])
        return cls(tuple(names), np.array(lower), np.array(upper))


def sample_genome(space: SearchSpace, rng: np.random.Generator) -> np.ndarray:
    """Genome with every gene i.i.d. uniform within its bounds."""
    return rng.uniform(space.lower, space.upper)


def sample_wiring(rng: np.random.Generator, n_kernels: int, channels: int) -> np.ndarray:
    """(n_kernels, 2) array of uniform (src, dst) channel pairs."""
    return rng.integers(0, channels, size=(n_kernels, 2), dtype=np.int64)


def decode_genome(
    genes: np.ndarray,
    wiring: np.ndarray,
    dynamics: sim.DynamicsParams | None = None,
) -> sim.UpdateRule:
    """Build an update rule from a genome and its wiring table."""
    n_k = len(wiring)
    if len(genes) != 1 + 13 * n_k:
        raise ValueError(f"genome length {len(genes)} does not fit {n_k} kernels")
    kernels = []
    rings_base = 1 + 4 * n_k
    for k in range(n_k):
        r, h, mu, sigma = genes[1 + 4 * k : 5 + 4 * k]
        ring_vals = genes[rings_base + 9 * k : rings_base + 9 * (k + 1)]
        rings = tuple(
            sim.Ring(float(ring_vals[3 * j]), float(ring_vals[3 * j + 1]), float(ring_vals[3 * j + 2]))
            for j in range(3)
        )
        kernels.append(
            sim.KernelSpec(
                r=float(r),
                h=float(h),
                mu=float(mu),
                sigma=float(sigma),
                rings=rings,
                src=int(wiring[k][0]),
                dst=int(wiring[k][1]),
            )
        )
    return sim.UpdateRule(
        R=float(genes[0]),
        kernels=tuple(kernels),
        dynamics=dynamics if dynamics is not None else sim.DynamicsParams(),
    )


def save_genome(path, genes: np.ndarray, space: SearchSpace, wiring: np.ndarray) -> None:
    """Write the genome file: {space_version, gene_names, genes, wiring}."""
    doc = {
        "space_version": SPACE_VERSION,
        "gene_names": list(space.names),
        "genes": [float(g) for g in genes],
        "wiring": [[int(s), int(d)] for s, d in wiring],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_genome(path) -> tuple[np.ndarray, list[str], np.ndarray]:
    """Read a genome file; returns (genes, gene_names, wiring)."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("space_version") != SPACE_VERSION:
        raise ValueError(f"{path}: unsupported space_version {doc.get('space_version')}")
    genes = np.asarray(doc["genes"], dtype=np.float64)
    wiring = np.asarray(doc["wiring"], dtype=np.int64)
    return genes, list(doc["gene_names"]), wiring


# ------------------------------------------------------------------ operators


def rank_select(fitnesses, rng: np.random.Generator) -> int:
    """Draw an index by linear rank: p_i = (N - rank_i) / (N (N + 1) / 2).

    Lower fitness is better; ties rank the lower index first.
    """
    f = np.asarray(fitnesses, dtype=np.float64)
    n = len(f)
    if n == 0:
        raise EmptyPopulation("cannot select from an empty population")
    order = np.argsort(f, kind="stable")
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = np.arange(n)
    weights = (n - ranks).astype(np.float64)
    return int(rng.choice(n, p=weights / weights.sum()))


def rank_probabilities(fitnesses) -> np.ndarray:
    """Selection probabilities used by rank_select (for inspection/tests)."""
    f = np.asarray(fitnesses, dtype=np.float64)
    n = len(f)
    if n == 0:
        raise EmptyPopulation("cannot select from an empty population")
    order = np.argsort(f, kind="stable")
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = np.arange(n)
    weights = (n - ranks).astype(np.float64)
    return weights / weights.sum()


def uniform_crossover(a: np.ndarray, b: np.ndarray, gene_prob: float, rng: np.random.Generator) -> np.ndarray:
    """Child takes each gene from `a` with probability gene_prob, else `b`."""
    mask = rng.random(len(a)) < gene_prob
    return np.where(mask, a, b)


def point_mutate(genes: np.ndarray, rate: float, space: SearchSpace, rng: np.random.Generator) -> np.ndarray:
    """Each gene is independently resampled uniformly in bounds with
    probability `rate`; the rng always consumes 2n draws."""
    mask = rng.random(len(genes)) < rate
    fresh = rng.uniform(space.lower, space.upper)
    return np.where(mask, fresh, genes)


# ------------------------------------------------------------------ evaluation


@dataclass(frozen=True)
class WorldParams:
    H: int = 256
    W: int = 256
    C: int = 3
    patch: int = 64


@dataclass(frozen=True)
class EvolutionConfig:
    T: float
    S: int = 4
    population_size: int = 50
    generations: int = 50
    mutation_rate: float = 0.05
    crossover_gene_prob: float = 0.5
    elite_count: int = 1
    rollout_steps: int = 2000
    world: WorldParams = field(default_factory=WorldParams)
    seed: int = 0
    workers: int = 1
    n_kernels: int = 12
    bounds: dict = field(default_factory=dict)
    dynamics: sim.DynamicsParams = field(default_factory=sim.DynamicsParams)

    def validate(self) -> None:
        if not 0.0 <= self.T:
            raise ValueError(f"T must be >= 0, got {self.T}")
        if self.S < 0:
            raise ValueError(f"S must be >= 0, got {self.S}")
        if self.population_size < 2:
            raise ValueError(f"population_size must be >= 2, got {self.population_size}")
        if self.generations < 0:
            raise ValueError(f"generations must be >= 0, got {self.generations}")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError(f"mutation_rate must be in [0, 1], got {self.mutation_rate}")
        if not 0.0 <= self.crossover_gene_prob <= 1.0:
            raise ValueError(f"crossover_gene_prob must be in [0, 1], got {self.crossover_gene_prob}")
        if not 0 <= self.elite_count < self.population_size:
            raise ValueError(f"elite_count must be in [0, population_size), got {self.elite_count}")
        if self.rollout_steps < 0:
            raise ValueError(f"rollout_steps must be >= 0, got {self.rollout_steps}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        side = 1 << self.S
        if self.world.H % side or self.world.W % side:
            raise ValueError(f"world {self.world.H}x{self.world.W} not divisible by 2^{self.S}")
        if min(self.world.H, self.world.W) < self.world.patch or self.world.patch < 0:
            raise ValueError(f"patch {self.world.patch} does not fit the world")
        SearchSpace.default(self.n_kernels, self.bounds)  # raises InvalidSpace on bad bounds


def init_seed(run_seed: int, generation: int, slot: int) -> np.random.SeedSequence:
    """Deterministic per-evaluation seed for the initial state."""
    return np.random.SeedSequence(entropy=run_seed, spawn_key=(generation, slot))


def evaluate(
    genes: np.ndarray,
    config: EvolutionConfig,
    wiring: np.ndarray,
    generation: int,
    slot: int,
) -> tuple[float, np.ndarray]:
    """Rollout + complexity scoring; returns (fitness, profile).

    Pure in (genes, config, wiring, generation, slot): the initial state is
    seeded from (run seed, generation, slot).
    """
    rule = decode_genome(genes, wiring, config.dynamics)
    world = config.world
    state = sim.init_state(
        init_seed(config.seed, generation, slot), world.H, world.W, world.C, world.patch
    )
    final = sim.run(rule, state, config.rollout_steps)
    profile = complexity.complexity_profile(final, config.S)
    return complexity.fitness(profile, config.T), profile


def _evaluate_task(args) -> tuple[int, float, list[float]]:
    slot, genes, config, wiring, generation = args
    fit, profile = evaluate(genes, config, wiring, generation, slot)
    return slot, fit, [float(v) for v in profile]


# ------------------------------------------------------------------ the loop


@dataclass
class Individual:
    genes: np.ndarray
    fitness: float = float("nan")
    profile: np.ndarray | None = None
    eval_gen: int = -1
    eval_slot: int = -1

    @property
    def c0(self) -> float:
        return float(self.profile[0])

    @property
    def ident(self) -> str:
        return f"g{self.eval_gen}s{self.eval_slot}"


@dataclass(frozen=True)
class GenerationStats:
    gen: int
    best_fit: float
    mean_fit: float
    min_fit: float
    max_fit: float
    best_c0: float
    mean_c0: float
    min_c0: float
    max_c0: float
    best_id: str


STATS_HEADER = "gen,best_fit,mean_fit,min_fit,max_fit,best_c0,mean_c0,min_c0,max_c0,best_id"


def _stats_of(pop: list[Individual], gen: int) -> GenerationStats:
    fits = np.array([ind.fitness for ind in pop])
    c0s = np.array([ind.c0 for ind in pop])
    best = int(np.argmin(fits))
    return GenerationStats(
        gen=gen,
        best_fit=float(fits[best]),
        mean_fit=float(fits.mean()),
        min_fit=float(fits.min()),
        max_fit=float(fits.max()),
        best_c0=float(pop[best].c0),
        mean_c0=float(c0s.mean()),
        min_c0=float(c0s.min()),
        max_c0=float(c0s.max()),
        best_id=pop[best].ident,
    )


def stats_csv_row(s: GenerationStats) -> str:
    return ",".join(
        [
            str(s.gen),
            repr(s.best_fit),
            repr(s.mean_fit),
            repr(s.min_fit),
            repr(s.max_fit),
            repr(s.best_c0),
            repr(s.mean_c0),
            repr(s.min_c0),
            repr(s.max_c0),
            s.best_id,
        ]
    )


def write_stats_csv(path, history: list[GenerationStats]) -> None:
    with open(path, "w") as fh:
        fh.write(STATS_HEADER + "\n")
        for s in history:
            fh.write(stats_csv_row(s) + "\n")


def next_generation(
    genomes: list[np.ndarray],
    fitnesses,
    config: EvolutionConfig,
    space: SearchSpace,
    rng: np.random.Generator,
) -> tuple[list[np.ndarray], list[int]]:
    """One generational turnover; returns (new genomes, elite source indices).

    The elite_count best individuals (ties to the lower index) are copied
    unchanged to the front; the rest are bred by rank selection of two
    distinct parents, uniform crossover, and point mutation.
    """
    n = len(genomes)
    order = np.argsort(np.asarray(fitnesses, dtype=np.float64), kind="stable")
    elite_idx = [int(i) for i in order[: config.elite_count]]
    out = [genomes[i].copy() for i in elite_idx]
    while len(out) < n:
        p1 = rank_select(fitnesses, rng)
        p2 = p1
        while p2 == p1 and n > 1:
            p2 = rank_select(fitnesses, rng)
        child = uniform_crossover(genomes[p1], genomes[p2], config.crossover_gene_prob, rng)
        child = point_mutate(child, config.mutation_rate, space, rng)
        out.append(child)
    return out, elite_idx


@dataclass
class EvolveResult:
    history: list[GenerationStats]
    population: list[Individual]
    wiring: np.ndarray
    space: SearchSpace
    c0_initial: list[float]

    @property
    def c0_final(self) -> list[float]:
        return [ind.c0 for ind in self.population]

    @property
    def fitnesses(self) -> list[float]:
        return [ind.fitness for ind in self.population]


def _evaluate_slots(
    pop: list[Individual],
    slots: list[int],
    config: EvolutionConfig,
    wiring: np.ndarray,
    generation: int,
    pool: ProcessPoolExecutor | None,
) -> None:
    tasks = [(s, pop[s].genes, config, wiring, generation) for s in slots]
    if pool is None:
        results = map(_evaluate_task, tasks)
    else:
        results = pool.map(_evaluate_task, tasks)
    for slot, fit, profile in results:
        pop[slot].fitness = fit
        pop[slot].profile = np.asarray(profile)
        pop[slot].eval_gen = generation
        pop[slot].eval_slot = slot


def evolve(config: EvolutionConfig, on_generation=None) -> EvolveResult:
    """Run the full generational loop; deterministic for a fixed seed.

    `on_generation(gen, population, wiring)` fires after each generation's
    evaluation (including generation 0).
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    wiring = sample_wiring(rng, config.n_kernels, config.world.C)
    space = SearchSpace.default(config.n_kernels, config.bounds)

    pop = [Individual(sample_genome(space, rng)) for _ in range(config.population_size)]
    pool = ProcessPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        _evaluate_slots(pop, list(range(len(pop))), config, wiring, 0, pool)
        history = [_stats_of(pop, 0)]
        c0_initial = [ind.c0 for ind in pop]
        if on_generation is not None:
            on_generation(0, pop, wiring)

        for gen in range(1, config.generations + 1):
            genomes = [ind.genes for ind in pop]
            fits = [ind.fitness for ind in pop]
            new_genomes, elite_idx = next_generation(genomes, fits, config, space, rng)
            new_pop = [replace(pop[i]) for i in elite_idx]  # cached fitness kept
            new_pop += [Individual(g) for g in new_genomes[len(elite_idx) :]]
            _evaluate_slots(
                new_pop, list(range(len(elite_idx), len(new_pop))), config, wiring, gen, pool
            )
            pop = new_pop
            history.append(_stats_of(pop, gen))
            if on_generation is not None:
                on_generation(gen, pop, wiring)
    finally:
        if pool is not None:
            pool.shutdown()

    return EvolveResult(
        history=history, population=pop, wiring=wiring, space=space, c0_initial=c0_initial
    )
