"""Spanning-tree filtered genetic algorithm for loss-minimizing reconfiguration.

Chromosomes are ordered lists of V-1 distinct branch ids (the closed
branches). Each generation is bred with PMX crossover and a one-edge swap
mutation, then scored in two steps: the radiality filter first, and a power
flow only for the survivors. Invalid individuals get no fitness and are never
chosen as parents.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from functools import cached_property
from pathlib import Path

import numpy as np

from .network import NetworkCase
from .powerflow import VOLTAGE_BAND, solve, voltage_violation
from .topology import Configuration, is_spanning_tree, random_spanning_tree

log = logging.getLogger(__name__)

PENALTY_MODES = ("off", "voltage-penalty")


@dataclass(frozen=True)
class Chromosome:
    genes: tuple[int, ...]

    def __post_init__(self):
        if len(set(self.genes)) != len(self.genes):
            raise ValueError(f"duplicate genes in {self.genes}")

    @cached_property
    def gene_set(self) -> frozenset[int]:
        return frozenset(self.genes)

    def __len__(self):
        return len(self.genes)

    def check(self, case: NetworkCase) -> None:
        if len(self.genes) != case.tree_size:
            raise ValueError(f"chromosome has {len(self.genes)} genes, expected {case.tree_size}")
        if any(not 1 <= g <= case.n_branches for g in self.genes):
            raise ValueError(f"gene outside 1..{case.n_branches}")

    @classmethod
    def from_configuration(cls, config: Configuration) -> Chromosome:
        return cls(tuple(sorted(config.closed)))


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 50
    crossover_rate: float = 0.8
    mutation_rate: float = 0.2
    elite_count: int = 2
    max_generations: int = 200
    stagnation_limit: int = 50
    seed: int = 42
    penalty_mode: str = "off"
    # only used with penalty_mode="voltage-penalty": kW added per pu outside the band
    penalty_kw_per_pu: float = 10_000.0
    voltage_band: tuple[float, float] = VOLTAGE_BAND

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0 <= self.elite_count < self.population_size:
            raise ValueError("elite_count must be in [0, population_size)")
        if self.max_generations < 0 or self.stagnation_limit < 1:
            raise ValueError("max_generations must be >= 0 and stagnation_limit >= 1")
        if self.penalty_mode not in PENALTY_MODES:
            raise ValueError(f"penalty_mode must be one of {', '.join(PENALTY_MODES)}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def replace(self, **changes) -> GAConfig:
        return GAConfig(**{**asdict(self), **changes})

    @classmethod
    def from_file(cls, path) -> GAConfig:
        """Read a JSON object or ``key = value`` lines (``#`` starts a comment)."""
        text = Path(path).read_text()
        if text.lstrip().startswith("{"):
            raw = json.loads(text)
        else:
            raw = {}
            for lineno, line in enumerate(text.splitlines(), start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key = value")
                key, value = (s.strip() for s in line.split("=", 1))
                raw[key.replace("-", "_")] = value
        return cls.from_mapping(raw)

    @classmethod
    def from_mapping(cls, raw: dict) -> GAConfig:
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, value in raw.items():
            if key not in types:
                raise ValueError(f"unknown GA setting '{key}'")
            if key == "voltage_band":
                if isinstance(value, str):
                    value = value.split(",")
                kwargs[key] = tuple(float(v) for v in value)
            elif types[key] == "int":
                kwargs[key] = int(value)
            elif types[key] == "float":
                kwargs[key] = float(value)
            else:
                kwargs[key] = str(value)
        return cls(**kwargs)


@dataclass(frozen=True)
class GenerationStats:
    best_fitness: float
    mean_fitness: float  # over valid individuals
    valid_fraction: float


@dataclass(frozen=True)
class GAResult:
    best: Configuration
    best_loss_kw: float
    best_fitness: float
    history: list[GenerationStats]
    generations_run: int
    evaluations: int  # power-flow solves
    seed: int
    runtime: float = 0.0


def fitness(p_loss_kw: float) -> float:
    """1 / (1 + loss), loss in kW."""
    if p_loss_kw < 0:
        raise ValueError(f"loss must be non-negative, got {p_loss_kw}")
    return 1.0 / (1.0 + p_loss_kw)


@dataclass
class Evaluator:
    """Two-step scoring with a cache keyed on the gene set.

    ``checks``/``passes`` count radiality tests and their successes;
    ``solves`` counts power flows actually run.
    """

    case: NetworkCase
    config: GAConfig = field(default_factory=GAConfig)
    checks: int = 0
    passes: int = 0
    solves: int = 0
    nonconverged: int = 0
    cache: dict = field(default_factory=dict)

    def __call__(self, chromosome: Chromosome) -> float | None:
        return self.score(chromosome)[0]

    def score(self, chromosome: Chromosome) -> tuple[float | None, float | None]:
        """(fitness, real loss kW), or (None, None) for an invalid individual."""
        key = chromosome.gene_set
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        self.checks += 1
        if not is_spanning_tree(self.case, key):
            out = (None, None)
        else:
            self.passes += 1
            self.solves += 1
            result = solve(self.case, key, check=False)
            if not result.converged:
                self.nonconverged += 1
                log.debug("power flow diverged for open set %s; treated as invalid", sorted(set(range(1, self.case.n_branches + 1)) - key))
                out = (None, None)
            else:
                loss = result.p_loss_kw
                penalized = loss
                if self.config.penalty_mode == "voltage-penalty":
                    penalized += self.config.penalty_kw_per_pu * voltage_violation(result, self.config.voltage_band)
                out = (fitness(penalized), loss)
        self.cache[key] = out
        return out


def evaluate(case: NetworkCase, chromosome: Chromosome, config: GAConfig | None = None) -> float | None:
    """Fitness of one chromosome, or None if it is not a spanning tree."""
    return Evaluator(case, config or GAConfig())(chromosome)


def _repair(child: list[int], rng, n_genes: int) -> list[int]:
    seen = set()
    dupes = []
    for pos, g in enumerate(child):
        if g in seen:
            dupes.append(pos)
        seen.add(g)
    if dupes:
        unused = sorted(set(range(1, n_genes + 1)) - seen)
        picks = rng.choice(len(unused), size=len(dupes), replace=False)
        for pos, k in zip(dupes, picks):
            child[pos] = unused[int(k)]
    return child


def _pmx_child(base, donor, lo, hi):
    child = list(base)
    child[lo:hi] = donor[lo:hi]
    mapping = {donor[k]: base[k] for k in range(lo, hi)}
    for pos in list(range(lo)) + list(range(hi, len(base))):
        g = base[pos]
        while g in mapping:
            g = mapping[g]
        child[pos] = g
    return child


def pmx_crossover(parent_a: Chromosome, parent_b: Chromosome, rng, n_genes: int | None = None):
    """Partially matched crossover between two cut points.

    Parents need not share a gene set. The mapping chain already keeps
    children duplicate-free in that case; any duplicate that survives is
    swapped for a random gene missing from the child (alphabet 1..n_genes).
    """
    a, b = parent_a.genes, parent_b.genes
    n = len(a)
    if len(b) != n:
        raise ValueError("parents differ in length")
    lo, hi = sorted(int(c) for c in rng.integers(0, n + 1, size=2))
    if lo == hi:
        return parent_a, parent_b
    if n_genes is None:
        n_genes = max(max(a), max(b))
    child_a = _repair(_pmx_child(a, b, lo, hi), rng, n_genes)
    child_b = _repair(_pmx_child(b, a, lo, hi), rng, n_genes)
    return Chromosome(tuple(child_a)), Chromosome(tuple(child_b))


def mutate(chromosome: Chromosome, case: NetworkCase, rng) -> Chromosome:
    """Swap one closed branch for a random branch from the open complement."""
    outside = sorted(set(range(1, case.n_branches + 1)) - chromosome.gene_set)
    if not outside:
        return chromosome
    genes = list(chromosome.genes)
    pos = int(rng.integers(len(genes)))
    genes[pos] = outside[int(rng.integers(len(outside)))]
    return Chromosome(tuple(genes))


def random_chromosome(case: NetworkCase, rng) -> Chromosome:
    return Chromosome.from_configuration(random_spanning_tree(case, rng))


def elitist_select(population_with_fitness, ga_config: GAConfig, rng, case: NetworkCase):
    """Split the next generation into elites and a roulette-drawn parent pool.

    Returns ``(elites, parents)`` with ``len(elites) + len(parents)`` equal to
    the population size. Invalid individuals (fitness None) are never drawn.
    With no valid individual at all, the parents are fresh random trees.
    """
    size = ga_config.population_size
    valid = [(c, f) for c, f in population_with_fitness if f is not None]
    if not valid:
        return [], [random_chromosome(case, rng) for _ in range(size)]
    ranked = sorted(range(len(valid)), key=lambda k: -valid[k][1])
    elites = [valid[k][0] for k in ranked[: ga_config.elite_count]]
    weights = np.array([f for _, f in valid])
    picks = rng.choice(len(valid), size=size - len(elites), p=weights / weights.sum())
    return elites, [valid[int(k)][0] for k in picks]


def _stats(scores) -> GenerationStats:
    valid = [f for f in scores if f is not None]
    if not valid:
        return GenerationStats(0.0, 0.0, 0.0)
    return GenerationStats(max(valid), float(np.mean(valid)), len(valid) / len(scores))


def run(case: NetworkCase, ga_config: GAConfig | None = None, evaluator: Evaluator | None = None) -> GAResult:
    """Evolve a population of radial configurations and return the best found."""
    cfg = ga_config or GAConfig()
    ev = evaluator or Evaluator(case, cfg)
    rng = np.random.default_rng(cfg.seed)
    start = time.perf_counter()
    size = cfg.population_size

    population = [random_chromosome(case, rng) for _ in range(size)]
    scores = [ev(c) for c in population]
    history = [_stats(scores)]
    best_fit, best = _best_of(population, scores)
    stale = 0
    generation = 0
    while generation < cfg.max_generations and stale < cfg.stagnation_limit:
        generation += 1
        elites, parents = elitist_select(list(zip(population, scores)), cfg, rng, case)
        seen = {c.gene_set for c in population}
        offspring: list[Chromosome] = []
        k = 0
        while len(elites) + len(offspring) < size:
            pa = parents[k % len(parents)]
            pb = parents[(k + 1) % len(parents)]
            k += 2
            if rng.random() < cfg.crossover_rate:
                children = pmx_crossover(pa, pb, rng, case.n_branches)
            else:
                children = (pa, pb)
            for child in children:
                if rng.random() < cfg.mutation_rate:
                    child = mutate(child, case, rng)
                if child.gene_set in seen:
                    child = mutate(child, case, rng)
                seen.add(child.gene_set)
                offspring.append(child)
        population = elites + offspring[: size - len(elites)]
        scores = [ev(c) for c in population]
        history.append(_stats(scores))
        gen_fit, gen_best = _best_of(population, scores)
        if gen_best is not None and (best is None or gen_fit > best_fit):
            best_fit, best = gen_fit, gen_best
            stale = 0
        else:
            stale += 1

    if best is None:
        # only reachable with max_generations=0 and a fully divergent start
        raise RuntimeError("no individual produced a converged power flow")
    loss = ev.score(best)[1]
    return GAResult(
        best=Configuration.from_closed(case, best.gene_set),
        best_loss_kw=loss,
        best_fitness=best_fit,
        history=history,
        generations_run=generation,
        evaluations=ev.solves,
        seed=cfg.seed,
        runtime=time.perf_counter() - start,
    )


def _best_of(population, scores):
    best_fit, best = -1.0, None
    for c, f in zip(population, scores):
        if f is not None and f > best_fit:
            best_fit, best = f, c
    return best_fit, best
