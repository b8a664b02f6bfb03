"""Deadline-aware evolutionary search over device configurations.

The search is intrinsic: every candidate must be programmed onto the one
physical device and tested there, so every fitness call charges the timing
ledger with programming time plus the full test window.  The generational
loop stops on the first function-restoring candidate (when asked to), at the
generation cap, or immediately before the evaluation whose completion would
overrun the recovery deadline -- the budget is never overshot by even one
evaluation.  Runs are fully deterministic for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from .benchmarks import Benchmark, BenchmarkMismatch, EvalResult, evaluate
from .devices import Configuration, DeviceProfile, FaultSpec, pack_bits
from .ledger import TimeLedger


class EvolutionError(ValueError):
    pass


@dataclass(frozen=True)
class Tournament:
    """Best-of-k selection; draws k distinct contenders per parent."""

    k: int = 3

    def __post_init__(self) -> None:
        if self.k < 1:
            raise EvolutionError("tournament size must be >= 1")


@dataclass(frozen=True)
class Truncation:
    """Keep only the top fraction of the population as parents."""

    fraction: float = 0.25

    def __post_init__(self) -> None:
        if not 0 < self.fraction <= 1:
            raise EvolutionError("truncation fraction must lie in (0, 1]")


@dataclass(frozen=True)
class RouletteWheel:
    """Selection probability proportional to (worst - fitness + epsilon)."""

    epsilon: float = 1e-12


Selection = Union[Tournament, Truncation, RouletteWheel]


class Preset(Enum):
    # high selection pressure, mutation-only reproduction: the profile that
    # suits single-device reconfiguration searches
    RECOMMENDED = "recommended"
    # generational GA with crossover, the classic textbook arrangement
    PLAIN_GA = "plain-ga"


class Termination(Enum):
    SUCCESS = "success"
    GENERATION_CAP = "generation-cap"
    DEADLINE_EXHAUSTED = "deadline-exhausted"


@dataclass(frozen=True)
class EAParams:
    """Search knobs.  The ``RECOMMENDED`` preset forces truncation selection
    at fraction <= 0.25 and crossover-free, mutation-only reproduction."""

    population_size: int = 100
    max_generations: int = 500
    selection: Selection = field(default_factory=RouletteWheel)
    mutation_rate: float = 0.01
    crossover_rate: float = 0.7
    elitism: int = 1
    rng_seed: int = 0
    stop_on_success: bool = False
    seed_baseline: bool = False
    preset: Optional[Preset] = None

    def __post_init__(self) -> None:
        if self.preset is Preset.RECOMMENDED:
            selection = self.selection
            if not (isinstance(selection, Truncation) and selection.fraction <= 0.25):
                selection = Truncation(0.25)
            object.__setattr__(self, "selection", selection)
            object.__setattr__(self, "crossover_rate", 0.0)
        if self.population_size < 1:
            raise EvolutionError("population size must be >= 1")
        if self.max_generations < 1:
            raise EvolutionError("max generations must be >= 1")
        if not 0 < self.mutation_rate < 1:
            raise EvolutionError("mutation rate must lie in (0, 1)")
        if not 0 <= self.crossover_rate <= 1:
            raise EvolutionError("crossover rate must lie in [0, 1]")
        if not 0 <= self.elitism < self.population_size:
            raise EvolutionError("elitism must lie in [0, population size)")

    @property
    def mutation_only(self) -> bool:
        return self.preset is Preset.RECOMMENDED


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best_fitness: float
    mean_fitness: float
    cumulative_ns: int


@dataclass(frozen=True, eq=False)
class RunResult:
    best: Configuration
    best_fitness: float
    logically_correct: bool
    generations_executed: int
    evaluations: int
    ledger: TimeLedger
    termination: Termination
    history: tuple[GenerationStats, ...]
    best_eval: EvalResult


def select(
    fitnesses: Sequence[float],
    method: Selection,
    rng: np.random.Generator,
    count: int,
) -> np.ndarray:
    """Draw ``count`` parent indices from a scored population (lower is better).

    Ties always resolve toward the lower index, so equal-fitness shuffles
    cannot change the outcome.
    """
    f = np.asarray(fitnesses, dtype=float)
    n = len(f)
    if n == 0:
        raise EvolutionError("cannot select from an empty population")
    order = np.argsort(f, kind="stable")

    if isinstance(method, Truncation):
        survivors = order[: max(1, math.ceil(method.fraction * n))]
        return survivors[rng.integers(0, len(survivors), size=count)]

    if isinstance(method, Tournament):
        k = min(method.k, n)
        picks = np.empty(count, dtype=np.int64)
        for i in range(count):
            contenders = rng.choice(n, size=k, replace=False)
            picks[i] = min(contenders, key=lambda c: (f[c], c))
        return picks

    weights = (np.max(f) - f) + method.epsilon
    return rng.choice(n, size=count, p=weights / weights.sum())


def _mutate_inplace(
    children: np.ndarray, rate: float, rng: np.random.Generator
) -> None:
    """Independent per-bit flips at ``rate``.

    Sampled as flip-count ~ Binomial(length, rate) plus a uniform distinct
    position set, which is the same distribution as per-bit coin flips but
    costs O(flips) instead of O(length) random draws.
    """
    length = children.shape[1]
    for row in children:
        flips = rng.binomial(length, rate)
        if flips:
            positions = rng.choice(length, size=flips, replace=False)
            row[positions] ^= 1


def reproduce(
    parents: np.ndarray, params: EAParams, rng: np.random.Generator
) -> np.ndarray:
    """Breed offspring bit-rows from parent bit-rows.

    Mutation-only presets clone each parent and flip bits.  Otherwise parents
    are consumed pairwise: single-point crossover at ``crossover_rate``
    (else a clone of the first parent), then per-bit mutation.
    """
    parents = np.atleast_2d(np.asarray(parents, dtype=np.uint8))
    length = parents.shape[1]
    if params.mutation_only:
        children = parents.copy()
    else:
        if parents.shape[0] % 2:
            raise EvolutionError("pairwise reproduction needs an even parent count")
        count = parents.shape[0] // 2
        children = np.empty((count, length), dtype=np.uint8)
        for j in range(count):
            first, second = parents[2 * j], parents[2 * j + 1]
            children[j] = first
            if length >= 2 and rng.random() < params.crossover_rate:
                point = int(rng.integers(1, length))
                children[j, point:] = second[point:]
    _mutate_inplace(children, params.mutation_rate, rng)
    return children


def run(
    params: EAParams,
    benchmark: Benchmark,
    device: DeviceProfile,
    faults: Sequence[FaultSpec] = (),
    deadline_ns: Optional[int] = None,
    baseline: Optional[Configuration] = None,
) -> RunResult:
    """Run the reconfiguration search, charging every evaluation to the ledger."""
    decode_map = benchmark.decode_map_for(device)
    length = decode_map.total_bits
    if baseline is not None and len(baseline.bits) * 8 != length:
        raise BenchmarkMismatch("baseline configuration does not fit the device")

    rng = np.random.default_rng(params.rng_seed)
    population = rng.integers(0, 2, size=(params.population_size, length), dtype=np.uint8)
    if params.seed_baseline and baseline is not None:
        population[0] = baseline.bit_array()

    ledger = TimeLedger()
    cost_ns = device.t_program_ns + benchmark.test_window_ns
    faults = tuple(faults)

    best_bits: Optional[bytes] = None
    best_eval: Optional[EvalResult] = None
    generations_executed = 0
    evaluations = 0
    history: list[GenerationStats] = []
    termination: Optional[Termination] = None

    for generation in range(1, params.max_generations + 1):
        fitnesses = np.empty(params.population_size)
        evaluated = 0
        for i in range(params.population_size):
            if deadline_ns is not None and ledger.total_ns + cost_ns > deadline_ns:
                termination = Termination.DEADLINE_EXHAUSTED
                break
            config = Configuration(device, pack_bits(population[i]), decode_map)
            result = evaluate(benchmark, config, faults)
            ledger.charge(device.t_program_ns, benchmark.test_window_ns)
            evaluations += 1
            if evaluated == 0:
                generations_executed = generation
            fitnesses[i] = result.fitness
            evaluated += 1
            if best_eval is None or result.fitness < best_eval.fitness:
                best_bits = config.bits
                best_eval = result
            if params.stop_on_success and result.logically_correct:
                termination = Termination.SUCCESS
                break
        if evaluated:
            history.append(
                GenerationStats(
                    generation=generation,
                    best_fitness=float(np.min(fitnesses[:evaluated])),
                    mean_fitness=float(np.mean(fitnesses[:evaluated])),
                    cumulative_ns=ledger.total_ns,
                )
            )
        if termination is not None:
            break
        if generation == params.max_generations:
            termination = Termination.GENERATION_CAP
            break

        order = np.argsort(fitnesses, kind="stable")
        elites = population[order[: params.elitism]].copy()
        offspring_count = params.population_size - params.elitism
        parents_per_child = 1 if params.mutation_only else 2
        parent_indices = select(
            fitnesses, params.selection, rng, parents_per_child * offspring_count
        )
        offspring = reproduce(population[parent_indices], params, rng)
        population = np.concatenate([elites, offspring]) if params.elitism else offspring

    if best_eval is None:
        # zero budget: nothing was evaluated; report the unevaluated first candidate
        best_bits = pack_bits(population[0])
        best_eval = EvalResult(
            fitness=math.inf, logically_correct=False, t_eval_ns=benchmark.test_window_ns
        )

    best_config = Configuration(device, best_bits, decode_map)
    return RunResult(
        best=best_config,
        best_fitness=best_eval.fitness,
        logically_correct=best_eval.logically_correct,
        generations_executed=generations_executed,
        evaluations=evaluations,
        ledger=ledger,
        termination=termination,
        history=tuple(history),
        best_eval=best_eval,
    )
