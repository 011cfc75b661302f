"""Genetic search over generator genomes.

Each genome is scored by training a fresh predictor on the masks it
produces (the genome itself is never touched by gradients). Selection
uses roulette-wheel sampling, recombination one-point crossover plus
Gaussian mutation, and survival keeps the best half and samples the
rest.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .data import SequenceData
from .exceptions import ConfigurationError
from .rationalizer import GeneratorNet, InnerConfig, RegularizerConfig, batch_omega, train_predictor

logger = logging.getLogger(__name__)

FITNESS_MODES = ("goodness", "literal_eq8")

# independent random streams derived from the master seed
_STREAM_INIT = 1
_STREAM_OPERATORS = 2
_STREAM_EVAL = 3
_STREAM_SKEW = 4


@dataclass
class GAConfig:
    population_size: int = 50
    generations: int = 100
    p_mut: float = 1.0
    p_cross: float = 1.0
    p_select: float = 0.5
    p_survive: float = 0.5
    mut_sigma: float = 0.05
    tau: float = 0.1
    eps_hat: float = 1e-8
    inner: InnerConfig = field(default_factory=InnerConfig)
    regularizer: RegularizerConfig = field(default_factory=RegularizerConfig)
    hidden_size: int = 8
    master_seed: int = 0
    patience: int = 25
    tol: float = 1e-6
    fitness_mode: str = "goodness"

    def validate(self) -> None:
        I = self.population_size
        if I < 2 or I % 2:
            raise ConfigurationError("population_size must be even and >= 2")
        if self.generations < 0:
            raise ConfigurationError("generations must be >= 0")
        for name in ("p_mut", "p_cross", "p_select", "p_survive"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1]")
        if self.mut_sigma <= 0:
            raise ConfigurationError("mut_sigma must be positive")
        if self.tau is None or self.tau <= 0:
            raise ConfigurationError("tau must be positive")
        if self.eps_hat <= 0:
            raise ConfigurationError("eps_hat must be positive")
        if self.fitness_mode not in FITNESS_MODES:
            raise ConfigurationError(f"fitness_mode must be one of {FITNESS_MODES}")
        if self.patience < 1:
            raise ConfigurationError("patience must be >= 1")
        self.inner.validate()
        self.regularizer.validate()


@dataclass(frozen=True)
class FitnessReport:
    l_t: float
    omega: float
    goodness: float
    feasible: bool
    h_tilde: float
    h: float

    def fitness(self, mode: str = "goodness") -> float:
        return self.goodness if mode == "goodness" else self.h


def compute_fitness(l_t: float, omega: float, tau: float, eps_hat: float = 1e-8) -> FitnessReport:
    """Feasibility-gated score of a (task loss, regularizer) pair.

    ``goodness`` is the geometric mean of (1 - omega) and (1 - min(l_t, 1))
    when ``l_t < tau`` and 0 otherwise. ``h_tilde`` and ``h`` are the
    literal cost and its reciprocal, kept for logging and the
    ``literal_eq8`` selection mode.
    """
    if not (math.isfinite(l_t) and math.isfinite(omega)):
        return FitnessReport(float(l_t), float(omega), 0.0, False, 0.0, 1.0 / eps_hat)
    feasible = bool(l_t < tau)
    if feasible:
        goodness = math.sqrt((1.0 - omega) * (1.0 - min(l_t, 1.0)))
        h_tilde = 1.0 - goodness
    else:
        goodness = 0.0
        h_tilde = 0.0
    return FitnessReport(float(l_t), float(omega), goodness, feasible, h_tilde, 1.0 / (h_tilde + eps_hat))


@dataclass
class Individual:
    genome: np.ndarray
    report: Optional[FitnessReport] = None
    birth_generation: int = 0
    id: int = -1
    slot: int = 0  # position within its generation; with birth_generation it fixes the eval seed

    def fitness(self, mode: str = "goodness") -> float:
        if self.report is None:
            raise ConfigurationError(f"individual {self.id} has not been evaluated")
        return self.report.fitness(mode)


class EvaluationContext:
    """Everything needed to score a genome; shared read-only by workers."""

    def __init__(self, gen: GeneratorNet, train: SequenceData, fit_split: SequenceData,
                 num_classes: int, cfg: GAConfig):
        if len(train) == 0 or len(fit_split) == 0:
            raise ConfigurationError("training and fitness splits must be non-empty")
        self.gen = gen
        self.train = train
        self.fit_split = fit_split
        self.num_classes = int(num_classes)
        self.cfg = cfg

    def evaluate(self, genome: np.ndarray, seed) -> FitnessReport:
        cfg = self.cfg
        with np.errstate(all="ignore"):
            _, l_t = train_predictor(self.gen, genome, self.train, self.fit_split, self.num_classes,
                                     cfg.hidden_size, cfg.inner, seed)
            masks = self.gen.masks(genome, self.fit_split)
            omega = float(batch_omega(masks, self.fit_split.lengths, cfg.regularizer).mean())
        return compute_fitness(l_t, omega, cfg.tau, cfg.eps_hat)


def eval_seed(master_seed: int, generation: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), _STREAM_EVAL, int(generation), int(index)])


_WORKER_CTX: Optional[EvaluationContext] = None


def _worker_init(ctx: EvaluationContext) -> None:
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _worker_eval(args):
    genome, seed = args
    return _WORKER_CTX.evaluate(genome, seed)


class Evaluator:
    """Scores batches of genomes, serially or in worker processes.

    Results are returned in submission order and depend only on each
    genome's derived seed, so the worker count never changes them.
    """

    def __init__(self, ctx: EvaluationContext, n_jobs: int = 1):
        self.ctx = ctx
        self.n_jobs = max(1, int(n_jobs))
        self._pool = None

    def __enter__(self):
        if self.n_jobs > 1:
            self._pool = ProcessPoolExecutor(self.n_jobs, initializer=_worker_init, initargs=(self.ctx,))
        return self

    def __exit__(self, *exc):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def evaluate(self, genomes: Sequence[np.ndarray], seeds: Sequence) -> List[FitnessReport]:
        if self._pool is None:
            return [self.ctx.evaluate(g, s) for g, s in zip(genomes, seeds)]
        return list(self._pool.map(_worker_eval, list(zip(genomes, seeds))))


# --- operators ---------------------------------------------------------------

def selection_weights(fitness: Sequence[float]) -> np.ndarray:
    """Normalise non-negative fitness values; uniform when they are all zero."""
    f = np.asarray(fitness, dtype=np.float64)
    if f.ndim != 1 or f.size == 0:
        raise ConfigurationError("need a non-empty 1-D fitness vector")
    if np.any(f < 0) or not np.all(np.isfinite(f)):
        raise ConfigurationError("fitness values must be finite and non-negative")
    total = f.sum()
    if total <= 0:
        return np.full(f.size, 1.0 / f.size)
    return f / total


def roulette_select(weights: Sequence[float], k: int, rng: np.random.Generator) -> np.ndarray:
    """``k`` indices drawn with replacement, proportionally to ``weights``."""
    w = np.asarray(weights, dtype=np.float64)
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(int(k)), side="right")
    return np.minimum(idx, w.size - 1)


def roulette_without_replacement(fitness: Sequence[float], k: int, rng: np.random.Generator) -> List[int]:
    """Sequential proportional draws, removing each pick; uniform once the
    remaining mass is zero."""
    f = np.array(fitness, dtype=np.float64)
    if k > f.size:
        raise ConfigurationError("cannot draw more items than available")
    avail = np.ones(f.size, dtype=bool)
    picks = []
    for _ in range(int(k)):
        w = np.where(avail, f, 0.0)
        if w.sum() <= 0:
            w = avail.astype(np.float64)
        j = int(roulette_select(w, 1, rng)[0])
        picks.append(j)
        avail[j] = False
    return picks


def one_point_crossover(a: np.ndarray, b: np.ndarray, rng: np.random.Generator,
                        point: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Swap tails after a cut drawn uniformly from {1, ..., d-1}."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ConfigurationError("crossover parents must be 1-D and equally long")
    d = a.shape[0]
    if d < 2:
        raise ConfigurationError("crossover needs genomes of length >= 2")
    k = int(rng.integers(1, d)) if point is None else int(point)
    if not 1 <= k <= d - 1:
        raise ConfigurationError("crossover point must lie in [1, d-1]")
    return np.concatenate([a[:k], b[k:]]), np.concatenate([b[:k], a[k:]])


def gaussian_mutate(g: np.ndarray, p_mut: float, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Copy of ``g`` with N(0, sigma) noise added to each entry with prob. ``p_mut``."""
    if sigma <= 0:
        raise ConfigurationError("sigma must be positive")
    g = np.asarray(g, dtype=np.float64)
    hit = rng.random(g.shape) < p_mut
    noise = rng.normal(0.0, sigma, size=g.shape)
    return np.where(hit, g + noise, g)


def half_elitism_survival(combined: Sequence[Individual], size: int, rng: np.random.Generator,
                          mode: str = "goodness") -> List[Individual]:
    """Best ``size // 2`` kept outright (ties to lower id); the rest drawn
    by roulette, without replacement, from the remainder."""
    if size > len(combined):
        raise ConfigurationError("survivor count exceeds candidate count")
    fit = np.array([ind.fitness(mode) for ind in combined])
    ids = np.array([ind.id for ind in combined])
    order = np.lexsort((ids, -fit))
    n_elite = size // 2
    elite = [int(i) for i in order[:n_elite]]
    rest = [int(i) for i in order[n_elite:]]
    picks = roulette_without_replacement(fit[rest], size - n_elite, rng)
    return [combined[i] for i in elite] + [combined[rest[j]] for j in picks]


# --- history -----------------------------------------------------------------

HISTORY_FIELDS = ("generation", "best_goodness", "mean_goodness", "best_l_t", "best_omega",
                  "best_id", "best_ever_goodness", "best_ever_id", "n_feasible")


@dataclass
class GAHistory:
    records: List[dict] = field(default_factory=list)
    wall_times: List[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def best_ever(self) -> List[float]:
        return [r["best_ever_goodness"] for r in self.records]

    def to_csv(self, include_time: bool = False) -> str:
        buf = io.StringIO()
        cols = list(HISTORY_FIELDS) + (["wall_time"] if include_time else [])
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for rec, wt in zip(self.records, self.wall_times):
            row = [rec[c] for c in HISTORY_FIELDS]
            if include_time:
                row.append(wt)
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
        return buf.getvalue()

    def to_json(self, include_time: bool = False) -> str:
        recs = [dict(r) for r in self.records]
        if include_time:
            for r, wt in zip(recs, self.wall_times):
                r["wall_time"] = wt
        return json.dumps(recs, indent=1, sort_keys=True)


# --- population lifecycle ------------------------------------------------------

class _IdCounter:
    def __init__(self):
        self.n = 0

    def __call__(self) -> int:
        self.n += 1
        return self.n - 1


def init_population(cfg: GAConfig, gen: GeneratorNet) -> List[Individual]:
    """``population_size`` random genomes drawn from the generator's init."""
    rng = np.random.default_rng([cfg.master_seed, _STREAM_INIT])
    return [Individual(gen.init_genome(rng), None, 0, i, i) for i in range(cfg.population_size)]


def init_population_skewed(cfg: GAConfig, gen: GeneratorNet, skew_genome: np.ndarray,
                           mode: str = "one_skewed", noise_sigma: Optional[float] = None) -> List[Individual]:
    """Seed the population with a pre-trained genome.

    ``one_skewed`` puts the genome itself at index 0 and random genomes
    elsewhere; ``all_noisy`` makes every individual the genome plus
    N(0, noise_sigma) noise (``mut_sigma`` by default).
    """
    skew_genome = np.asarray(skew_genome, dtype=np.float64)
    if skew_genome.shape != (gen.layout.total_len,):
        raise ConfigurationError("skew genome length does not match the generator layout")
    if mode == "one_skewed":
        pop = init_population(cfg, gen)
        pop[0] = Individual(skew_genome.copy(), None, 0, 0, 0)
        return pop
    if mode == "all_noisy":
        sigma = cfg.mut_sigma if noise_sigma is None else float(noise_sigma)
        rng = np.random.default_rng([cfg.master_seed, _STREAM_INIT])
        return [Individual(skew_genome + rng.normal(0.0, sigma, skew_genome.shape), None, 0, i, i)
                for i in range(cfg.population_size)]
    raise ConfigurationError(f"unknown skew mode {mode!r}")


def evaluate_individual(ind: Individual, ctx: EvaluationContext) -> FitnessReport:
    ind.report = ctx.evaluate(ind.genome, individual_seed(ctx.cfg, ind))
    return ind.report


def individual_seed(cfg: GAConfig, ind: Individual) -> np.random.SeedSequence:
    """Seed for the predictor that scored ``ind``; reusing it retrains that predictor exactly."""
    return eval_seed(cfg.master_seed, ind.birth_generation, ind.slot)


def _record(pop: Sequence[Individual], generation: int, best: Individual) -> dict:
    good = np.array([ind.report.goodness for ind in pop])
    top = pop[int(np.lexsort(([ind.id for ind in pop], -good))[0])]
    return {
        "generation": generation,
        "best_goodness": float(good.max()),
        "mean_goodness": float(good.mean()),
        "best_l_t": top.report.l_t,
        "best_omega": top.report.omega,
        "best_id": top.id,
        "best_ever_goodness": best.report.goodness,
        "best_ever_id": best.id,
        "n_feasible": int(sum(ind.report.feasible for ind in pop)),
    }


def _better(a: Individual, b: Optional[Individual]) -> bool:
    if b is None:
        return True
    return (a.report.goodness, -a.id) > (b.report.goodness, -b.id)


def run_ga(
    cfg: GAConfig,
    ctx: EvaluationContext,
    population: Optional[List[Individual]] = None,
    n_jobs: int = 1,
    callback: Optional[Callable[[dict], None]] = None,
) -> Tuple[Individual, GAHistory]:
    """Evolve generator genomes; return the best-ever individual and history.

    The best-ever individual is tracked by goodness in both fitness
    modes. Early stopping waits for the first feasible individual, then
    stops once best-ever goodness has not improved by more than ``tol``
    for ``patience`` generations.
    """
    cfg.validate()
    I = cfg.population_size
    ops_rng = np.random.default_rng([cfg.master_seed, _STREAM_OPERATORS])
    pop = init_population(cfg, ctx.gen) if population is None else list(population)
    if len(pop) != I:
        raise ConfigurationError(f"population has {len(pop)} individuals, expected {I}")
    new_id = _IdCounter()
    new_id.n = max(ind.id for ind in pop) + 1
    history = GAHistory()
    t0 = time.perf_counter()

    with Evaluator(ctx, n_jobs) as ev:
        reports = ev.evaluate([ind.genome for ind in pop], [eval_seed(cfg.master_seed, 0, ind.slot) for ind in pop])
        for ind, rep in zip(pop, reports):
            ind.report = rep
        best = None
        for ind in pop:
            if _better(ind, best):
                best = ind
        history.records.append(_record(pop, 0, best))
        history.wall_times.append(time.perf_counter() - t0)
        if callback:
            callback(history.records[-1])
        stale = 0
        for g in range(1, cfg.generations + 1):
            weights = selection_weights([ind.fitness(cfg.fitness_mode) for ind in pop])
            parents = roulette_select(weights, I, ops_rng)
            children = []
            for p in range(0, I, 2):
                a, b = pop[parents[p]].genome, pop[parents[p + 1]].genome
                if ops_rng.random() < cfg.p_cross:
                    c1, c2 = one_point_crossover(a, b, ops_rng)
                else:
                    c1, c2 = a.copy(), b.copy()
                children += [c1, c2]
            children = [gaussian_mutate(c, cfg.p_mut, cfg.mut_sigma, ops_rng) for c in children]
            kids = [Individual(c, None, g, new_id(), j) for j, c in enumerate(children)]
            reports = ev.evaluate(children, [eval_seed(cfg.master_seed, g, j) for j in range(I)])
            for ind, rep in zip(kids, reports):
                ind.report = rep
            prev_best = best.report.goodness
            for ind in kids:
                if _better(ind, best):
                    best = ind
            pop = half_elitism_survival(pop + kids, I, ops_rng, cfg.fitness_mode)
            history.records.append(_record(pop, g, best))
            history.wall_times.append(time.perf_counter() - t0)
            if callback:
                callback(history.records[-1])
            if best.report.goodness > prev_best + cfg.tol:
                stale = 0
            elif best.report.goodness > 0:
                stale += 1
            if stale >= cfg.patience:
                logger.info("converged at generation %d", g)
                break
    return best, history


# --- skewed initialisation -----------------------------------------------------

def skew_pretrain_genome(gen: GeneratorNet, train: SequenceData, epochs: int = 10,
                         seed: int = 0, lr: float = 1e-3, batch_size: int = 16,
                         return_losses: bool = False):
    """Fit a generator to select only position 0 of every sequence.

    Per-token binary cross-entropy on the head logits (mean over valid
    tokens), mini-batch Adam. Returns the genome, plus per-epoch mean
    losses with ``return_losses``.
    """
    from .nn import Adam

    if epochs < 1:
        raise ConfigurationError("skew pre-training needs at least one epoch")
    rng = np.random.default_rng([int(seed), _STREAM_SKEW])
    genome = gen.init_genome(rng)
    opt = Adam(genome.size, lr=lr)
    target_all = np.zeros(train.tokens.shape)
    target_all[:, 0] = 1.0
    valid_all = train.valid.astype(np.float64)
    losses = []
    for _ in range(epochs):
        order = rng.permutation(len(train))
        total, count = 0.0, 0
        for s in range(0, len(train), batch_size):
            idx = order[s:s + batch_size]
            batch = train.subset(idx)
            z = gen.logits(genome, batch, record=True)
            y, v = target_all[idx], valid_all[idx]
            n_valid = v.sum()
            # stable BCE-with-logits
            loss = (np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))) * v
            total += loss.sum()
            count += n_valid
            dz = (1.0 / (1.0 + np.exp(-z)) - y) * v / n_valid
            opt.step(genome, gen.backward(genome, dz))
        losses.append(float(total / count))
    return (genome, losses) if return_losses else genome
