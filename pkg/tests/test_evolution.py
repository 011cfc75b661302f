import json
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evorat.data import SequenceData
from evorat.datagen import ToyConfig, generate_toy_dataset, one_hot_embeddings
from evorat.evolution import (EvaluationContext, FitnessReport, GAConfig, GAHistory, Individual,
                              compute_fitness, gaussian_mutate, half_elitism_survival, init_population,
                              init_population_skewed, one_point_crossover, roulette_select,
                              roulette_without_replacement, run_ga, selection_weights, skew_pretrain_genome)
from evorat.exceptions import ConfigurationError
from evorat.rationalizer import GeneratorNet, InnerConfig


# ---- fitness -----------------------------------------------------------------------

def test_fitness_hand_point():
    rep = compute_fitness(0.05, 0.2, 0.1)
    assert rep.goodness == pytest.approx(math.sqrt(0.8 * 0.95), abs=1e-12)
    assert rep.goodness == pytest.approx(0.8718, abs=1e-4)
    assert rep.feasible
    assert rep.h_tilde == pytest.approx(1 - rep.goodness)


def test_fitness_infeasible_and_literal_mode():
    rep = compute_fitness(0.2, 0.1, 0.1, eps_hat=1e-8)
    assert rep.goodness == 0.0 and not rep.feasible
    assert rep.h_tilde == 0.0
    assert rep.h == 1.0 / 1e-8
    assert rep.fitness("literal_eq8") == 1e8
    assert rep.fitness("goodness") == 0.0


def test_fitness_boundary_is_infeasible():
    assert not compute_fitness(0.1, 0.0, 0.1).feasible


def test_fitness_nonfinite_loss_is_infeasible():
    assert compute_fitness(float("nan"), 0.1, 0.1).goodness == 0.0
    assert compute_fitness(float("inf"), 0.1, 0.1).goodness == 0.0


@given(st.floats(0, 3), st.floats(0, 1), st.floats(0.01, 2))
@settings(max_examples=300, deadline=None)
def test_fitness_report_invariants(l_t, omega, tau):
    rep = compute_fitness(l_t, omega, tau)
    assert 0.0 <= rep.goodness <= 1.0
    assert rep.feasible == (l_t < tau)
    if not rep.feasible:
        assert rep.goodness == 0.0
    else:
        assert rep.h_tilde == pytest.approx(1.0 - rep.goodness)


# ---- selection -----------------------------------------------------------------------

def test_selection_weights():
    np.testing.assert_allclose(selection_weights([1, 1, 1, 1]), [0.25] * 4)
    np.testing.assert_allclose(selection_weights([0, 0, 0]), [1 / 3] * 3)
    np.testing.assert_allclose(selection_weights([3, 1, 0]), [0.75, 0.25, 0])
    with pytest.raises(ConfigurationError):
        selection_weights([-1, 2])


def test_infeasible_never_selected_when_feasible_exist():
    rng = np.random.default_rng(0)
    idx = roulette_select(selection_weights([0.0, 0.7, 0.0, 0.2]), 10000, rng)
    assert set(idx.tolist()) <= {1, 3}


def test_roulette_frequencies():
    w = np.array([0.1, 0.2, 0.3, 0.4])
    idx = roulette_select(w, 100_000, np.random.default_rng(1))
    freq = np.bincount(idx, minlength=4) / 1e5
    assert np.all(np.abs(freq - w) < 0.01)


def test_roulette_without_replacement_distinct():
    picks = roulette_without_replacement([0.0, 0.0, 1.0, 2.0], 4, np.random.default_rng(0))
    assert sorted(picks) == [0, 1, 2, 3]
    assert set(picks[:2]) == {2, 3}


# ---- crossover / mutation ---------------------------------------------------------------

def test_crossover_conservation_exhaustive():
    rng = np.random.default_rng(0)
    for d in range(2, 7):
        a = np.arange(d, dtype=float)
        b = -np.arange(1, d + 1, dtype=float)
        for k in range(1, d):
            c1, c2 = one_point_crossover(a, b, rng, point=k)
            np.testing.assert_array_equal(c1, np.r_[a[:k], b[k:]])
            np.testing.assert_array_equal(c2, np.r_[b[:k], a[k:]])
            # per-position multiset is conserved
            for i in range(d):
                assert sorted([c1[i], c2[i]]) == sorted([a[i], b[i]])


def test_crossover_point_uniform_over_interior():
    a, b = np.zeros(5), np.ones(5)
    rng = np.random.default_rng(3)
    points = Counter(int(one_point_crossover(a, b, rng)[0].argmax()) for _ in range(8000))
    assert set(points) == {1, 2, 3, 4}
    assert all(abs(c / 8000 - 0.25) < 0.03 for c in points.values())


def test_crossover_errors():
    rng = np.random.default_rng(0)
    with pytest.raises(ConfigurationError):
        one_point_crossover(np.zeros(3), np.zeros(4), rng)
    with pytest.raises(ConfigurationError):
        one_point_crossover(np.zeros(1), np.zeros(1), rng)
    with pytest.raises(ConfigurationError):
        one_point_crossover(np.zeros(3), np.zeros(3), rng, point=3)


def test_mutation_moments():
    g = np.zeros(10_000)
    out = gaussian_mutate(g, 1.0, 0.05, np.random.default_rng(0))
    diff = out - g
    assert abs(diff.mean()) < 3 * 0.05 / math.sqrt(1e4)
    assert abs(diff.std() - 0.05) < 0.05 * 0.05
    np.testing.assert_array_equal(g, 0.0)


def test_mutation_probability_zero_is_identity():
    g = np.random.default_rng(4).normal(size=100)
    np.testing.assert_array_equal(gaussian_mutate(g, 0.0, 0.05, np.random.default_rng(0)), g)


def test_mutation_partial_probability():
    out = gaussian_mutate(np.zeros(20_000), 0.3, 0.05, np.random.default_rng(1))
    assert abs((out != 0).mean() - 0.3) < 0.02


def test_mutation_rejects_bad_sigma():
    with pytest.raises(ConfigurationError):
        gaussian_mutate(np.zeros(3), 1.0, 0.0, np.random.default_rng(0))


# ---- survival --------------------------------------------------------------------------

def _ind(i, good):
    return Individual(np.zeros(2), FitnessReport(0.0, 0.0, good, good > 0, 1 - good, 1.0), 0, i, i)


def test_half_elitism_four_candidate_enumeration():
    # I = 2: best kept, second drawn from the remaining three with weights 3:2:1
    pool = [_ind(0, 0.4), _ind(1, 0.3), _ind(2, 0.2), _ind(3, 0.1)]
    rng = np.random.default_rng(0)
    counts = Counter()
    trials = 100_000
    for _ in range(trials):
        survivors = half_elitism_survival(pool, 2, rng)
        assert survivors[0].id == 0
        counts[survivors[1].id] += 1
    for i, p in ((1, 3 / 6), (2, 2 / 6), (3, 1 / 6)):
        assert abs(counts[i] / trials - p) < 0.02


def test_half_elitism_ties_prefer_lower_id():
    pool = [_ind(5, 0.5), _ind(2, 0.5), _ind(9, 0.5), _ind(1, 0.1)]
    survivors = half_elitism_survival(pool, 2, np.random.default_rng(0))
    assert survivors[0].id == 2


def test_half_elitism_zero_fitness_rest_is_uniform():
    pool = [_ind(0, 0.9), _ind(1, 0.0), _ind(2, 0.0), _ind(3, 0.0)]
    rng = np.random.default_rng(2)
    counts = Counter(half_elitism_survival(pool, 2, rng)[1].id for _ in range(30_000))
    assert all(abs(counts[i] / 30_000 - 1 / 3) < 0.02 for i in (1, 2, 3))


# ---- whole-run properties on a tiny problem ------------------------------------------------

@pytest.fixture(scope="module")
def tiny_problem():
    splits = generate_toy_dataset(ToyConfig(total=240), seed=1)
    tr = SequenceData.from_examples(splits.train)
    va = SequenceData.from_examples(splits.validation)
    gen = GeneratorNet(one_hot_embeddings(len(splits.vocab), 25), 4)
    return gen, tr, va


def _cfg(**kw):
    base = dict(population_size=6, generations=4, inner=InnerConfig(epochs=1, batch_size=32),
                hidden_size=4, tau=1.2, master_seed=3)
    base.update(kw)
    return GAConfig(**base)


def test_ga_config_validation():
    with pytest.raises(ConfigurationError):
        _cfg(population_size=5).validate()
    with pytest.raises(ConfigurationError):
        _cfg(p_mut=1.5).validate()
    with pytest.raises(ConfigurationError):
        _cfg(fitness_mode="other").validate()
    with pytest.raises(ConfigurationError):
        _cfg(mut_sigma=0).validate()


def test_run_ga_history_and_monotone_best(tiny_problem):
    gen, tr, va = tiny_problem
    cfg = _cfg()
    best, hist = run_ga(cfg, EvaluationContext(gen, tr, va, 3, cfg))
    assert len(hist) == cfg.generations + 1
    ever = hist.best_ever()
    assert all(b >= a for a, b in zip(ever, ever[1:]))
    assert best.report.goodness == ever[-1]
    assert hist.to_csv().count("\n") == len(hist) + 1


def test_run_ga_zero_generations_returns_best_initial(tiny_problem):
    gen, tr, va = tiny_problem
    cfg = _cfg(generations=0)
    ctx = EvaluationContext(gen, tr, va, 3, cfg)
    best, hist = run_ga(cfg, ctx)
    assert len(hist) == 1
    pop = init_population(cfg, gen)
    assert best.id < cfg.population_size
    assert any(np.array_equal(best.genome, ind.genome) for ind in pop)


def test_run_ga_reproducible_and_thread_independent(tiny_problem):
    gen, tr, va = tiny_problem
    cfg = _cfg(generations=2)
    b1, h1 = run_ga(cfg, EvaluationContext(gen, tr, va, 3, cfg))
    b2, h2 = run_ga(cfg, EvaluationContext(gen, tr, va, 3, cfg), n_jobs=2)
    assert h1.to_csv() == h2.to_csv()
    assert h1.to_json() == h2.to_json()
    assert b1.genome.tobytes() == b2.genome.tobytes()


def test_run_ga_never_mutates_initial_genomes(tiny_problem):
    gen, tr, va = tiny_problem
    cfg = _cfg(generations=2)
    pop = init_population(cfg, gen)
    snapshot = [ind.genome.copy() for ind in pop]
    run_ga(cfg, EvaluationContext(gen, tr, va, 3, cfg), population=pop)
    for ind, g in zip(pop, snapshot):
        np.testing.assert_array_equal(ind.genome, g)


def test_population_size_checked(tiny_problem):
    gen, tr, va = tiny_problem
    cfg = _cfg()
    with pytest.raises(ConfigurationError):
        run_ga(cfg, EvaluationContext(gen, tr, va, 3, cfg), population=init_population(cfg, gen)[:4])


def test_evaluation_context_rejects_empty(tiny_problem):
    gen, tr, va = tiny_problem
    with pytest.raises(ConfigurationError):
        EvaluationContext(gen, tr.subset([]), va, 3, _cfg())


def test_history_json_roundtrip_fields(tiny_problem):
    gen, tr, va = tiny_problem
    cfg = _cfg(generations=1)
    _, hist = run_ga(cfg, EvaluationContext(gen, tr, va, 3, cfg))
    recs = json.loads(hist.to_json())
    assert [r["generation"] for r in recs] == [0, 1]
    assert "wall_time" not in recs[0]
    assert "wall_time" in json.loads(hist.to_json(include_time=True))[0]


# ---- skewed initialisation ------------------------------------------------------------------

def test_skew_population_modes(tiny_problem):
    gen, _, _ = tiny_problem
    cfg = _cfg(population_size=400)
    skew = gen.init_genome(np.random.default_rng(9))
    one = init_population_skewed(cfg, gen, skew, "one_skewed")
    assert sum(np.array_equal(ind.genome, skew) for ind in one) == 1
    assert np.array_equal(one[0].genome, skew)
    noisy = np.stack([ind.genome for ind in init_population_skewed(cfg, gen, skew, "all_noisy")])
    dev = noisy - skew
    assert abs(dev.mean()) < 0.002
    assert abs(dev.std() - cfg.mut_sigma) < 0.002
    tight = init_population_skewed(cfg, gen, skew, "all_noisy", noise_sigma=1e-12)
    assert all(np.allclose(ind.genome, skew, atol=1e-9) for ind in tight)
    with pytest.raises(ConfigurationError):
        init_population_skewed(cfg, gen, skew, "bogus")
    with pytest.raises(ConfigurationError):
        init_population_skewed(cfg, gen, skew[:-1], "one_skewed")


def test_skew_pretraining_selects_first_token_only():
    splits = generate_toy_dataset(seed=0)
    tr = SequenceData.from_examples(splits.train)
    va = SequenceData.from_examples(splits.validation)
    gen = GeneratorNet(one_hot_embeddings(len(splits.vocab), 25), 8)
    genome, losses = skew_pretrain_genome(gen, tr, 10, seed=0, return_losses=True)
    assert genome.shape == (gen.layout.total_len,)
    assert losses[-1] < losses[0]
    m = gen.masks(genome, va)
    target = np.zeros_like(m)
    target[:, 0] = 1
    assert (m == target).all(axis=1).mean() >= 0.95


def test_skew_pretraining_requires_an_epoch(tiny_problem):
    gen, tr, _ = tiny_problem
    with pytest.raises(ConfigurationError):
        skew_pretrain_genome(gen, tr, 0)
