"""Seeded experiment runs: data preparation, search, test evaluation, records."""

from __future__ import annotations

import io
import json
import logging
import os
import statistics
import tempfile
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import ExperimentConfig
from .data import DatasetSplits, SequenceData
from .datagen import generate_toy_dataset, load_jsonl, load_text_embeddings, one_hot_embeddings
from .evolution import (EvaluationContext, GAHistory, Individual, init_population_skewed, individual_seed,
                        run_ga, skew_pretrain_genome)
from .metrics import MetricsReport, macro_f1, selection_stats, token_f1
from .rationalizer import GeneratorNet, PredictorNet, masked_inputs, train_predictor

logger = logging.getLogger(__name__)

METRIC_KEYS = ("clf_f1", "hl_f1", "ratio_R", "size_S")


def write_atomic(path, content) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    data = content.encode() if isinstance(content, str) else content
    with os.fdopen(fd, "wb") as fh:
        fh.write(data)
    # mkstemp creates 0600; use the usual umask-based mode instead
    umask = os.umask(0)
    os.umask(umask)
    os.chmod(tmp, 0o666 & ~umask)
    os.replace(tmp, path)


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def load_dataset(cfg: ExperimentConfig, seed: int) -> Tuple[DatasetSplits, np.ndarray]:
    if cfg.dataset == "toy":
        data_seed = seed if cfg.data_seed is None else cfg.data_seed
        splits = generate_toy_dataset(cfg.toy_config(), data_seed)
    else:
        splits = load_jsonl(cfg.dataset)
    if cfg.emb_type == "1-hot":
        emb = one_hot_embeddings(len(splits.vocab), cfg.emb_dim)
    else:
        emb = load_text_embeddings(cfg.emb_type, splits.vocab, cfg.emb_dim)
    return splits, emb


def evaluate_rationalizer(gen: GeneratorNet, genome: np.ndarray, pred: PredictorNet,
                          data: SequenceData, num_classes: int, average: str = "example") -> MetricsReport:
    masks = gen.masks(genome, data)
    logits = pred.predict_logits(masked_inputs(gen.embeddings, data, masks), data.lengths)
    clf = macro_f1(logits.argmax(axis=1), data.labels, num_classes)
    if data.has_gold.all():
        hl = token_f1(masks, data.gold, data.lengths, average=average)
    else:
        hl = float("nan")
    R, S = selection_stats(masks, data.lengths)
    return MetricsReport(clf, hl, R, S, len(data))


@dataclass
class RunRecord:
    seed: int
    metrics: Dict[str, float]
    validation_metrics: Dict[str, float]
    best: Dict[str, float]
    best_id: int
    generations_run: int
    history_file: str
    config_hash: str
    mode: str = "plain"

    def to_json(self) -> str:
        return dumps(asdict(self))


def run_seed(cfg: ExperimentConfig, seed: int, skew: bool = False, out_dir: Optional[Path] = None,
             n_jobs: Optional[int] = None) -> Tuple[RunRecord, GAHistory, float]:
    """One full search for ``seed``; returns the record, history and wall time."""
    t0 = time.perf_counter()
    splits, emb = load_dataset(cfg, seed)
    num_classes = cfg.num_classes or splits.num_classes
    tr, va, te = (SequenceData.from_examples(s) for s in (splits.train, splits.validation, splits.test))
    gen = GeneratorNet(emb, cfg.hidden_size)
    ga = cfg.ga_config(seed)
    ctx = EvaluationContext(gen, tr, va, num_classes, ga)
    population = None
    mode = "plain"
    if skew:
        mode = cfg.skew_mode
        skew_genome = skew_pretrain_genome(gen, tr, cfg.skew_epochs, seed=seed, lr=cfg.skew_lr,
                                           batch_size=cfg.skew_batch_size)
        population = init_population_skewed(ga, gen, skew_genome, cfg.skew_mode)

    def progress(rec):
        logger.info("seed %d gen %d best-ever %.4f feasible %d", seed, rec["generation"],
                    rec["best_ever_goodness"], rec["n_feasible"])

    best, history = run_ga(ga, ctx, population, n_jobs=n_jobs or cfg.threads, callback=progress)
    pred, _ = train_predictor(gen, best.genome, tr, va, num_classes, cfg.hidden_size, ga.inner,
                              individual_seed(ga, best))
    test = evaluate_rationalizer(gen, best.genome, pred, te, num_classes)
    val = evaluate_rationalizer(gen, best.genome, pred, va, num_classes)
    hist_name = f"history_{mode}_seed{seed}.csv"
    record = RunRecord(
        seed=int(seed), metrics=test.as_dict(), validation_metrics=val.as_dict(),
        best=asdict(best.report), best_id=best.id, generations_run=len(history) - 1,
        history_file=hist_name, config_hash=cfg.hash(), mode=mode,
    )
    if out_dir is not None:
        out_dir = Path(out_dir)
        write_atomic(out_dir / hist_name, f"# config_hash={cfg.hash()}\n" + history.to_csv())
        write_atomic(out_dir / f"run_{mode}_seed{seed}.json", record.to_json())
        buf = io.BytesIO()
        np.save(buf, best.genome)
        write_atomic(out_dir / f"genome_{mode}_seed{seed}.npy", buf.getvalue())
    return record, history, time.perf_counter() - t0


def aggregate(records: Sequence[RunRecord]) -> Dict[str, Dict[str, float]]:
    """Mean and sample standard deviation of the test metrics over runs."""
    out = {}
    for k in METRIC_KEYS:
        vals = [r.metrics[k] for r in records]
        out[k] = {"mean": statistics.fmean(vals), "std": statistics.stdev(vals) if len(vals) > 1 else 0.0}
    return out


def summary_csv(summary: Dict[str, Dict[str, float]], config_hash: str) -> str:
    header = ",".join(f"{k}_mean,{k}_std" for k in METRIC_KEYS)
    row = ",".join(f"{summary[k]['mean']!r},{summary[k]['std']!r}" for k in METRIC_KEYS)
    return f"# config_hash={config_hash}\n{header}\n{row}\n"


def format_summary(summary: Dict[str, Dict[str, float]]) -> str:
    """Table-style ``mean±std`` line for Clf-F1 / Hl-F1 / R / S."""
    return " / ".join(f"{summary[k]['mean']:.2f}±{summary[k]['std']:.2f}" for k in METRIC_KEYS)


def run_experiment(cfg: ExperimentConfig, out_dir, skew: bool = False,
                   seeds: Optional[Sequence[int]] = None, n_jobs: Optional[int] = None) -> Dict:
    """Run every seed and write records, histories and the aggregate summary.

    Timings go to ``timings.json`` so the other files stay reproducible.
    """
    out_dir = Path(out_dir)
    seeds = list(cfg.seeds if seeds is None else seeds)
    records, timings = [], {}
    for s in seeds:
        rec, _, wall = run_seed(cfg, s, skew=skew, out_dir=out_dir, n_jobs=n_jobs)
        records.append(rec)
        timings[str(s)] = wall
    mode = records[0].mode
    summary = aggregate(records)
    result = {"config_hash": cfg.hash(), "config": cfg.canonical(), "mode": mode, "seeds": seeds,
              "summary": summary, "formatted": format_summary(summary)}
    write_atomic(out_dir / f"summary_{mode}.json", dumps(result))
    write_atomic(out_dir / f"summary_{mode}.csv", summary_csv(summary, cfg.hash()))
    write_atomic(out_dir / f"timings_{mode}.json", dumps(timings))
    return result


def load_records(out_dir, mode: str = "plain") -> List[RunRecord]:
    recs = []
    for p in sorted(Path(out_dir).glob(f"run_{mode}_seed*.json")):
        recs.append(RunRecord(**json.loads(p.read_text())))
    return recs
