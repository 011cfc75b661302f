"""scikit-learn style wrapper around the genetic rationalizer."""

from __future__ import annotations

from typing import Hashable, List, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.preprocessing import LabelEncoder
from sklearn.utils.validation import check_is_fitted, column_or_1d

from .data import Example, SequenceData, Vocab
from .datagen import one_hot_embeddings
from .evolution import EvaluationContext, GAConfig, individual_seed, run_ga
from .exceptions import InvalidInputError
from .nn import softmax
from .rationalizer import GeneratorNet, InnerConfig, RegularizerConfig, masked_inputs, train_predictor

UNK = "<unk>"


def check_token_sequences(X) -> List[List[Hashable]]:
    """Validate ``X`` as a non-empty collection of non-empty token sequences.

    A plain string counts as a sequence of characters.
    """
    if isinstance(X, (str, bytes)) or not hasattr(X, "__len__"):
        raise InvalidInputError("X must be a collection of token sequences")
    if len(X) == 0:
        raise InvalidInputError("X is empty")
    out = []
    for i, seq in enumerate(X):
        if isinstance(seq, str):
            seq = list(seq)
        elif isinstance(seq, np.ndarray):
            if seq.ndim != 1:
                raise InvalidInputError(f"sample {i}: expected a 1-D token sequence")
            seq = seq.tolist()
        else:
            try:
                seq = list(seq)
            except TypeError:
                raise InvalidInputError(f"sample {i} is not a sequence") from None
        if not seq:
            raise InvalidInputError(f"sample {i} is empty")
        out.append(seq)
    return out


def check_masks(masks, X: List[list]) -> List[np.ndarray]:
    """Validate per-example binary masks aligned with ``X``."""
    if len(masks) != len(X):
        raise InvalidInputError("one mask per sample required")
    out = []
    for i, (m, seq) in enumerate(zip(masks, X)):
        m = np.asarray(m)
        if m.shape != (len(seq),):
            raise InvalidInputError(f"sample {i}: mask length {m.shape} != {len(seq)} tokens")
        if not np.isin(m, (0, 1)).all():
            raise InvalidInputError(f"sample {i}: mask entries must be 0 or 1")
        out.append(m.astype(np.int8))
    return out


class GeneticRationalizer(ClassifierMixin, TransformerMixin, BaseEstimator):
    """Select-then-predict classifier whose mask generator is evolved.

    ``fit`` searches generator weights with the genetic algorithm, then
    trains the final predictor on the best generator's masks. ``transform``
    returns hard token masks (right-padded with zeros), ``predict`` the
    class read from the masked input.

    Tokens are arbitrary hashables; the vocabulary is built in ``fit`` and
    unseen tokens map to a shared unknown id. Embeddings are one-hot, so
    the vocabulary (plus the unknown token) must fit in ``emb_dim``.
    """

    def __init__(self, hidden_size: int = 8, emb_dim: int = 25, population_size: int = 50,
                 generations: int = 100, mut_sigma: float = 0.05, p_mut: float = 1.0,
                 p_cross: float = 1.0, tau: float = 0.1, lambda_s: float = 1.0,
                 lambda_c: float = 1.0, alpha: float = 0.0, inner_epochs: int = 3,
                 inner_batch_size: int = 64, inner_lr: float = 1e-2, patience: int = 25,
                 fitness_mode: str = "goodness", validation_fraction: float = 0.2,
                 random_state: int = 0, n_jobs: int = 1):
        self.hidden_size = hidden_size
        self.emb_dim = emb_dim
        self.population_size = population_size
        self.generations = generations
        self.mut_sigma = mut_sigma
        self.p_mut = p_mut
        self.p_cross = p_cross
        self.tau = tau
        self.lambda_s = lambda_s
        self.lambda_c = lambda_c
        self.alpha = alpha
        self.inner_epochs = inner_epochs
        self.inner_batch_size = inner_batch_size
        self.inner_lr = inner_lr
        self.patience = patience
        self.fitness_mode = fitness_mode
        self.validation_fraction = validation_fraction
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _ga_config(self) -> GAConfig:
        return GAConfig(
            population_size=self.population_size, generations=self.generations, p_mut=self.p_mut,
            p_cross=self.p_cross, mut_sigma=self.mut_sigma, tau=self.tau,
            inner=InnerConfig(self.inner_epochs, self.inner_batch_size, self.inner_lr),
            regularizer=RegularizerConfig(self.lambda_s, self.lambda_c, self.alpha),
            hidden_size=self.hidden_size, master_seed=int(self.random_state),
            patience=self.patience, fitness_mode=self.fitness_mode,
        )

    def _encode(self, X: List[list], y=None, masks=None) -> SequenceData:
        unk = self.vocab_.stoi[UNK]
        examples = []
        for i, seq in enumerate(X):
            ids = [self.vocab_.stoi.get(t, unk) for t in seq]
            label = 0 if y is None else int(y[i])
            gold = None if masks is None else masks[i]
            examples.append(Example(ids, label, gold))
        return SequenceData.from_examples(examples)

    def fit(self, X, y, X_val=None, y_val=None):
        """Search a generator on ``X, y``.

        Fitness is measured on ``X_val, y_val`` when given, otherwise on a
        held-out ``validation_fraction`` of the training data.
        """
        X = check_token_sequences(X)
        y = column_or_1d(np.asarray(y), warn=True)
        if len(y) != len(X):
            raise InvalidInputError(f"X has {len(X)} samples but y has {len(y)}")
        cfg = self._ga_config()
        cfg.validate()
        self.label_encoder_ = LabelEncoder().fit(y if y_val is None else np.concatenate([y, column_or_1d(y_val)]))
        self.classes_ = self.label_encoder_.classes_
        self.vocab_ = Vocab([UNK])
        for seq in X:
            for t in seq:
                self.vocab_.add(t)
        if len(self.vocab_) > self.emb_dim:
            raise InvalidInputError(
                f"vocabulary of {len(self.vocab_)} tokens does not fit one-hot emb_dim={self.emb_dim}"
            )
        y_enc = self.label_encoder_.transform(y)
        if X_val is None:
            if not 0.0 < self.validation_fraction < 1.0:
                raise InvalidInputError("validation_fraction must lie in (0, 1)")
            rng = np.random.default_rng(self.random_state)
            order = rng.permutation(len(X))
            n_val = max(1, int(round(self.validation_fraction * len(X))))
            if n_val >= len(X):
                raise InvalidInputError("not enough samples to hold out a validation split")
            val_idx, tr_idx = order[:n_val], order[n_val:]
            train = self._encode([X[i] for i in tr_idx], y_enc[tr_idx])
            val = self._encode([X[i] for i in val_idx], y_enc[val_idx])
        else:
            X_val = check_token_sequences(X_val)
            train = self._encode(X, y_enc)
            val = self._encode(X_val, self.label_encoder_.transform(column_or_1d(y_val)))
        gen = GeneratorNet(one_hot_embeddings(len(self.vocab_), self.emb_dim), self.hidden_size)
        ctx = EvaluationContext(gen, train, val, len(self.classes_), cfg)
        best, history = run_ga(cfg, ctx, n_jobs=self.n_jobs)
        pred, _ = train_predictor(gen, best.genome, train, val, len(self.classes_), self.hidden_size,
                                  cfg.inner, individual_seed(cfg, best))
        self.generator_ = gen
        self.genome_ = best.genome
        self.predictor_ = pred
        self.best_report_ = best.report
        self.history_ = history
        return self

    def transform(self, X) -> np.ndarray:
        """Hard masks as an (n_samples, max_len) int8 array; padding is 0."""
        check_is_fitted(self, "genome_")
        data = self._encode(check_token_sequences(X))
        return self.generator_.masks(self.genome_, data)

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "genome_")
        data = self._encode(check_token_sequences(X))
        masks = self.generator_.masks(self.genome_, data)
        return self.predictor_.predict_logits(masked_inputs(self.generator_.embeddings, data, masks), data.lengths)

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        scores = self.decision_function(X)
        return self.classes_[scores.argmax(axis=1)]

    def rationales(self, X) -> List[list]:
        """Selected tokens of each sample."""
        X = check_token_sequences(X)
        masks = self.transform(X)
        return [[t for t, m in zip(seq, row) if m] for seq, row in zip(X, masks)]
