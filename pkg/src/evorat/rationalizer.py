"""Select-then-predict networks, mask regularizers and predictor training.

The generator turns a token sequence into a hard 0/1 mask; the predictor
classifies the masked embedding sequence. Only the generator's GRU and
token head are evolved; its embedding table is frozen and shared.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .data import Example, SequenceData
from .exceptions import ConfigurationError, InvalidInputError
from .nn import GRU, Adam, Dense, MaxPoolTime, ParamLayout, init_uniform_fan_in, sigmoid, softmax_cross_entropy


@dataclass(frozen=True)
class RegularizerConfig:
    lambda_s: float = 1.0
    lambda_c: float = 1.0
    alpha: float = 0.0

    def validate(self) -> None:
        if self.lambda_s < 0 or self.lambda_c < 0:
            raise ConfigurationError("regularizer weights must be non-negative")
        if self.lambda_s + self.lambda_c <= 0:
            raise ConfigurationError("lambda_s + lambda_c must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError("alpha must lie in [0, 1]")


@dataclass(frozen=True)
class InnerConfig:
    """Predictor training schedule used inside every fitness evaluation."""

    epochs: int = 3
    batch_size: int = 64
    lr: float = 1e-2

    def validate(self) -> None:
        if self.epochs < 0 or self.batch_size < 1 or self.lr <= 0:
            raise ConfigurationError("need epochs >= 0, batch_size >= 1, lr > 0")


class GeneratorNet:
    """Embedding -> GRU -> per-token dense -> sigmoid -> threshold at 0.5."""

    def __init__(self, embeddings: np.ndarray, hidden_size: int = 8):
        self.embeddings = np.asarray(embeddings, dtype=np.float64)
        self.embeddings.setflags(write=False)
        self.emb_dim = self.embeddings.shape[1]
        self.hidden_size = int(hidden_size)
        self.gru = GRU(self.emb_dim, self.hidden_size)
        self.head = Dense(self.hidden_size, 1)
        self.layout = self.gru.layout("gru.").concat(self.head.layout("head."))

    def init_genome(self, rng: np.random.Generator) -> np.ndarray:
        return init_uniform_fan_in(self.layout, rng)

    def _check(self, genome: np.ndarray) -> dict:
        genome = np.asarray(genome, dtype=np.float64)
        if genome.shape != (self.layout.total_len,):
            raise ConfigurationError(
                f"genome length {genome.shape} does not match generator layout ({self.layout.total_len},)"
            )
        return self.layout.unflatten(genome, copy=False)

    def logits(self, genome: np.ndarray, data: SequenceData, record: bool = False) -> np.ndarray:
        params = self._check(genome)
        x = self.embeddings[data.tokens]
        hs = self.gru.forward(params, x, prefix="gru.", record=record)
        return self.head.forward(params, hs, prefix="head.")[..., 0]

    def probabilities(self, genome: np.ndarray, data: SequenceData) -> np.ndarray:
        return sigmoid(self.logits(genome, data))

    def masks(self, genome: np.ndarray, data: SequenceData) -> np.ndarray:
        """Hard (N, T) int8 masks; padding positions are always 0."""
        m = self.probabilities(genome, data) >= 0.5
        return (m & data.valid).astype(np.int8)

    def backward(self, genome: np.ndarray, dlogits: np.ndarray) -> np.ndarray:
        """Gradient of a loss on the per-token logits of the last recorded forward."""
        params = self._check(genome)
        g_head, dh = self.head.backward(params, dlogits[..., None], prefix="head.")
        g_gru, _ = self.gru.backward(params, dh, prefix="gru.", need_dx=False)
        g_gru.update(g_head)
        return self.layout.flatten(g_gru)


def generate_mask(gen: GeneratorNet, genome: np.ndarray, ex: Example) -> np.ndarray:
    if len(ex.tokens) == 0:
        raise InvalidInputError("cannot generate a mask for an empty sequence")
    return gen.masks(genome, SequenceData.from_examples([ex]))[0]


def apply_mask(embedded: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Zero the embedding rows of unselected tokens; shapes (.., T, D) and (.., T)."""
    embedded = np.asarray(embedded, dtype=np.float64)
    mask = np.asarray(mask)
    if embedded.shape[:-1] != mask.shape:
        raise InvalidInputError(
            f"mask shape {mask.shape} does not match sequence shape {embedded.shape[:-1]}"
        )
    return embedded * mask[..., None]


class PredictorNet:
    """GRU -> max-pool over time -> linear classifier."""

    def __init__(self, emb_dim: int, hidden_size: int, num_classes: int):
        self.emb_dim = int(emb_dim)
        self.hidden_size = int(hidden_size)
        self.num_classes = int(num_classes)
        self.gru = GRU(self.emb_dim, self.hidden_size)
        self.pool = MaxPoolTime()
        self.out = Dense(self.hidden_size, self.num_classes)
        self.layout = self.gru.layout("gru.").concat(self.out.layout("out."))
        self.flat = np.zeros(self.layout.total_len)
        self.params = self.layout.unflatten(self.flat, copy=False)

    def init(self, rng: np.random.Generator) -> "PredictorNet":
        self.set_flat(init_uniform_fan_in(self.layout, rng))
        return self

    def set_flat(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != self.flat.shape:
            raise ConfigurationError("flat predictor vector has the wrong length")
        self.flat[:] = vec

    def forward(self, x: np.ndarray, lengths: Optional[np.ndarray] = None, record: bool = True) -> np.ndarray:
        hs = self.gru.forward(self.params, x, prefix="gru.", record=record)
        pooled = self.pool.forward(hs, lengths)
        return self.out.forward(self.params, pooled, prefix="out.")

    def backward(self, dlogits: np.ndarray) -> np.ndarray:
        g_out, dpooled = self.out.backward(self.params, dlogits, prefix="out.")
        dhs = self.pool.backward(dpooled)
        g_gru, _ = self.gru.backward(self.params, dhs, prefix="gru.", need_dx=False)
        g_gru.update(g_out)
        return self.layout.flatten(g_gru)

    def loss_and_grad(self, x, lengths, labels) -> Tuple[float, np.ndarray]:
        logits = self.forward(x, lengths)
        loss, dlogits = softmax_cross_entropy(logits, labels)
        return loss, self.backward(dlogits)

    def predict_logits(self, x, lengths=None, batch_size: int = 2048) -> np.ndarray:
        out = []
        for s in range(0, x.shape[0], batch_size):
            ln = None if lengths is None else lengths[s:s + batch_size]
            out.append(self.forward(x[s:s + batch_size], ln, record=False))
        return np.concatenate(out, axis=0)


def sparsity_loss(mask, alpha: float, length: Optional[int] = None) -> float:
    """|alpha - fraction selected| over the first ``length`` positions."""
    m = np.asarray(mask)
    n = m.shape[-1] if length is None else int(length)
    if n < 1:
        raise InvalidInputError("sparsity needs at least one token")
    return float(abs(alpha - m[:n].sum() / n))


def contiguity_loss(mask, length: Optional[int] = None) -> float:
    """Number of 0<->1 transitions over the first ``length`` positions."""
    m = np.asarray(mask, dtype=np.int64)
    n = m.shape[-1] if length is None else int(length)
    if n < 1:
        raise InvalidInputError("contiguity needs at least one token")
    return float(np.abs(np.diff(m[:n])).sum())


def regularizer_omega(mask, cfg: RegularizerConfig, length: Optional[int] = None) -> float:
    """Sparsity and contiguity penalties, each scaled to [0, 1], then λ-averaged."""
    cfg.validate()
    m = np.asarray(mask)
    n = m.shape[-1] if length is None else int(length)
    ls = sparsity_loss(m, cfg.alpha, n) / max(cfg.alpha, 1.0 - cfg.alpha)
    lc = contiguity_loss(m, n) / (n - 1) if n > 1 else 0.0
    omega = (cfg.lambda_s * ls + cfg.lambda_c * lc) / (cfg.lambda_s + cfg.lambda_c)
    return float(min(max(omega, 0.0), 1.0))


def batch_omega(masks: np.ndarray, lengths: np.ndarray, cfg: RegularizerConfig) -> np.ndarray:
    """Vectorised :func:`regularizer_omega` for padded (N, T) masks."""
    cfg.validate()
    masks = np.asarray(masks, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=np.int64)
    valid = np.arange(masks.shape[1])[None, :] < lengths[:, None]
    m = masks * valid
    ls = np.abs(cfg.alpha - m.sum(axis=1) / lengths) / max(cfg.alpha, 1.0 - cfg.alpha)
    trans_valid = valid[:, 1:]
    trans = (np.abs(np.diff(m, axis=1)) * trans_valid).sum(axis=1)
    lc = np.where(lengths > 1, trans / np.maximum(lengths - 1, 1), 0.0)
    omega = (cfg.lambda_s * ls + cfg.lambda_c * lc) / (cfg.lambda_s + cfg.lambda_c)
    return np.clip(omega, 0.0, 1.0)


def masked_inputs(embeddings: np.ndarray, data: SequenceData, masks: Optional[np.ndarray]) -> np.ndarray:
    x = np.asarray(embeddings)[data.tokens]
    if masks is None:
        return x
    return apply_mask(x, masks)


def predictor_loss(pred: PredictorNet, x: np.ndarray, data: SequenceData) -> float:
    if len(data) == 0:
        raise InvalidInputError("empty batch")
    logits = pred.predict_logits(x, data.lengths)
    loss, _ = softmax_cross_entropy(logits, data.labels)
    return loss


def task_loss(pred: PredictorNet, gen: GeneratorNet, genome: np.ndarray, data: SequenceData) -> float:
    """Mean cross-entropy of the predictor on generator-masked inputs."""
    if len(data) == 0:
        raise InvalidInputError("empty batch")
    x = masked_inputs(gen.embeddings, data, gen.masks(genome, data))
    return predictor_loss(pred, x, data)


def fit_predictor(
    x: np.ndarray,
    data: SequenceData,
    num_classes: int,
    hidden_size: int,
    inner: InnerConfig,
    rng: np.random.Generator,
) -> PredictorNet:
    """Fresh predictor trained by shuffled mini-batch Adam for ``inner.epochs`` epochs."""
    inner.validate()
    pred = PredictorNet(x.shape[-1], hidden_size, num_classes).init(rng)
    opt = Adam(pred.layout.total_len, lr=inner.lr)
    n = len(data)
    for _ in range(inner.epochs):
        order = rng.permutation(n)
        for s in range(0, n, inner.batch_size):
            idx = order[s:s + inner.batch_size]
            _, grad = pred.loss_and_grad(x[idx], data.lengths[idx], data.labels[idx])
            opt.step(pred.flat, grad)
    return pred


def train_predictor(
    gen: GeneratorNet,
    genome: np.ndarray,
    train: SequenceData,
    fit_split: SequenceData,
    num_classes: int,
    hidden_size: int,
    inner: InnerConfig,
    seed,
) -> Tuple[PredictorNet, float]:
    """Train a predictor on generator-masked ``train``; report loss on ``fit_split``.

    ``genome`` is only read. ``seed`` is anything accepted by
    ``numpy.random.default_rng``.
    """
    rng = np.random.default_rng(seed)
    x_train = masked_inputs(gen.embeddings, train, gen.masks(genome, train))
    pred = fit_predictor(x_train, train, num_classes, hidden_size, inner, rng)
    return pred, task_loss(pred, gen, genome, fit_split)


def compute_reference_loss(
    embeddings: np.ndarray,
    train: SequenceData,
    fit_split: SequenceData,
    num_classes: int,
    hidden_size: int,
    inner: InnerConfig,
    seed,
) -> float:
    """Loss of a predictor trained and scored on unmasked inputs."""
    rng = np.random.default_rng(seed)
    pred = fit_predictor(masked_inputs(embeddings, train, None), train, num_classes, hidden_size, inner, rng)
    return predictor_loss(pred, masked_inputs(embeddings, fit_split, None), fit_split)
