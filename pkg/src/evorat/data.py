"""Examples, vocabularies and the padded array form used for computation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .exceptions import IngestionError, InvalidInputError


@dataclass(frozen=True)
class Example:
    tokens: tuple
    label: int
    gold_mask: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        object.__setattr__(self, "label", int(self.label))
        if self.gold_mask is not None:
            gm = tuple(int(v) for v in self.gold_mask)
            if len(gm) != len(self.tokens):
                raise InvalidInputError(
                    f"gold mask length {len(gm)} != token count {len(self.tokens)}"
                )
            if any(v not in (0, 1) for v in gm):
                raise InvalidInputError("gold mask entries must be 0 or 1")
            object.__setattr__(self, "gold_mask", gm)

    def __len__(self) -> int:
        return len(self.tokens)


class Vocab:
    """Bidirectional token <-> id table; ids are insertion order."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: List[str] = []
        self.stoi: Dict[str, int] = {}
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    def __len__(self) -> int:
        return len(self.itos)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self.itos == other.itos

    def __repr__(self) -> str:
        return f"Vocab({self.itos!r})"

    def encode(self, tokens: Sequence[str]) -> List[int]:
        try:
            return [self.stoi[t] for t in tokens]
        except KeyError as exc:
            raise IngestionError(f"unknown token {exc.args[0]!r}") from None

    def decode(self, ids: Sequence[int]) -> List[str]:
        return [self.itos[i] for i in ids]


@dataclass
class DatasetSplits:
    train: List[Example]
    validation: List[Example]
    test: List[Example]
    vocab: Vocab = field(default_factory=Vocab)

    def items(self):
        return (("train", self.train), ("validation", self.validation), ("test", self.test))

    @property
    def num_classes(self) -> int:
        labels = {ex.label for _, split in self.items() for ex in split}
        return max(labels) + 1 if labels else 0


@dataclass
class SequenceData:
    """Right-padded arrays for a list of examples.

    ``gold`` is all-zero for examples without annotation; ``has_gold`` says
    which rows carry one. Positions at or beyond ``lengths[i]`` are padding.
    """

    tokens: np.ndarray
    lengths: np.ndarray
    labels: np.ndarray
    gold: np.ndarray
    has_gold: np.ndarray

    @classmethod
    def from_examples(cls, examples: Sequence[Example], max_len: Optional[int] = None) -> "SequenceData":
        if len(examples) == 0:
            raise InvalidInputError("cannot build arrays from an empty example list")
        lengths = np.array([len(ex) for ex in examples], dtype=np.int64)
        if np.any(lengths == 0):
            raise InvalidInputError("examples must have at least one token")
        T = int(lengths.max()) if max_len is None else int(max_len)
        N = len(examples)
        tokens = np.zeros((N, T), dtype=np.int64)
        gold = np.zeros((N, T), dtype=np.int8)
        has_gold = np.zeros(N, dtype=bool)
        for i, ex in enumerate(examples):
            n = min(len(ex), T)
            tokens[i, :n] = ex.tokens[:n]
            if ex.gold_mask is not None:
                gold[i, :n] = ex.gold_mask[:n]
                has_gold[i] = True
        lengths = np.minimum(lengths, T)
        labels = np.array([ex.label for ex in examples], dtype=np.int64)
        return cls(tokens, lengths, labels, gold, has_gold)

    def __len__(self) -> int:
        return self.tokens.shape[0]

    @property
    def valid(self) -> np.ndarray:
        """Boolean (N, T) array marking non-padding positions."""
        return np.arange(self.tokens.shape[1])[None, :] < self.lengths[:, None]

    def subset(self, idx) -> "SequenceData":
        return SequenceData(self.tokens[idx], self.lengths[idx], self.labels[idx],
                            self.gold[idx], self.has_gold[idx])
