"""Synthetic highlight dataset, JSONL persistence and annotation merging."""

from __future__ import annotations

import json
import os
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .data import DatasetSplits, Example, Vocab
from .exceptions import ConfigurationError, GenerationError, IngestionError, InvalidInputError

SPLIT_NAMES = ("train", "validation", "test")
VOCAB_FILE = "vocab.txt"


@dataclass
class ToyConfig:
    class_highlights: List[str] = field(default_factory=lambda: ["aba", "baa", "abc"])
    string_len: int = 20
    total: int = 10000
    split_fractions: Tuple[float, float, float] = (0.64, 0.16, 0.20)
    alphabet: str = "abc"
    min_chunks: int = 1
    max_chunks: int = 3
    chunk_len: int = 2
    max_attempts: int = 10000

    def validate(self) -> None:
        if not self.class_highlights:
            raise ConfigurationError("at least one class highlight required")
        if len(set(self.class_highlights)) != len(self.class_highlights):
            raise ConfigurationError("class highlights must be distinct")
        for hl in self.class_highlights:
            if not hl:
                raise ConfigurationError("empty highlight")
            if len(hl) > self.string_len:
                raise ConfigurationError(
                    f"highlight {hl!r} longer than string_len={self.string_len}"
                )
            if set(hl) - set(self.alphabet):
                raise ConfigurationError(f"highlight {hl!r} uses characters outside the alphabet")
        if len(self.split_fractions) != 3 or abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ConfigurationError("split fractions must be three values summing to 1")
        if any(f < 0 for f in self.split_fractions):
            raise ConfigurationError("split fractions must be non-negative")
        if self.chunk_len < 1 or self.chunk_len >= min(len(h) for h in self.class_highlights):
            raise ConfigurationError("chunk_len must be >= 1 and shorter than every highlight")
        if not 0 <= self.min_chunks <= self.max_chunks:
            raise ConfigurationError("need 0 <= min_chunks <= max_chunks")
        if self.total < 1:
            raise ConfigurationError("total must be positive")
        if self.max_attempts < 1:
            raise ConfigurationError("max_attempts must be positive")

    def split_sizes(self) -> Tuple[int, int, int]:
        n_train = int(round(self.total * self.split_fractions[0]))
        n_val = int(round(self.total * self.split_fractions[1]))
        return n_train, n_val, self.total - n_train - n_val


def count_occurrences(text: str, pattern: str) -> int:
    """Number of (possibly overlapping) occurrences of ``pattern``."""
    count, start = 0, text.find(pattern)
    while start != -1:
        count += 1
        start = text.find(pattern, start + 1)
    return count


def find_occurrences(text: str, pattern: str) -> List[int]:
    out, start = [], text.find(pattern)
    while start != -1:
        out.append(start)
        start = text.find(pattern, start + 1)
    return out


def _chunk_pool(highlights: Sequence[str], label: int, chunk_len: int) -> List[str]:
    pool = []
    for j, hl in enumerate(highlights):
        if j == label:
            continue
        for k in range(len(hl) - chunk_len + 1):
            pool.append(hl[k:k + chunk_len])
    return pool


def _sample_string(cfg: ToyConfig, label: int, rng: random.Random) -> Tuple[str, int]:
    highlights = cfg.class_highlights
    target = highlights[label]
    others = [hl for j, hl in enumerate(highlights) if j != label]
    L, hl_len, cl = cfg.string_len, len(target), cfg.chunk_len
    alphabet = list(cfg.alphabet)
    pool = _chunk_pool(highlights, label, cl)
    for _ in range(cfg.max_attempts):
        chars = rng.choices(alphabet, k=L)
        pos = rng.randrange(L - hl_len + 1)
        chars[pos:pos + hl_len] = target
        taken = [False] * L
        taken[pos:pos + hl_len] = [True] * hl_len
        if pool:
            for _ in range(rng.randint(cfg.min_chunks, cfg.max_chunks)):
                starts = [s for s in range(L - cl + 1) if not any(taken[s:s + cl])]
                if not starts:
                    break
                s = rng.choice(starts)
                chars[s:s + cl] = rng.choice(pool)
                taken[s:s + cl] = [True] * cl
        text = "".join(chars)
        if count_occurrences(text, target) != 1:
            continue
        if any(hl in text for hl in others):
            continue
        return text, text.find(target)
    raise GenerationError(
        f"class {label} ({target!r}): no compliant string after {cfg.max_attempts} attempts"
    )


def generate_toy_dataset(cfg: Optional[ToyConfig] = None, seed: int = 0) -> DatasetSplits:
    """Random strings where each class is identified by one embedded highlight.

    Classes are assigned round-robin so that every contiguous split is
    balanced to within one example per class. A (string, label) pair is
    never emitted twice; collisions are resampled.
    """
    cfg = cfg or ToyConfig()
    cfg.validate()
    rng = random.Random(seed)
    vocab = Vocab(sorted(cfg.alphabet))
    n_cls = len(cfg.class_highlights)
    seen = set()
    examples: List[Example] = []
    for i in range(cfg.total):
        label = i % n_cls
        hl_len = len(cfg.class_highlights[label])
        for _ in range(cfg.max_attempts):
            text, pos = _sample_string(cfg, label, rng)
            if (text, label) not in seen:
                break
        else:
            raise GenerationError(f"class {label}: could not draw a unique string")
        seen.add((text, label))
        gold = [0] * len(text)
        gold[pos:pos + hl_len] = [1] * hl_len
        examples.append(Example(vocab.encode(list(text)), label, gold))
    n_train, n_val, _ = cfg.split_sizes()
    parts = [examples[:n_train], examples[n_train:n_train + n_val], examples[n_train + n_val:]]
    for part in parts:
        rng.shuffle(part)
    return DatasetSplits(*parts, vocab=vocab)


def one_hot_embeddings(vocab_size: int, emb_dim: int) -> np.ndarray:
    if vocab_size > emb_dim:
        raise ConfigurationError(f"vocab of {vocab_size} tokens does not fit one-hot dim {emb_dim}")
    return np.eye(vocab_size, emb_dim)


def encode_tokens(ex: Example, vocab: Vocab, emb_dim: int) -> np.ndarray:
    """One-hot rows (n, emb_dim); id i maps to unit vector e_i."""
    ids = np.asarray(ex.tokens, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= len(vocab)):
        raise IngestionError("token id outside the vocabulary")
    return one_hot_embeddings(len(vocab), emb_dim)[ids]


def load_text_embeddings(path, vocab: Vocab, emb_dim: Optional[int] = None) -> np.ndarray:
    """Read whitespace-separated ``token v1 ... vd`` lines (GloVe format).

    Vocabulary tokens missing from the file get zero vectors.
    """
    vectors: Dict[str, np.ndarray] = {}
    with open(path, encoding="utf8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip().split(" ")
            if len(parts) < 2:
                continue
            tok = parts[0]
            if tok not in vocab.stoi:
                continue
            try:
                vec = np.array([float(v) for v in parts[1:]])
            except ValueError:
                raise IngestionError(f"{path}:{lineno}: non-numeric embedding value") from None
            if emb_dim is None:
                emb_dim = vec.size
            if vec.size != emb_dim:
                raise IngestionError(f"{path}:{lineno}: expected {emb_dim} values, got {vec.size}")
            vectors[tok] = vec
    if emb_dim is None:
        raise IngestionError(f"{path}: no embeddings found for the vocabulary")
    table = np.zeros((len(vocab), emb_dim))
    for tok, vec in vectors.items():
        table[vocab.stoi[tok]] = vec
    return table


def save_vocab(vocab: Vocab, path) -> None:
    for tok in vocab.itos:
        if "\n" in tok or tok == "":
            raise InvalidInputError(f"token {tok!r} cannot be stored one per line")
    Path(path).write_text("".join(tok + "\n" for tok in vocab.itos), encoding="utf8")


def load_vocab(path) -> Vocab:
    text = Path(path).read_text(encoding="utf8")
    return Vocab(text.split("\n")[:-1] if text.endswith("\n") else text.split("\n"))


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf8")
    os.replace(tmp, path)


def save_jsonl(splits: DatasetSplits, path) -> Dict[str, Path]:
    """Write ``train/validation/test.jsonl`` plus ``vocab.txt`` under ``path``."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    save_vocab(splits.vocab, out / VOCAB_FILE)
    written = {"vocab": out / VOCAB_FILE}
    for name, split in splits.items():
        lines = []
        for ex in split:
            rec = {"tokens": splits.vocab.decode(ex.tokens), "label": ex.label}
            if ex.gold_mask is not None:
                rec["rationale"] = list(ex.gold_mask)
            lines.append(json.dumps(rec, separators=(",", ":")) + "\n")
        _write_atomic(out / f"{name}.jsonl", "".join(lines))
        written[name] = out / f"{name}.jsonl"
    return written


def _parse_record(rec, vocab: Vocab, where: str, grow: bool) -> Example:
    if not isinstance(rec, dict) or "tokens" not in rec or "label" not in rec:
        raise IngestionError(f"{where}: record needs 'tokens' and 'label'")
    toks = rec["tokens"]
    if not isinstance(toks, list) or not toks:
        raise IngestionError(f"{where}: 'tokens' must be a non-empty list")
    if all(isinstance(t, str) for t in toks):
        ids = [vocab.add(t) for t in toks] if grow else vocab.encode(toks)
    elif all(isinstance(t, int) and not isinstance(t, bool) for t in toks):
        if min(toks) < 0 or (len(vocab) and max(toks) >= len(vocab)):
            raise IngestionError(f"{where}: token id outside the vocabulary")
        ids = toks
    else:
        raise IngestionError(f"{where}: tokens must be all strings or all ints")
    label = rec["label"]
    if not isinstance(label, int) or isinstance(label, bool) or label < 0:
        raise IngestionError(f"{where}: label must be a non-negative int")
    gold = rec.get("rationale")
    if gold is not None and (not isinstance(gold, list) or len(gold) != len(toks)):
        raise IngestionError(f"{where}: rationale length must equal token count")
    try:
        return Example(ids, label, gold)
    except InvalidInputError as exc:
        raise IngestionError(f"{where}: {exc}") from None


def read_jsonl(path, vocab: Vocab, grow: bool = False) -> List[Example]:
    out = []
    with open(path, encoding="utf8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestionError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            out.append(_parse_record(rec, vocab, f"{path}:{lineno}", grow))
    return out


def load_jsonl(path) -> DatasetSplits:
    """Inverse of :func:`save_jsonl`.

    Without a vocab sidecar, string tokens build the vocabulary in order
    of first appearance (train, then validation, then test).
    """
    root = Path(path)
    vocab_path = root / VOCAB_FILE
    grow = not vocab_path.exists()
    vocab = Vocab() if grow else load_vocab(vocab_path)
    parts = []
    for name in SPLIT_NAMES:
        f = root / f"{name}.jsonl"
        if not f.exists():
            raise IngestionError(f"missing split file {f}")
        parts.append(read_jsonl(f, vocab, grow=grow))
    return DatasetSplits(*parts, vocab=vocab)


def majority_vote_mask(annotations: Sequence[Sequence[int]]) -> List[int]:
    """Positions marked by strictly more than half of the annotators."""
    if len(annotations) == 0:
        raise InvalidInputError("need at least one annotation")
    arr = np.asarray([list(a) for a in annotations]) if len({len(a) for a in annotations}) == 1 else None
    if arr is None:
        raise InvalidInputError("annotations have different lengths")
    votes = arr.sum(axis=0)
    return [int(v) for v in (2 * votes > arr.shape[0])]
