"""Flat parameter vectors and the layouts that give them structure."""

from __future__ import annotations

from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np

from ..exceptions import ConfigurationError

Shape = Tuple[int, ...]


class ParamLayout:
    """Ordered named segments of a flat float64 vector.

    Segment order is exactly the order given at construction and never
    re-sorted, so a flat vector produced by one process can be decoded by
    another that builds the same layout.

    Examples
    --------
    >>> layout = ParamLayout([("W", (2, 2)), ("b", (2,))])
    >>> layout.total_len, layout.offsets
    (6, (0, 4))
    """

    def __init__(self, segments: Iterable[Tuple[str, Sequence[int]]]):
        segs: List[Tuple[str, Shape]] = []
        seen = set()
        for name, shape in segments:
            shape = tuple(int(s) for s in shape)
            if name in seen:
                raise ConfigurationError(f"duplicate segment name {name!r}")
            if any(s < 0 for s in shape):
                raise ConfigurationError(f"negative dimension in segment {name!r}")
            seen.add(name)
            segs.append((name, shape))
        self.segments: Tuple[Tuple[str, Shape], ...] = tuple(segs)
        sizes = [int(np.prod(shape, dtype=np.int64)) for _, shape in segs]
        self.sizes: Tuple[int, ...] = tuple(sizes)
        self.offsets: Tuple[int, ...] = tuple(int(o) for o in np.concatenate([[0], np.cumsum(sizes)[:-1]])) if sizes else ()
        self.total_len: int = int(sum(sizes))

    def __len__(self) -> int:
        return self.total_len

    def __eq__(self, other) -> bool:
        return isinstance(other, ParamLayout) and self.segments == other.segments

    def __repr__(self) -> str:
        return f"ParamLayout({list(self.segments)!r})"

    @property
    def names(self) -> List[str]:
        return [name for name, _ in self.segments]

    def slice_of(self, name: str) -> slice:
        for (seg, _), off, size in zip(self.segments, self.offsets, self.sizes):
            if seg == name:
                return slice(off, off + size)
        raise KeyError(name)

    def prefixed(self, prefix: str) -> "ParamLayout":
        return ParamLayout((prefix + name, shape) for name, shape in self.segments)

    def concat(self, other: "ParamLayout") -> "ParamLayout":
        return ParamLayout(list(self.segments) + list(other.segments))

    def flatten(self, params: Mapping[str, np.ndarray]) -> np.ndarray:
        """Pack a name->array mapping into a new flat float64 vector."""
        out = np.empty(self.total_len, dtype=np.float64)
        for (name, shape), off, size in zip(self.segments, self.offsets, self.sizes):
            if name not in params:
                raise ConfigurationError(f"missing parameter {name!r}")
            arr = np.asarray(params[name], dtype=np.float64)
            if arr.shape != shape:
                raise ConfigurationError(
                    f"parameter {name!r} has shape {arr.shape}, layout expects {shape}"
                )
            out[off:off + size] = arr.ravel()
        return out

    def unflatten(self, vec: np.ndarray, copy: bool = True) -> Dict[str, np.ndarray]:
        """Split a flat vector into named arrays.

        With ``copy=False`` the arrays are views, so in-place updates of
        ``vec`` (an optimizer step, say) show through.
        """
        vec = np.asarray(vec)
        if vec.ndim != 1 or vec.shape[0] != self.total_len:
            raise ConfigurationError(
                f"flat vector has shape {vec.shape}, layout expects ({self.total_len},)"
            )
        out = {}
        for (name, shape), off, size in zip(self.segments, self.offsets, self.sizes):
            view = vec[off:off + size].reshape(shape)
            out[name] = view.copy() if copy else view
        return out


def flatten_params(params: Mapping[str, np.ndarray], layout: ParamLayout) -> np.ndarray:
    return layout.flatten(params)


def unflatten_params(vec: np.ndarray, layout: ParamLayout) -> Dict[str, np.ndarray]:
    return layout.unflatten(vec, copy=True)


def init_uniform_fan_in(layout: ParamLayout, rng: np.random.Generator) -> np.ndarray:
    """Uniform(-a, a) with a = 1/sqrt(fan_in) for matrices, zeros for vectors.

    fan_in is the trailing dimension of a 2-D segment.
    """
    vec = np.zeros(layout.total_len, dtype=np.float64)
    for (name, shape), off, size in zip(layout.segments, layout.offsets, layout.sizes):
        if len(shape) >= 2 and size:
            a = 1.0 / np.sqrt(shape[-1])
            vec[off:off + size] = rng.uniform(-a, a, size=size)
    return vec
