"""Reproducible random streams and chunked Monte Carlo drivers.

Every Monte Carlo quantity in the package is computed from fixed-size
chunks.  Chunk ``k`` draws from the stream ``(seed, stream_base + k)``, so
the result depends only on the seed and the total sample count, never on
how many worker threads executed the chunks.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

DEFAULT_CHUNK = 20_000

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RandomStream:
    """A (seed, stream_id) pair naming one independent PCG64 sequence."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not (0 <= self.seed <= _MASK64):
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if not (0 <= self.stream_id <= _MASK64):
            raise ValueError(f"stream_id must fit in 64 unsigned bits, got {self.stream_id}")

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def substream(self, k: int) -> "RandomStream":
        return RandomStream(self.seed, (self.stream_id + k) & _MASK64)


def as_generator(rng) -> np.random.Generator:
    """Accept a RandomStream, a Generator or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RandomStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RandomStream(int(rng)).generator()
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")


def chunk_sizes(n: int, chunk: int = DEFAULT_CHUNK) -> list[int]:
    if n < 0:
        raise ValueError("n must be nonnegative")
    full, rest = divmod(n, chunk)
    return [chunk] * full + ([rest] if rest else [])


def run_chunked(
    draw: Callable[[np.random.Generator, int], np.ndarray],
    n: int,
    stream: RandomStream,
    threads: int = 1,
    chunk: int = DEFAULT_CHUNK,
) -> np.ndarray:
    """Draw ``n`` samples as ``draw(generator, size)`` over deterministic chunks.

    Results are concatenated in chunk order, so the output is bit-identical
    for any ``threads``.  Draws may return arrays with trailing dimensions
    (e.g. path values); chunks are stacked along axis 0.
    """
    sizes = chunk_sizes(n, chunk)
    if not sizes:
        return np.empty(0)

    def job(k: int) -> np.ndarray:
        return np.asarray(draw(stream.substream(k).generator(), sizes[k]))

    if threads <= 1 or len(sizes) == 1:
        parts = [job(k) for k in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    return np.concatenate(parts, axis=0)


@dataclass(frozen=True)
class MCEstimate:
    """Point estimate with its standard error."""

    mean: float
    stderr: float
    n: int
    seed: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("an MC estimate needs at least two samples")
        if self.stderr < 0:
            raise ValueError("stderr must be nonnegative")

    @classmethod
    def from_samples(cls, values, seed: int) -> "MCEstimate":
        v = np.asarray(values, dtype=float)
        if v.size < 2:
            raise ValueError("an MC estimate needs at least two samples")
        return cls(float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size)), int(v.size), int(seed))

    def within(self, target: float, n_se: float = 3.0) -> bool:
        return abs(self.mean - target) <= n_se * self.stderr

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "n": self.n, "seed": self.seed}


def batch_means(values, n_batches: int = 20) -> tuple[float, float]:
    """Mean and batch-means standard error of a correlated series."""
    v = np.asarray(values, dtype=float)
    if n_batches < 2:
        raise ValueError("need at least two batches")
    size = v.size // n_batches
    if size < 1:
        raise ValueError(f"series of length {v.size} is too short for {n_batches} batches")
    batches = v[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(batches.mean()), float(batches.std(ddof=1) / np.sqrt(n_batches))


POISSON_NORMAL_ABOVE = 1e12


def poisson(gen: np.random.Generator, lam) -> np.ndarray:
    """Poisson draws that accept any finite rate.

    Rates above ``1e12`` (numpy rejects ~1e19) use the rounded normal
    approximation, whose relative skew is below ``1e-6``.  When no rate is
    that large the generator is consumed exactly as by ``gen.poisson``.
    """
    lam = np.asarray(lam, dtype=float)
    big = lam > POISSON_NORMAL_ABOVE
    if not big.any():
        return gen.poisson(lam)
    out = gen.poisson(np.where(big, 0.0, lam))
    out = np.asarray(out, dtype=float)
    out[big] = np.rint(lam[big] + np.sqrt(lam[big]) * gen.standard_normal(int(big.sum())))
    return out
