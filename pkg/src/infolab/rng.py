"""Deterministic hierarchical random-number streams and primitive samplers.

All randomness in the library flows through ``RngStream`` objects derived
from a ``SeedSpec``.  Streams are counter-based (Philox) and keyed by a hash
of ``(master_seed, path)``, so any replicate/task/layer stream can be
re-derived independently of scheduling order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence, Tuple, Union

import numpy as np

PathEntry = Union[int, Tuple[str, int]]


def _normalize_path(path: Sequence[PathEntry]) -> Tuple[Tuple[str, int], ...]:
    out = []
    for entry in path:
        if isinstance(entry, tuple):
            label, idx = entry
            out.append((str(label), int(idx)))
        else:
            out.append(("", int(entry)))
    return tuple(out)


@dataclass(frozen=True)
class SeedSpec:
    """A master seed plus an ordered path of labeled indices."""

    master_seed: int
    path: Tuple[Tuple[str, int], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "path", _normalize_path(self.path))

    def child(self, *entries: PathEntry) -> "SeedSpec":
        return SeedSpec(self.master_seed, self.path + _normalize_path(entries))

    def key(self) -> np.ndarray:
        """Hash (master_seed, path) into a 128-bit Philox key."""
        h = hashlib.blake2b(digest_size=16)
        h.update(int(self.master_seed).to_bytes(8, "little"))
        for label, idx in self.path:
            h.update(label.encode("utf-8") + b"\x00")
            h.update(int(idx).to_bytes(8, "little", signed=True))
        raw = h.digest()
        return np.frombuffer(raw, dtype=np.uint64)


class RngStream:
    """Single-owner stream of random draws backed by a counter-based PRNG.

    Advancing the stream (drawing from it) is the only mutation.  Independent
    continuations are obtained via :meth:`derive`, never by copying.
    """

    def __init__(self, seed: SeedSpec):
        self.seed = seed
        self.gen = np.random.Generator(np.random.Philox(key=seed.key()))

    def derive(self, *entries: PathEntry) -> "RngStream":
        """Return an independent child stream for an extended path."""
        return RngStream(self.seed.child(*entries))

    def uniform(self, n: int = 1) -> np.ndarray:
        return self.gen.random(n)


def derive_stream(seed: SeedSpec) -> RngStream:
    """Materialize the deterministic stream for a seed spec."""
    return RngStream(seed)


def sample_gaussian(stream: RngStream, n: int, variance: float) -> np.ndarray:
    """Draw n iid N(0, variance) coordinates; variance 0 gives zeros."""
    if variance < 0:
        raise ValueError("variance must be nonnegative")
    if variance == 0:
        return np.zeros(n)
    return stream.gen.normal(0.0, np.sqrt(variance), size=n)


def sample_unit_sphere(stream: RngStream, d: int) -> np.ndarray:
    """Draw a uniformly distributed unit vector in R^d."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if d == 1:
        return np.array([1.0 if stream.gen.random() < 0.5 else -1.0])
    while True:
        v = stream.gen.normal(size=d)
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            return v / norm


def sample_categorical(stream: RngStream, pmf: np.ndarray) -> int:
    """Draw an index according to a probability vector."""
    pmf = np.asarray(pmf, dtype=float)
    if pmf.ndim != 1 or np.any(pmf < 0) or abs(pmf.sum() - 1.0) > 1e-9:
        raise ValueError("pmf must be nonnegative and sum to 1")
    u = stream.gen.random()
    cdf = np.cumsum(pmf)
    idx = int(np.searchsorted(cdf, u, side="right"))
    # Guard against u landing beyond the last partial sum by rounding.
    idx = min(idx, len(pmf) - 1)
    while pmf[idx] == 0.0:
        idx -= 1
    return idx


@dataclass
class StickBreakingDraw:
    """Truncated stick-breaking realization of a Dirichlet process."""

    weights: np.ndarray
    atoms: np.ndarray  # shape (n_atoms, d), unit rows
    tail_mass: float

    def __post_init__(self):
        total = float(np.sum(self.weights)) + self.tail_mass
        if abs(total - 1.0) > 1e-12:
            raise ValueError("weights + tail_mass must sum to 1")


def sample_stick_breaking(
    stream: RngStream, scale: float, d: int, tail_tol: float = 1e-8
) -> StickBreakingDraw:
    """Sample a Dirichlet process with Unif(S^{d-1}) base, truncated by tail mass.

    Sticks are Beta(1, scale); truncation continues until the remaining tail
    mass drops below tail_tol.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    if not 0 < tail_tol < 1:
        raise ValueError("tail_tol must lie in (0, 1)")
    weights = []
    atoms = []
    remaining = 1.0
    while remaining >= tail_tol:
        frac = stream.gen.beta(1.0, scale)
        weights.append(remaining * frac)
        atoms.append(sample_unit_sphere(stream, d))
        remaining *= 1.0 - frac
    return StickBreakingDraw(
        weights=np.array(weights), atoms=np.array(atoms), tail_mass=remaining
    )
