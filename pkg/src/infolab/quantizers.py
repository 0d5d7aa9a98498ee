"""Operational rate-distortion constructions.

Gaussian latent quantizers, multinomial width reduction of Dirichlet-process
networks, greedy sphere covers, and the reduced-width misspecified prior
sampler built from them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .processes import DirichletNet, DirichletNetLatent, sample_latent
from .rng import RngStream, SeedSpec, sample_categorical

# Distortion figures below are the squared-function-gap surrogate the
# analytic bounds control, not a raw mutual information.


@dataclass
class QuantizerReport:
    rate_nats: float
    empirical_distortion: float
    distortion_se: float
    target_eps: Optional[float] = None
    distortion_bound: Optional[float] = None

    def __post_init__(self):
        if self.rate_nats < 0:
            raise ValueError("rate must be nonnegative")


@dataclass
class SphereCover:
    atoms: np.ndarray  # (n_atoms, d), unit rows
    radius: float  # probe-verified covering radius estimate


@dataclass
class FiniteWidthNet:
    """Width-m surrogate net (scale/m) sum_i sign_i ReLU(atom_i^T x)."""

    signs: np.ndarray  # (m,)
    atoms: np.ndarray  # (m, d)
    scale: float  # sqrt(K) or sqrt(K+1) per the process config

    def output(self, x: np.ndarray) -> float:
        acts = np.maximum(self.atoms @ x, 0.0)
        return float(self.scale / len(self.signs) * np.sum(self.signs * acts))


def gaussian_quantize(
    theta: np.ndarray,
    delta2: float,
    stream: RngStream,
    prior_var: Optional[float] = None,
    noise_var: Optional[float] = None,
    mc_draws: int = 1000,
) -> Tuple[np.ndarray, QuantizerReport]:
    """Additive-noise quantizer theta_tilde = theta + V, V ~ N(0, delta2/d I).

    Analytic rate is the Gaussian channel information (d/2) ln(1 + d
    prior_var / delta2); the reported distortion bound is the per-step
    surrogate (1/2) ln(1 + delta2 / ((1 + delta2) noise_var)) when noise_var
    is given.  Empirical distortion is the MC mean of ||V||^2 (target delta2).
    """
    theta = np.asarray(theta, dtype=float)
    if delta2 <= 0:
        raise ValueError("delta2 must be positive")
    d = len(theta)
    if prior_var is None:
        prior_var = 1.0 / d
    noise = stream.gen.normal(0.0, math.sqrt(delta2 / d), size=(mc_draws, d))
    sq = np.sum(noise * noise, axis=1)
    rate = 0.5 * d * math.log1p(d * prior_var / delta2)
    bound = None
    if noise_var is not None:
        bound = 0.5 * math.log1p(delta2 / ((1.0 + delta2) * noise_var))
    report = QuantizerReport(
        rate_nats=rate,
        empirical_distortion=float(np.mean(sq)),
        distortion_se=float(np.std(sq, ddof=1) / math.sqrt(mc_draws)),
        distortion_bound=bound,
    )
    return theta + noise[0], report


def linreg_quantizer_delta2(eps: float, noise_var: float) -> float:
    """The delta2 achieving per-step distortion eps in the Gaussian quantizer.

    Defined for eps below the threshold (1/2) ln(1 + 1/noise_var), above
    which zero rate already suffices.
    """
    s = noise_var * math.expm1(2.0 * eps)
    if s >= 1.0:
        raise ValueError("eps at or above the zero-rate threshold")
    return s / (1.0 - s)


def width_reduce(
    spec: DirichletNet, latent: DirichletNetLatent, m: int, stream: RngStream
) -> FiniteWidthNet:
    """Multinomial width reduction: m atom draws from the stick weights."""
    if m < 1:
        raise ValueError("m must be >= 1")
    w = latent.draw.weights / (1.0 - latent.draw.tail_mass)
    idx = np.array([sample_categorical(stream, w) for _ in range(m)])
    return FiniteWidthNet(
        signs=latent.signs[idx],
        atoms=latent.draw.atoms[idx],
        scale=spec.output_scale,
    )


def _dp_output(spec: DirichletNet, latent: DirichletNetLatent, X: np.ndarray) -> np.ndarray:
    acts = np.maximum(X @ latent.draw.atoms.T, 0.0)  # (n, atoms)
    return spec.output_scale * (acts @ (latent.signs * latent.draw.weights))


def _net_output(net: FiniteWidthNet, X: np.ndarray) -> np.ndarray:
    acts = np.maximum(X @ net.atoms.T, 0.0)
    return net.scale / len(net.signs) * (acts @ net.signs)


def multinomial_width_reduce(
    spec: DirichletNet,
    latent: DirichletNetLatent,
    m: int,
    stream: RngStream,
    n_inputs: int = 512,
) -> Tuple[FiniteWidthNet, QuantizerReport]:
    """Width reduction plus an MC report of the squared function gap.

    The gap E[(F - F_m)^2] is estimated over fresh standard-normal inputs for
    this latent and this reduction draw; the analytic target is K/m averaged
    over everything, so grid tests additionally average over latents.
    """
    net = width_reduce(spec, latent, m, stream.derive(("reduce", 0)))
    X = stream.derive(("inputs", 0)).gen.normal(size=(n_inputs, spec.d))
    gap = (_dp_output(spec, latent, X) - _net_output(net, X)) ** 2
    report = QuantizerReport(
        rate_nats=0.0,
        empirical_distortion=float(np.mean(gap)),
        distortion_se=float(np.std(gap, ddof=1) / math.sqrt(n_inputs)),
        distortion_bound=spec.scale / m,
    )
    return net, report


def width_reduction_distortion(
    spec: DirichletNet,
    m: int,
    stream: RngStream,
    n_latents: int = 64,
    n_inputs: int = 256,
    eps: float = 0.0,
) -> Tuple[float, float]:
    """Full-MC squared function gap, averaged over latents, reductions, inputs.

    Returns (mean, standard error) with replicate-level (per-latent) variance.
    With eps > 0 the reduced net's atoms are additionally snapped to an
    eps-cover of the sphere.
    """
    cover = get_sphere_cover(spec.d, eps) if eps > 0 else None
    means = np.empty(n_latents)
    for i in range(n_latents):
        sub = stream.derive(("latent", i))
        latent = sample_latent(spec, sub.derive(("prior", 0)))
        net = width_reduce(spec, latent, m, sub.derive(("reduce", 0)))
        if cover is not None:
            net = snap_to_cover(net, cover)
        X = sub.derive(("inputs", 0)).gen.normal(size=(n_inputs, spec.d))
        gap = (_dp_output(spec, latent, X) - _net_output(net, X)) ** 2
        means[i] = float(np.mean(gap))
    return float(np.mean(means)), float(np.std(means, ddof=1) / math.sqrt(n_latents))


# ---------------------------------------------------------------------------
# Sphere covers
# ---------------------------------------------------------------------------


def _sphere_grid(d: int, n: int, stream: RngStream) -> np.ndarray:
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        ang = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    # Fibonacci spiral for d = 3.
    i = np.arange(n) + 0.5
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def build_sphere_cover(d: int, eps: float, stream: RngStream) -> SphereCover:
    """Greedy farthest-point eps-cover of the unit sphere, probe-verified."""
    if d > 3:
        raise ValueError("covers are built only for d <= 3")
    if eps < 0.05:
        raise ValueError("eps must be >= 0.05 at desk scale")
    if d == 1:
        return SphereCover(atoms=np.array([[1.0], [-1.0]]), radius=0.0)
    grid_n = 4096 if d == 2 else 200_000
    grid = _sphere_grid(d, grid_n, stream)
    budget = int(8 * (3.0 / eps**2) ** d) + 16
    atoms = [grid[0]]
    min_dist = np.linalg.norm(grid - grid[0], axis=1)
    while np.max(min_dist) > eps * 0.98:
        if len(atoms) > budget:
            raise RuntimeError("cover budget exhausted")
        nxt = grid[int(np.argmax(min_dist))]
        atoms.append(nxt)
        min_dist = np.minimum(min_dist, np.linalg.norm(grid - nxt, axis=1))
    atom_arr = np.array(atoms)
    probes = _sphere_grid(d, 100_000, stream) if d == 3 else _sphere_grid(d, 100_000, stream)
    d2 = np.min(
        np.sum(probes * probes, axis=1, keepdims=True)
        - 2.0 * probes @ atom_arr.T
        + np.sum(atom_arr * atom_arr, axis=1),
        axis=1,
    )
    radius = float(math.sqrt(max(np.max(d2), 0.0)))
    return SphereCover(atoms=atom_arr, radius=radius)


def quantize_to_cover(cover: SphereCover, v: np.ndarray) -> np.ndarray:
    """Nearest cover atom to v (Euclidean)."""
    d2 = np.sum((cover.atoms - v) ** 2, axis=1)
    return cover.atoms[int(np.argmin(d2))]


def snap_to_cover(net: FiniteWidthNet, cover: SphereCover) -> FiniteWidthNet:
    idx = np.argmin(
        np.sum(net.atoms * net.atoms, axis=1, keepdims=True)
        - 2.0 * net.atoms @ cover.atoms.T
        + np.sum(cover.atoms * cover.atoms, axis=1),
        axis=1,
    )
    return FiniteWidthNet(signs=net.signs, atoms=cover.atoms[idx], scale=net.scale)


_COVER_CACHE: Dict[Tuple[int, float], SphereCover] = {}


def get_sphere_cover(d: int, eps: float) -> SphereCover:
    """Deterministic cached cover for (d, eps); construction is seed-fixed."""
    key = (d, round(eps, 12))
    if key not in _COVER_CACHE:
        stream = RngStream(SeedSpec(49374, (("cover", d),)))
        _COVER_CACHE[key] = build_sphere_cover(d, eps, stream)
    return _COVER_CACHE[key]


def misspecified_width_prior_sample(
    spec: DirichletNet, n: int, eps: float, stream: RngStream
) -> FiniteWidthNet:
    """One draw from the reduced-width function prior.

    Samples a fresh process latent, reduces it to width n by multinomial
    draws, and (for eps > 0) snaps each atom to an eps-cover of the sphere.
    """
    latent = sample_latent(spec, stream.derive(("prior", 0)))
    net = width_reduce(spec, latent, n, stream.derive(("reduce", 0)))
    if eps > 0:
        net = snap_to_cover(net, get_sphere_cover(spec.d, eps))
    return net
