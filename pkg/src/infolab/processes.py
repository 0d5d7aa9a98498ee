"""Data-generating processes behind one generator interface.

Each process exposes: prior sampling of latent parameters, initial history,
single-step generation, and exact conditional log-likelihood of a label given
latent and history.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Union

import numpy as np

from .rng import (
    RngStream,
    StickBreakingDraw,
    sample_categorical,
    sample_gaussian,
    sample_stick_breaking,
    sample_unit_sphere,
)

LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Process specifications (tagged union)
# ---------------------------------------------------------------------------


def _check_unit_rows(arr: np.ndarray, name: str) -> None:
    norms = np.linalg.norm(np.atleast_2d(arr), axis=1)
    if np.max(np.abs(norms - 1.0)) > 1e-12:
        raise ValueError(f"{name} rows must have unit norm")


@dataclass(frozen=True)
class LinReg:
    """Linear regression: theta ~ N(0, prior_var I_d), Y = theta^T X + W."""

    d: int
    noise_var: float
    prior_var: Optional[float] = None

    def __post_init__(self):
        if self.d < 1 or self.noise_var <= 0:
            raise ValueError("d >= 1 and noise_var > 0 required")
        if self.prior_var is None:
            object.__setattr__(self, "prior_var", 1.0 / self.d)


@dataclass(frozen=True)
class LogReg:
    """Logistic regression: theta ~ N(0, I_d/d), P(Y=1) = sigmoid(theta^T X)."""

    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d >= 1 required")


@dataclass(frozen=True)
class DeepNet:
    """ReLU stack with Gaussian weight priors and linear scalar output."""

    d: int
    width: int
    depth: int
    noise_var: float

    def __post_init__(self):
        if min(self.d, self.width, self.depth) < 1 or self.noise_var <= 0:
            raise ValueError("dimensions >= 1 and noise_var > 0 required")


@dataclass(frozen=True)
class DirichletNet:
    """Infinite-width net drawn from a Dirichlet process over sphere atoms.

    Y = W + c sum_w theta_w ReLU(w^T X) with c = sqrt(scale) by default or
    sqrt(scale + 1) when plus_one_scaling is set (the convention of the
    scaling-law analysis).
    """

    d: int
    scale: float
    noise_var: float
    tail_tol: float = 1e-8
    plus_one_scaling: bool = False

    def __post_init__(self):
        if self.d < 1 or self.scale <= 0 or self.noise_var <= 0:
            raise ValueError("d >= 1, scale > 0, noise_var > 0 required")

    @property
    def output_scale(self) -> float:
        return math.sqrt(self.scale + 1.0 if self.plus_one_scaling else self.scale)


@dataclass(frozen=True)
class BinaryARK:
    """Binary AR(K): P(X_{t+1}=1) = sigmoid(sum_k theta_k^T phi_{t-k+1})."""

    d: int
    context: int
    phi0: np.ndarray
    phi1: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "phi0", np.asarray(self.phi0, dtype=float))
        object.__setattr__(self, "phi1", np.asarray(self.phi1, dtype=float))
        if self.d < 1 or self.context < 1:
            raise ValueError("d >= 1 and context >= 1 required")
        if self.phi0.shape != (self.d,) or self.phi1.shape != (self.d,):
            raise ValueError("embeddings must have shape (d,)")
        _check_unit_rows(self.phi0, "phi0")
        _check_unit_rows(self.phi1, "phi1")


@dataclass(frozen=True)
class Transformer:
    """Autoregressive token process driven by a clipped softmax-attention stack.

    embeddings has shape (vocab, attn_dim) with unit-norm rows; v_prior selects
    the prior on value-matrix rows (uniform sphere rows by default, or iid
    Gaussian entries of variance 1/attn_dim).
    """

    vocab: int
    attn_dim: int
    depth: int
    context: int
    embeddings: np.ndarray
    v_prior: str = "sphere_rows"

    def __post_init__(self):
        object.__setattr__(self, "embeddings", np.asarray(self.embeddings, dtype=float))
        if min(self.vocab, self.attn_dim, self.depth, self.context) < 1:
            raise ValueError("all dimensions must be >= 1")
        if self.embeddings.shape != (self.vocab, self.attn_dim):
            raise ValueError("embeddings must have shape (vocab, attn_dim)")
        _check_unit_rows(self.embeddings, "embeddings")
        if self.v_prior not in ("sphere_rows", "gaussian"):
            raise ValueError("v_prior must be 'sphere_rows' or 'gaussian'")


@dataclass(frozen=True)
class LinRep:
    """Linear representation learning: theta_m = psi xi_m, iid softmax draws."""

    d: int
    r: int
    tasks: int

    def __post_init__(self):
        if self.r < 1 or self.tasks < 1:
            raise ValueError("r >= 1 and tasks >= 1 required")
        if self.d <= self.r:
            raise ValueError("LinRep requires d > r")


@dataclass(frozen=True)
class IclMixture:
    """Mixture of transformers with Dirichlet(R/N, ..., R/N) mixing weights."""

    mixture_size: int
    scale: float
    inner: Transformer
    tasks: int
    per_task: int

    def __post_init__(self):
        if self.mixture_size < 1 or self.tasks < 1 or self.per_task < 1:
            raise ValueError("mixture_size, tasks, per_task must be >= 1")
        if self.scale > self.mixture_size:
            raise ValueError("scale R must satisfy R <= N")


ProcessSpec = Union[
    LinReg, LogReg, DeepNet, DirichletNet, BinaryARK, Transformer, LinRep, IclMixture
]


def make_embeddings(vocab: int, attn_dim: int, stream: RngStream) -> np.ndarray:
    """Deterministic unit-norm token embeddings.

    Standard basis vectors when vocab <= attn_dim, otherwise an orthonormal-ish
    frame from the QR of a seeded Gaussian matrix with normalized rows.
    """
    if vocab <= attn_dim:
        emb = np.zeros((vocab, attn_dim))
        emb[np.arange(vocab), np.arange(vocab)] = 1.0
        return emb
    g = stream.gen.normal(size=(vocab, attn_dim))
    q, _ = np.linalg.qr(g.T)  # (attn_dim, attn_dim) orthonormal columns
    frame = g @ q  # rotate for determinism of sign structure
    return frame / np.linalg.norm(frame, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Latent parameters (tagged union)
# ---------------------------------------------------------------------------


@dataclass
class LinRegLatent:
    theta: np.ndarray


@dataclass
class LogRegLatent:
    theta: np.ndarray


@dataclass
class DeepNetLatent:
    weights: List[np.ndarray]


@dataclass
class DirichletNetLatent:
    draw: StickBreakingDraw
    signs: np.ndarray  # +-1 per atom, drawn once and frozen


@dataclass
class ARKLatent:
    theta: np.ndarray  # shape (context, d); theta[k-1] pairs with phi_{t-k+1}


@dataclass
class TransformerLatent:
    attn: List[np.ndarray]  # A^(l), each (r, r)
    value: List[np.ndarray]  # V^(l): (r, r) for l < L, (vocab, r) for l = L


@dataclass
class LinRepLatent:
    psi: np.ndarray  # (d, r), orthonormal columns
    xi: np.ndarray  # (tasks, r)


@dataclass
class IclLatent:
    assignments: np.ndarray  # i_m per task
    components: Dict[int, TransformerLatent] = field(default_factory=dict)


LatentParams = Union[
    LinRegLatent,
    LogRegLatent,
    DeepNetLatent,
    DirichletNetLatent,
    ARKLatent,
    TransformerLatent,
    LinRepLatent,
    IclLatent,
]


# ---------------------------------------------------------------------------
# History
# ---------------------------------------------------------------------------


@dataclass
class Observation:
    """One (input, label) pair; token processes use x=None and integer y."""

    x: Optional[np.ndarray]
    y: Union[float, int]
    task: Optional[int] = None


class History:
    """Append-only ordered sequence of observations."""

    def __init__(self, observations: Optional[List[Observation]] = None):
        self.observations: List[Observation] = list(observations or [])

    def append(self, obs: Observation) -> None:
        self.observations.append(obs)

    def labels(self) -> List[Union[float, int]]:
        return [o.y for o in self.observations]

    def __len__(self) -> int:
        return len(self.observations)


# ---------------------------------------------------------------------------
# Prior sampling
# ---------------------------------------------------------------------------


def _sample_transformer_latent(spec: Transformer, stream: RngStream) -> TransformerLatent:
    attn = []
    value = []
    r = spec.attn_dim
    for layer in range(spec.depth):
        sub = stream.derive(("layer", layer))
        attn.append(sub.gen.normal(size=(r, r)))
        out_rows = spec.vocab if layer == spec.depth - 1 else r
        if spec.v_prior == "sphere_rows":
            rows = [sample_unit_sphere(sub, r) for _ in range(out_rows)]
            value.append(np.array(rows))
        else:
            value.append(sub.gen.normal(0.0, math.sqrt(1.0 / r), size=(out_rows, r)))
    return TransformerLatent(attn=attn, value=value)


def _sample_orthonormal(d: int, r: int, stream: RngStream) -> np.ndarray:
    g = stream.gen.normal(size=(d, r))
    q, rr = np.linalg.qr(g)
    # Fix signs so the map from Gaussian draws is uniquely determined.
    q = q * np.sign(np.diag(rr))
    return q


def _polya_urn_assignments(n: int, scale: float, classes: int, stream: RngStream) -> np.ndarray:
    """Sequential draws from a symmetric Dirichlet-multinomial urn.

    Exact for finite class counts; matches DirMult(n, [scale/classes] * classes)
    marginally without materializing the full weight vector.
    """
    counts: Dict[int, float] = {}
    unseen = classes
    out = np.empty(n, dtype=int)
    alpha0 = scale
    per_class = scale / classes
    for i in range(n):
        total = i + alpha0
        u = stream.gen.random() * total
        acc = 0.0
        chosen = None
        for cls, cnt in counts.items():
            acc += cnt + per_class
            if u < acc:
                chosen = cls
                break
        if chosen is None:
            # A class not drawn before; uniform over the unseen ones.
            idx = int(stream.gen.integers(unseen))
            taken = sorted(counts.keys())
            chosen = idx
            for t in taken:
                if chosen >= t:
                    chosen += 1
            unseen -= 1
        counts[chosen] = counts.get(chosen, 0.0) + 1.0
        out[i] = chosen
    return out


def sample_latent(spec: ProcessSpec, stream: RngStream) -> LatentParams:
    """Draw latent parameters exactly from the process prior."""
    if isinstance(spec, LinReg):
        return LinRegLatent(theta=sample_gaussian(stream, spec.d, spec.prior_var))
    if isinstance(spec, LogReg):
        return LogRegLatent(theta=sample_gaussian(stream, spec.d, 1.0 / spec.d))
    if isinstance(spec, DeepNet):
        d, n, depth = spec.d, spec.width, spec.depth
        weights = []
        for layer in range(depth):
            sub = stream.derive(("layer", layer))
            if layer == 0:
                weights.append(
                    sub.gen.normal(0.0, math.sqrt(1.0 / d), size=(n if depth > 1 else 1, d))
                )
            elif layer == depth - 1:
                weights.append(sub.gen.normal(0.0, math.sqrt(1.0 / n), size=(1, n)))
            else:
                weights.append(sub.gen.normal(0.0, math.sqrt(1.0 / n), size=(n, n)))
        return DeepNetLatent(weights=weights)
    if isinstance(spec, DirichletNet):
        draw = sample_stick_breaking(stream, spec.scale, spec.d, spec.tail_tol)
        signs = np.where(stream.gen.random(len(draw.weights)) < 0.5, 1.0, -1.0)
        return DirichletNetLatent(draw=draw, signs=signs)
    if isinstance(spec, BinaryARK):
        theta = stream.gen.normal(
            0.0, math.sqrt(1.0 / spec.context), size=(spec.context, spec.d)
        )
        return ARKLatent(theta=theta)
    if isinstance(spec, Transformer):
        return _sample_transformer_latent(spec, stream)
    if isinstance(spec, LinRep):
        psi = _sample_orthonormal(spec.d, spec.r, stream.derive(("psi", 0)))
        xi = np.stack(
            [
                sample_gaussian(stream.derive(("xi", m)), spec.r, 1.0 / spec.r)
                for m in range(spec.tasks)
            ]
        )
        return LinRepLatent(psi=psi, xi=xi)
    if isinstance(spec, IclMixture):
        assignments = _polya_urn_assignments(
            spec.tasks, spec.scale, spec.mixture_size, stream.derive(("urn", 0))
        )
        components: Dict[int, TransformerLatent] = {}
        for cls in sorted(set(int(a) for a in assignments)):
            components[cls] = _sample_transformer_latent(
                spec.inner, stream.derive(("component", cls))
            )
        return IclLatent(assignments=assignments, components=components)
    raise TypeError(f"unknown process spec: {type(spec).__name__}")


# ---------------------------------------------------------------------------
# Forward maps
# ---------------------------------------------------------------------------


def relu_forward(weights: List[np.ndarray], x: np.ndarray) -> float:
    """Deterministic forward pass; hidden layers ReLU, output layer linear."""
    u = np.asarray(x, dtype=float)
    for layer, w in enumerate(weights):
        if w.shape[1] != u.shape[0]:
            raise ValueError("weight/input shape mismatch")
        u = w @ u
        if layer < len(weights) - 1:
            u = np.maximum(u, 0.0)
    return float(u.reshape(-1)[0])


def dirichlet_net_output(spec: DirichletNet, latent: DirichletNetLatent, x: np.ndarray) -> float:
    """Noiseless output c sum_w theta_w ReLU(w^T x) of the truncated draw."""
    acts = np.maximum(latent.draw.atoms @ x, 0.0)
    return float(spec.output_scale * np.sum(latent.signs * latent.draw.weights * acts))


def _softmax_columns(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def _clip_columns(u: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(u, axis=0, keepdims=True)
    factor = np.minimum(1.0, 1.0 / np.maximum(norms, 1e-300))
    return u * factor


def attention_layer(U: np.ndarray, A: np.ndarray, V: np.ndarray) -> np.ndarray:
    """One transformer layer: Clip(V U Softmax(U^T A U / sqrt(r)))."""
    r = A.shape[0]
    if U.shape[0] != r or A.shape != (r, r) or V.shape[1] != U.shape[0]:
        raise ValueError("shape mismatch in attention layer")
    attn = _softmax_columns((U.T @ A @ U) / math.sqrt(r))
    return _clip_columns(V @ (U @ attn))


def transformer_next_pmf(
    spec: Transformer, latent: TransformerLatent, tokens: List[int]
) -> np.ndarray:
    """Next-token pmf given the last `context` tokens (1-based indices)."""
    ctx = tokens[-spec.context:]
    if len(ctx) < spec.context:
        raise ValueError("history shorter than the context length")
    u = spec.embeddings[np.array(ctx) - 1].T  # (r, K)
    for layer in range(spec.depth):
        u = attention_layer(u, latent.attn[layer], latent.value[layer])
    logits = u[:, -1]
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def _log_sigmoid(z: float) -> float:
    # ln sigmoid(z) = -softplus(-z)
    return -float(np.logaddexp(0.0, -z))


def ark_logit(spec: BinaryARK, latent: ARKLatent, bits: List[int]) -> float:
    """Logit of P(next bit = 1) given the last `context` bits."""
    ctx = bits[-spec.context:]
    if len(ctx) < spec.context:
        raise ValueError("history shorter than the context length")
    total = 0.0
    for k in range(1, spec.context + 1):
        phi = spec.phi1 if ctx[-k] == 1 else spec.phi0
        total += float(latent.theta[k - 1] @ phi)
    return total


def linrep_task_pmf(latent: LinRepLatent, m: int) -> np.ndarray:
    logits = latent.psi @ latent.xi[m]
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


# ---------------------------------------------------------------------------
# Generator interface
# ---------------------------------------------------------------------------


def initial_history(spec: ProcessSpec, latent: LatentParams, stream: RngStream) -> History:
    """Seed history: K uniform bits/tokens for sequence processes, else empty."""
    hist = History()
    if isinstance(spec, BinaryARK):
        for _ in range(spec.context):
            hist.append(Observation(x=None, y=int(stream.gen.integers(2))))
    elif isinstance(spec, Transformer):
        for _ in range(spec.context):
            hist.append(Observation(x=None, y=int(stream.gen.integers(spec.vocab)) + 1))
    return hist


def step(
    spec: ProcessSpec, latent: LatentParams, history: History, stream: RngStream
) -> Observation:
    """Generate one observation from the true process."""
    if isinstance(spec, LinReg):
        x = stream.gen.normal(size=spec.d)
        y = float(latent.theta @ x) + float(
            stream.gen.normal(0.0, math.sqrt(spec.noise_var))
        )
        return Observation(x=x, y=y)
    if isinstance(spec, LogReg):
        x = stream.gen.normal(size=spec.d)
        p1 = _sigmoid(float(latent.theta @ x))
        return Observation(x=x, y=int(stream.gen.random() < p1))
    if isinstance(spec, DeepNet):
        x = stream.gen.normal(size=spec.d)
        y = relu_forward(latent.weights, x) + float(
            stream.gen.normal(0.0, math.sqrt(spec.noise_var))
        )
        return Observation(x=x, y=y)
    if isinstance(spec, DirichletNet):
        x = stream.gen.normal(size=spec.d)
        y = dirichlet_net_output(spec, latent, x) + float(
            stream.gen.normal(0.0, math.sqrt(spec.noise_var))
        )
        return Observation(x=x, y=y)
    if isinstance(spec, BinaryARK):
        bits = [int(b) for b in history.labels()]
        if len(bits) < spec.context:
            raise ValueError("history must contain the initial context bits")
        p1 = _sigmoid(ark_logit(spec, latent, bits))
        return Observation(x=None, y=int(stream.gen.random() < p1))
    if isinstance(spec, Transformer):
        tokens = [int(t) for t in history.labels()]
        if len(tokens) < spec.context:
            raise ValueError("history must contain the initial context tokens")
        pmf = transformer_next_pmf(spec, latent, tokens)
        return Observation(x=None, y=sample_categorical(stream, pmf) + 1)
    raise TypeError(
        f"step is undefined for {type(spec).__name__}; use meta_step for meta processes"
    )


def meta_step(
    spec: Union[LinRep, IclMixture],
    latent: LatentParams,
    m: int,
    history: History,
    stream: RngStream,
) -> Observation:
    """Generate one observation for task m of a meta process."""
    if isinstance(spec, LinRep):
        if not 0 <= m < spec.tasks:
            raise ValueError("task index out of range")
        pmf = linrep_task_pmf(latent, m)
        return Observation(x=None, y=sample_categorical(stream, pmf) + 1, task=m)
    if isinstance(spec, IclMixture):
        if not 0 <= m < spec.tasks:
            raise ValueError("task index out of range")
        comp = latent.components[int(latent.assignments[m])]
        tokens = [int(o.y) for o in history.observations if o.task == m]
        pmf = transformer_next_pmf(spec.inner, comp, tokens)
        obs = Observation(x=None, y=sample_categorical(stream, pmf) + 1, task=m)
        return obs
    raise TypeError("meta_step requires a LinRep or IclMixture spec")


def cond_logprob(
    spec: ProcessSpec,
    latent: LatentParams,
    history: History,
    x: Optional[np.ndarray],
    y: Union[float, int],
) -> float:
    """Exact log-density/log-mass of y under the true process."""
    if isinstance(spec, LinReg):
        mean = float(latent.theta @ x)
        return -0.5 * (LOG_2PI + math.log(spec.noise_var)) - (y - mean) ** 2 / (
            2.0 * spec.noise_var
        )
    if isinstance(spec, LogReg):
        z = float(latent.theta @ x)
        return _log_sigmoid(z) if y == 1 else _log_sigmoid(-z)
    if isinstance(spec, DeepNet):
        mean = relu_forward(latent.weights, x)
        return -0.5 * (LOG_2PI + math.log(spec.noise_var)) - (y - mean) ** 2 / (
            2.0 * spec.noise_var
        )
    if isinstance(spec, DirichletNet):
        mean = dirichlet_net_output(spec, latent, x)
        return -0.5 * (LOG_2PI + math.log(spec.noise_var)) - (y - mean) ** 2 / (
            2.0 * spec.noise_var
        )
    if isinstance(spec, BinaryARK):
        bits = [int(b) for b in history.labels()]
        z = ark_logit(spec, latent, bits)
        return _log_sigmoid(z) if y == 1 else _log_sigmoid(-z)
    if isinstance(spec, Transformer):
        tokens = [int(t) for t in history.labels()]
        pmf = transformer_next_pmf(spec, latent, tokens)
        return float(np.log(pmf[int(y) - 1]))
    raise TypeError(f"cond_logprob is undefined for {type(spec).__name__}")


def meta_cond_logprob(
    spec: Union[LinRep, IclMixture],
    latent: LatentParams,
    m: int,
    history: History,
    y: int,
) -> float:
    """Exact log-mass of the next label of task m under the true process."""
    if isinstance(spec, LinRep):
        pmf = linrep_task_pmf(latent, m)
        return float(np.log(pmf[int(y) - 1]))
    if isinstance(spec, IclMixture):
        comp = latent.components[int(latent.assignments[m])]
        tokens = [int(o.y) for o in history.observations if o.task == m]
        pmf = transformer_next_pmf(spec.inner, comp, tokens)
        return float(np.log(pmf[int(y) - 1]))
    raise TypeError("meta_cond_logprob requires a LinRep or IclMixture spec")


def irreducible_rate(spec: ProcessSpec) -> Optional[float]:
    """Per-step conditional entropy of labels given the latent.

    Closed form for Gaussian-noise processes; None marks discrete-label
    processes whose irreducible rate must be estimated via the omniscient
    predictor's Monte-Carlo loss.
    """
    if isinstance(spec, (LinReg, DeepNet, DirichletNet)):
        return 0.5 * math.log(2.0 * math.pi * math.e * spec.noise_var)
    return None


# ---------------------------------------------------------------------------
# Versioned JSON serialization (replay and golden tests)
# ---------------------------------------------------------------------------

SERIALIZATION_VERSION = 1


def _fmt(value):
    if isinstance(value, float):
        return float(f"{value:.17g}")
    if isinstance(value, np.ndarray):
        return [_fmt(v) for v in value.tolist()]
    if isinstance(value, list):
        return [_fmt(v) for v in value]
    return value


def latent_to_json(latent: LatentParams) -> str:
    """Serialize latent parameters to a versioned JSON string."""
    kind = type(latent).__name__
    payload: Dict[str, object] = {"version": SERIALIZATION_VERSION, "kind": kind}
    if isinstance(latent, (LinRegLatent, LogRegLatent)):
        payload["theta"] = _fmt(latent.theta)
    elif isinstance(latent, DeepNetLatent):
        payload["weights"] = [_fmt(w) for w in latent.weights]
    elif isinstance(latent, DirichletNetLatent):
        payload["weights"] = _fmt(latent.draw.weights)
        payload["atoms"] = _fmt(latent.draw.atoms)
        payload["tail_mass"] = _fmt(float(latent.draw.tail_mass))
        payload["signs"] = _fmt(latent.signs)
    elif isinstance(latent, ARKLatent):
        payload["theta"] = _fmt(latent.theta)
    elif isinstance(latent, TransformerLatent):
        payload["attn"] = [_fmt(a) for a in latent.attn]
        payload["value"] = [_fmt(v) for v in latent.value]
    elif isinstance(latent, LinRepLatent):
        payload["psi"] = _fmt(latent.psi)
        payload["xi"] = _fmt(latent.xi)
    elif isinstance(latent, IclLatent):
        payload["assignments"] = [int(a) for a in latent.assignments]
        payload["components"] = {
            str(k): {"attn": [_fmt(a) for a in v.attn], "value": [_fmt(w) for w in v.value]}
            for k, v in latent.components.items()
        }
    else:
        raise TypeError(f"unknown latent kind: {kind}")
    return json.dumps(payload, sort_keys=True)


def latent_from_json(text: str) -> LatentParams:
    """Rebuild latent parameters from their JSON form."""
    payload = json.loads(text)
    if payload.get("version") != SERIALIZATION_VERSION:
        raise ValueError("unsupported serialization version")
    kind = payload["kind"]
    if kind == "LinRegLatent":
        return LinRegLatent(theta=np.array(payload["theta"]))
    if kind == "LogRegLatent":
        return LogRegLatent(theta=np.array(payload["theta"]))
    if kind == "DeepNetLatent":
        return DeepNetLatent(weights=[np.array(w) for w in payload["weights"]])
    if kind == "DirichletNetLatent":
        draw = StickBreakingDraw(
            weights=np.array(payload["weights"]),
            atoms=np.array(payload["atoms"]),
            tail_mass=float(payload["tail_mass"]),
        )
        return DirichletNetLatent(draw=draw, signs=np.array(payload["signs"]))
    if kind == "ARKLatent":
        return ARKLatent(theta=np.array(payload["theta"]))
    if kind == "TransformerLatent":
        return TransformerLatent(
            attn=[np.array(a) for a in payload["attn"]],
            value=[np.array(v) for v in payload["value"]],
        )
    if kind == "LinRepLatent":
        return LinRepLatent(psi=np.array(payload["psi"]), xi=np.array(payload["xi"]))
    if kind == "IclLatent":
        return IclLatent(
            assignments=np.array(payload["assignments"], dtype=int),
            components={
                int(k): TransformerLatent(
                    attn=[np.array(a) for a in v["attn"]],
                    value=[np.array(w) for w in v["value"]],
                )
                for k, v in payload["components"].items()
            },
        )
    raise ValueError(f"unknown latent kind: {kind}")


def history_to_json(history: History) -> str:
    """Serialize a history to a versioned JSON string."""
    rows = []
    for obs in history.observations:
        rows.append(
            {
                "x": None if obs.x is None else _fmt(np.asarray(obs.x)),
                "y": _fmt(float(obs.y)) if isinstance(obs.y, float) else int(obs.y),
                "task": obs.task,
            }
        )
    return json.dumps({"version": SERIALIZATION_VERSION, "observations": rows})


def history_from_json(text: str) -> History:
    """Rebuild a history from its JSON form."""
    payload = json.loads(text)
    if payload.get("version") != SERIALIZATION_VERSION:
        raise ValueError("unsupported serialization version")
    hist = History()
    for row in payload["observations"]:
        x = None if row["x"] is None else np.array(row["x"])
        hist.append(Observation(x=x, y=row["y"], task=row["task"]))
    return hist
