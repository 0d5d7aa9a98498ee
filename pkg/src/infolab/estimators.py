"""Exact and Monte-Carlo estimation of predictive error and information.

Replicate rollouts, error-curve aggregation, exact enumeration of small
finite models (mutual information, per-step information, misspecification
decomposition), the linear-model MI estimator, and the meta error split.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import predictors as pred
from . import processes as proc
from .info import linreg_mi_given_inputs
from .predictors import (
    Omniscient,
    OracleMetaEnsemble,
    PredictorKind,
    PriorEnsemble,
    init_predictor,
    log_loss,
    predict,
)
from .processes import (
    History,
    IclMixture,
    LinRep,
    LinReg,
    ProcessSpec,
    initial_history,
    irreducible_rate,
    meta_step,
    sample_latent,
    step,
)
from .rng import RngStream

MAX_ENUM_STATES = 10**7


# ---------------------------------------------------------------------------
# Replicates and error curves
# ---------------------------------------------------------------------------


@dataclass
class ReplicateRecord:
    """Per-step log-losses of the predictor and the paired omniscient baseline."""

    losses: np.ndarray
    omniscient_losses: np.ndarray
    latent: object


@dataclass
class ErrorCurve:
    """Cumulative mean excess log-loss per horizon, with standard errors."""

    horizons: List[int]
    mean_error: np.ndarray
    std_err: np.ndarray
    per_step_error: np.ndarray
    replicates: int
    scenario_id: str = ""

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.horizons, self.horizons[1:])):
            raise ValueError("horizons must be strictly increasing")
        if np.any(self.std_err < 0):
            raise ValueError("standard errors must be nonnegative")


def run_replicate(
    spec: ProcessSpec, kind: PredictorKind, T: int, stream: RngStream
) -> ReplicateRecord:
    """Roll out one replicate: fresh latent, T observations, paired losses."""
    if T < 1:
        raise ValueError("T must be >= 1")
    latent = sample_latent(spec, stream.derive(("latent", 0)))
    history = initial_history(spec, latent, stream.derive(("init", 0)))
    state = init_predictor(kind, spec, latent=latent, stream=stream.derive(("pred", 0)))
    omni = init_predictor(Omniscient(), spec, latent=latent)
    for obs in history.observations:
        state.observe(spec, obs)
        omni.observe(spec, obs)
    losses = np.empty(T)
    omni_losses = np.empty(T)
    for t in range(T):
        obs = step(spec, latent, history, stream.derive(("step", t)))
        losses[t] = log_loss(predict(state, spec, obs.x), obs.y)
        omni_losses[t] = log_loss(predict(omni, spec, obs.x), obs.y)
        state.observe(spec, obs)
        omni.observe(spec, obs)
        history.append(obs)
    return ReplicateRecord(losses=losses, omniscient_losses=omni_losses, latent=latent)


def run_meta_replicate(
    spec: LinRep, kind: PredictorKind, T: int, stream: RngStream
) -> ReplicateRecord:
    """Meta rollout: tasks visited round-robin, T observations per task."""
    latent = sample_latent(spec, stream.derive(("latent", 0)))
    state = init_predictor(kind, spec, latent=latent, stream=stream.derive(("pred", 0)))
    omni = init_predictor(Omniscient(), spec, latent=latent)
    history = History()
    total = spec.tasks * T
    losses = np.empty(total)
    omni_losses = np.empty(total)
    i = 0
    for t in range(T):
        for m in range(spec.tasks):
            obs = meta_step(spec, latent, m, history, stream.derive(("step", i)))
            losses[i] = log_loss(predict(state, spec, task=m), obs.y)
            omni_losses[i] = log_loss(predict(omni, spec, task=m), obs.y)
            state.observe(spec, obs)
            omni.observe(spec, obs)
            history.append(obs)
            i += 1
    return ReplicateRecord(losses=losses, omniscient_losses=omni_losses, latent=latent)


def aggregate_error_curve(
    records: Sequence[ReplicateRecord],
    horizons: Sequence[int],
    irreducible: Optional[float] = None,
    scenario_id: str = "",
) -> ErrorCurve:
    """Mean cumulative excess (1/t) sum(loss - irreducible) per horizon.

    With irreducible=None the paired omniscient losses stand in for the
    irreducible rate (variance-reduced estimator for discrete labels).
    """
    if len(records) < 2:
        raise ValueError("need at least 2 replicates")
    T = len(records[0].losses)
    if any(len(r.losses) != T for r in records):
        raise ValueError("replicates have mismatched lengths")
    horizons = list(horizons)
    losses = np.stack([r.losses for r in records])  # (R, T)
    if irreducible is None:
        excess = losses - np.stack([r.omniscient_losses for r in records])
    else:
        excess = losses - irreducible
    cum = np.cumsum(excess, axis=1)
    R = len(records)
    means, ses, steps = [], [], []
    for t in horizons:
        if not 1 <= t <= T:
            raise ValueError("horizon outside the simulated range")
        per_rep = cum[:, t - 1] / t
        means.append(float(np.mean(per_rep)))
        ses.append(float(np.std(per_rep, ddof=1) / math.sqrt(R)))
        steps.append(float(np.mean(excess[:, t - 1])))
    return ErrorCurve(
        horizons=horizons,
        mean_error=np.array(means),
        std_err=np.array(ses),
        per_step_error=np.array(steps),
        replicates=R,
        scenario_id=scenario_id,
    )


def error_curve_rows(curve: ErrorCurve) -> List[List[str]]:
    """CSV rows (without header) for an error curve."""
    rows = []
    for i, t in enumerate(curve.horizons):
        rows.append(
            [
                str(t),
                f"{curve.mean_error[i]:.17g}",
                f"{curve.std_err[i]:.17g}",
                str(curve.replicates),
                curve.scenario_id,
            ]
        )
    return rows


ERROR_CURVE_HEADER = ["horizon", "mean_error", "std_err", "replicates", "scenario_id"]


# ---------------------------------------------------------------------------
# Exact enumeration models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnumerationModel:
    """Finite iid model: hypothesis prior and per-hypothesis label pmfs."""

    prior: np.ndarray  # (H,)
    cond: np.ndarray  # (H, A): P(Y = a | hypothesis h)

    def __post_init__(self):
        p = np.asarray(self.prior, dtype=float)
        c = np.asarray(self.cond, dtype=float)
        if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("prior must be a pmf")
        if c.ndim != 2 or c.shape[0] != len(p) or np.any(c < 0):
            raise ValueError("cond must be (H, A) with nonnegative entries")
        if np.max(np.abs(c.sum(axis=1) - 1.0)) > 1e-9:
            raise ValueError("conditional rows must be pmfs")
        object.__setattr__(self, "prior", p)
        object.__setattr__(self, "cond", c)

    @property
    def n_hyp(self) -> int:
        return len(self.prior)

    @property
    def alphabet(self) -> int:
        return self.cond.shape[1]


def _check_enum_size(model: EnumerationModel, T: int) -> None:
    if model.alphabet**T > MAX_ENUM_STATES:
        raise ResourceWarning("outcome space exceeds the exact-enumeration cap")


def _irreducible_total(model: EnumerationModel, T: int) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        logc = np.where(model.cond > 0, np.log(np.maximum(model.cond, 1e-300)), 0.0)
    per_hyp = -np.sum(model.cond * logc, axis=1)
    return T * float(model.prior @ per_hyp)


def exact_mi_enumeration(model: EnumerationModel, T: int) -> Tuple[float, float]:
    """Exact I(theta; Y_{1:T}) and the cumulative Bayes loss gap.

    Returns (mi, loss_gap) where loss_gap is the exact cumulative posterior
    predictive log-loss minus the irreducible entropy; the two agree to 1e-9
    (asserted).
    """
    _check_enum_size(model, T)
    H, A = model.n_hyp, model.alphabet
    mi = 0.0
    loss = 0.0
    for seq in itertools.product(range(A), repeat=T):
        lik = np.prod(model.cond[:, seq], axis=1)  # (H,)
        marg = float(model.prior @ lik)
        if marg <= 0:
            continue
        # Information route: joint * log(lik / marginal).
        for h in range(H):
            jh = model.prior[h] * lik[h]
            if jh > 0:
                mi += jh * (math.log(lik[h]) - math.log(marg))
        # Loss route: per-step posterior predictive scored sequentially.
        w = model.prior.copy()
        seq_loss = 0.0
        for y in seq:
            py = float(w @ model.cond[:, y])
            seq_loss += -math.log(py)
            w = w * model.cond[:, y]
            w = w / w.sum()
        loss += marg * seq_loss
    loss_gap = loss - _irreducible_total(model, T)
    if abs(mi - loss_gap) > 1e-9:
        raise AssertionError(
            f"information/loss identity violated: {mi} vs {loss_gap}"
        )
    return mi, loss_gap


def per_step_info(model: EnumerationModel, T: int) -> np.ndarray:
    """Exact I(Y_{t+1}; theta | H_t) for t = 0..T-1."""
    _check_enum_size(model, T)
    A = model.alphabet
    out = np.empty(T)
    for t in range(T):
        total = 0.0
        for prefix in itertools.product(range(A), repeat=t):
            lik = (
                np.prod(model.cond[:, prefix], axis=1)
                if t > 0
                else np.ones(model.n_hyp)
            )
            wj = model.prior * lik
            pw = float(wj.sum())
            if pw <= 0:
                continue
            post = wj / pw
            mix = post @ model.cond  # (A,)
            info = 0.0
            for h in range(model.n_hyp):
                if post[h] <= 0:
                    continue
                mask = model.cond[h] > 0
                info += post[h] * float(
                    np.sum(
                        model.cond[h][mask]
                        * (np.log(model.cond[h][mask]) - np.log(mix[mask]))
                    )
                )
            total += pw * info
        out[t] = total
    return out


@dataclass
class DecompositionReport:
    """Exact loss decomposition under a misspecified hypothesis prior."""

    total_loss: float  # cumulative excess over irreducible, per step
    information_term: float  # I(theta; Y_{1:T}) / T
    misspecification_term: float  # mean_t E KL(posterior pred || misspec pred)
    residual: float
    prior_kl_bound: float  # KL(prior || misspecified prior) / T


def misspec_decomposition(
    model: EnumerationModel, misspec_prior: np.ndarray, T: int
) -> DecompositionReport:
    """Exact decomposition of the misspecified-prior Bayes loss.

    total = information + misspecification, with residual below 1e-9; also
    evaluates the KL(prior || misspecified prior)/T upper bound on the
    misspecification term (+inf when the misspecified prior kills a
    hypothesis of positive true mass).
    """
    _check_enum_size(model, T)
    q = np.asarray(misspec_prior, dtype=float)
    if len(q) != model.n_hyp or np.any(q < 0) or abs(q.sum() - 1.0) > 1e-9:
        raise ValueError("misspecified prior must be a pmf over the same support")
    A = model.alphabet
    total = 0.0
    misspec = 0.0
    for seq in itertools.product(range(A), repeat=T):
        lik = np.prod(model.cond[:, seq], axis=1)
        marg = float(model.prior @ lik)
        if marg <= 0:
            continue
        w = model.prior.copy()
        wq = q.copy()
        seq_loss = 0.0
        seq_misspec = 0.0
        for y in seq:
            pt = w @ model.cond  # true posterior predictive
            qt = wq @ model.cond  # misspecified posterior predictive
            seq_loss += -math.log(max(float(qt[y]), 1e-300))
            mask = pt > 0
            seq_misspec += float(
                np.sum(pt[mask] * (np.log(pt[mask]) - np.log(np.maximum(qt[mask], 1e-300))))
            )
            w = w * model.cond[:, y]
            w = w / w.sum()
            wq = wq * model.cond[:, y]
            s = wq.sum()
            if s > 0:
                wq = wq / s
        total += marg * seq_loss
        misspec += marg * seq_misspec
    mi, _ = exact_mi_enumeration(model, T)
    total_excess = (total - _irreducible_total(model, T)) / T
    info_term = mi / T
    misspec_term = misspec / T
    mask = model.prior > 0
    if np.any(q[mask] == 0):
        bound = math.inf
    else:
        bound = float(
            np.sum(model.prior[mask] * (np.log(model.prior[mask]) - np.log(q[mask])))
        ) / T
    return DecompositionReport(
        total_loss=total_excess,
        information_term=info_term,
        misspecification_term=misspec_term,
        residual=total_excess - info_term - misspec_term,
        prior_kl_bound=bound,
    )


# ---------------------------------------------------------------------------
# Linear-model MI and the meta split
# ---------------------------------------------------------------------------


def linreg_mi_mc(
    d: int,
    noise_var: float,
    T: int,
    replicates: int,
    stream: RngStream,
    prior_var: Optional[float] = None,
) -> Tuple[float, float]:
    """MC mean of the exact conditional MI over input draws, with SE."""
    if noise_var <= 0:
        raise ValueError("noise variance must be positive")
    if prior_var is None:
        prior_var = 1.0 / d
    vals = np.empty(replicates)
    for i in range(replicates):
        X = stream.derive(("rep", i)).gen.normal(size=(T, d))
        vals[i] = linreg_mi_given_inputs(X, prior_var, noise_var)
    return float(np.mean(vals)), float(np.std(vals, ddof=1) / math.sqrt(replicates))


@dataclass
class MetaSplit:
    """MC estimates (value, SE) of the meta decomposition terms, per step."""

    total: Tuple[float, float]
    intra: Tuple[float, float]
    meta: Tuple[float, float]


def meta_error_split(
    spec: LinRep,
    T: int,
    replicates: int,
    stream: RngStream,
    ensemble_size: int = 4096,
) -> MetaSplit:
    """Total / intra-task / meta error split for the representation process.

    Total error uses the prior-ensemble posterior over (psi, xi); the
    intra-task term reruns the same replicates with the shared representation
    revealed (oracle-meta predictor); meta = total - intra, computed per
    replicate so the difference SE reflects the pairing.
    """
    totals = np.empty(replicates)
    intras = np.empty(replicates)
    kind_total = PriorEnsemble(size=ensemble_size)
    kind_intra = OracleMetaEnsemble(size=ensemble_size)
    n = spec.tasks * T
    for i in range(replicates):
        sub = stream.derive(("rep", i))
        rec_total = run_meta_replicate(spec, kind_total, T, sub.derive(("total", 0)))
        totals[i] = float(np.sum(rec_total.losses - rec_total.omniscient_losses)) / n
        rec_intra = run_meta_replicate(spec, kind_intra, T, sub.derive(("total", 0)))
        intras[i] = float(np.sum(rec_intra.losses - rec_intra.omniscient_losses)) / n
    diffs = totals - intras
    rse = lambda v: float(np.std(v, ddof=1) / math.sqrt(replicates))
    return MetaSplit(
        total=(float(np.mean(totals)), rse(totals)),
        intra=(float(np.mean(intras)), rse(intras)),
        meta=(float(np.mean(diffs)), rse(diffs)),
    )
