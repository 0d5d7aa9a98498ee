"""Tests for exact and Monte-Carlo error/information estimators."""

import itertools
import math

import numpy as np
import pytest
from scipy.integrate import quad

from infolab.estimators import (
    EnumerationModel,
    aggregate_error_curve,
    error_curve_rows,
    exact_mi_enumeration,
    linreg_mi_mc,
    meta_error_split,
    misspec_decomposition,
    per_step_info,
    run_replicate,
)
from infolab.predictors import ConjugateLinReg, Omniscient, PriorEnsemble
from infolab.processes import LinRep, LinReg
from infolab.rng import RngStream, SeedSpec
from infolab import bounds as bnd


def stream(seed, *path):
    return RngStream(SeedSpec(seed, tuple(path)))


def conjugate_kind(spec):
    return ConjugateLinReg(
        prior_mean=np.zeros(spec.d),
        prior_cov=spec.prior_var * np.eye(spec.d),
        noise_var=spec.noise_var,
    )


# ---------------------------------------------------------------------------
# exact enumeration: information identity
# ---------------------------------------------------------------------------


def test_mi_zero_when_labels_independent_of_latent():
    model = EnumerationModel(
        prior=np.array([0.3, 0.7]),
        cond=np.array([[0.4, 0.6], [0.4, 0.6]]),
    )
    mi, gap = exact_mi_enumeration(model, 4)
    assert mi == pytest.approx(0.0, abs=1e-12)
    assert gap == pytest.approx(0.0, abs=1e-9)


def test_mi_one_revealing_bit():
    model = EnumerationModel(
        prior=np.array([0.5, 0.5]),
        cond=np.array([[1.0, 0.0], [0.0, 1.0]]),
    )
    mi, _ = exact_mi_enumeration(model, 1)
    assert mi == pytest.approx(math.log(2), abs=1e-12)


def test_mi_identity_on_random_instances():
    gen = np.random.default_rng(0)
    for _ in range(10):
        H = int(gen.integers(2, 5))
        A = int(gen.integers(2, 3))
        model = EnumerationModel(
            prior=gen.dirichlet(np.ones(H)),
            cond=gen.dirichlet(np.ones(A), size=H),
        )
        mi, gap = exact_mi_enumeration(model, 6)
        assert abs(mi - gap) <= 1e-9


def test_enumeration_cap_enforced():
    model = EnumerationModel(
        prior=np.array([0.5, 0.5]),
        cond=np.array([[0.25] * 4, [0.25] * 4]),
    )
    with pytest.raises(ResourceWarning):
        exact_mi_enumeration(model, 13)  # 4^13 > 10^7


# ---------------------------------------------------------------------------
# per-step information
# ---------------------------------------------------------------------------


def test_per_step_info_nonincreasing_and_sums_to_total():
    gen = np.random.default_rng(1)
    for _ in range(8):
        model = EnumerationModel(
            prior=gen.dirichlet(np.ones(3)),
            cond=gen.dirichlet(np.ones(3), size=3),
        )
        seq = per_step_info(model, 5)
        assert np.all(np.diff(seq) <= 1e-12)
        mi, _ = exact_mi_enumeration(model, 5)
        assert float(np.sum(seq)) == pytest.approx(mi, abs=1e-9)


def test_per_step_info_deterministic_reveal():
    model = EnumerationModel(
        prior=np.array([0.5, 0.5]),
        cond=np.array([[1.0, 0.0], [0.0, 1.0]]),
    )
    seq = per_step_info(model, 4)
    assert seq[0] == pytest.approx(math.log(2), abs=1e-12)
    assert np.max(np.abs(seq[1:])) < 1e-12


def test_iid_error_lower_bound_last_step_info():
    """Per-step monotonicity implies L_T >= I(Y_T; theta | H_{T-1})."""
    gen = np.random.default_rng(2)
    for _ in range(5):
        model = EnumerationModel(
            prior=gen.dirichlet(np.ones(4)),
            cond=gen.dirichlet(np.ones(2), size=4),
        )
        T = 5
        mi, _ = exact_mi_enumeration(model, T)
        seq = per_step_info(model, T)
        assert mi / T >= seq[-1] - 1e-12


# ---------------------------------------------------------------------------
# rate-distortion lower sandwich via brute-force deterministic coarsenings
# ---------------------------------------------------------------------------


def _set_partitions(n):
    """All partitions of range(n) as restricted-growth label vectors."""
    out = []

    def rec(labels, maxlab):
        i = len(labels)
        if i == n:
            out.append(tuple(labels))
            return
        for lab in range(maxlab + 2):
            rec(labels + [lab], max(maxlab, lab))

    rec([], -1)
    return out


def _coarsening_rate_and_distortion(model, labels, T):
    """Rate I(theta; theta~) = H(theta~); distortion I(Y_T; theta | theta~, H_{T-1})."""
    groups = {}
    for h, lab in enumerate(labels):
        groups.setdefault(lab, []).append(h)
    rate = 0.0
    for members in groups.values():
        pg = float(np.sum(model.prior[members]))
        if pg > 0:
            rate += -pg * math.log(pg)
    A = model.alphabet
    distortion = 0.0
    for prefix in itertools.product(range(A), repeat=T - 1):
        lik = (
            np.prod(model.cond[:, prefix], axis=1)
            if T > 1
            else np.ones(model.n_hyp)
        )
        for members in groups.values():
            wj = model.prior[members] * lik[members]
            pw = float(wj.sum())
            if pw <= 0:
                continue
            post = wj / pw
            mix = post @ model.cond[members]
            for h, ph in zip(members, post):
                if ph <= 0:
                    continue
                p = model.cond[h]
                mask = p > 0
                distortion += (
                    pw
                    * ph
                    * float(np.sum(p[mask] * (np.log(p[mask]) - np.log(mix[mask]))))
                )
    return rate, distortion


def test_rd_lower_sandwich_brute_force():
    gen = np.random.default_rng(3)
    T = 3
    for _ in range(6):
        model = EnumerationModel(
            prior=gen.dirichlet(np.ones(4)),
            cond=gen.dirichlet(np.ones(3), size=4),
        )
        mi, _ = exact_mi_enumeration(model, T)
        lt = mi / T
        pairs = [
            _coarsening_rate_and_distortion(model, labels, T)
            for labels in _set_partitions(4)
        ]
        assert all(dist >= -1e-12 for _, dist in pairs)
        # family rate-distortion curve: minimal rate at distortion <= eps
        best = 0.0
        for _, eps in pairs:
            h_eps = min(r for r, d in pairs if d <= eps + 1e-15)
            best = max(best, min(h_eps / T, eps))
        assert best <= lt + 1e-9


# ---------------------------------------------------------------------------
# misspecification decomposition
# ---------------------------------------------------------------------------


def test_misspec_decomposition_true_prior_is_pure_information():
    gen = np.random.default_rng(4)
    model = EnumerationModel(
        prior=gen.dirichlet(np.ones(3)),
        cond=gen.dirichlet(np.ones(2), size=3),
    )
    rep = misspec_decomposition(model, model.prior, 4)
    assert rep.misspecification_term == pytest.approx(0.0, abs=1e-12)
    assert abs(rep.residual) <= 1e-9
    assert rep.prior_kl_bound == pytest.approx(0.0, abs=1e-12)


def test_misspec_decomposition_two_hypothesis_case():
    model = EnumerationModel(
        prior=np.array([0.5, 0.5]),
        cond=np.array([[0.8, 0.2], [0.3, 0.7]]),
    )
    q = np.array([0.75, 0.25])
    rep = misspec_decomposition(model, q, 3)
    assert abs(rep.residual) <= 1e-9
    kl = 0.5 * math.log(0.5 / 0.75) + 0.5 * math.log(0.5 / 0.25)
    assert rep.misspecification_term <= kl / 3 + 1e-12
    assert rep.prior_kl_bound == pytest.approx(kl / 3, abs=1e-12)


def test_misspec_decomposition_vacuous_bound():
    model = EnumerationModel(
        prior=np.array([0.5, 0.5]),
        cond=np.array([[0.9, 0.1], [0.2, 0.8]]),
    )
    rep = misspec_decomposition(model, np.array([1.0, 0.0]), 2)
    assert rep.prior_kl_bound == math.inf


# ---------------------------------------------------------------------------
# replicates and curves
# ---------------------------------------------------------------------------


def test_run_replicate_deterministic():
    spec = LinReg(d=3, noise_var=0.5)
    a = run_replicate(spec, conjugate_kind(spec), 10, stream(5))
    b = run_replicate(spec, conjugate_kind(spec), 10, stream(5))
    assert np.array_equal(a.losses, b.losses)
    assert np.array_equal(a.omniscient_losses, b.omniscient_losses)


def test_omniscient_mean_loss_is_irreducible_rate():
    spec = LinReg(d=2, noise_var=0.5)
    losses = [
        float(np.mean(run_replicate(spec, Omniscient(), 5, stream(6, i)).losses))
        for i in range(10**3)
    ]
    est = float(np.mean(losses))
    se = float(np.std(losses, ddof=1) / math.sqrt(len(losses)))
    target = 0.5 * math.log(2 * math.pi * math.e * 0.5)
    assert abs(est - target) <= 3 * se


def test_conjugate_loss_exceeds_omniscient_in_expectation():
    spec = LinReg(d=3, noise_var=0.25)
    diffs = [
        float(
            np.mean(
                run_replicate(spec, conjugate_kind(spec), 20, stream(7, i)).losses
                - run_replicate(spec, conjugate_kind(spec), 20, stream(7, i)).omniscient_losses
            )
        )
        for i in range(200)
    ]
    est = float(np.mean(diffs))
    se = float(np.std(diffs, ddof=1) / math.sqrt(len(diffs)))
    assert est + 3 * se > 0 and est > 0


def test_aggregate_curve_invariants():
    spec = LinReg(d=2, noise_var=1.0)
    records = [
        run_replicate(spec, Omniscient(), 10, stream(8, i)) for i in range(100)
    ]
    curve = aggregate_error_curve(records, [5, 10], irreducible=None)
    # omniscient predictor: zero excess at every horizon
    assert np.all(np.abs(curve.mean_error) <= 3 * np.maximum(curve.std_err, 1e-15))
    # replicate-order invariance
    rev = aggregate_error_curve(records[::-1], [5, 10], irreducible=None)
    assert np.allclose(curve.mean_error, rev.mean_error)
    with pytest.raises(ValueError):
        aggregate_error_curve(records[:1], [5])
    with pytest.raises(ValueError):
        aggregate_error_curve(records, [10, 5])
    with pytest.raises(ValueError):
        aggregate_error_curve(records, [11])


def test_se_shrinks_with_replicates():
    spec = LinReg(d=2, noise_var=1.0)
    records = [
        run_replicate(spec, conjugate_kind(spec), 10, stream(9, i)) for i in range(400)
    ]
    se_half = aggregate_error_curve(records[:200], [10]).std_err[0]
    se_full = aggregate_error_curve(records, [10]).std_err[0]
    ratio = se_half / se_full
    assert abs(ratio - math.sqrt(2)) < 0.2 * math.sqrt(2)


def test_bootstrap_mean_matches_plugin():
    spec = LinReg(d=2, noise_var=1.0)
    records = [
        run_replicate(spec, conjugate_kind(spec), 10, stream(10, i)) for i in range(200)
    ]
    curve = aggregate_error_curve(records, [10])
    per_rep = np.array(
        [float(np.sum(r.losses - r.omniscient_losses)) / 10 for r in records]
    )
    gen = np.random.default_rng(11)
    boot = np.array(
        [np.mean(per_rep[gen.integers(0, 200, size=200)]) for _ in range(500)]
    )
    assert abs(float(np.mean(boot)) - curve.mean_error[0]) <= curve.std_err[0]


def test_error_curve_csv_rows():
    spec = LinReg(d=2, noise_var=1.0)
    records = [run_replicate(spec, Omniscient(), 4, stream(12, i)) for i in range(3)]
    curve = aggregate_error_curve(records, [2, 4], scenario_id="demo")
    rows = error_curve_rows(curve)
    assert len(rows) == 2 and rows[0][0] == "2" and rows[0][-1] == "demo"


# ---------------------------------------------------------------------------
# linear-model MI Monte Carlo
# ---------------------------------------------------------------------------


def test_linreg_mi_mc_quadrature_oracle():
    est, se = linreg_mi_mc(1, 1.0, 1, 4000, stream(13), prior_var=1.0)
    target, _ = quad(
        lambda x: 0.5
        * math.log1p(x * x)
        * math.exp(-x * x / 2)
        / math.sqrt(2 * math.pi),
        -10,
        10,
    )
    assert abs(est - target) <= 3 * se


def test_linreg_mi_mc_noise_swamps_signal():
    est, _ = linreg_mi_mc(2, 10**6, 4, 50, stream(14))
    assert est < 1e-5


def test_linreg_mi_mc_inside_sandwich():
    est, se = linreg_mi_mc(5, 0.25, 100, 400, stream(15))
    lower = bnd.linreg_error_lower(5, 0.25, 100).value
    upper = bnd.linreg_error_upper(5, 0.25, 100).value
    assert lower - 3 * se / 100 <= est / 100 <= upper + 3 * se / 100


# ---------------------------------------------------------------------------
# meta split
# ---------------------------------------------------------------------------


def test_meta_split_single_task_closure():
    spec = LinRep(d=4, r=2, tasks=1)
    split = meta_error_split(spec, T=8, replicates=6, stream=stream(16), ensemble_size=256)
    resid = split.total[0] - split.intra[0] - split.meta[0]
    assert abs(resid) < 1e-12  # meta defined as the paired difference
    se = math.hypot(split.total[1], split.intra[1])
    assert abs(split.meta[0]) <= max(3 * se, 3 * split.meta[1])


def test_meta_split_intra_decays_with_horizon():
    spec = LinRep(d=4, r=2, tasks=2)
    vals = []
    for T in (4, 32):
        split = meta_error_split(
            spec, T=T, replicates=8, stream=stream(17, ("T", T)), ensemble_size=256
        )
        vals.append(split.intra)
    assert vals[1][0] <= vals[0][0] + 3 * math.hypot(vals[0][1], vals[1][1])
