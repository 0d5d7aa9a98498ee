"""Scenario orchestration: configs, verification, sweeps, and file output.

Scenario configs are versioned JSON; unknown keys are rejected so typos fail
loudly.  All file writes are atomic (temp file + rename) and floats are
emitted with 17 significant digits.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import bounds as bnd
from .estimators import (
    ERROR_CURVE_HEADER,
    ErrorCurve,
    ReplicateRecord,
    aggregate_error_curve,
    error_curve_rows,
    run_replicate,
)
from .predictors import (
    ConjugateLinReg,
    MisspecifiedConjugate,
    MisspecifiedWidth,
    Omniscient,
    PredictorKind,
    PriorEnsemble,
)
from .processes import (
    BinaryARK,
    DeepNet,
    DirichletNet,
    LinRep,
    LinReg,
    LogReg,
    ProcessSpec,
    Transformer,
    irreducible_rate,
    make_embeddings,
)
from .rng import RngStream, SeedSpec

CONFIG_VERSION = 1


def _reject_unknown(payload: Dict, allowed: Sequence[str], context: str) -> None:
    unknown = sorted(set(payload) - set(allowed))
    if unknown:
        raise ValueError(f"unknown key(s) in {context}: {', '.join(unknown)}")


def _default_ark_embeddings(d: int) -> Tuple[np.ndarray, np.ndarray]:
    if d == 1:
        return np.array([1.0]), np.array([-1.0])
    phi0 = np.zeros(d)
    phi1 = np.zeros(d)
    phi0[0] = 1.0
    phi1[1] = 1.0
    return phi0, phi1


def parse_process(payload: Dict) -> ProcessSpec:
    """Build a process spec from its JSON form."""
    kind = payload.get("kind")
    if kind == "linreg":
        _reject_unknown(payload, ["kind", "d", "noise_var", "prior_var"], "process")
        return LinReg(
            d=int(payload["d"]),
            noise_var=float(payload["noise_var"]),
            prior_var=payload.get("prior_var"),
        )
    if kind == "logreg":
        _reject_unknown(payload, ["kind", "d"], "process")
        return LogReg(d=int(payload["d"]))
    if kind == "deepnet":
        _reject_unknown(payload, ["kind", "d", "width", "depth", "noise_var"], "process")
        return DeepNet(
            d=int(payload["d"]),
            width=int(payload["width"]),
            depth=int(payload["depth"]),
            noise_var=float(payload["noise_var"]),
        )
    if kind == "dirichlet":
        _reject_unknown(
            payload,
            ["kind", "d", "scale", "noise_var", "tail_tol", "plus_one_scaling"],
            "process",
        )
        return DirichletNet(
            d=int(payload["d"]),
            scale=float(payload["scale"]),
            noise_var=float(payload["noise_var"]),
            tail_tol=float(payload.get("tail_tol", 1e-8)),
            plus_one_scaling=bool(payload.get("plus_one_scaling", False)),
        )
    if kind == "ark":
        _reject_unknown(payload, ["kind", "d", "context", "phi0", "phi1"], "process")
        d = int(payload["d"])
        if "phi0" in payload or "phi1" in payload:
            phi0 = np.array(payload["phi0"], dtype=float)
            phi1 = np.array(payload["phi1"], dtype=float)
        else:
            phi0, phi1 = _default_ark_embeddings(d)
        return BinaryARK(d=d, context=int(payload["context"]), phi0=phi0, phi1=phi1)
    if kind == "transformer":
        _reject_unknown(
            payload,
            ["kind", "vocab", "attn_dim", "depth", "context", "v_prior", "embed_seed"],
            "process",
        )
        vocab = int(payload["vocab"])
        attn_dim = int(payload["attn_dim"])
        emb = make_embeddings(
            vocab,
            attn_dim,
            RngStream(SeedSpec(int(payload.get("embed_seed", 0)), (("embed", 0),))),
        )
        return Transformer(
            vocab=vocab,
            attn_dim=attn_dim,
            depth=int(payload["depth"]),
            context=int(payload["context"]),
            embeddings=emb,
            v_prior=payload.get("v_prior", "sphere_rows"),
        )
    if kind == "linrep":
        _reject_unknown(payload, ["kind", "d", "r", "tasks"], "process")
        return LinRep(d=int(payload["d"]), r=int(payload["r"]), tasks=int(payload["tasks"]))
    raise ValueError(f"unknown process kind: {kind}")


def parse_predictor(payload: Dict, spec: ProcessSpec) -> PredictorKind:
    """Build a predictor kind from its JSON form, given the process spec."""
    kind = payload.get("kind")
    if kind == "conjugate":
        _reject_unknown(payload, ["kind"], "predictor")
        if not isinstance(spec, LinReg):
            raise ValueError("conjugate predictor applies to the linreg process")
        return ConjugateLinReg(
            prior_mean=np.zeros(spec.d),
            prior_cov=spec.prior_var * np.eye(spec.d),
            noise_var=spec.noise_var,
        )
    if kind == "ensemble":
        _reject_unknown(payload, ["kind", "size", "resample_ess_frac"], "predictor")
        return PriorEnsemble(
            size=int(payload.get("size", 2048)),
            resample_ess_frac=float(payload.get("resample_ess_frac", 0.5)),
        )
    if kind == "omniscient":
        _reject_unknown(payload, ["kind"], "predictor")
        return Omniscient()
    if kind == "misspecified_conjugate":
        _reject_unknown(
            payload, ["kind", "prior_mean", "prior_diag"], "predictor"
        )
        if not isinstance(spec, LinReg):
            raise ValueError("misspecified_conjugate applies to the linreg process")
        mean = np.array(payload.get("prior_mean", [0.0] * spec.d), dtype=float)
        diag = np.array(
            payload.get("prior_diag", [spec.prior_var] * spec.d), dtype=float
        )
        return MisspecifiedConjugate(
            prior_mean=mean, prior_cov=np.diag(diag), noise_var=spec.noise_var
        )
    if kind == "misspecified_width":
        _reject_unknown(payload, ["kind", "n", "eps", "size"], "predictor")
        return MisspecifiedWidth(
            n=int(payload["n"]),
            eps=float(payload.get("eps", 0.0)),
            size=int(payload.get("size", 2048)),
        )
    raise ValueError(f"unknown predictor kind: {kind}")


@dataclass
class ScenarioConfig:
    scenario_id: str
    spec: ProcessSpec
    predictor: PredictorKind
    horizons: List[int]
    replicates: int
    master_seed: int
    bound_ids: List[str] = field(default_factory=list)
    se_multiplier: float = 3.0

    def __post_init__(self):
        if self.replicates < 2:
            raise ValueError("replicates must be >= 2")
        if any(b <= a for a, b in zip(self.horizons, self.horizons[1:])):
            raise ValueError("horizons must be strictly increasing")


CONFIG_KEYS = [
    "version",
    "scenario_id",
    "process",
    "predictor",
    "horizons",
    "replicates",
    "master_seed",
    "bounds",
    "se_multiplier",
]


def parse_config(payload: Dict) -> ScenarioConfig:
    """Parse and validate a scenario config dict."""
    if payload.get("version") != CONFIG_VERSION:
        raise ValueError("config version missing or unsupported")
    _reject_unknown(payload, CONFIG_KEYS, "config")
    spec = parse_process(payload["process"])
    return ScenarioConfig(
        scenario_id=str(payload["scenario_id"]),
        spec=spec,
        predictor=parse_predictor(payload["predictor"], spec),
        horizons=[int(t) for t in payload["horizons"]],
        replicates=int(payload["replicates"]),
        master_seed=int(payload["master_seed"]),
        bound_ids=[str(b) for b in payload.get("bounds", [])],
        se_multiplier=float(payload.get("se_multiplier", 3.0)),
    )


def load_config(path: str) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config(json.load(f))


# ---------------------------------------------------------------------------
# Bound lookup for verification
# ---------------------------------------------------------------------------


def bounds_for(spec: ProcessSpec, bound_id: str, T: int) -> List[bnd.BoundReport]:
    """Evaluate a named bound family for this process at horizon T."""
    if bound_id == "linreg_error" and isinstance(spec, LinReg):
        reports = [bnd.linreg_error_upper(spec.d, spec.noise_var, T)]
        lower = bnd.linreg_error_lower(spec.d, spec.noise_var, T)
        if lower.valid:
            reports.append(lower)
        return reports
    if bound_id == "logreg_error" and isinstance(spec, LogReg):
        return [bnd.logreg_error_upper(spec.d, T)]
    if bound_id == "deepnet_error" and isinstance(spec, DeepNet):
        return [
            bnd.deepnet_error_upper(spec.d, spec.width, spec.depth, spec.noise_var, T)
        ]
    if bound_id == "dirichlet_error" and isinstance(spec, DirichletNet):
        return [bnd.dirichlet_error_upper(spec.d, spec.scale, spec.noise_var, T)]
    if bound_id == "ark_error" and isinstance(spec, BinaryARK):
        return [bnd.ark_error_upper(spec.d, spec.context, T)]
    if bound_id == "transformer_error" and isinstance(spec, Transformer):
        return [
            bnd.transformer_error_upper(
                spec.vocab, spec.attn_dim, spec.depth, spec.context, T
            )
        ]
    if bound_id == "linrep_error" and isinstance(spec, LinRep):
        return [bnd.linrep_error_upper(spec.d, spec.r, spec.tasks, T)]
    raise ValueError(f"unknown or incompatible bound_id: {bound_id}")


@dataclass
class VerificationRow:
    scenario_id: str
    horizon: int
    bound_id: str
    side: str
    empirical: float
    std_err: float
    bound: float
    passed: bool
    margin: float


@dataclass
class VerificationReport:
    rows: List[VerificationRow]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)


def verify_curve(
    config: ScenarioConfig, curve: ErrorCurve
) -> Tuple[VerificationReport, List[bnd.BoundReport]]:
    """Check the empirical curve against every requested bound."""
    rows: List[VerificationRow] = []
    reports: List[bnd.BoundReport] = []
    k = config.se_multiplier
    for i, T in enumerate(curve.horizons):
        emp = float(curve.mean_error[i])
        se = float(curve.std_err[i])
        for bound_id in config.bound_ids:
            for rep in bounds_for(config.spec, bound_id, T):
                reports.append(rep)
                if not rep.valid:
                    continue
                if rep.side == "upper":
                    ok = emp - k * se <= rep.value
                    margin = rep.value - (emp - k * se)
                else:
                    ok = emp + k * se >= rep.value
                    margin = (emp + k * se) - rep.value
                rows.append(
                    VerificationRow(
                        scenario_id=config.scenario_id,
                        horizon=T,
                        bound_id=rep.bound_id,
                        side=rep.side,
                        empirical=emp,
                        std_err=se,
                        bound=rep.value,
                        passed=ok,
                        margin=margin,
                    )
                )
    return VerificationReport(rows=rows), reports


# ---------------------------------------------------------------------------
# Scenario execution
# ---------------------------------------------------------------------------


def run_replicates(
    spec: ProcessSpec,
    kind: PredictorKind,
    T: int,
    replicates: int,
    stream: RngStream,
    threads: int = 1,
) -> List[ReplicateRecord]:
    """Run replicates (optionally thread-parallel); order is deterministic."""

    def one(i: int) -> ReplicateRecord:
        return run_replicate(spec, kind, T, stream.derive(("rep", i)))

    if threads <= 1:
        return [one(i) for i in range(replicates)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(replicates)))


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    curve: ErrorCurve
    bound_reports: List[bnd.BoundReport]
    verification: VerificationReport


def run_scenario(config: ScenarioConfig, threads: int = 1) -> ScenarioResult:
    """Simulate, aggregate, and verify one scenario."""
    stream = RngStream(SeedSpec(config.master_seed, (("scenario", 0),)))
    T = max(config.horizons)
    records = run_replicates(
        config.spec, config.predictor, T, config.replicates, stream, threads
    )
    irr = irreducible_rate(config.spec)
    curve = aggregate_error_curve(
        records, config.horizons, irreducible=irr, scenario_id=config.scenario_id
    )
    verification, reports = verify_curve(config, curve)
    return ScenarioResult(
        config=config, curve=curve, bound_reports=reports, verification=verification
    )


# ---------------------------------------------------------------------------
# Built-in scenarios and the desk manifest
# ---------------------------------------------------------------------------


def builtin_scenario(name: str, master_seed: int = 20240817) -> ScenarioConfig:
    """Named scenario configs shipped with the library."""
    if name == "linreg_baseline":
        return parse_config(
            {
                "version": 1,
                "scenario_id": "linreg_baseline",
                "process": {"kind": "linreg", "d": 5, "noise_var": 0.25},
                "predictor": {"kind": "conjugate"},
                "horizons": [20, 100, 500],
                "replicates": 2000,
                "master_seed": master_seed,
                "bounds": ["linreg_error"],
            }
        )
    if name == "logreg_small":
        return parse_config(
            {
                "version": 1,
                "scenario_id": "logreg_small",
                "process": {"kind": "logreg", "d": 3},
                "predictor": {"kind": "ensemble", "size": 1024},
                "horizons": [50, 200],
                "replicates": 200,
                "master_seed": master_seed,
                "bounds": ["logreg_error"],
            }
        )
    if name == "ark_small":
        return parse_config(
            {
                "version": 1,
                "scenario_id": "ark_small",
                "process": {"kind": "ark", "d": 2, "context": 2},
                "predictor": {"kind": "ensemble", "size": 1024},
                "horizons": [50, 200],
                "replicates": 200,
                "master_seed": master_seed,
                "bounds": ["ark_error"],
            }
        )
    raise ValueError(f"unknown built-in scenario: {name}")


DESK_SUITE = ["linreg_baseline", "logreg_small", "ark_small"]


def load_manifest(name_or_path: str, master_seed: int = 20240817) -> List[ScenarioConfig]:
    """Resolve a manifest: the built-in name or a JSON file of configs."""
    if name_or_path == "desk_suite":
        return [builtin_scenario(n, master_seed) for n in DESK_SUITE]
    with open(name_or_path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    if payload.get("version") != CONFIG_VERSION:
        raise ValueError("manifest version missing or unsupported")
    _reject_unknown(payload, ["version", "scenarios"], "manifest")
    return [parse_config(p) for p in payload["scenarios"]]


def verify_suite(
    configs: Sequence[ScenarioConfig], threads: int = 1
) -> Tuple[bool, List[ScenarioResult]]:
    """Run every scenario; overall pass iff every verification row passes."""
    results = [run_scenario(c, threads=threads) for c in configs]
    ok = all(r.verification.passed for r in results)
    return ok, results


# ---------------------------------------------------------------------------
# Scaling sweep
# ---------------------------------------------------------------------------


@dataclass
class ScalingSweep:
    c_values: np.ndarray
    n_star: np.ndarray
    t_star: np.ndarray
    bound_value: np.ndarray
    slope: float
    slope_half_width: float


def sweep_scaling(d: int, K: float, c_min: float, c_max: float, points: int) -> ScalingSweep:
    """Compute-optimal width along a FLOP-budget grid and the fitted slope."""
    if c_max / c_min < 10.0**3:
        raise ValueError("budget grid must span at least 3 decades")
    if points < 3:
        raise ValueError("need at least 3 grid points")
    cs, ns, ts, vs = [], [], [], []
    for C in np.geomspace(c_min, c_max, points):
        try:
            n_star, t_star, value = bnd.scaling_optimal_width(d, K, float(C))
        except ValueError:
            continue
        cs.append(float(C))
        ns.append(n_star)
        ts.append(t_star)
        vs.append(value)
    x = np.log(np.array(cs))
    y = np.log(np.array(ns, dtype=float))
    coef, cov = np.polyfit(x, y, 1, cov=True)
    slope = float(coef[0])
    half_width = float(1.96 * math.sqrt(cov[0, 0]))
    return ScalingSweep(
        c_values=np.array(cs),
        n_star=np.array(ns),
        t_star=np.array(ts),
        bound_value=np.array(vs),
        slope=slope,
        slope_half_width=half_width,
    )


# ---------------------------------------------------------------------------
# Atomic output
# ---------------------------------------------------------------------------


def atomic_write_text(path: str, text: str) -> None:
    """Write text to path via a temp file and rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: List[str], rows: List[List[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_scenario_outputs(result: ScenarioResult, out_dir: str, fmt: str = "csv") -> List[str]:
    """Write curve, bound, and verification files; returns written paths."""
    sid = result.config.scenario_id
    paths = []
    if fmt == "csv":
        curve_path = os.path.join(out_dir, f"{sid}_curve.csv")
        atomic_write_text(
            curve_path, _csv_text(ERROR_CURVE_HEADER, error_curve_rows(result.curve))
        )
        paths.append(curve_path)
        bounds_path = os.path.join(out_dir, f"{sid}_bounds.csv")
        atomic_write_text(
            bounds_path,
            _csv_text(
                bnd.BOUND_REPORT_HEADER, [r.csv_row() for r in result.bound_reports]
            ),
        )
        paths.append(bounds_path)
        verif_path = os.path.join(out_dir, f"{sid}_verification.csv")
        rows = [
            [
                r.scenario_id,
                str(r.horizon),
                r.bound_id,
                r.side,
                f"{r.empirical:.17g}",
                f"{r.std_err:.17g}",
                f"{r.bound:.17g}",
                str(r.passed).lower(),
                f"{r.margin:.17g}",
            ]
            for r in result.verification.rows
        ]
        atomic_write_text(
            verif_path,
            _csv_text(
                [
                    "scenario_id",
                    "horizon",
                    "bound_id",
                    "side",
                    "empirical",
                    "std_err",
                    "bound",
                    "passed",
                    "margin",
                ],
                rows,
            ),
        )
        paths.append(verif_path)
    elif fmt == "json":
        payload = {
            "version": CONFIG_VERSION,
            "scenario_id": sid,
            "curve": {
                "horizons": result.curve.horizons,
                "mean_error": result.curve.mean_error.tolist(),
                "std_err": result.curve.std_err.tolist(),
                "replicates": result.curve.replicates,
            },
            "bounds": [
                {
                    "bound_id": r.bound_id,
                    "side": r.side,
                    "params": r.params,
                    "value": r.value,
                    "valid": r.valid,
                }
                for r in result.bound_reports
            ],
            "verification": [
                {
                    "horizon": r.horizon,
                    "bound_id": r.bound_id,
                    "side": r.side,
                    "empirical": r.empirical,
                    "std_err": r.std_err,
                    "bound": r.bound,
                    "passed": r.passed,
                    "margin": r.margin,
                }
                for r in result.verification.rows
            ],
        }
        path = os.path.join(out_dir, f"{sid}.json")
        atomic_write_text(path, json.dumps(payload, indent=2))
        paths.append(path)
    else:
        raise ValueError("format must be 'csv' or 'json'")
    return paths


def write_sweep_output(sweep: ScalingSweep, out_dir: str, fmt: str = "csv") -> str:
    if fmt == "json":
        payload = {
            "version": CONFIG_VERSION,
            "rows": [
                {
                    "C": float(c),
                    "n_star": int(n),
                    "T_star": float(t),
                    "bound": float(v),
                }
                for c, n, t, v in zip(
                    sweep.c_values, sweep.n_star, sweep.t_star, sweep.bound_value
                )
            ],
            "slope": sweep.slope,
            "slope_half_width": sweep.slope_half_width,
        }
        path = os.path.join(out_dir, "scaling_sweep.json")
        atomic_write_text(path, json.dumps(payload, indent=2))
        return path
    rows = [
        [f"{c:.17g}", str(int(n)), f"{t:.17g}", f"{v:.17g}"]
        for c, n, t, v in zip(
            sweep.c_values, sweep.n_star, sweep.t_star, sweep.bound_value
        )
    ]
    rows.append(["slope", f"{sweep.slope:.17g}", "half_width", f"{sweep.slope_half_width:.17g}"])
    path = os.path.join(out_dir, "scaling_sweep.csv")
    atomic_write_text(path, _csv_text(["C", "n_star", "T_star", "bound"], rows))
    return path
