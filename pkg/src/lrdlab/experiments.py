"""Monte Carlo harness: replicate generation, KS distances, rate slopes, reports.

Every experiment is described by an :class:`ExperimentPlan`.  Replicate
``r`` draws its innovations from ``InnovationStream(replicate_seed(base_seed, r))``
so results do not depend on execution order or on the number of workers.
"""
from __future__ import annotations

import dataclasses
import hashlib
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import lru_cache

import numpy as np
from scipy import special, stats

from . import __version__
from .empirical import bk_alpha, bk_limit_factor, bk_process, build_empirical, limit_scale_bk
from .errors import DataError, ExperimentError, HorizonError, ParameterError
from .fbm import generate_coupled
from .gauss_lrd import (DEFAULT_TRUNCATION, InnovationStream, exact_partial_sum_variance,
                        generate_path, make_model)
from .hermite import compute_b_alpha, compute_kappa_alpha, gamma_exponent, hermite_coefficients
from .processes import ProcessBundle, subordinate
from .subordinators import get_subordinator

__all__ = [
    "KINDS",
    "ExperimentPlan",
    "ExperimentReport",
    "default_plan",
    "replicate_seed",
    "ks_distance",
    "fit_rate_slope",
    "run_experiment",
    "run_coupling_experiment",
    "run_distribution_experiment",
    "run_reduction_experiment",
    "run_identity_sweep",
    "run_variance_experiment",
    "recompute_flags",
    "reference_exponents",
]

COUPLING_KINDS = ("coupling_rate_S", "coupling_rate_N", "coupling_rate_Z")
DISTRIBUTION_KINDS = ("clt_marginal", "counting_clt", "vervaat_chi2", "bk_marginal")
KINDS = ("variance_asymptote",) + DISTRIBUTION_KINDS + COUPLING_KINDS + (
    "reduction_residual", "identity_sweep")

LADDER = tuple(2**k for k in range(10, 17))
RAW_GAP = 0.05
MAX_EXTENSIONS = 3

_DEFAULTS = {
    "variance_asymptote": dict(alpha=0.4, truncation=2**20, horizons=(2**12, 2**14, 2**16),
                               replicates=1, tolerance=0.05),
    "clt_marginal": dict(alpha=0.4, subordinator="exp", n=2**12, replicates=2000, tolerance=0.05),
    "counting_clt": dict(alpha=0.4, subordinator="quantile-exponential", n=2**12,
                         replicates=2000, tolerance=0.06),
    "vervaat_chi2": dict(alpha=0.4, subordinator="exp", n=2**12, replicates=2000, tolerance=0.07),
    "bk_marginal": dict(alpha=0.5, subordinator="identity", n=2**12, replicates=1000,
                        tolerance=0.08, t=0.5),
    "coupling_rate_S": dict(alpha=0.4, subordinator="identity", horizons=LADDER, replicates=50),
    "coupling_rate_N": dict(alpha=0.4, subordinator="quantile-exponential", horizons=LADDER,
                            replicates=50),
    "coupling_rate_Z": dict(alpha=0.4, subordinator="quantile-exponential", horizons=LADDER,
                            replicates=50),
    "reduction_residual": dict(alpha=0.4, subordinator="exp", horizons=LADDER, replicates=50),
    "identity_sweep": dict(alpha=0.4, subordinator="quantile-exponential", n=1000,
                           replicates=50, tolerance=1e-9, points=100),
}


@dataclass(frozen=True)
class ExperimentPlan:
    kind: str
    alpha: float = 0.4
    subordinator: str = "identity"
    n: int = 2**12
    horizons: tuple[int, ...] = ()
    replicates: int = 50
    base_seed: int = 20240601
    truncation: int = DEFAULT_TRUNCATION
    tolerance: float | None = None
    margin: float = 0.1
    t: float = 0.5
    points: int = 100
    normalization: str = "mvn"

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["horizons"] = list(self.horizons)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        d = dict(d)
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ParameterError(f"unknown plan keys: {sorted(unknown)}")
        if "horizons" in d:
            d["horizons"] = tuple(int(h) for h in d["horizons"])
        return cls(**d)

    def validate(self) -> "ExperimentPlan":
        if self.kind not in KINDS:
            raise ParameterError(f"unknown experiment kind {self.kind!r}")
        if not (0.0 < self.alpha < 1.0):
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if self.replicates < 1:
            raise ParameterError("replicates must be at least 1")
        if self.truncation < 0:
            raise ParameterError("truncation must be non-negative")
        if any(b <= a for a, b in zip(self.horizons, self.horizons[1:])):
            raise ParameterError("horizons must be strictly increasing")
        needs_ladder = self.kind in COUPLING_KINDS + ("reduction_residual", "variance_asymptote")
        if needs_ladder and len(self.horizons) < (3 if self.kind != "variance_asymptote" else 1):
            raise ParameterError("at least three horizons are needed for a slope fit")
        if needs_ladder and self.horizons[0] < 1:
            raise ParameterError("horizons must be positive")
        if not needs_ladder and self.n < 1:
            raise ParameterError("n must be positive")
        if self.kind == "variance_asymptote":
            return self
        sub = get_subordinator(self.subordinator)
        j1 = _j1(sub)
        rank_one_kinds = COUPLING_KINDS + DISTRIBUTION_KINDS + ("reduction_residual",)
        if self.kind in rank_one_kinds and abs(j1) <= 1e-10 * math.sqrt(sub.second_moment or 1.0):
            raise ParameterError(f"{sub.name} has J_1 = 0; Hermite rank 1 is required")
        positive_kinds = ("coupling_rate_N", "coupling_rate_Z", "counting_clt", "vervaat_chi2",
                          "identity_sweep")
        if self.kind in positive_kinds and not (sub.positive and sub.mu > 0):
            raise ParameterError(f"{sub.name} is not a positive subordinator with mu > 0")
        if self.kind == "bk_marginal":
            if sub.cdf is None:
                raise ParameterError(f"{sub.name} has no continuous distribution function")
            if not (0.0 < self.t < 1.0):
                raise ParameterError("t must lie in (0, 1)")
        if self.normalization not in ("mvn", "calibrated"):
            raise ParameterError(f"unknown normalization {self.normalization!r}")
        return self


def default_plan(kind: str, **overrides) -> ExperimentPlan:
    if kind not in _DEFAULTS:
        raise ParameterError(f"unknown experiment kind {kind!r}")
    params = dict(_DEFAULTS[kind])
    params.update({k: v for k, v in overrides.items() if v is not None})
    if "horizons" in params:
        params["horizons"] = tuple(int(h) for h in params["horizons"])
    return ExperimentPlan(kind=kind, **params)


def replicate_seed(base_seed: int, r: int) -> int:
    """64-bit seed of replicate ``r`` from a hash of ``(base_seed, r)``."""
    digest = hashlib.blake2b(f"{int(base_seed)}:{int(r)}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


# ---------------------------------------------------------------------------
# statistics

def ks_distance(sample, reference_cdf) -> float:
    """``sup_x |F_sample(x) - F_ref(x)|``, both one-sided terms taken at the sample points."""
    x = np.asarray(sample, dtype=float).ravel()
    if x.size == 0:
        raise ParameterError("empty sample")
    return float(stats.kstest(x, reference_cdf).statistic)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float

    def to_dict(self):
        return dataclasses.asdict(self)


def fit_rate_slope(horizons, sup_errors) -> SlopeFit:
    """Least-squares slope of ``log error`` on ``log T``.

    A 2-d ``sup_errors`` (replicates x horizons) is reduced to per-horizon
    medians first.
    """
    T = np.asarray(horizons, dtype=float)
    e = np.asarray(sup_errors, dtype=float)
    if e.ndim == 2:
        e = np.median(e, axis=0)
    if T.size < 3 or e.shape != T.shape:
        raise ParameterError("need at least three horizons with one error each")
    if np.any(e <= 0) or np.any(T <= 0):
        raise DataError("rate fitting needs strictly positive horizons and errors")
    fit = stats.linregress(np.log(T), np.log(e))
    slope, intercept, stderr = float(fit.slope), float(fit.intercept), float(fit.stderr)
    return SlopeFit(slope, intercept, stderr)


def reference_exponents(alpha: float) -> dict:
    g = gamma_exponent(alpha)
    h = 1.0 - alpha / 2.0
    return {
        "gamma": g,
        "gamma_half": g / 2.0,
        "scale": h,
        "scale_squared": h * h,
        "vervaat_main": 2.0 - 1.5 * alpha + alpha**2 / 4.0,
        "vervaat_cross": h + g / 2.0,
        "vervaat_scale": 2.0 - alpha,
    }


# ---------------------------------------------------------------------------
# shared per-process state

@lru_cache(maxsize=8)
def _model(alpha, truncation):
    return make_model(alpha, truncation)


@lru_cache(maxsize=32)
def _expansion(name):
    return hermite_coefficients(get_subordinator(name), q_max=4)


def _j1(sub) -> float:
    return sub.j1 if sub.j1 is not None else _expansion(sub.name).j(1)


def _context(plan: ExperimentPlan) -> dict:
    model = _model(plan.alpha, plan.truncation)
    sub = get_subordinator(plan.subordinator)
    return {
        "sigma": model.sigma,
        "kappa": compute_kappa_alpha(plan.alpha),
        "b_alpha": compute_b_alpha(plan.alpha),
        "mu": sub.mu,
        "j1": _j1(sub),
        "hurst": model.hurst,
    }


def _series(plan, r, n, expansion=None):
    model = _model(plan.alpha, plan.truncation)
    stream = InnovationStream(replicate_seed(plan.base_seed, r))
    path = generate_path(model, n, stream)
    sub = get_subordinator(plan.subordinator)
    return model, stream, path, subordinate(path, sub, expansion or _expansion(sub.name))


def _with_extension(fn, n0):
    """Call ``fn(n)`` doubling ``n`` on horizon errors, at most ``MAX_EXTENSIONS`` times."""
    n = n0
    for ext in range(MAX_EXTENSIONS + 1):
        try:
            return fn(n), ext
        except HorizonError:
            n *= 2
    raise ExperimentError(f"series still too short after {MAX_EXTENSIONS} doublings (n={n // 2})")


# ---------------------------------------------------------------------------
# replicate workers (module level so they pickle)

def _coupling_replicate(plan: ExperimentPlan, r: int, ctx: dict) -> dict:
    horizons = np.asarray(plan.horizons)
    tmax = int(horizons[-1])
    scale = ctx["j1"] * ctx["kappa"] / ctx["sigma"]
    mu = ctx["mu"]

    def attempt(n):
        model, stream, path, series = _series(plan, r, n)
        w = generate_coupled(model, stream, n, plan.normalization).values
        bundle = ProcessBundle(series, plan.alpha)
        t = np.arange(tmax + 1, dtype=float)
        cw = scale * w[:tmax + 1]
        if plan.kind == "coupling_rate_S":
            raw = np.asarray(bundle.centered_sum(t))
            resid = raw - cw
        elif plan.kind == "coupling_rate_N":
            raw = mu * np.asarray(bundle.counting(mu * t), dtype=float) - mu * t
            resid = raw + cw
        else:
            raw = np.asarray(bundle.z_process(t))
            resid = raw - 0.5 * cw * cw
        return np.abs(resid), np.abs(raw)

    slack = 1 if plan.kind == "coupling_rate_S" else 1.25
    (resid, raw), ext = _with_extension(attempt, int(math.ceil(tmax * slack)) + 1)
    sup_resid = np.maximum.accumulate(resid)[horizons]
    sup_raw = np.maximum.accumulate(raw)[horizons]
    return {"resid": sup_resid.tolist(), "raw": sup_raw.tolist(), "extensions": ext}


def _distribution_replicate(plan: ExperimentPlan, r: int, ctx: dict) -> dict:
    n = plan.n
    sigma, kappa, j1, mu, h = ctx["sigma"], ctx["kappa"], ctx["j1"], ctx["mu"], ctx["hurst"]
    if plan.kind == "clt_marginal":
        _, _, _, series = _series(plan, r, n)
        s = float(np.sum(series.y))
        return {"stat": sigma * (s - mu * n) / (j1 * kappa * n**h), "extensions": 0}
    if plan.kind == "bk_marginal":
        _, _, _, series = _series(plan, r, n)
        L = ctx["b_alpha"] / sigma**2
        pair = build_empirical(series, get_subordinator(plan.subordinator), plan.alpha, 1, L)
        t = plan.t
        return {"stat": float(bk_alpha(pair, t)),
                "bk_scaled": float(pair.n / pair.scaling * bk_process(pair, t)),
                "extensions": 0}

    def attempt(m):
        _, _, _, series = _series(plan, r, m)
        bundle = ProcessBundle(series, plan.alpha, n_scale=n)
        if plan.kind == "counting_clt":
            cnt = bundle.counting(mu * n)
            return -sigma * (mu * cnt - mu * n) / (j1 * kappa * n**h)
        v = bundle.vervaat(1.0)
        return 2.0 * mu * sigma**2 * v / (j1**2 * kappa**2)

    stat, ext = _with_extension(attempt, int(math.ceil(1.5 * n)))
    return {"stat": float(stat), "extensions": ext}


def _reduction_replicate(plan: ExperimentPlan, r: int, ctx: dict) -> dict:
    horizons = np.asarray(plan.horizons)
    tmax = int(horizons[-1])
    _, _, path, series = _series(plan, r, tmax)
    lhs = np.cumsum(series.y - ctx["mu"])
    rhs = ctx["j1"] * np.cumsum(path.values)
    dev = np.concatenate([[0.0], np.abs(lhs - rhs)])
    return {"resid": np.maximum.accumulate(dev)[horizons].tolist(), "extensions": 0}


def _identity_replicate(plan: ExperimentPlan, r: int, ctx: dict) -> dict:
    from .processes import vervaat_identity_decomposition

    _, _, _, series = _series(plan, r, plan.n)
    bundle = ProcessBundle(series, plan.alpha)
    top = min(float(series.n), float(np.sum(series.y)) / series.mu) * (1.0 - 1e-9)
    rng = np.random.default_rng(replicate_seed(plan.base_seed, r) ^ 0x5EED)
    worst = 0.0
    for t in rng.uniform(0.0, top, plan.points):
        terms = vervaat_identity_decomposition(bundle, float(t))
        worst = max(worst, abs(terms.residual) / max(1.0, abs(terms.lhs)))
    return {"max_rel_residual": worst, "extensions": 0}


_WORKERS = {
    **{k: _coupling_replicate for k in COUPLING_KINDS},
    **{k: _distribution_replicate for k in DISTRIBUTION_KINDS},
    "reduction_residual": _reduction_replicate,
    "identity_sweep": _identity_replicate,
}


def _run_one(args):
    plan, r, ctx = args
    return _WORKERS[plan.kind](plan, r, ctx)


def _run_replicates(plan: ExperimentPlan, workers: int = 1) -> list[dict]:
    ctx = _context(plan)
    jobs = [(plan, r, ctx) for r in range(plan.replicates)]
    if workers is None or workers <= 0:
        workers = os.cpu_count() or 1
    if workers == 1 or plan.replicates == 1:
        return [_run_one(j) for j in jobs]
    chunk = max(1, plan.replicates // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs, chunksize=chunk))


# ---------------------------------------------------------------------------
# reports

@dataclass
class ExperimentReport:
    plan: dict
    seeds: list
    stats: dict
    slopes: dict
    references: dict
    flags: dict
    tolerances: dict
    version: str = __version__
    config_hash: str = ""
    timestamp: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    @property
    def kind(self) -> str:
        return self.plan["kind"]

    def to_dict(self, include_raw: bool = False) -> dict:
        d = dataclasses.asdict(self)
        if not include_raw:
            d.pop("raw")
        d["passed"] = self.passed
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        d = dict(d)
        d.pop("passed", None)
        return cls(**d)


def _config_hash(plan: ExperimentPlan) -> str:
    import json

    blob = json.dumps(plan.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _finish(plan, seeds, stats, slopes, references, flags, tolerances, raw, started, clock):
    return ExperimentReport(
        plan=plan.to_dict(), seeds=seeds, stats=stats, slopes=slopes, references=references,
        flags=flags, tolerances=tolerances, config_hash=_config_hash(plan),
        timestamp={"started_utc": started, "wall_clock_s": round(time.perf_counter() - clock, 3)},
        raw=raw,
    )


def _start():
    return datetime.now(timezone.utc).isoformat(timespec="seconds"), time.perf_counter()


def _seeds(plan):
    return [replicate_seed(plan.base_seed, r) for r in range(plan.replicates)]


def _median_list(rows, key):
    return np.median(np.asarray([row[key] for row in rows], dtype=float), axis=0)


def run_coupling_experiment(plan: ExperimentPlan, workers: int = 1) -> ExperimentReport:
    """Sup-distance between a process and its coupled fBm approximation across horizons."""
    plan.validate()
    if plan.kind not in COUPLING_KINDS:
        raise ParameterError(f"{plan.kind} is not a coupling experiment")
    started, clock = _start()
    rows = _run_replicates(plan, workers)
    med_resid = _median_list(rows, "resid")
    med_raw = _median_list(rows, "raw")
    fit = fit_rate_slope(plan.horizons, med_resid)
    fit_raw = fit_rate_slope(plan.horizons, med_raw)
    ex = reference_exponents(plan.alpha)
    if plan.kind == "coupling_rate_S":
        ref, scale = ex["gamma_half"], ex["scale"]
    elif plan.kind == "coupling_rate_N":
        ref, scale = max(ex["gamma_half"], ex["scale_squared"]), ex["scale"]
    else:
        ref, scale = max(ex["vervaat_main"], ex["vervaat_cross"]), ex["vervaat_scale"]
    ctx = _context(plan)
    stats = {
        "horizons": list(plan.horizons),
        "median_sup_residual": med_resid.tolist(),
        "median_sup_raw": med_raw.tolist(),
        "extensions": int(sum(row["extensions"] for row in rows)),
        "j1": ctx["j1"], "kappa": ctx["kappa"], "sigma": ctx["sigma"], "mu": ctx["mu"],
    }
    if plan.kind == "coupling_rate_S":
        # report-only LIL trace: median raw sup over the fBm LIL envelope
        T = np.asarray(plan.horizons, dtype=float)
        env = ctx["j1"] * ctx["kappa"] / ctx["sigma"] * T ** ex["scale"] \
            * np.sqrt(2.0 * np.log(np.log(T)))
        stats["lil_ratio"] = (med_raw / env).tolist()
    slopes = {"residual": fit.to_dict(), "raw": fit_raw.to_dict()}
    references = {"reference_exponent": ref, "scale_exponent": scale, **ex}
    tolerances = {"margin": plan.margin, "raw_gap": RAW_GAP}
    flags = _coupling_flags(fit.slope, fit_raw.slope, ref, scale, plan.margin)
    raw = {"replicate": list(range(plan.replicates))}
    for i, T in enumerate(plan.horizons):
        raw[f"resid_T{T}"] = [row["resid"][i] for row in rows]
        raw[f"raw_T{T}"] = [row["raw"][i] for row in rows]
    return _finish(plan, _seeds(plan), stats, slopes, references, flags, tolerances, raw,
                   started, clock)


def _coupling_flags(slope, raw_slope, ref, scale, margin):
    return {
        "below_reference_plus_margin": bool(slope < ref + margin),
        "below_scale": bool(slope < scale),
        "raw_slope_gap": bool(raw_slope - slope >= RAW_GAP),
    }


def _reference_cdf(plan: ExperimentPlan):
    if plan.kind in ("clt_marginal", "counting_clt"):
        return special.ndtr, {"law": "standard normal"}
    if plan.kind == "vervaat_chi2":
        return stats.chi2(1).cdf, {"law": "chi-square, 1 degree of freedom"}
    scale = limit_scale_bk(plan.alpha, 1, plan.subordinator, plan.t)
    return (lambda x: special.ndtr(np.asarray(x) / scale)), {"law": "normal", "scale": scale}


def run_distribution_experiment(plan: ExperimentPlan, workers: int = 1) -> ExperimentReport:
    """KS distance of a normalized statistic at ``t = 1`` (or ``t`` for BK) to its limit law."""
    plan.validate()
    if plan.kind not in DISTRIBUTION_KINDS:
        raise ParameterError(f"{plan.kind} is not a distribution experiment")
    started, clock = _start()
    rows = _run_replicates(plan, workers)
    sample = np.asarray([row["stat"] for row in rows])
    cdf, law = _reference_cdf(plan)
    ks = ks_distance(sample, cdf)
    ctx = _context(plan)
    stats_ = {
        "ks_distance": ks,
        "sample_mean": float(np.mean(sample)),
        "sample_variance": float(np.var(sample, ddof=1)) if sample.size > 1 else 0.0,
        "ks_critical_95": 1.358 / math.sqrt(sample.size),
        "extensions": int(sum(row["extensions"] for row in rows)),
        "j1": ctx["j1"], "kappa": ctx["kappa"], "sigma": ctx["sigma"], "mu": ctx["mu"],
    }
    if plan.kind in ("clt_marginal", "counting_clt"):
        model = _model(plan.alpha, plan.truncation)
        stats_["finite_n_variance_ratio"] = exact_partial_sum_variance(model, plan.n) \
            * model.sigma2 / (ctx["kappa"] ** 2 * plan.n ** (2 * ctx["hurst"]))
    if plan.kind == "bk_marginal":
        bk = np.asarray([row["bk_scaled"] for row in rows])
        factor = bk_limit_factor(plan.alpha, 1, plan.subordinator, plan.t)
        stats_["bk_scaled_mean"] = float(np.mean(bk))
        stats_["bk_limit_mean"] = factor
    tolerances = {"ks": plan.tolerance}
    flags = {"ks_below_tolerance": bool(ks < plan.tolerance)}
    raw = {"replicate": list(range(plan.replicates)), "stat": sample.tolist()}
    if plan.kind == "bk_marginal":
        raw["bk_scaled"] = bk.tolist()
    return _finish(plan, _seeds(plan), stats_, {}, law, flags, tolerances, raw, started, clock)


def run_reduction_experiment(plan: ExperimentPlan, workers: int = 1) -> ExperimentReport:
    """Growth of ``sup |sum (G - mu) - J_1 sum eta~|`` across horizons."""
    plan.validate()
    if plan.kind != "reduction_residual":
        raise ParameterError(f"{plan.kind} is not a reduction experiment")
    started, clock = _start()
    rows = _run_replicates(plan, workers)
    med = _median_list(rows, "resid")
    ex = reference_exponents(plan.alpha)
    stats_ = {"horizons": list(plan.horizons), "median_sup_residual": med.tolist(),
              "max_sup_residual": float(np.max([row["resid"] for row in rows]))}
    if np.all(med == 0.0):
        slopes = {"residual": None}
        flags = {"exact_cancellation": bool(stats_["max_sup_residual"] == 0.0)}
    else:
        fit = fit_rate_slope(plan.horizons, med)
        slopes = {"residual": fit.to_dict()}
        flags = {"below_scale": bool(fit.slope < ex["scale"])}
    references = {"reference_exponent": ex["gamma_half"], "scale_exponent": ex["scale"], **ex}
    raw = {"replicate": list(range(plan.replicates))}
    for i, T in enumerate(plan.horizons):
        raw[f"resid_T{T}"] = [row["resid"][i] for row in rows]
    return _finish(plan, _seeds(plan), stats_, slopes, references, flags,
                   {"margin": plan.margin}, raw, started, clock)


def run_identity_sweep(plan: ExperimentPlan, workers: int = 1) -> ExperimentReport:
    """Largest relative residual of the ``Z`` decomposition over random times."""
    plan.validate()
    if plan.kind != "identity_sweep":
        raise ParameterError(f"{plan.kind} is not an identity sweep")
    started, clock = _start()
    rows = _run_replicates(plan, workers)
    worst = np.asarray([row["max_rel_residual"] for row in rows])
    stats_ = {"max_rel_residual": float(worst.max()), "median_rel_residual": float(np.median(worst))}
    flags = {"residual_below_tolerance": bool(worst.max() < plan.tolerance)}
    raw = {"replicate": list(range(plan.replicates)), "max_rel_residual": worst.tolist()}
    return _finish(plan, _seeds(plan), stats_, {}, {}, flags, {"residual": plan.tolerance},
                   raw, started, clock)


def run_variance_experiment(plan: ExperimentPlan, workers: int = 1) -> ExperimentReport:
    """Deterministic ratio of the exact partial-sum variance to its asymptote."""
    plan.validate()
    started, clock = _start()
    model = _model(plan.alpha, plan.truncation)
    kappa = compute_kappa_alpha(plan.alpha)
    ratios = [exact_partial_sum_variance(model, n) * model.sigma2
              / (kappa**2 * n ** (2.0 - plan.alpha)) for n in plan.horizons]
    stats_ = {"horizons": list(plan.horizons), "ratios": ratios}
    flags = _variance_flags(ratios, plan.tolerance)
    return _finish(plan, [], stats_, {}, {"target_ratio": 1.0}, flags,
                   {"ratio": plan.tolerance}, {"n": list(plan.horizons), "ratio": ratios},
                   started, clock)


def _variance_flags(ratios, tol):
    gaps = [abs(1.0 - r) for r in ratios]
    return {
        "final_ratio_within_tolerance": bool(gaps[-1] <= tol),
        "monotone_approach": bool(all(b < a for a, b in zip(gaps, gaps[1:]))),
    }


def recompute_flags(report: ExperimentReport) -> dict:
    """Pass flags derived again from the stored statistics and tolerances alone."""
    kind = report.plan["kind"]
    s, tol = report.stats, report.tolerances
    if kind in COUPLING_KINDS:
        return _coupling_flags(report.slopes["residual"]["slope"], report.slopes["raw"]["slope"],
                               report.references["reference_exponent"],
                               report.references["scale_exponent"], tol["margin"])
    if kind in DISTRIBUTION_KINDS:
        return {"ks_below_tolerance": bool(s["ks_distance"] < tol["ks"])}
    if kind == "reduction_residual":
        if report.slopes["residual"] is None:
            return {"exact_cancellation": bool(s["max_sup_residual"] == 0.0)}
        return {"below_scale": bool(report.slopes["residual"]["slope"]
                                    < report.references["scale_exponent"])}
    if kind == "identity_sweep":
        return {"residual_below_tolerance": bool(s["max_rel_residual"] < tol["residual"])}
    return _variance_flags(s["ratios"], tol["ratio"])


_RUNNERS = {
    "variance_asymptote": run_variance_experiment,
    **{k: run_distribution_experiment for k in DISTRIBUTION_KINDS},
    **{k: run_coupling_experiment for k in COUPLING_KINDS},
    "reduction_residual": run_reduction_experiment,
    "identity_sweep": run_identity_sweep,
}


def run_experiment(plan: ExperimentPlan, workers: int = 1) -> ExperimentReport:
    plan.validate()
    return _RUNNERS[plan.kind](plan, workers)
