"""Benchmark harness: mixture data generation, seeded trials, statistics, I/O.

The reference experiment draws n = 100 observations in dimension 10 from a
Gaussian mixture (rare isotropic high-variance component on top of a frequent
structured low-variance one), runs the empirical and the robust Gram
estimators on the same sample, and records both squared Frobenius errors
against the closed-form mixture Gram matrix over many independent trials.

Randomness uses the counter-based Philox generator; trial t of a run seeded
with s uses the stream Philox(key = s + t), so any subset of trials can be
reproduced bit-for-bit in isolation.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import logging
import math
import os
from dataclasses import asdict, dataclass

import numpy as np

from .bounds import MomentBounds
from .covariance import robust_covariance
from .gram import empirical_gram, frobenius_error, robust_gram
from .mestimator import Sample

logger = logging.getLogger(__name__)

VALID_ESTIMATORS = {"robust", "empirical", "covariance"}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class BenchmarkError(RuntimeError):
    """More than the tolerated fraction of trials failed."""


@dataclass
class ExperimentConfig:
    n: int = 100
    d: int = 10
    trials: int = 500
    alpha_mix: float = 0.05
    contaminant_scale: float = 16.0
    seed: int = 0
    epsilon: float = 0.1
    estimators: frozenset = frozenset({"robust", "empirical"})
    output_path: str = ""
    num_updates: int = 4
    q: int = 2
    jobs: int = 1

    def __post_init__(self):
        if self.n < 2 or self.d < 2:
            raise ConfigError("need n >= 2 and d >= 2")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not 0.0 <= self.alpha_mix <= 1.0:
            raise ConfigError("alpha_mix must lie in [0, 1]")
        if self.contaminant_scale < 0.0:
            raise ConfigError("contaminant_scale must be non-negative")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError("epsilon must lie in (0, 1)")
        if self.num_updates < 1 or self.jobs < 1 or self.q < 2:
            raise ConfigError("num_updates, jobs must be >= 1 and q >= 2")
        est = frozenset(self.estimators)
        unknown = est - VALID_ESTIMATORS
        if unknown:
            raise ConfigError(f"unknown estimators: {sorted(unknown)}")
        # the trial schema always reports the robust/empirical pair
        object.__setattr__(self, "estimators", est | {"robust", "empirical"})

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "estimators" in raw:
            raw["estimators"] = frozenset(raw["estimators"])
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        out = asdict(self)
        out["estimators"] = sorted(self.estimators)
        return out


@dataclass(frozen=True)
class TrialResult:
    trial_index: int
    error_robust: float
    error_empirical: float
    iterations: int
    seed_used: int
    error_covariance: float = math.nan  # populated only when requested


def _structured_block(d: int) -> np.ndarray:
    m1 = 0.01 * np.eye(d)
    m1[0, 0], m1[0, 1], m1[1, 0], m1[1, 1] = 2.0, 1.0, 1.0, 1.0
    return m1


def trial_rng(seed: int, trial_index: int = 0) -> np.random.Generator:
    """Philox substream for one trial."""
    return np.random.Generator(np.random.Philox(key=seed + trial_index))


def gen_mixture(config: ExperimentConfig, rng: np.random.Generator = None) -> Sample:
    """Draw n observations from (1 - alpha) N(0, M1) + alpha N(0, scale * I).

    M1 carries the 2x2 block [[2, 1], [1, 1]] and 0.01 on the rest of the
    diagonal.  Deterministic given the generator (or config.seed).
    """
    if rng is None:
        rng = trial_rng(config.seed)
    n, d = config.n, config.d
    chol = np.linalg.cholesky(_structured_block(d))
    z = rng.standard_normal((n, d))
    contaminated = rng.random(n) < config.alpha_mix
    base = z @ chol.T
    wild = math.sqrt(config.contaminant_scale) * z
    data = np.where(contaminated[:, None], wild, base)
    return Sample(data)


def true_gram(config: ExperimentConfig) -> np.ndarray:
    """Closed-form mixture Gram matrix (1 - alpha) M1 + alpha scale I."""
    return ((1.0 - config.alpha_mix) * _structured_block(config.d)
            + config.alpha_mix * config.contaminant_scale * np.eye(config.d))


def _sample_digest(sample: Sample) -> str:
    return hashlib.sha256(sample.data.tobytes()).hexdigest()


def _run_trial(config: ExperimentConfig, trial_index: int) -> TrialResult:
    seed_used = config.seed + trial_index
    sample = gen_mixture(config, trial_rng(config.seed, trial_index))
    g_true = true_gram(config)
    digest = _sample_digest(sample)

    gbar = empirical_gram(sample)
    estimate = robust_gram(sample, epsilon=config.epsilon,
                           num_updates=config.num_updates)
    # both pipelines must have consumed the identical, unmutated sample
    if _sample_digest(sample) != digest:
        raise BenchmarkError(f"sample mutated during trial {trial_index}")

    err_cov = math.nan
    if "covariance" in config.estimators:
        cov = robust_covariance(sample, q=config.q, epsilon=config.epsilon,
                                num_updates=config.num_updates)
        err_cov = frobenius_error(cov.matrix, g_true)

    return TrialResult(
        trial_index=trial_index,
        error_robust=frobenius_error(estimate.matrix, g_true),
        error_empirical=frobenius_error(gbar, g_true),
        iterations=estimate.iterations,
        seed_used=seed_used,
        error_covariance=err_cov,
    )


def run_benchmark(config: ExperimentConfig) -> list:
    """Run all trials, write the CSV/JSON outputs, return the trial results.

    Individual trial failures are logged and tolerated up to 10% of the run;
    beyond that a BenchmarkError is raised.
    """
    results, failures = [], []

    def handle(idx, outcome, error=None):
        if error is not None:
            failures.append((idx, repr(error)))
            logger.error("trial %d failed: %r", idx, error)
        else:
            results.append(outcome)

    if config.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=config.jobs) as pool:
            futs = {pool.submit(_run_trial, config, t): t for t in range(config.trials)}
            for fut in concurrent.futures.as_completed(futs):
                idx = futs[fut]
                try:
                    handle(idx, fut.result())
                except Exception as exc:  # noqa: BLE001 - trial isolation
                    handle(idx, None, exc)
    else:
        for t in range(config.trials):
            try:
                handle(t, _run_trial(config, t))
            except Exception as exc:  # noqa: BLE001 - trial isolation
                handle(t, None, exc)

    if len(failures) > 0.1 * config.trials:
        raise BenchmarkError(
            f"{len(failures)} of {config.trials} trials failed; first: {failures[0]}"
        )
    results.sort(key=lambda r: r.trial_index)
    if config.output_path:
        write_benchmark_outputs(config, results, failures)
    return results


def quantile_curve(errors) -> list:
    """Sorted errors paired with plotting ranks k / (N + 1)."""
    errors = list(errors)
    if not errors:
        raise ValueError("need at least one error value")
    ordered = sorted(errors)
    n = len(ordered)
    return [((k + 1) / (n + 1), v) for k, v in enumerate(ordered)]


def summarize(results: list, config: ExperimentConfig) -> dict:
    rob = np.array([r.error_robust for r in results])
    emp = np.array([r.error_empirical for r in results])
    out = {
        "trials_completed": len(results),
        "mean_error_robust": float(rob.mean()),
        "std_error_robust": float(rob.std(ddof=1)) if len(rob) > 1 else 0.0,
        "mean_error_empirical": float(emp.mean()),
        "std_error_empirical": float(emp.std(ddof=1)) if len(emp) > 1 else 0.0,
        "config": config.to_dict(),
        "note": "plain empirical mean +/- std; no concentration-adjusted interval",
    }
    if "covariance" in config.estimators:
        cov = np.array([r.error_covariance for r in results])
        out["mean_error_covariance"] = float(np.nanmean(cov))
        out["std_error_covariance"] = float(np.nanstd(cov, ddof=1)) if len(cov) > 1 else 0.0
    return out


def write_benchmark_outputs(config: ExperimentConfig, results: list,
                            failures: list) -> None:
    os.makedirs(config.output_path, exist_ok=True)
    with_cov = "covariance" in config.estimators

    lines = ["trial_index,error_robust,error_empirical,seed_used"
             + (",error_covariance" if with_cov else "")]
    for r in results:
        row = f"{r.trial_index},{r.error_robust:.16e},{r.error_empirical:.16e},{r.seed_used}"
        if with_cov:
            row += f",{r.error_covariance:.16e}"
        lines.append(row)
    _write_text(os.path.join(config.output_path, "trials.csv"), lines)

    rob_curve = quantile_curve([r.error_robust for r in results])
    emp_curve = quantile_curve([r.error_empirical for r in results])
    qlines = ["rank_prob,robust,empirical"]
    for (p, rv), (_, ev) in zip(rob_curve, emp_curve):
        qlines.append(f"{p:.16e},{rv:.16e},{ev:.16e}")
    _write_text(os.path.join(config.output_path, "quantiles.csv"), qlines)

    summary = summarize(results, config)
    summary["failures"] = failures
    with open(os.path.join(config.output_path, "summary.json"), "w",
              encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_text(path: str, lines: list) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def save_matrix_csv(path: str, matrix: np.ndarray) -> None:
    """Row-major CSV with 17 significant digits (full float64 round-trip)."""
    np.savetxt(path, np.atleast_2d(np.asarray(matrix, dtype=float)),
               delimiter=",", fmt="%.16e")


def load_matrix_csv(path: str, header: bool = False) -> np.ndarray:
    arr = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    return arr


def load_sample_csv(path: str, header: bool = False) -> Sample:
    return Sample(load_matrix_csv(path, header=header))


def kappa_plugin(sample: Sample, n_directions: int = 100, seed: int = 0) -> float:
    """Plug-in directional kurtosis: max of the empirical fourth/second-moment
    ratio over the canonical basis plus random unit directions.

    Zero-variance directions are skipped.  For Gaussian data the value sits
    near 3; heavy-tail mixtures push it higher.
    """
    if sample.n < 4:
        raise ValueError("need at least 4 observations")
    rng = np.random.default_rng(seed)
    dirs = list(np.eye(sample.d))
    raw = rng.standard_normal((n_directions, sample.d))
    norms = np.linalg.norm(raw, axis=1)
    dirs += [r / c for r, c in zip(raw, norms) if c > 0]
    best = 1.0
    for theta in dirs:
        p2 = sample.projections(theta) ** 2
        m2 = float(p2.mean())
        if m2 <= 0.0:
            continue
        best = max(best, float(np.mean(p2 * p2)) / (m2 * m2))
    return best


def estimate_moment_bounds(sample: Sample, n_directions: int = 100, seed: int = 0,
                           safety: float = 1.5) -> MomentBounds:
    """Plug-in MomentBounds, flagged non-certified.

    The kurtosis plug-in is inflated by ``safety``; s4 and the traces are the
    empirical moments.  These are point estimates, not the true upper bounds
    the theory assumes.
    """
    norms_sq = np.sum(sample.data**2, axis=1)
    s4 = float(np.mean(norms_sq**2)) ** 0.25
    trace_g = float(np.mean(norms_sq))
    gbar = empirical_gram(sample)
    trace_g2 = float(np.trace(gbar @ gbar))
    kappa = max(safety * kappa_plugin(sample, n_directions, seed), 1.0 + 1e-6)
    # keep the Cauchy-Schwarz relation that true moments satisfy
    trace_g = max(trace_g, s4**2 / math.sqrt(kappa))
    return MomentBounds(kappa=kappa, s4=s4, trace_g=trace_g,
                        trace_g2=trace_g2, certified=False)
