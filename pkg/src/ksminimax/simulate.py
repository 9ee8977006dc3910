"""Monte Carlo hypothesis tests over a dictionary ensemble.

Each trial draws a member index uniformly, synthesizes ``N`` observations from
that member and decodes the index back.  The estimator used for MSE curves is
decode-then-output: it returns the decoded member itself.  That is the
reduction device behind the lower bounds, not a practical dictionary learner.

Trial ``k`` at grid point ``g`` draws all of its randomness from
``SeedSequence([master_seed, g, k])``, so results do not depend on the order
in which trials run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from ._io import write_csv
from .bounds import (
    BoundInputs,
    mi_upper_general,
    mi_upper_sparse_gaussian,
    nats_to_bits,
    stacked_conditional_covariances,
)
from .generative import SPARSE_GAUSSIAN, CoefficientModel, synthesize

FULL_X = "full_X"
SUPPORT_ONLY = "support_only"
CURVE_SCHEMA = "ksminimax.error_curve/v1"
CURVE_COLUMNS = ("N", "trials", "errors", "error_rate", "ci_low", "ci_high",
                 "mean_mse", "worst_mse", "seed")
TRIAL_LOG_SCHEMA = "ksminimax.trial_log/v1"


def _member_stack(ensemble):
    members = ensemble.members if hasattr(ensemble, "members") else ensemble
    return np.stack([getattr(M, "D", M) for M in members])


def min_distance_detect(Y, X, ensemble) -> int:
    """Index of the member minimizing ``||Y - D_l X||_F`` (lowest index on ties)."""
    Ds = _member_stack(ensemble)
    Y = np.asarray(Y)
    X = np.asarray(X)
    if Ds.shape[2] != X.shape[0] or Ds.shape[1] != Y.shape[0] or X.shape[1] != Y.shape[1]:
        raise ValueError("dimension mismatch between Y, X and the ensemble")
    R = Y[None] - Ds @ X
    return int(np.argmin(np.sum(R * R, axis=(1, 2))))


def gaussian_ml_detect(Y, supports, ensemble, sigma_a: float, sigma: float) -> int:
    """Index maximizing the Gaussian likelihood of ``Y`` given the supports.

    Column ``k`` of ``Y`` is scored under ``N(0, sigma_a^2 D_S D_S^T + sigma^2 I)``
    with ``S`` the ``k``-th row of ``supports``.  Ties go to the lowest index.
    """
    Ds = _member_stack(ensemble)
    Y = np.asarray(Y)
    supports = np.atleast_2d(np.asarray(supports, dtype=np.int64))
    y = Y.T[:, :, None]
    scores = np.empty(len(Ds))
    for l, D in enumerate(Ds):
        C = stacked_conditional_covariances(D, supports, sigma_a, sigma)
        try:
            Lc = np.linalg.cholesky(C)
        except np.linalg.LinAlgError:
            raise ValueError("singular observation covariance; sigma must be positive") from None
        z = np.linalg.solve(Lc, y)
        logdet = 2.0 * np.log(np.diagonal(Lc, axis1=1, axis2=2)).sum()
        scores[l] = -0.5 * (np.sum(z * z) + logdet)
    return int(np.argmax(scores))


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("wilson_interval needs n >= 1")
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    phat = k / n
    denom = 1 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class ExperimentSpec:
    ensemble: object
    model: CoefficientModel
    sigma: float
    N_grid: list
    trials: int
    side_info: str = FULL_X
    master_seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        grid = list(self.N_grid)
        if not grid or any(n < 1 for n in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError(f"N_grid must be strictly increasing positive integers, got {grid}")
        if self.side_info not in (FULL_X, SUPPORT_ONLY):
            raise ValueError(f"unknown side_info {self.side_info!r}")
        if self.side_info == SUPPORT_ONLY and self.model.variant != SPARSE_GAUSSIAN:
            raise ValueError("support_only side information needs the sparse_gaussian model")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


@dataclass
class CurvePoint:
    N: int
    trials: int
    errors: int
    error_rate: float
    ci_low: float
    ci_high: float
    mean_mse: float | None = None
    worst_mse: float | None = None


@dataclass
class ErrorCurve:
    points: list
    seed: int
    L: int
    trial_log: list = field(default_factory=list, repr=False)

    def rows(self):
        for pt in self.points:
            yield (pt.N, pt.trials, pt.errors, pt.error_rate, pt.ci_low, pt.ci_high,
                   pt.mean_mse, pt.worst_mse, self.seed)


def trial_rng(master_seed: int, grid_index: int, trial_index: int):
    return np.random.default_rng(np.random.SeedSequence([master_seed, grid_index, trial_index]))


def run_trial(spec: ExperimentSpec, grid_index: int, trial_index: int) -> tuple[int, int]:
    """One hypothesis test; returns ``(true_index, decoded_index)``."""
    members = spec.ensemble.members
    rng = trial_rng(spec.master_seed, grid_index, trial_index)
    l = int(rng.integers(len(members)))
    N = spec.N_grid[grid_index]
    ds = synthesize(members[l], spec.model, N, spec.sigma, rng)
    if spec.side_info == FULL_X:
        lhat = min_distance_detect(ds.Y, ds.X, spec.ensemble)
    else:
        lhat = gaussian_ml_detect(ds.Y, ds.supports, spec.ensemble,
                                  spec.model.sigma_a, spec.sigma)
    return l, lhat


def _run(spec: ExperimentSpec, with_mse: bool) -> ErrorCurve:
    L = len(spec.ensemble.members)
    sq = spec.ensemble.pairwise_sq_distances() if with_mse else None
    points, log = [], []
    for g, N in enumerate(spec.N_grid):
        errors = 0
        by_truth = [[] for _ in range(L)]
        total_sq = 0.0
        for k in range(spec.trials):
            l, lhat = run_trial(spec, g, k)
            errors += l != lhat
            err_sq = float(sq[l, lhat]) if with_mse else None
            if with_mse:
                by_truth[l].append(err_sq)
                total_sq += err_sq
            log.append((g, N, k, l, lhat, err_sq))
        lo, hi = wilson_interval(errors, spec.trials)
        pt = CurvePoint(N, spec.trials, errors, errors / spec.trials, lo, hi)
        if with_mse:
            pt.mean_mse = total_sq / spec.trials
            pt.worst_mse = max(sum(v) / len(v) for v in by_truth if v)
        points.append(pt)
    return ErrorCurve(points, spec.master_seed, L, log)


def run_error_experiment(spec: ExperimentSpec) -> ErrorCurve:
    return _run(spec, with_mse=False)


def run_mse_experiment(spec: ExperimentSpec) -> ErrorCurve:
    """Error curve plus ``mean_mse`` and ``worst_mse`` (max over the true member
    of its conditional mean squared Frobenius error)."""
    return _run(spec, with_mse=True)


def mi_upper_bits(spec: ExperimentSpec, N: int) -> float:
    """Analytic MI upper bound (bits) matching the experiment's side information."""
    if spec.sigma == 0:
        return math.inf
    e = spec.ensemble
    P = e.params
    m1, m2, p1, p2 = e.D0.dims
    model = spec.model
    inputs = BoundInputs(N=N, m1=m1, m2=m2, p1=p1, p2=p2, r=P.r, sigma=spec.sigma, t=P.t,
                         c1=P.c1,
                         sigma_a=model.sigma_a if model.is_sparse and model.sigma_a > 0 else None,
                         s=model.s if model.is_sparse else None,
                         sigma_x_norm=model.covariance_spectral_norm(p1 * p2) or None)
    if spec.side_info == SUPPORT_ONLY:
        if inputs.sigma_a is None:
            return 0.0
        nats = mi_upper_sparse_gaussian(inputs, P.eps_prime)
    else:
        if inputs.sigma_x_norm is None:
            return 0.0
        nats = mi_upper_general(inputs, P.eps_prime)
    return nats_to_bits(nats)


@dataclass
class FanoReport:
    rows: list
    violations: list

    @property
    def passed(self) -> bool:
        return not self.violations


def fano_consistency_check(curve: ErrorCurve, spec: ExperimentSpec,
                           mi_scale: float = 1.0) -> FanoReport:
    """Check ``(1 - P_err_upper) log2 L - 1 <= MI upper bound`` at every grid point.

    ``P_err_upper`` is the upper end of the Wilson interval.  The inequality is
    a theorem, so any violation points at a bug.  ``mi_scale`` multiplies the
    analytic bound and exists only for fault injection.
    """
    rows, violations = [], []
    for pt in curve.points:
        lhs = (1.0 - pt.ci_high) * math.log2(curve.L) - 1.0
        rhs = mi_scale * mi_upper_bits(spec, pt.N)
        ok = lhs <= rhs
        rows.append({"N": pt.N, "lhs_bits": lhs, "mi_upper_bits": rhs, "ok": ok})
        if not ok:
            violations.append(pt.N)
    return FanoReport(rows, violations)


def write_error_curve(curve: ErrorCurve, path):
    write_csv(path, CURVE_SCHEMA, CURVE_COLUMNS, curve.rows())


def write_trial_log(curve: ErrorCurve, path):
    write_csv(path, TRIAL_LOG_SCHEMA,
              ("grid_index", "N", "trial", "true_index", "decoded_index", "sq_error"),
              curve.trial_log)
