"""Hypothesis classes: random sign codebooks and Kronecker dictionary ensembles.

An ensemble is a finite set of Kronecker-structured dictionaries around a
reference ``D0``, pairwise separated yet close enough that observations
generated from different members are hard to tell apart.  Members are built
by perturbing every column of the reference factors ``A0`` and ``B0`` inside
the orthogonal complement of that column, in directions given by one
codeword of a ``+-alpha`` sign codebook with small pairwise correlations.
The construction is checked after the fact by :func:`verify_ensemble`; the
verified properties, not the construction details, are what callers rely on.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import linalg
from ._io import read_matrix_csv, write_json, write_matrix_csv
from .bounds import (
    BoundInputs,
    kl_full_side_info,
    mean_kl_support_side_info,
    mi_upper_general,
    mi_upper_sparse_gaussian,
)
from .generative import (
    SPARSE_GAUSSIAN,
    UNIT_NORM_TOL,
    CoefficientModel,
    KSDictionary,
    build_ks_dictionary,
    sample_support,
)

LN2 = math.log(2.0)
GENERAL_MODE = "general"
SPARSE_MODE = "sparse"
REL_SLACK = 1e-9


class InadmissibleParameters(ValueError):
    """Packing parameters outside the range where the construction is valid."""


class DegenerateCodebookError(ValueError):
    """The requested codebook or ensemble would have fewer than two members."""


class VerificationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PackingParams:
    """``t``: correlation budget; ``c1``: cardinality exponent; ``eps_prime``:
    separation scale; ``r``: neighborhood radius; ``alpha``: codeword entry
    magnitude (``None`` means ``1/sqrt(entries)``); ``s``: sparsity used by the
    sparse-mode cap on ``eps_prime``."""

    t: float
    c1: float
    eps_prime: float
    r: float = 1.0
    alpha: float | None = None
    s: int = 1

    def __post_init__(self):
        if not 0 < self.t < 1:
            raise InadmissibleParameters(f"t must lie in (0, 1), got {self.t}")
        ceiling = self.t**2 / (8 * LN2)
        if not 0 < self.c1 < ceiling:
            raise InadmissibleParameters(
                f"c1={self.c1} violates 0 < c1 < t^2/(8 ln 2) = {ceiling:.6g}"
            )
        if not self.eps_prime > 0:
            raise InadmissibleParameters(f"eps_prime must be positive, got {self.eps_prime}")
        if not self.r > 0:
            raise InadmissibleParameters(f"r must be positive, got {self.r}")
        if self.alpha is not None and not self.alpha > 0:
            raise InadmissibleParameters(f"alpha must be positive, got {self.alpha}")
        if self.s < 1:
            raise InadmissibleParameters(f"s must be >= 1, got {self.s}")


def eps_prime_cap(p: int, r: float, mode: str, s: int = 1) -> float:
    """Largest admissible ``eps_prime``: ``min(r^2, r^4/4p)`` (strict) in general
    mode, ``min(r^2/s, r^4/4p)`` (inclusive) in sparse mode."""
    if mode == GENERAL_MODE:
        return min(r**2, r**4 / (4 * p))
    if mode == SPARSE_MODE:
        return min(r**2 / s, r**4 / (4 * p))
    raise ValueError(f"unknown mode {mode!r}")


def check_eps_prime(params: PackingParams, p: int, mode: str):
    cap = eps_prime_cap(p, params.r, mode, params.s)
    if mode == GENERAL_MODE and not params.eps_prime < cap:
        raise InadmissibleParameters(
            f"eps_prime={params.eps_prime:.6g} violates eps_prime < min(r^2, r^4/(4p)) = {cap:.6g}"
        )
    if mode == SPARSE_MODE and not params.eps_prime <= cap:
        raise InadmissibleParameters(
            f"eps_prime={params.eps_prime:.6g} violates eps_prime <= min(r^2/s, r^4/(4p)) = {cap:.6g}"
        )


# ------------------------------------------------------------------ codebooks

def max_codebook_size(m: int, p: int, c1: float) -> int:
    L = math.floor(2.0 ** (c1 * m * p - 0.5))
    if L < 2:
        raise DegenerateCodebookError(f"codebook degenerate: 2^(c1*m*p - 1/2) gives L={L}")
    return L


def ensemble_size(m1, m2, p1, p2, c1) -> int:
    L = math.floor(2.0 ** (c1 * ((m1 - 1) * p1 + (m2 - 1) * p2) - 1.0))
    if L < 2:
        raise DegenerateCodebookError(
            f"ensemble degenerate: 2^(c1((m1-1)p1 + (m2-1)p2) - 1) gives L={L}"
        )
    return L


@dataclass(frozen=True, eq=False)
class SignCodebook:
    matrices: list
    params: PackingParams
    alpha: float

    @property
    def L(self) -> int:
        return len(self.matrices)


@dataclass(frozen=True)
class CodebookReport:
    max_abs_correlation: float
    worst_pair: tuple[int, int] | None
    n_pairs: int
    passed: bool


def correlation(A1, A2) -> float:
    """``sum(A1 * A2)``, the codebook pair correlation."""
    return linalg.sum_entries(linalg.hadamard(A1, A2))


def _greedy_accept(candidates, t: float, limit: int):
    """Indices of ``candidates`` accepted greedily under ``|correlation| <= t``."""
    accepted = []
    for i, c in enumerate(candidates):
        if all(abs(correlation(c, candidates[j])) <= t for j in accepted):
            accepted.append(i)
            if len(accepted) == limit:
                break
    return accepted


def codebook_alpha(m: int, p: int, params: PackingParams) -> float:
    alpha = params.alpha if params.alpha is not None else 1.0 / math.sqrt(m * p)
    ceiling = (params.t / (2 * alpha**2 * m * p)) ** 2 / (2 * LN2)
    if not params.c1 < ceiling:
        raise InadmissibleParameters(
            f"alpha={alpha:.6g} inadmissible: needs c1={params.c1} < "
            f"(t/(2 alpha^2 m p))^2 / (2 ln 2) = {ceiling:.6g}"
        )
    return alpha


def build_sign_codebook(m: int, p: int, params: PackingParams, L_target: int, rng,
                        max_attempts: int = 50, candidates_per_member: int = 64) -> SignCodebook:
    """Random ``m x p`` matrices with entries ``+-alpha`` whose pairwise
    correlations are at most ``t`` in magnitude.

    Candidates are drawn i.i.d. uniform and accepted greedily; an attempt that
    fails to reach ``L_target`` members is discarded and restarted.
    """
    if L_target < 2:
        raise DegenerateCodebookError(f"codebook degenerate: L_target={L_target}")
    L_max = max_codebook_size(m, p, params.c1)
    if L_target > L_max:
        raise ValueError(f"L_target={L_target} exceeds the codebook size bound {L_max}")
    alpha = codebook_alpha(m, p, params)
    for _ in range(max_attempts):
        signs = rng.choice(np.array([-1.0, 1.0]), size=(candidates_per_member * L_target, m, p))
        cands = alpha * signs
        idx = _greedy_accept(cands, params.t, L_target)
        if len(idx) == L_target:
            return SignCodebook([cands[i] for i in idx], params, alpha)
    raise VerificationError(
        f"no codebook of {L_target} members after {max_attempts} attempts; "
        "parameters too aggressive"
    )


def verify_sign_codebook(cb: SignCodebook) -> CodebookReport:
    worst, pair, n_pairs = 0.0, None, 0
    for i in range(cb.L):
        for j in range(i + 1, cb.L):
            n_pairs += 1
            c = abs(correlation(cb.matrices[i], cb.matrices[j]))
            if pair is None or c > worst:
                worst, pair = c, (i, j)
    return CodebookReport(worst, pair, n_pairs, worst <= cb.params.t)


# ------------------------------------------------------------------ ensembles

@dataclass
class EnsembleReport:
    L: int
    lower_bound: float
    upper_bound: float
    min_pair_sq: float
    max_pair_sq: float
    radius: float
    max_dist_to_ref: float
    max_column_norm_error: float
    max_structure_error: float
    kl_worst: float
    kl_budget: float
    kl_side_info: str
    checks: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def alpha_L(self) -> float:
        """Measured worst-case per-observation KL between members (nats)."""
        return self.kl_worst

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


@dataclass(eq=False)
class DictionaryEnsemble:
    D0: KSDictionary
    members: list
    params: PackingParams
    mode: str
    report: EnsembleReport | None = None
    seed: int | None = None

    @property
    def L(self) -> int:
        return len(self.members)

    def pairwise_sq_distances(self) -> np.ndarray:
        flat = np.stack([M.D.ravel() for M in self.members])
        diff = flat[:, None, :] - flat[None, :, :]
        return np.sum(diff * diff, axis=-1)


def _complement_basis(a):
    """Orthonormal basis of the orthogonal complement of unit vector ``a``.

    Uses the Householder reflector that maps ``a`` to a multiple of ``e1``;
    its remaining columns span ``a``'s complement.
    """
    m = a.size
    e1 = np.zeros(m)
    e1[0] = 1.0
    sign = 1.0 if a[0] >= 0 else -1.0
    v = a + sign * e1
    v /= np.linalg.norm(v)
    H = np.eye(m) - 2.0 * np.outer(v, v)
    return H[:, 1:]


def _perturb_factor(F0, signs, e):
    """Move each column of ``F0`` to ``sqrt(1-e) f + sqrt(e) u`` with ``u`` a unit
    vector orthogonal to ``f`` in the direction set by ``signs``."""
    m, p = F0.shape
    if m == 1:
        return F0.copy()
    out = np.empty_like(F0)
    for j in range(p):
        u = _complement_basis(F0[:, j]) @ signs[:, j]
        u /= np.linalg.norm(u)
        out[:, j] = math.sqrt(1.0 - e) * F0[:, j] + math.sqrt(e) * u
    return linalg.normalize_columns(out)


def default_check_model(params: PackingParams, mode: str, p: int) -> CoefficientModel:
    if mode == SPARSE_MODE:
        return CoefficientModel.sparse_gaussian(params.s, 1.0)
    return CoefficientModel.general(np.eye(p))


def build_ensemble(D0: KSDictionary, params: PackingParams, mode: str, rng,
                   model: CoefficientModel | None = None, sigma: float = 1.0,
                   L_target: int | None = None, max_retries: int = 10,
                   seed: int | None = None) -> DictionaryEnsemble:
    """Build and verify a Kronecker dictionary ensemble around ``D0``.

    The member count is ``floor(2^(c1((m1-1)p1 + (m2-1)p2) - 1))``, or
    ``L_target`` when that is smaller.  ``model`` and ``sigma`` parametrize the
    KL check in :func:`verify_ensemble`; by default a unit-variance
    sparse-Gaussian (sparse mode) or identity-covariance (general mode) model
    with ``sigma = 1``.
    """
    m1, m2, p1, p2 = D0.dims
    p = p1 * p2
    if mode not in (GENERAL_MODE, SPARSE_MODE):
        raise ValueError(f"unknown mode {mode!r}")
    check_eps_prime(params, p, mode)
    L = ensemble_size(m1, m2, p1, p2, params.c1)
    if L_target is not None:
        if L_target < 2:
            raise DegenerateCodebookError(f"ensemble degenerate: L_target={L_target}")
        L = min(L, L_target)
    if model is None:
        model = default_check_model(params, mode, p)

    na, nb = (m1 - 1) * p1, (m2 - 1) * p2
    e = params.eps_prime / params.r**2
    report = None
    for _ in range(max_retries):
        cb = build_sign_codebook(1, na + nb, params, L, rng)
        members = []
        for c in cb.matrices:
            c = c.ravel()
            SA = c[:na].reshape(m1 - 1, p1, order="F")
            SB = c[na:].reshape(m2 - 1, p2, order="F")
            members.append(build_ks_dictionary(_perturb_factor(D0.A, SA, e),
                                               _perturb_factor(D0.B, SB, e)))
        ens = DictionaryEnsemble(D0, members, params, mode, seed=seed)
        report = verify_ensemble(ens, model, sigma)
        if report.passed:
            ens.report = report
            return ens
    raise VerificationError(
        f"ensemble failed verification after {max_retries} retries: {report.failures}"
    )


def verify_ensemble(e: DictionaryEnsemble, model: CoefficientModel, sigma: float,
                    n_supports: int = 256, seed: int = 0,
                    rel_slack: float = REL_SLACK) -> EnsembleReport:
    """Recheck every property an ensemble must have.

    (a) ``||Dl - D0||_F < r``; (b) pairwise squared distances inside
    ``[(2p/r^2)(1-t) eps', (8p/r^2) eps']``; (c) unit-norm columns and exact
    Kronecker structure; (d) the worst per-observation KL between members
    stays within the per-observation MI bound for ``model``.  The KL uses
    support side information for sparse-Gaussian models (averaged over
    ``n_supports`` supports drawn with ``seed``) and full coefficient side
    information otherwise.
    """
    if sigma <= 0:
        raise ValueError("the KL check needs sigma > 0")
    P = e.params
    m1, m2, p1, p2 = e.D0.dims
    p = p1 * p2
    lower = 2.0 * p / P.r**2 * (1.0 - P.t) * P.eps_prime
    upper = 8.0 * p / P.r**2 * P.eps_prime
    failures = []

    dist_ref = [linalg.fro_distance(M.D, e.D0.D) for M in e.members]
    max_ref = max(dist_ref) if dist_ref else 0.0
    if max_ref >= P.r:
        failures.append(f"member outside radius: max ||Dl - D0||_F = {max_ref:.6g} >= r = {P.r}")

    sq = e.pairwise_sq_distances()
    off = sq[~np.eye(e.L, dtype=bool)] if e.L > 1 else np.array([])
    min_sq = float(off.min()) if off.size else float("nan")
    max_sq = float(off.max()) if off.size else float("nan")
    if off.size == 0:
        failures.append("ensemble has fewer than two members")
    else:
        if min_sq < lower * (1 - rel_slack):
            failures.append(f"pair too close: {min_sq:.6g} < {lower:.6g}")
        if max_sq > upper * (1 + rel_slack):
            failures.append(f"pair too far: {max_sq:.6g} > {upper:.6g}")

    norm_err, struct_err = 0.0, 0.0
    for M in e.members:
        for F in (M.A, M.B, M.D):
            norm_err = max(norm_err, float(np.max(np.abs(np.linalg.norm(F, axis=0) - 1.0))))
        struct_err = max(struct_err, float(np.max(np.abs(M.D - linalg.kron(M.A, M.B)))))
    if norm_err > UNIT_NORM_TOL:
        failures.append(f"column norm off by {norm_err:.3e}")
    if struct_err > 1e-12:
        failures.append(f"member is not A kron B (error {struct_err:.3e})")

    inputs = BoundInputs(N=1, m1=m1, m2=m2, p1=p1, p2=p2, r=P.r, sigma=sigma, t=P.t, c1=P.c1,
                         sigma_a=model.sigma_a if model.is_sparse else None,
                         s=model.s if model.is_sparse else None,
                         sigma_x_norm=model.covariance_spectral_norm(p))
    kl_worst = 0.0
    if model.variant == SPARSE_GAUSSIAN:
        side = "support"
        budget = mi_upper_sparse_gaussian(inputs, P.eps_prime)
        supports = sample_support(p, model.s, np.random.default_rng(seed), size=n_supports)
        for i in range(e.L):
            for j in range(e.L):
                if i != j:
                    kl = mean_kl_support_side_info(e.members[i].D, e.members[j].D, supports,
                                                   model.sigma_a, sigma)
                    kl_worst = max(kl_worst, kl)
    else:
        side = "coefficients"
        budget = mi_upper_general(inputs, P.eps_prime)
        Sx = (model.sigma_x if not model.is_sparse
              else model.s / p * model.sigma_a**2 * np.eye(p))
        for i in range(e.L):
            for j in range(i + 1, e.L):
                kl_worst = max(kl_worst, kl_full_side_info(e.members[i].D, e.members[j].D,
                                                           Sx, sigma))
    if kl_worst > budget * (1 + rel_slack):
        failures.append(f"KL {kl_worst:.6g} exceeds MI budget {budget:.6g}")

    checks = {
        "radius": max_ref < P.r,
        "separation": off.size > 0 and min_sq >= lower * (1 - rel_slack)
        and max_sq <= upper * (1 + rel_slack),
        "unit_norm": norm_err <= UNIT_NORM_TOL and struct_err <= 1e-12,
        "kl_budget": kl_worst <= budget * (1 + rel_slack),
    }
    return EnsembleReport(
        L=e.L, lower_bound=lower, upper_bound=upper, min_pair_sq=min_sq, max_pair_sq=max_sq,
        radius=P.r, max_dist_to_ref=max_ref, max_column_norm_error=norm_err,
        max_structure_error=struct_err, kl_worst=kl_worst, kl_budget=budget,
        kl_side_info=side, checks=checks, failures=failures,
    )


# ---------------------------------------------------------------- persistence

def save_ensemble(e: DictionaryEnsemble, directory):
    """Write factor CSVs for ``D0`` and every member plus ``manifest.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(directory / "D0_A.csv", e.D0.A)
    write_matrix_csv(directory / "D0_B.csv", e.D0.B)
    for k, M in enumerate(e.members, start=1):
        write_matrix_csv(directory / f"member_{k:03d}_A.csv", M.A)
        write_matrix_csv(directory / f"member_{k:03d}_B.csv", M.B)
    m1, m2, p1, p2 = e.D0.dims
    write_json(directory / "manifest.json", {
        "schema": "ksminimax.ensemble/v1",
        "dims": {"m1": m1, "m2": m2, "p1": p1, "p2": p2},
        "L": e.L,
        "mode": e.mode,
        "params": asdict(e.params),
        "seed": e.seed,
        "report": e.report.to_dict() if e.report is not None else None,
    })


def load_ensemble(directory) -> DictionaryEnsemble:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    D0 = build_ks_dictionary(read_matrix_csv(directory / "D0_A.csv"),
                             read_matrix_csv(directory / "D0_B.csv"))
    members = [
        build_ks_dictionary(read_matrix_csv(directory / f"member_{k:03d}_A.csv"),
                            read_matrix_csv(directory / f"member_{k:03d}_B.csv"))
        for k in range(1, manifest["L"] + 1)
    ]
    params = PackingParams(**manifest["params"])
    report = None
    if manifest.get("report"):
        r = dict(manifest["report"])
        r.pop("passed", None)
        report = EnsembleReport(**r)
    return DictionaryEnsemble(D0, members, params, manifest["mode"], report, manifest["seed"])
