"""Information-theoretic quantities and minimax lower-bound evaluators.

Closed-form divergences are in nats.  Fano-side quantities (``fano_lower``)
are in bits; use :func:`nats_to_bits` before comparing the two.

The three risk bounds share the factor ``c1 * (p1*(m1-1) + p2*(m2-1)) - 3``
(``degrees_term``).  When it is not positive the bound is information-free:
the evaluators then return ``value = 0`` with ``vacuous = True`` instead of a
negative number.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import linalg
from .generative import KSDictionary

LN2 = math.log(2.0)
THM2_CONSTANT = 1.58e-5
SPARSE_GAUSSIAN_MI_CONSTANT = 7921.0
BISECTION_RTOL = 1e-12


def nats_to_bits(x: float) -> float:
    return x / LN2


# ---------------------------------------------------------------- divergences

def _cholesky(S, name):
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"{name} must be square, got shape {S.shape}")
    if not np.allclose(S, S.T, rtol=1e-10, atol=1e-12):
        raise ValueError(f"{name} is not symmetric")
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise ValueError(f"{name} is not positive definite") from None


def kl_gaussian(S1, S2) -> float:
    """KL divergence ``KL(N(0, S1) || N(0, S2))`` in nats."""
    L1 = _cholesky(S1, "S1")
    L2 = _cholesky(S2, "S2")
    if L1.shape != L2.shape:
        raise ValueError(f"dimension mismatch: {L1.shape} vs {L2.shape}")
    d = L1.shape[0]
    # tr(S2^-1 S1) = ||L2^-1 L1||_F^2
    M = np.linalg.solve(L2, L1)
    logdet = 2.0 * (np.sum(np.log(np.diag(L2))) - np.sum(np.log(np.diag(L1))))
    return max(0.5 * (np.sum(M * M) - d + logdet), 0.0)


def subdictionary(dictionary: KSDictionary, support):
    """Columns of ``D`` on a 1-based support, built as a Khatri-Rao product.

    The support is split into factor multisets ``(ia, ib)`` and the result is
    ``khatri_rao(A[:, ia], B[:, ib])``; this never touches ``D`` itself.
    """
    m1, m2, p1, p2 = dictionary.dims
    ia, ib = linalg.split_indices(support, p2, p1)
    return linalg.khatri_rao(linalg.select_columns(dictionary.A, ia),
                             linalg.select_columns(dictionary.B, ib))


def conditional_covariance(dictionary: KSDictionary, support, sigma_a: float, sigma: float):
    """Covariance of one observation given its support under sparse-Gaussian coefficients.

    ``sigma_a^2 D_S D_S^T + sigma^2 I_m`` with ``D_S`` from :func:`subdictionary`.
    """
    support = np.asarray(support).ravel()
    if support.size == 0:
        raise ValueError("support must be nonempty")
    DS = subdictionary(dictionary, support)
    return sigma_a**2 * (DS @ DS.T) + sigma**2 * np.eye(DS.shape[0])


def stacked_conditional_covariances(D, supports, sigma_a, sigma):
    """Conditional covariances ``(n, m, m)`` of one dictionary matrix ``D`` on
    each row of the 1-based ``(n, s)`` support array."""
    DS = D[:, supports - 1]                        # (m, n, s)
    DS = np.moveaxis(DS, 1, 0)                     # (n, m, s)
    C = sigma_a**2 * DS @ np.swapaxes(DS, 1, 2)
    C += sigma**2 * np.eye(D.shape[0])
    return C


def mean_kl_support_side_info(D1, D2, supports, sigma_a, sigma) -> float:
    """Average over ``supports`` of the per-observation KL between the two
    conditional Gaussian laws induced by ``D1`` and ``D2`` (nats)."""
    supports = np.atleast_2d(np.asarray(supports, dtype=np.int64))
    C1 = stacked_conditional_covariances(np.asarray(D1), supports, sigma_a, sigma)
    C2 = stacked_conditional_covariances(np.asarray(D2), supports, sigma_a, sigma)
    L1 = np.linalg.cholesky(C1)
    L2 = np.linalg.cholesky(C2)
    M = np.linalg.solve(L2, L1)
    d = C1.shape[-1]
    logdet = 2.0 * (np.log(np.diagonal(L2, axis1=1, axis2=2)).sum(1)
                    - np.log(np.diagonal(L1, axis1=1, axis2=2)).sum(1))
    kl = 0.5 * ((M * M).sum((1, 2)) - d + logdet)
    return float(np.mean(np.clip(kl, 0.0, None)))


def kl_full_side_info(D1, D2, sigma_x, sigma) -> float:
    """Expected per-observation KL given the coefficients: ``tr(E Sigma_x E^T) / (2 sigma^2)``
    with ``E = D1 - D2`` (nats)."""
    E = np.asarray(D1) - np.asarray(D2)
    return float(np.trace(E @ np.asarray(sigma_x) @ E.T)) / (2.0 * sigma**2)


# ------------------------------------------------------------ bound formulas

@dataclass(frozen=True)
class BoundInputs:
    N: float
    m1: int
    m2: int
    p1: int
    p2: int
    r: float
    sigma: float
    t: float
    c1: float
    sigma_a: float | None = None
    s: int | None = None
    sigma_x_norm: float | None = None

    def __post_init__(self):
        for name in ("N", "m1", "m2", "p1", "p2", "r", "sigma", "c1"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 < self.t < 1:
            raise ValueError(f"t must lie in (0, 1), got {self.t}")
        ceiling = self.t / (8 * LN2)
        if not self.c1 < ceiling:
            raise ValueError(f"c1={self.c1} violates c1 < t/(8 ln 2) = {ceiling:.6g}")
        for name in ("sigma_a", "s", "sigma_x_norm"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive, got {v}")

    @property
    def m(self) -> int:
        return self.m1 * self.m2

    @property
    def p(self) -> int:
        return self.p1 * self.p2

    @property
    def degrees_term(self) -> float:
        return self.c1 * (self.p1 * (self.m1 - 1) + self.p2 * (self.m2 - 1)) - 3.0

    @property
    def ensemble_size(self) -> float:
        """Cardinality ``2^(c1((m1-1)p1 + (m2-1)p2) - 1)`` of the hypothesis class."""
        return 2.0 ** (self.c1 * ((self.m1 - 1) * self.p1 + (self.m2 - 1) * self.p2) - 1.0)

    def snr(self) -> float:
        self._need("s", "sigma_a")
        return self.s * self.sigma_a**2 / (self.m * self.sigma**2)

    def _need(self, *names):
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ValueError(f"bound needs {', '.join(missing)}")


@dataclass(frozen=True)
class BoundResult:
    name: str
    value: float
    vacuous: bool
    degrees_term: float
    L: float
    precondition_cap: float
    mi_upper: float = field(default=float("nan"))
    fano_threshold: float = field(default=float("nan"))


def mi_upper_general(inputs: BoundInputs, eps_prime: float) -> float:
    """MI upper bound (nats) under full coefficient side information:
    ``4 N p ||Sigma_x||_2 eps' / (r^2 sigma^2)``."""
    inputs._need("sigma_x_norm")
    return (4.0 * inputs.N * inputs.p * inputs.sigma_x_norm * eps_prime
            / (inputs.r**2 * inputs.sigma**2))


def mi_upper_sparse_gaussian(inputs: BoundInputs, eps_prime: float) -> float:
    """MI upper bound (nats) under support side information, sparse-Gaussian
    coefficients: ``7921 (sigma_a/sigma)^4 N s^2 eps' / r^2``."""
    inputs._need("s", "sigma_a")
    return (SPARSE_GAUSSIAN_MI_CONSTANT * (inputs.sigma_a / inputs.sigma) ** 4
            * inputs.N * inputs.s**2 * eps_prime / inputs.r**2)


def fano_lower(L: float) -> float:
    """``0.5 * log2(L) - 1`` bits; negative values are returned as they are."""
    if L < 2:
        raise ValueError(f"fano_lower needs L >= 2, got {L}")
    return 0.5 * math.log2(L) - 1.0


def _separation_eps_prime(inputs: BoundInputs, eps: float) -> float:
    # eps' that makes the ensemble's minimum squared separation equal 8 eps
    c2 = 2.0 * inputs.p * (1.0 - inputs.t) / inputs.r**2
    return 8.0 * eps / c2


def _finish(name, raw, inputs, cap, mi_fn):
    dt = inputs.degrees_term
    vacuous = dt <= 0
    value = 0.0 if vacuous else raw
    L = inputs.ensemble_size
    return BoundResult(
        name=name,
        value=value,
        vacuous=vacuous,
        degrees_term=dt,
        L=L,
        precondition_cap=cap,
        mi_upper=mi_fn(inputs, _separation_eps_prime(inputs, value)),
        fano_threshold=0.5 * math.log2(L) - 1.0,
    )


def _cap(inputs: BoundInputs, first: float) -> float:
    p = inputs.p
    return 2.0 * p * (1.0 - inputs.t) / 8.0 * min(first, inputs.r**2 / (4.0 * p))


def thm1_bound(inputs: BoundInputs) -> BoundResult:
    """Risk lower bound for general coefficients with known covariance."""
    inputs._need("sigma_x_norm")
    C1 = (1.0 - inputs.t) * inputs.p / (32.0 * inputs.r**2)
    raw = (C1 * inputs.r**2 * inputs.sigma**2
           / (inputs.N * inputs.p * inputs.sigma_x_norm) * inputs.degrees_term)
    return _finish("thm1", raw, inputs, _cap(inputs, 1.0), mi_upper_general)


def cor1_bound(inputs: BoundInputs) -> BoundResult:
    """Risk lower bound for sparse coefficients, ``||Sigma_x||_2 = (s/p) sigma_a^2``."""
    inputs._need("s", "sigma_a")
    sx = inputs.s / inputs.p * inputs.sigma_a**2
    res = thm1_bound(replace(inputs, sigma_x_norm=sx))
    return replace(res, name="cor1")


def thm2_bound(inputs: BoundInputs) -> BoundResult:
    """Risk lower bound for sparse-Gaussian coefficients with support side information."""
    inputs._need("s", "sigma_a")
    C2 = THM2_CONSTANT * inputs.p * (1.0 - inputs.t) / inputs.r**2
    raw = (C2 * inputs.r**2 * inputs.sigma**4
           / (inputs.N * inputs.s**2 * inputs.sigma_a**4) * inputs.degrees_term)
    return _finish("thm2", raw, inputs, _cap(inputs, 1.0 / inputs.s), mi_upper_sparse_gaussian)


TABLE1_CELLS = (
    ("sparse", "unstructured"),
    ("sparse", "kronecker"),
    ("gaussian_sparse", "unstructured"),
    ("gaussian_sparse", "kronecker"),
)


def table1_scaling(distribution: str, structure: str, m1, m2, p1, p2, N, r, snr) -> float:
    """Order-wise risk scaling for one cell of the unstructured/Kronecker comparison."""
    m, p = m1 * m2, p1 * p2
    dof = m1 * p1 + m2 * p2
    cells = {
        ("sparse", "unstructured"): lambda: r**2 * p / (N * snr),
        ("sparse", "kronecker"): lambda: r**2 * dof / (N * m * snr),
        ("gaussian_sparse", "unstructured"): lambda: r**2 * p / (N * m * snr**2),
        ("gaussian_sparse", "kronecker"): lambda: r**2 * dof / (N * m**2 * snr**2),
    }
    try:
        return cells[(distribution, structure)]()
    except KeyError:
        raise ValueError(f"no table cell for ({distribution!r}, {structure!r})") from None


def crossover_snr(inputs: BoundInputs, lo: float = 1e-12, hi: float = 1e12):
    """SNR at which the sparse and sparse-Gaussian bounds coincide.

    Bisects on ``sigma_a`` (in log space, over ``[lo, hi] * sigma``) with every
    other input fixed.  Returns ``(snr, sigma_a)``; below that SNR the
    sparse-Gaussian bound is the larger one.
    """
    if inputs.degrees_term <= 0:
        raise ValueError("crossover needs non-vacuous bounds")

    def gap(log_sa):
        trial = replace(inputs, sigma_a=math.exp(log_sa))
        return math.log(cor1_bound(trial).value) - math.log(thm2_bound(trial).value)

    a = math.log(lo * inputs.sigma)
    b = math.log(hi * inputs.sigma)
    ga, gb = gap(a), gap(b)
    if ga > 0 or gb < 0:
        raise ValueError("no crossing in the searched sigma_a range")
    while b - a > BISECTION_RTOL:
        mid = 0.5 * (a + b)
        if gap(mid) < 0:
            a = mid
        else:
            b = mid
    sa = math.exp(0.5 * (a + b))
    trial = replace(inputs, sigma_a=sa)
    return trial.snr(), sa


# ----------------------------------------------------------------------- RIP

@dataclass(frozen=True)
class RipReport:
    s: int
    delta: float
    witness: tuple[int, ...]
    supports_checked: int

    def satisfies(self, threshold: float) -> bool:
        return self.delta <= threshold


def rip_constant(D, s: int, budget: int = 2_000_000, batch: int = 4096) -> RipReport:
    """Exact RIP constant of order ``s`` by enumerating every ``s``-column support.

    ``delta_s`` is the largest deviation of a Gram-matrix eigenvalue from 1 over
    all supports.  The witness is the 1-based support attaining it (first in
    lexicographic order on ties).
    """
    D = np.asarray(D, dtype=float)
    p = D.shape[1]
    if not 1 <= s <= p:
        raise ValueError(f"order s={s} must lie in [1, p={p}]")
    total = math.comb(p, s)
    if total > budget:
        raise ValueError(
            f"C({p}, {s}) = {total} supports exceeds the enumeration budget {budget}; "
            "use a smaller s or p"
        )
    G = D.T @ D
    best, witness = -np.inf, None
    combos = itertools.combinations(range(p), s)
    while True:
        chunk = np.array(list(itertools.islice(combos, batch)), dtype=np.intp)
        if chunk.size == 0:
            break
        sub = G[chunk[:, :, None], chunk[:, None, :]]
        w = np.linalg.eigvalsh(sub)
        dev = np.maximum(1.0 - w[:, 0], w[:, -1] - 1.0)
        k = int(np.argmax(dev))
        if dev[k] > best:
            best, witness = float(dev[k]), tuple(int(i) + 1 for i in chunk[k])
    return RipReport(s=s, delta=max(best, 0.0), witness=witness, supports_checked=total)
