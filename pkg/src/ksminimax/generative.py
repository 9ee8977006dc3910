"""Kronecker-structured generative model ``Y = (A kron B) X + noise``."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import linalg
from ._io import read_matrix_csv, write_json, write_matrix_csv

UNIT_NORM_TOL = 1e-10

GENERAL = "general"
SPARSE_UNIFORM = "sparse_uniform"
SPARSE_GAUSSIAN = "sparse_gaussian"
VARIANTS = (GENERAL, SPARSE_UNIFORM, SPARSE_GAUSSIAN)


@dataclass(frozen=True, eq=False)
class KSDictionary:
    """Coordinate dictionaries ``A`` (m1 x p1), ``B`` (m2 x p2) and ``D = kron(A, B)``."""

    A: np.ndarray
    B: np.ndarray
    D: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return self.D.shape[0]

    @property
    def p(self) -> int:
        return self.D.shape[1]

    @property
    def dims(self) -> tuple[int, int, int, int]:
        """``(m1, m2, p1, p2)``."""
        return (self.A.shape[0], self.B.shape[0], self.A.shape[1], self.B.shape[1])

    def atom(self, ja: int, jb: int) -> np.ndarray:
        """Column of ``D`` built from 1-based factor columns ``ja`` and ``jb``."""
        j = linalg.merge_indices([ja], [jb], self.B.shape[1], self.A.shape[1])[0]
        return self.D[:, j - 1]


def build_ks_dictionary(A, B, tol: float = UNIT_NORM_TOL) -> KSDictionary:
    A = np.array(A, dtype=float, ndmin=2)
    B = np.array(B, dtype=float, ndmin=2)
    for name, F in (("A", A), ("B", B)):
        err = np.abs(np.linalg.norm(F, axis=0) - 1.0)
        if err.size and err.max() > tol:
            bad = int(np.argmax(err)) + 1
            raise ValueError(
                f"column {bad} of {name} has norm deviating from 1 by {err.max():.3e}"
            )
    A.setflags(write=False)
    B.setflags(write=False)
    D = linalg.kron(A, B)
    D.setflags(write=False)
    return KSDictionary(A, B, D)


def random_ks_dictionary(m1, m2, p1, p2, rng) -> KSDictionary:
    """Reference dictionary with i.i.d. Gaussian factors, columns normalized."""
    A = linalg.normalize_columns(rng.standard_normal((m1, p1)))
    B = linalg.normalize_columns(rng.standard_normal((m2, p2)))
    return build_ks_dictionary(A, B)


@dataclass(frozen=True, eq=False)
class CoefficientModel:
    """Distribution of the coefficient vectors.

    ``general`` uses a zero-mean Gaussian with covariance ``sigma_x``.  The
    sparse variants draw a uniformly random support of size ``s`` and put
    i.i.d. zero-mean values of variance ``sigma_a**2`` on it: Gaussian for
    ``sparse_gaussian``; for ``sparse_uniform`` the value law is set by
    ``value_dist`` (``"rademacher"`` by default, i.e. ``+-sigma_a``).
    """

    variant: str
    sigma_x: np.ndarray | None = None
    s: int | None = None
    sigma_a: float = 1.0
    value_dist: str = "rademacher"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown coefficient model {self.variant!r}")
        if self.variant == GENERAL:
            if self.sigma_x is None:
                raise ValueError("general model needs sigma_x")
            S = np.array(self.sigma_x, dtype=float, ndmin=2)
            if S.shape[0] != S.shape[1] or not np.allclose(S, S.T, atol=1e-12):
                raise ValueError("sigma_x must be a symmetric square matrix")
            S.setflags(write=False)
            object.__setattr__(self, "sigma_x", S)
        else:
            if self.s is None or self.s < 1:
                raise ValueError("sparse models need s >= 1")
            if self.sigma_a < 0:
                raise ValueError("sigma_a must be nonnegative")
            if self.value_dist not in ("rademacher", "gaussian", "uniform"):
                raise ValueError(f"unknown value_dist {self.value_dist!r}")

    @classmethod
    def general(cls, sigma_x) -> "CoefficientModel":
        return cls(GENERAL, sigma_x=sigma_x)

    @classmethod
    def sparse_uniform(cls, s, sigma_a, value_dist="rademacher") -> "CoefficientModel":
        return cls(SPARSE_UNIFORM, s=int(s), sigma_a=float(sigma_a), value_dist=value_dist)

    @classmethod
    def sparse_gaussian(cls, s, sigma_a) -> "CoefficientModel":
        return cls(SPARSE_GAUSSIAN, s=int(s), sigma_a=float(sigma_a))

    @property
    def is_sparse(self) -> bool:
        return self.variant != GENERAL

    def covariance_spectral_norm(self, p: int) -> float:
        """``||Sigma_x||_2``; the sparse models have ``Sigma_x = (s/p) sigma_a^2 I``."""
        if self.is_sparse:
            return self.s / p * self.sigma_a**2
        return linalg.spectral_norm(self.sigma_x)

    def to_dict(self) -> dict:
        d = {"variant": self.variant}
        if self.is_sparse:
            d.update(s=self.s, sigma_a=self.sigma_a, value_dist=self.value_dist)
        else:
            d["sigma_x"] = self.sigma_x.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CoefficientModel":
        if d["variant"] == GENERAL:
            return cls.general(np.asarray(d["sigma_x"], dtype=float))
        return cls(d["variant"], s=int(d["s"]), sigma_a=float(d["sigma_a"]),
                   value_dist=d.get("value_dist", "rademacher"))


def sample_support(p: int, s: int, rng, size: int | None = None):
    """Uniformly random ``s``-subset of ``[p]``, sorted, 1-based.

    With ``size`` given, returns a ``(size, s)`` array of independent draws.
    """
    if not 1 <= s <= p:
        raise ValueError(f"support size s={s} must lie in [1, p={p}]")
    n = 1 if size is None else size
    # the s smallest of p i.i.d. uniforms sit at a uniformly random s-subset
    keys = rng.random((n, p))
    idx = np.sort(np.argpartition(keys, s - 1, axis=1)[:, :s], axis=1) + 1
    return idx[0] if size is None else idx


def sample_coefficients(model: CoefficientModel, p: int, N: int, rng):
    """Draw ``N`` coefficient vectors as the columns of a ``p x N`` matrix.

    Returns ``(X, supports)``; ``supports`` is an ``(N, s)`` array of 1-based
    indices for sparse models and ``None`` for the general model.
    """
    if model.variant == GENERAL:
        S = model.sigma_x
        if S.shape != (p, p):
            raise ValueError(f"sigma_x is {S.shape}, expected {(p, p)}")
        w, V = np.linalg.eigh(S)
        if w.min() < -1e-10 * max(1.0, abs(w).max()):
            raise ValueError(f"sigma_x is not positive semidefinite (min eigenvalue {w.min():.3e})")
        root = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
        return root @ rng.standard_normal((p, N)), None

    s = model.s
    supports = sample_support(p, s, rng, size=N)
    if model.variant == SPARSE_GAUSSIAN or model.value_dist == "gaussian":
        vals = rng.standard_normal((N, s))
    elif model.value_dist == "rademacher":
        vals = rng.choice(np.array([-1.0, 1.0]), size=(N, s))
    else:
        vals = rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=(N, s))
    X = np.zeros((p, N))
    X[supports - 1, np.arange(N)[:, None]] = model.sigma_a * vals
    return X, supports


@dataclass(frozen=True, eq=False)
class Dataset:
    Y: np.ndarray
    X: np.ndarray
    supports: np.ndarray | None
    sigma: float
    seed: int | None = None


def synthesize(dictionary: KSDictionary, model: CoefficientModel, N: int, sigma: float,
               rng, seed: int | None = None) -> Dataset:
    """Draw ``Y = D X + noise`` with i.i.d. ``N(0, sigma^2)`` noise entries."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    X, supports = sample_coefficients(model, dictionary.p, N, rng)
    Y = dictionary.D @ X
    if sigma > 0:
        Y = Y + sigma * rng.standard_normal(Y.shape)
    return Dataset(Y, X, supports, float(sigma), seed)


def snr(model: CoefficientModel, m: int, sigma: float, dictionary=None) -> float:
    """Signal-to-noise ratio ``E||Dx||^2 / E||n||^2``.

    Sparse models give ``s sigma_a^2 / (m sigma^2)``.  The general model needs
    the dictionary and gives ``tr(D Sigma_x D^T) / (m sigma^2)``.
    """
    if sigma <= 0:
        raise ValueError("snr needs sigma > 0")
    if model.is_sparse:
        return model.s * model.sigma_a**2 / (m * sigma**2)
    if dictionary is None:
        raise ValueError("snr of the general model needs the dictionary")
    D = dictionary.D if isinstance(dictionary, KSDictionary) else np.asarray(dictionary)
    return float(np.trace(D @ model.sigma_x @ D.T)) / (m * sigma**2)


def save_dataset(ds: Dataset, directory, model: CoefficientModel | None = None):
    """Write ``Y.csv``, ``X.csv``, optional ``supports.csv`` and ``manifest.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(directory / "Y.csv", ds.Y, schema="ksminimax.matrix/v1")
    write_matrix_csv(directory / "X.csv", ds.X, schema="ksminimax.matrix/v1")
    if ds.supports is not None:
        write_matrix_csv(directory / "supports.csv", ds.supports, schema="ksminimax.support/v1",
                         integer=True)
    manifest = {
        "schema": "ksminimax.dataset/v1",
        "m": ds.Y.shape[0],
        "p": ds.X.shape[0],
        "N": ds.Y.shape[1],
        "sigma": ds.sigma,
        "seed": ds.seed,
        "model": model.to_dict() if model is not None else None,
        "has_supports": ds.supports is not None,
    }
    write_json(directory / "manifest.json", manifest)


def load_dataset(directory) -> tuple[Dataset, CoefficientModel | None]:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    Y = read_matrix_csv(directory / "Y.csv")
    X = read_matrix_csv(directory / "X.csv")
    if Y.shape != (manifest["m"], manifest["N"]) or X.shape != (manifest["p"], manifest["N"]):
        raise ValueError("dataset matrices disagree with manifest dimensions")
    supports = None
    if manifest["has_supports"]:
        supports = read_matrix_csv(directory / "supports.csv").astype(np.int64)
    model = CoefficientModel.from_dict(manifest["model"]) if manifest["model"] else None
    return Dataset(Y, X, supports, manifest["sigma"], manifest["seed"]), model
