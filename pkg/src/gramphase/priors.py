"""Prior projectors: linear subspace, sparsity, and known support.

Each prior is a set in ambient coordinates together with a Euclidean
nearest-point map.  The projectors are idempotent; any object with a
compatible ``project`` contract (idempotent, distance non-increasing to
its set) can stand in for these in the solver, which only ever calls
:func:`project_prior`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocks import DimensionMismatch, RepresentationStructure

__all__ = [
    "LinearSubspacePrior",
    "SparsityPrior",
    "SupportPrior",
    "PriorSpec",
    "RankDeficiencyError",
    "project_prior",
    "random_subspace_prior",
]

ORTHONORMAL_TOL = 1e-10


class RankDeficiencyError(RuntimeError):
    """A basis that should be full rank numerically is not."""


def _check_orthonormal(b: np.ndarray, what: str) -> None:
    gram = b.conj().T @ b
    err = np.max(np.abs(gram - np.eye(b.shape[1])))
    if err > ORTHONORMAL_TOL:
        raise ValueError(
            f"{what} must have orthonormal columns (max |B*B - I| = {err:.3e}); "
            "orthonormalize it first, e.g. with numpy.linalg.qr"
        )


@dataclass(frozen=True, eq=False)
class LinearSubspacePrior:
    """Signal lies in the column span of ``basis`` (orthonormal columns)."""

    basis: np.ndarray  # (ambient_dim, m)

    def __post_init__(self):
        b = np.asarray(self.basis)
        if b.ndim != 2 or not 1 <= b.shape[1] <= b.shape[0]:
            raise ValueError(f"basis must be (dim, m) with 1 <= m <= dim, got {b.shape}")
        _check_orthonormal(b, "subspace basis")
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True, eq=False)
class SparsityPrior:
    """At most ``k`` nonzero entries, optionally in an orthonormal dictionary.

    Exact nearest-point projection under a general overcomplete
    dictionary is NP-hard, so only orthonormal dictionaries (where hard
    thresholding of the coefficients is exact) are accepted.
    """

    k: int
    dictionary: np.ndarray | None = None  # (ambient_dim, d)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"sparsity level must be >= 1, got {self.k}")
        if self.dictionary is not None:
            d = np.asarray(self.dictionary)
            if d.ndim != 2:
                raise ValueError("dictionary must be a 2-d matrix")
            if self.k > d.shape[1]:
                raise ValueError(
                    f"sparsity level {self.k} exceeds dictionary size {d.shape[1]}"
                )
            _check_orthonormal(d, "sparsity dictionary")
            object.__setattr__(self, "dictionary", d)


@dataclass(frozen=True, eq=False)
class SupportPrior:
    """Signal vanishes outside a fixed coordinate mask."""

    mask: np.ndarray  # boolean, ambient length

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.ndim != 1:
            raise ValueError("support mask must be a 1-d boolean vector")
        if not m.any():
            raise ValueError("support mask must have at least one true entry")
        object.__setattr__(self, "mask", m)


PriorSpec = LinearSubspacePrior | SparsityPrior | SupportPrior


def _hard_threshold(v: np.ndarray, k: int) -> np.ndarray:
    if k >= v.shape[0]:
        return v.copy()
    # stable sort on descending magnitude: ties keep the lowest index
    order = np.argsort(-np.abs(v), kind="stable")
    out = np.zeros_like(v)
    keep = order[:k]
    out[keep] = v[keep]
    return out


def project_prior(v: np.ndarray, prior: PriorSpec) -> np.ndarray:
    """Euclidean nearest point of the prior set (idempotent)."""
    v = np.asarray(v)
    if isinstance(prior, LinearSubspacePrior):
        b = prior.basis
        if v.shape[0] != b.shape[0]:
            raise DimensionMismatch(
                f"vector length {v.shape[0]} vs basis rows {b.shape[0]}"
            )
        return b @ (b.conj().T @ v)
    if isinstance(prior, SupportPrior):
        if v.shape[0] != prior.mask.shape[0]:
            raise DimensionMismatch(
                f"vector length {v.shape[0]} vs mask length {prior.mask.shape[0]}"
            )
        return np.where(prior.mask, v, 0.0 * v)
    if isinstance(prior, SparsityPrior):
        if prior.dictionary is None:
            if prior.k > v.shape[0]:
                raise DimensionMismatch(
                    f"sparsity level {prior.k} exceeds vector length {v.shape[0]}"
                )
            return _hard_threshold(v, prior.k)
        d = prior.dictionary
        if v.shape[0] != d.shape[0]:
            raise DimensionMismatch(
                f"vector length {v.shape[0]} vs dictionary rows {d.shape[0]}"
            )
        return d @ _hard_threshold(d.conj().T @ v, prior.k)
    raise TypeError(f"unknown prior type {type(prior).__name__}")


def random_subspace_prior(
    structure: RepresentationStructure, m: int, rng: np.random.Generator
) -> LinearSubspacePrior:
    """Orthonormalized Gaussian random subspace of dimension ``m``.

    A Gaussian basis is full rank with probability one; a numerically
    rank-deficient draw signals RNG misuse and raises.
    """
    dim = structure.ambient_dim
    if not 1 <= m <= dim:
        raise ValueError(f"subspace dimension must be in [1, {dim}], got {m}")
    a = rng.standard_normal((dim, m))
    if structure.field == "complex":
        a = a + 1j * rng.standard_normal((dim, m))
    q, r = np.linalg.qr(a)
    diag = np.abs(np.diagonal(r))
    if diag.min() < 1e-10 * max(diag.max(), 1.0):
        raise RankDeficiencyError(
            "random basis is numerically rank deficient; check the RNG"
        )
    return LinearSubspacePrior(q)
