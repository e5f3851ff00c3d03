"""Projection-based recovery of a signal from its Gram tuple.

Two projectors drive everything.  The prior projector maps onto the
signal model (see :mod:`gramphase.priors`).  The measurement projector
maps a block matrix onto the set of matrices with a prescribed Gram
matrix by solving an orthogonal Procrustes problem per block: with
``S`` the PSD square root of ``G``, the nearest ``Y`` with
``Y* Y = G`` is ``U V* S`` where ``U diag(s) V*`` is the thin SVD of
``Xtilde S``.

Alternating projection composes measurement after prior; a relaxed
reflect-and-average variant with step ``beta`` is available for
problems where plain alternation stagnates.  Both iterate in ambient
coordinates.  Convergence for these non-convex constraint sets is not
guaranteed and the residual may oscillate; the solver simply reports
whether the stopping criterion was met.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocks import (
    BlockSignal,
    RepresentationStructure,
    StructureMismatch,
    decompose,
    random_signal,
    reconstruct,
)
from .moments import GramTuple
from .priors import PriorSpec, project_prior

__all__ = [
    "SolverConfig",
    "SolveReport",
    "matrix_sqrt_psd",
    "procrustes_project",
    "rho",
    "solve",
]

HERMITIAN_INPUT_TOL = 1e-8


@dataclass(frozen=True)
class SolverConfig:
    """Algorithm choice and stopping rule.

    ``stop_on="residual"`` uses the blind normalized measurement
    residual of the prior-projected iterate; ``stop_on="oracle"``
    stops on the sign-invariant distance to a supplied ground truth
    (for benchmarking only, since a deployed solver has no truth).
    """

    algorithm: str = "alternating_projection"  # or "rrr"
    beta: float = 0.5
    max_iters: int = 1000
    tol: float = 1e-6
    seed: int | None = None
    track_trajectory: bool = False
    stop_on: str = "residual"  # or "oracle"

    def __post_init__(self):
        if self.algorithm not in ("alternating_projection", "rrr"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.algorithm == "rrr" and not 0.0 < self.beta <= 1.0:
            raise ValueError(f"rrr needs 0 < beta <= 1, got {self.beta}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.stop_on not in ("residual", "oracle"):
            raise ValueError(f"unknown stopping rule {self.stop_on!r}")


@dataclass
class SolveReport:
    estimate: BlockSignal
    iterations_used: int
    converged: bool
    residual_final: float
    residual_trajectory: list[float] | None = None
    oracle_error: float | None = None

    def to_row(self) -> dict:
        """Flat summary for CSV export."""
        return {
            "iterations": self.iterations_used,
            "converged": int(self.converged),
            "residual": self.residual_final,
            "oracle_error": "" if self.oracle_error is None else self.oracle_error,
        }


def matrix_sqrt_psd(g: np.ndarray) -> np.ndarray:
    """Unique Hermitian PSD square root via eigendecomposition.

    Eigenvalues pushed slightly negative by noise are clamped to zero;
    genuinely non-Hermitian input is rejected.
    """
    g = np.asarray(g)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {g.shape}")
    scale = max(1.0, float(np.max(np.abs(g))))
    if np.max(np.abs(g - g.conj().T)) > HERMITIAN_INPUT_TOL * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    w, v = np.linalg.eigh((g + g.conj().T) / 2.0)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def _fix_svd_signs(u: np.ndarray, vh: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pin the SVD sign/phase freedom: first nonzero entry of every right
    singular vector made positive real, for run-to-run reproducibility."""
    big = np.abs(vh) > 1e-12
    has = big.any(axis=1)
    pivots = vh[np.arange(vh.shape[0]), np.where(has, big.argmax(axis=1), 0)]
    safe = np.where(pivots == 0, 1.0, pivots)
    phases = np.where(has, safe / np.abs(safe), 1.0)
    return u * phases[None, :], vh * np.conj(phases)[:, None]


def _procrustes_from_sqrt(sqrt_g: np.ndarray, xtilde: np.ndarray) -> np.ndarray:
    m = xtilde @ sqrt_g
    u, _, vh = np.linalg.svd(m, full_matrices=False)
    u, vh = _fix_svd_signs(u, vh)
    return (u @ vh) @ sqrt_g


def procrustes_project(g: np.ndarray, xtilde: np.ndarray) -> np.ndarray:
    """Nearest matrix to ``xtilde`` with Gram matrix exactly ``g``.

    Requires a tall or square block (rows >= columns).  The constraint
    ``Y* Y = g`` holds to machine precision even for rank-deficient
    ``g``; optimality is exact whenever ``xtilde @ sqrt(g)`` has full
    rank (otherwise the SVD's null-space convention picks one minimizer
    deterministically).
    """
    g = np.asarray(g)
    xtilde = np.asarray(xtilde)
    if xtilde.ndim != 2:
        raise ValueError(f"expected a block matrix, got shape {xtilde.shape}")
    n, r = xtilde.shape
    if n < r:
        raise ValueError(
            f"wide blocks are not supported: got shape ({n}, {r}) with rows < columns"
        )
    if g.shape != (r, r):
        raise ValueError(f"Gram must be ({r}, {r}) for this block, got {g.shape}")
    return _procrustes_from_sqrt(matrix_sqrt_psd(g), xtilde)


def rho(x: BlockSignal, y: BlockSignal) -> float:
    """Sign-invariant pseudo-metric: ``min(||x - y||, ||x + y||)`` over the
    concatenated blocks.  Zero iff ``y == x`` or ``y == -x``."""
    if x.structure != y.structure:
        raise StructureMismatch("signals live on different structures")
    minus = 0.0
    plus = 0.0
    for a, b in zip(x.matrices, y.matrices):
        minus += np.linalg.norm(a - b) ** 2
        plus += np.linalg.norm(a + b) ** 2
    return float(np.sqrt(min(minus, plus)))


def _ambient_rho(u: np.ndarray, w: np.ndarray) -> float:
    return float(min(np.linalg.norm(u - w), np.linalg.norm(u + w)))


def solve(
    measured: GramTuple,
    prior: PriorSpec,
    config: SolverConfig,
    init: BlockSignal | None = None,
    truth: BlockSignal | None = None,
) -> SolveReport:
    """Recover a signal whose Gram tuple matches ``measured`` under ``prior``.

    Iterates measurement-after-prior from ``init`` (default: a random
    signal drawn with ``config.seed``).  The reported estimate is the
    prior projection of the final iterate, so it satisfies the prior
    exactly; its residual is the normalized Gram mismatch.  When
    ``truth`` is given the report carries the sign-resolved relative
    error ``rho(estimate, truth) / ||truth||``.
    """
    s = measured.structure
    if init is not None and init.structure != s:
        raise StructureMismatch("init uses a different structure than the measurement")
    if truth is not None and truth.structure != s:
        raise StructureMismatch("truth uses a different structure than the measurement")
    if config.stop_on == "oracle" and truth is None:
        raise ValueError("stop_on='oracle' requires a ground-truth signal")
    for (n, r) in s.blocks:
        if n < r:
            raise ValueError(
                f"wide block ({n}, {r}): the measurement projector needs rows >= columns"
            )

    sqrt_grams = [matrix_sqrt_psd(g) for g in measured.grams]
    gram_norm = measured.total_norm()
    gram_scale = gram_norm if gram_norm > 0 else 1.0
    truth_amb = None
    truth_scale = 1.0
    if truth is not None:
        truth_amb = reconstruct(truth)
        tn = float(np.linalg.norm(truth_amb))
        truth_scale = tn if tn > 0 else 1.0

    slices = s.block_slices
    shapes = s.blocks

    def measurement_residual(p: np.ndarray) -> float:
        acc = 0.0
        for (n, r), sl, g in zip(shapes, slices, measured.grams):
            xl = p[sl].reshape((n, r), order="F")
            acc += np.linalg.norm(xl.conj().T @ xl - g) ** 2
        return float(np.sqrt(acc)) / gram_scale

    def project_measurement(p: np.ndarray) -> np.ndarray:
        out = np.empty_like(p)
        for (n, r), sl, sq in zip(shapes, slices, sqrt_grams):
            xl = p[sl].reshape((n, r), order="F")
            out[sl] = _procrustes_from_sqrt(sq, xl).flatten(order="F")
        return out

    if init is None:
        rng = np.random.default_rng(config.seed)
        v = reconstruct(random_signal(s, rng))
    else:
        v = reconstruct(init)

    trajectory: list[float] = []
    converged = False
    iterations = 0
    p = v
    residual = np.inf

    for k in range(config.max_iters + 1):
        if not np.all(np.isfinite(v)):
            raise FloatingPointError(
                f"iterate became non-finite entering iteration {k}; "
                "check the measurement and prior for scale problems"
            )
        p = project_prior(v, prior)
        residual = measurement_residual(p)
        if config.track_trajectory:
            trajectory.append(residual)
        if config.stop_on == "oracle":
            crit = _ambient_rho(p, truth_amb) / truth_scale
        else:
            crit = residual
        if crit < config.tol:
            converged = True
            iterations = k
            break
        if k == config.max_iters:
            iterations = config.max_iters
            break
        if config.algorithm == "alternating_projection":
            v = project_measurement(p)
        else:
            # relaxed reflect-and-average step
            reflected = project_measurement(2.0 * p - v)
            v = v + config.beta * (reflected - p)

    estimate = decompose(p, s)
    oracle_error = None
    if truth_amb is not None:
        oracle_error = _ambient_rho(p, truth_amb) / truth_scale
    return SolveReport(
        estimate=estimate,
        iterations_used=iterations,
        converged=converged,
        residual_final=residual,
        residual_trajectory=trajectory if config.track_trajectory else None,
        oracle_error=oracle_error,
    )
